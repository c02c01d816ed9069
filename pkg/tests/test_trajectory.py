import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from frachill.trajectory import Trajectory, interpolant_norms, l2_time_distance


def make(seed, N=6, n=5, h=0.1):
    r = np.random.default_rng(seed)
    z = r.standard_normal((N + 1, n))
    return Trajectory(h, z, z.copy(), z.copy())


def inner(u, v):
    return float(np.dot(u, v))


def integral(fn, T, N):
    # piecewise integrand: integrate interval by interval
    return sum(quad(fn, k * T / N, (k + 1) * T / N, epsabs=1e-13, epsrel=1e-12)[0] for k in range(N))


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), N=st.integers(1, 8))
def test_norm_identities_match_quadrature(seed, N):
    tr = make(seed, N)
    z, h, T = tr.mu, tr.h, tr.T
    q = interpolant_norms(z, h, inner)
    sq = lambda kind: (lambda t: float(np.sum(tr.evaluate(kind, "mu", t) ** 2)))
    assert q["bar_L2sq"] == pytest.approx(integral(sq("bar"), T, N), rel=1e-9)
    assert q["underline_L2sq"] == pytest.approx(integral(sq("underline"), T, N), rel=1e-9)
    assert q["hat_L2sq"] == pytest.approx(integral(sq("hat"), T, N), rel=1e-9)
    diff = lambda t: float(np.sum((tr.bar("mu", t) - tr.hat("mu", t)) ** 2))
    assert q["bar_minus_hat_L2sq"] == pytest.approx(integral(diff, T, N), rel=1e-9, abs=1e-14)
    # |bar - hat|^2 integrates to one third of |bar - underline|^2
    assert q["bar_minus_hat_L2sq"] == pytest.approx(q["bar_minus_underline_L2sq"] / 3, rel=1e-12)
    assert q["dt_hat_L2sq"] == pytest.approx(q["bar_minus_underline_L2sq"] / h ** 2, rel=1e-12)
    assert q["hat_Linf"] >= max(q["bar_Linf"], q["underline_Linf"]) - 1e-12


def test_interpolants_at_nodes_and_inside():
    tr = make(0)
    for n in range(1, tr.n_steps + 1):
        t = n * tr.h
        assert np.array_equal(tr.hat("phi", t), tr.phi[n])
        assert np.array_equal(tr.bar("phi", t), tr.phi[n])
        assert np.array_equal(tr.underline("phi", t), tr.phi[n - 1])
    t = 2.25 * tr.h
    np.testing.assert_allclose(tr.hat("s", t), 0.75 * tr.s[2] + 0.25 * tr.s[3])
    np.testing.assert_array_equal(tr.bar("s", t), tr.s[3])
    assert np.array_equal(tr.hat("mu", 0.0), tr.mu[0])
    with pytest.raises(ValueError):
        tr.hat("mu", tr.T + 1.0)
    with pytest.raises(ValueError):
        tr.evaluate("spline", "mu", 0.1)


def test_l2_time_distance_against_quadrature():
    coarse, fine = make(1, N=4, h=0.2), make(2, N=8, h=0.1)
    d = l2_time_distance(coarse.mu, 0.2, fine.mu, 0.1, inner)
    ref = integral(lambda t: float(np.sum((coarse.hat("mu", t) - fine.hat("mu", t)) ** 2)), 0.8, 8)
    assert d == pytest.approx(math.sqrt(ref), rel=1e-10)
    assert l2_time_distance(coarse.mu, 0.2, coarse.mu, 0.2, inner) == 0.0
    with pytest.raises(ValueError):
        l2_time_distance(coarse.mu, 0.2, fine.mu, 0.07, inner)
    with pytest.raises(ValueError):
        l2_time_distance(coarse.mu, 0.2, fine.mu[:5], 0.1, inner)
