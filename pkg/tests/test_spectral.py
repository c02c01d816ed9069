import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from frachill.spectral import ConfigurationError, GridSpec, SpectralOperator

from conftest import relerr

GRIDS = [GridSpec((2 * math.pi,), (64,)), GridSpec((1.0, 2.0), (16, 12))]


@pytest.mark.parametrize("bc", ["neumann", "dirichlet"])
@pytest.mark.parametrize("grid", GRIDS, ids=["1d", "2d"])
def test_eigenvalues_are_exact_continuous_ones(grid, bc):
    op = SpectralOperator(grid, bc)
    off = 0 if bc == "neumann" else 1
    idx = tuple(2 for _ in grid.points)
    expect = sum(((2 + off) * math.pi / L) ** 2 for L in grid.extents)
    assert op.eigenvalues[idx] == pytest.approx(expect, rel=1e-14)


def test_neumann_constant_mode_has_zero_symbol():
    op = SpectralOperator(GRIDS[0], "neumann")
    assert op.symbol(0.5).flat[0] == 0.0
    np.testing.assert_allclose(op.apply_fractional(0.7, np.full(64, 3.0)), 0.0, atol=1e-12)


@pytest.mark.parametrize("bc", ["neumann", "dirichlet"])
def test_eigenfunction_is_sampled_cosine_or_sine(bc):
    g = GRIDS[0]
    op = SpectralOperator(g, bc)
    (x,) = g.coordinates()
    k = 3
    v = op.eigenfunction((k,))
    shape = np.cos(k * x / 2) if bc == "neumann" else np.sin((k + 1) * x / 2)
    ref = shape / g.norm(shape)
    assert relerr(np.sign(v[0]) * v, np.sign(ref[0]) * ref) < 1e-12
    np.testing.assert_allclose(op.apply_fractional(1.0, v), op.eigenvalues[k] * v, atol=1e-10)


def test_fractional_power_one_matches_finite_difference_laplacian_on_smooth_mode():
    g = GridSpec((math.pi,), (256,))
    op = SpectralOperator(g)
    (x,) = g.coordinates()
    np.testing.assert_allclose(op.apply_fractional(1.0, np.cos(2 * x)), 4 * np.cos(2 * x), atol=1e-10)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), e1=st.floats(0.1, 1.5), e2=st.floats(0.1, 1.5),
       bc=st.sampled_from(["neumann", "dirichlet"]), which=st.sampled_from([0, 1]))
def test_semigroup_selfadjoint_parseval(seed, e1, e2, bc, which):
    g = GRIDS[which]
    op = SpectralOperator(g, bc)
    r = np.random.default_rng(seed)
    u, v = r.standard_normal(g.shape), r.standard_normal(g.shape)
    assert relerr(op.from_modes(op.to_modes(u)), u) < 1e-12
    assert abs(np.sum(op.to_modes(u) ** 2) - g.inner(u, u)) <= 1e-12 * g.inner(u, u)
    lhs = op.apply_fractional(e1, op.apply_fractional(e2, u))
    assert relerr(lhs, op.apply_fractional(e1 + e2, u)) < 1e-10
    a = g.inner(op.apply_fractional(e1, u), v)
    b = g.inner(u, op.apply_fractional(e1, v))
    assert abs(a - b) <= 1e-10 * max(abs(a), g.norm(op.apply_fractional(e1, u)) * g.norm(v))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), e=st.floats(0.1, 1.0), a=st.floats(1e-3, 1e3))
def test_solve_shifted_inverts_and_norms_are_ordered(seed, e, a):
    g = GRIDS[0]
    op = SpectralOperator(g)
    u = np.random.default_rng(seed).standard_normal(g.shape)
    v = op.solve_shifted(e, a, u)
    assert relerr(a * v + op.apply_fractional(e, v), u) < 1e-10
    assert op.dual_norm(e, u) <= g.norm(u) * (1 + 1e-12) <= op.graph_norm(e, u) * (1 + 1e-12)
    assert op.graph_norm(e, u) ** 2 == pytest.approx(g.norm(u) ** 2 + op.power_norm(e, u) ** 2, rel=1e-10)


def test_truncate_removes_high_modes_only():
    g = GRIDS[0]
    op = SpectralOperator(g)
    low, high = op.eigenfunction((3,)), op.eigenfunction((60,))
    np.testing.assert_allclose(op.truncate(low + high), low, atol=1e-12)


def test_sorted_modes_and_basis_identity():
    op = SpectralOperator(GRIDS[1])
    ev = op.sorted_eigenvalues
    assert np.all(np.diff(ev) >= 0)
    assert op.mode_index(0) == (0, 0)
    assert op.same_basis(SpectralOperator(GRIDS[1]))
    assert not op.same_basis(SpectralOperator(GRIDS[1], "dirichlet"))


@pytest.mark.parametrize("kwargs", [dict(extents=(1.0, 1.0, 1.0), points=(4, 4, 4)),
                                    dict(extents=(-1.0,), points=(8,)),
                                    dict(extents=(1.0,), points=(1,))])
def test_bad_grids_raise(kwargs):
    with pytest.raises(ConfigurationError):
        GridSpec(**kwargs)


def test_bad_bc_and_shape_raise():
    with pytest.raises(ConfigurationError):
        SpectralOperator(GRIDS[0], "robin")
    with pytest.raises(ConfigurationError):
        SpectralOperator(GRIDS[0]).to_modes(np.zeros(10))
    with pytest.raises(ValueError):
        SpectralOperator(GRIDS[0]).symbol(0.0)


def test_thread_pin_does_not_change_results(monkeypatch):
    op = SpectralOperator(GRIDS[1])
    u = np.random.default_rng(1).standard_normal(GRIDS[1].shape)
    monkeypatch.setenv("FRACHILL_THREADS", "1")
    a = op.apply_fractional(0.6, u)
    monkeypatch.setenv("FRACHILL_THREADS", "4")
    b = op.apply_fractional(0.6, u)
    assert np.array_equal(a, b)
