import math

import numpy as np
import pytest

from frachill import harness
from frachill.spectral import ConfigurationError
from frachill.stepper import SimState

from conftest import small_config


def zero_state(prob, phi=0.0):
    z = np.zeros(prob.grid.shape)
    return SimState(0, z, z + phi, z)


def test_energy_examples():
    prob = small_config(lam=1e-6).build()
    vol = prob.grid.volume
    assert harness.energy(zero_state(prob), prob) == pytest.approx(vol / 4, rel=1e-14)
    assert abs(harness.energy(zero_state(prob, 1.0), prob)) <= 10 * prob.cfg.lam * vol
    assert abs(harness.energy(zero_state(prob, -1.0), prob)) <= 10 * prob.cfg.lam * vol
    mu = np.cos(prob.grid.coordinates()[0])
    z = np.zeros_like(mu)
    e1 = harness.energy(SimState(0, mu, z, z), prob) - vol / 4
    e2 = harness.energy(SimState(0, 2 * mu, z, z), prob) - vol / 4
    assert e2 == pytest.approx(4 * e1, rel=1e-13)


def test_energy_ledger_passes_and_corruption_fails():
    prob = small_config(n_steps=30, init_phi="random:11:0.5", alpha=1e-2).build()
    tr = prob.run()
    ledger, line = harness.check_energy_inequality(tr, prob)
    assert ledger.passed and line.status == "pass"
    assert ledger.excess < 0
    assert set(ledger.dissipation) == set(harness.DISSIPATION_TERMS)
    bad = tr.phi.copy()
    bad[12] *= 1.1
    tr.phi = bad
    ledger, line = harness.check_energy_inequality(tr, prob)
    assert ledger.first_violation == 12
    assert line.status.startswith("fail")


def test_energy_strict_for_linear_heat():
    prob = small_config(potential="none", P_kind="constant", P_p0=0.0, init_mu="cosine:1:1",
                        n_steps=20).build()
    ledger = harness.energy_ledger(prob.run(), prob)
    # quadratic energy: the discrete balance holds with equality, dissipation is positive
    assert ledger.passed
    assert np.all(np.diff(ledger.energies) < 0)
    np.testing.assert_allclose(ledger.lhs, ledger.energies[0], rtol=1e-12)


def test_mass_results():
    prob = small_config(init_phi="constant:0.2", init_mu="constant:0.1").build()
    res = harness.check_mass_conservation(prob.run(), prob)
    assert res.drift <= 1e-15 and res.passed
    prob = small_config(bc_A="dirichlet").build()
    res = harness.check_mass_conservation(prob.run(), prob)
    assert res.status == "skipped: no constant eigenfunction" and res.passed


def test_complementarity_variants():
    prob = small_config(potential="none", P_kind="constant", P_p0=0.0).build()
    comp = harness.check_complementarity(prob.run(), prob)
    assert comp.norms["xi"] <= 1e-9 and comp.passed
    prob = small_config(potential="obstacle", init_phi="cosine:2:0.3", lam=1e-2).build()
    comp = harness.check_complementarity(prob.run(), prob)
    assert comp.passed and comp.norms["interior"] <= comp.tol
    assert comp.delta == pytest.approx(0.1) and comp.norms["infeasibility"] == 0.0
    prob = small_config().build()
    tr = prob.run()
    comp = harness.check_complementarity(tr, prob)
    assert comp.norms["yosida_mismatch"] <= 1e-8 and comp.passed
    xi = harness.selection_xi(tr, prob)
    np.testing.assert_allclose(xi, prob.potential.yosida_f1(tr.phi[1:], prob.scheme().yosida),
                               atol=1e-7)


def test_regularity_gate_and_constant_data():
    prob = small_config(potential="log", init_phi="constant:1").build()
    with pytest.raises(ConfigurationError):
        harness.regularity_gate(prob)
    c = 0.2
    prob = small_config(init_phi=f"constant:{c}", n_steps=4).build()
    mu0 = float(prob.potential.yosida_f(c, prob.scheme().yosida))
    g = prob.grid
    prob = prob.with_initial(SimState(0, np.full(g.shape, mu0), prob.initial.phi, np.full(g.shape, mu0)))
    res = harness.check_regularity(prob, halvings=2)
    assert max(res.dt_phi_max) <= 1e-8


def test_contraction_probe_is_below_one_and_tight():
    prob = small_config(alpha=1e-3).build()
    probe = harness.probe_contraction(prob, pairs=5)
    assert np.all(probe.ratios < 1) and probe.spread <= 2
    assert probe.K_hat == pytest.approx(probe.ratios.max() / prob.cfg.h)
    zero = harness.probe_contraction(small_config(P_kind="constant", P_p0=0.0).build(), pairs=3)
    assert np.all(zero.ratios == 0.0)


def test_dependence_probe_linear_response():
    prob = small_config(n_steps=8).build()
    res = harness.probe_continuous_dependence(prob, targets=("u_mu", "s0"))
    assert res.passed
    s0 = [r.lhs for r in res.rows if r.target == "s0"]
    assert 0 < s0[1] < s0[0]
    none = harness.probe_continuous_dependence(prob, eps=(0.0,), targets=("u_phi",))
    assert none.rows[0].lhs == 0.0


def test_smooth_random_field_unit_norm():
    prob = small_config().build()
    v = harness.smooth_random_field(prob, 3)
    assert prob.grid.norm(v) == pytest.approx(1.0)
    assert not np.array_equal(v, harness.smooth_random_field(prob, 4))


def test_linear_reference_solves_the_ode():
    prob = small_config(potential="none", P_kind="constant", P_p0=0.0, init_mu="cosine:1:1",
                        init_s="cosine:2:1", alpha=0.5).build()
    cfg, ops = prob.cfg, prob.ops
    t, dt = 0.3, 1e-5
    mu, phi, s = harness.linear_modal_reference(prob, [0.0, t - dt, t, t + dt])
    np.testing.assert_allclose(mu[0], prob.initial.mu, atol=1e-14)
    dmu, dphi, ds = [(x[3] - x[1]) / (2 * dt) for x in (mu, phi, s)]
    A = lambda v: ops.A.apply_fractional(2 * cfg.rho, v)
    B = lambda v: ops.B.apply_fractional(2 * cfg.sigma, v)
    C = lambda v: ops.C.apply_fractional(2 * cfg.tau, v)
    scale = 1 + np.abs(dmu).max()
    assert np.abs(cfg.alpha * dmu + dphi + A(mu[2])).max() <= 1e-6 * scale
    assert np.abs(cfg.beta * dphi + B(phi[2]) - mu[2]).max() <= 1e-6 * scale
    assert np.abs(ds + C(s[2])).max() <= 1e-6 * scale


def test_studies_on_small_problem():
    prob = small_config(n_steps=8).build()
    res = harness.study_h(prob, levels=3)
    assert res.decreasing() and res.levels == 3
    same = harness.study_lambda(prob, lams=(1e-3, 1e-3))
    assert all(d[0] == 0.0 for d in same.diffs.values())


def test_helpers():
    assert harness.nonincreasing_within([1.0, 1.05, 0.5])
    assert not harness.nonincreasing_within([1.0, 1.2])
    mk = lambda inf, gap: harness.ComplementarityResult("obstacle", 0.1, 1.0, 1.0,
                                                        {"infeasibility": inf, "gap": gap})
    assert harness.violations_shrink([mk(2, 2), mk(1, 1)])
    assert not harness.violations_shrink([mk(2, 2), mk(1, 3)])
    line = harness.CheckLine("x", np.float64(0.5), 1, "pass")
    assert line.csv() == "x,0.5,1.0,pass"
    assert math.isinf(harness.RegularityResult.variation([0.0, 1.0]))
