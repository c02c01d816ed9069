import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from frachill import harness
from frachill.spectral import ConfigurationError
from frachill.stepper import Forcing, SimConfig, SimState, StepFailure

from conftest import relerr, small_config


def test_Ah_symmetric_and_inverse_bound(small_problem):
    sch = small_problem.scheme()
    g, cfg = sch.grid, sch.cfg
    phi_n = small_problem.initial.phi
    r = np.random.default_rng(0)
    for _ in range(20):
        u, v = r.standard_normal(g.shape), r.standard_normal(g.shape)
        a, b = g.inner(sch.apply_Ah(phi_n, u), v), g.inner(u, sch.apply_Ah(phi_n, v))
        assert abs(a - b) <= 1e-12 * abs(a) + 1e-12
        x = sch.solve_Ah(phi_n, u)
        assert relerr(sch.apply_Ah(phi_n, x), u) <= 10 * cfg.tol_cg
        assert g.norm(x) <= cfg.h / cfg.alpha * g.norm(u) * (1 + 10 * cfg.tol_cg)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1))
def test_nutrient_map_is_Lipschitz_with_h_supP(seed):
    prob = small_config().build()
    sch = prob.scheme()
    g, st0 = sch.grid, prob.initial
    r = np.random.default_rng(seed)
    m1, m2 = r.standard_normal(g.shape), r.standard_normal(g.shape)
    d = g.norm(sch.phi3_solve(st0.phi, st0.s, m1) - sch.phi3_solve(st0.phi, st0.s, m2))
    assert d <= sch.cfg.h * prob.prolif.sup * g.norm(m1 - m2) * (1 + 1e-8)


def test_constant_equilibrium_is_preserved():
    c = 0.3
    prob = small_config(init_phi=f"constant:{c}", init_mu="constant:0", init_s="constant:0",
                        n_steps=5).build()
    sch = prob.scheme()
    mu0 = float(prob.potential.yosida_f(c, sch.yosida))
    init = SimState(0, np.full(sch.grid.shape, mu0), prob.initial.phi, np.full(sch.grid.shape, mu0))
    tr = sch.run(init)
    for f, v in (("mu", mu0), ("phi", c), ("s", mu0)):
        np.testing.assert_allclose(tr.field(f)[-1], v, atol=1e-10)


def test_zero_proliferation_gives_ratio_exactly_zero():
    tr = small_config(P_kind="constant", P_p0=0.0).build().run()
    assert all(r.outer_ratio == 0.0 and r.outer_iters == 1 for r in tr.reports)


def test_accepted_steps_have_small_residuals(small_problem):
    tr = small_problem.run()
    budget = harness.solver_budget(small_problem)
    for rep in tr.reports:
        assert max(rep.residual_mu, rep.residual_phi, rep.residual_s) <= 10 * budget
        assert 0 <= rep.outer_ratio < 1
        assert rep.K_hat == pytest.approx(rep.outer_ratio / small_problem.cfg.h)


@pytest.mark.parametrize("variant,init", [("log", "cosine:2:0.9"), ("obstacle", "cosine:2:0.99"),
                                          ("none", "cosine:1:0.5")])
def test_other_potentials_step(variant, init):
    prob = small_config(potential=variant, init_phi=init, lam=1e-2).build()
    tr = prob.run()
    assert np.all(np.isfinite(tr.phi))
    assert max(r.residual_phi for r in tr.reports) <= 10 * harness.solver_budget(prob)


def test_obstacle_overshoot_is_lambda_times_selection():
    prob = small_config(potential="obstacle", c2=2.0, alpha=1e-2, init_phi="cosine:2:0.95",
                        lam=0.05, n_steps=40).build()
    tr = prob.run()
    over = np.maximum(np.abs(tr.phi[1:]) - 1.0, 0.0)
    assert over.max() > 0
    xi = harness.selection_xi(tr, prob)
    np.testing.assert_allclose(over, prob.cfg.lam * np.where(over > 0, np.abs(xi), 0.0), atol=1e-8)


def test_linear_problem_matches_modal_recursion():
    prob = small_config(potential="none", P_kind="constant", P_p0=0.0, h=1e-2, n_steps=20,
                        init_mu="cosine:1:1", init_s="cosine:3:1", alpha=0.5).build()
    tr = prob.run()
    ref = harness.linear_modal_recursion(prob)
    for f, r in zip(("mu", "phi", "s"), ref):
        assert relerr(tr.field(f), r) <= 1e-9


def test_mass_is_conserved_per_step(small_problem):
    tr = small_problem.run()
    a = small_problem.cfg.alpha
    m = [np.mean(a * tr.mu[n] + tr.phi[n] + tr.s[n]) for n in range(tr.n_steps + 1)]
    assert np.ptp(m) <= 1e-10


def test_forcing_enters_all_equations(small_problem):
    g = small_problem.grid
    one = np.ones(g.shape)
    base = small_problem.run()
    for key in ("u_mu", "u_phi", "u_s"):
        tr = small_problem.with_forcing(Forcing(**{key: 1e-3 * one})).run()
        assert g.norm(tr.phi[-1] - base.phi[-1]) + g.norm(tr.s[-1] - base.s[-1]) > 0
        assert max(r.residual_mu for r in tr.reports) <= 1e-8


def test_non_contraction_raises_and_adapt_h_recovers():
    cfg = small_config(alpha=1e-3, h=0.05, n_steps=1, P_p0=50.0, max_outer=8)
    with pytest.raises(StepFailure):
        cfg.build().run()
    tr = cfg.replace(adapt_h=True).build().run()
    assert tr.reports[0].substeps > 1
    assert tr.n_steps == 1


def test_scheme_rejects_small_stabilization():
    prob = small_config().build()
    with pytest.raises(ConfigurationError):
        prob.with_config(L=0.5).scheme()
    with pytest.raises(ConfigurationError):
        SimConfig(h=-1.0)


def test_inadmissible_initial_phi_rejected():
    with pytest.raises(ConfigurationError):
        small_config(potential="log", init_phi="cosine:1:1.2").build()


def test_two_dimensional_run():
    prob = small_config(dimension=2, n_x=12, n_y=10, init_phi="random:5:0.3", n_steps=5).build()
    tr = prob.run()
    assert tr.phi.shape == (6, 12, 10)
    assert max(r.outer_ratio for r in tr.reports) < 1
