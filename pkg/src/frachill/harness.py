"""Executable checks: energy ledger, mass, continuous dependence, refinement studies,
complementarity, regularity and the contraction probe.

Every check returns a small dataclass with the measured numbers and a ``passed`` flag;
``CheckLine`` is the one-line summary (name, value, threshold, status) the CLI prints.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .potentials import YosidaParams
from .spectral import NEUMANN, ConfigurationError
from .stepper import Forcing, Problem, SimState
from .trajectory import FIELDS, Trajectory, interpolant_norms, l2_time_distance


@dataclass
class CheckLine:
    name: str
    value: float
    threshold: float
    status: str

    def csv(self) -> str:
        return f"{self.name},{float(self.value)!r},{float(self.threshold)!r},{self.status}"


def _status(ok: bool) -> str:
    return "pass" if ok else "fail"


def solver_budget(problem: Problem) -> float:
    c = problem.cfg
    return c.tol_outer + c.tol_cg + c.tol_newton


# -- energy -------------------------------------------------------------------------

def energy(state: SimState, problem: Problem) -> float:
    """``(alpha/2)|mu|^2 + (1/2)|B^sigma phi|^2 + int F_lam(phi) + (1/2)|S|^2``."""
    cfg, g = problem.cfg, problem.grid
    pot = problem.potential
    y = YosidaParams(cfg.lam)
    return (0.5 * cfg.alpha * g.inner(state.mu, state.mu)
            + 0.5 * problem.ops.B.power_norm(cfg.sigma, state.phi) ** 2
            + g.integrate(pot.yosida_F(state.phi, y))
            + 0.5 * g.inner(state.s, state.s))


DISSIPATION_TERMS = ("A_mu", "P_mu_minus_s", "beta_dt_phi", "C_s", "alpha_jump_mu",
                     "B_jump_phi", "jump_s", "L_jump_phi")


@dataclass
class EnergyLedger:
    energies: np.ndarray            # E_0..E_N
    dissipation: dict               # name -> per-step array of length N
    slack: float
    first_violation: int | None = None

    @property
    def total_dissipation(self) -> np.ndarray:
        return sum(self.dissipation.values())

    @property
    def lhs(self) -> np.ndarray:
        """``E_m + sum_{n<m} D_n`` for m = 0..N."""
        return self.energies + np.concatenate([[0.0], np.cumsum(self.total_dissipation)])

    @property
    def excess(self) -> float:
        """``max_{m>=1} (E_m + sum_{n<m} D_n) - E_0``; negative when strictly dissipative."""
        d = self.lhs - self.energies[0]
        return float(np.max(d[1:])) if d.size > 1 else 0.0

    @property
    def passed(self) -> bool:
        return self.first_violation is None


def energy_ledger(traj: Trajectory, problem: Problem) -> EnergyLedger:
    cfg, g, ops = problem.cfg, problem.grid, problem.ops
    h = traj.h
    scheme = problem.scheme()
    N = traj.n_steps
    E = np.array([energy(SimState(n, traj.mu[n], traj.phi[n], traj.s[n]), problem)
                  for n in range(N + 1)])
    D = {k: np.zeros(N) for k in DISSIPATION_TERMS}
    for n in range(N):
        mu1, phi1, s1 = traj.mu[n + 1], traj.phi[n + 1], traj.s[n + 1]
        p = scheme.coefficient(traj.phi[n])
        dphi = phi1 - traj.phi[n]
        D["A_mu"][n] = h * ops.A.power_norm(cfg.rho, mu1) ** 2
        D["P_mu_minus_s"][n] = h * g.integrate(p * (mu1 - s1) ** 2)
        D["beta_dt_phi"][n] = cfg.beta / h * g.inner(dphi, dphi)
        D["C_s"][n] = h * ops.C.power_norm(cfg.tau, s1) ** 2
        D["alpha_jump_mu"][n] = 0.5 * cfg.alpha * g.norm(mu1 - traj.mu[n]) ** 2
        D["B_jump_phi"][n] = 0.5 * ops.B.power_norm(cfg.sigma, dphi) ** 2
        D["jump_s"][n] = 0.5 * g.norm(s1 - traj.s[n]) ** 2
        D["L_jump_phi"][n] = 0.5 * cfg.L * g.inner(dphi, dphi)
    slack = 100.0 * N * solver_budget(problem) * (1.0 + abs(E[0]))
    ledger = EnergyLedger(E, D, slack)
    bad = np.nonzero(ledger.lhs > E[0] + slack)[0]
    ledger.first_violation = int(bad[0]) if bad.size else None
    return ledger


def check_energy_inequality(traj: Trajectory, problem: Problem) -> tuple[EnergyLedger, CheckLine]:
    ledger = energy_ledger(traj, problem)
    line = CheckLine("energy_inequality", ledger.excess, ledger.slack, _status(ledger.passed))
    if not ledger.passed:
        line.status = f"fail (step {ledger.first_violation})"
    return ledger, line


# -- mass -----------------------------------------------------------------------------

@dataclass
class MassResult:
    masses: np.ndarray | None
    drift: float
    bound: float
    status: str

    @property
    def passed(self) -> bool:
        return self.status != "fail"


def check_mass_conservation(traj: Trajectory, problem: Problem) -> MassResult:
    """Max relative drift of ``mean(alpha mu + phi + S)``; Neumann A and C only."""
    ops, cfg = problem.ops, problem.cfg
    if ops.A.bc != NEUMANN or ops.C.bc != NEUMANN:
        return MassResult(None, math.nan, math.nan, "skipped: no constant eigenfunction")
    m = np.array([np.mean(cfg.alpha * traj.mu[n] + traj.phi[n] + traj.s[n])
                  for n in range(traj.n_steps + 1)])
    drift = float(np.max(np.abs(m - m[0]))) / (1.0 + abs(m[0]))
    bound = 10.0 * max(traj.n_steps, 1) * cfg.tol_outer
    return MassResult(m, drift, bound, _status(drift <= bound))


# -- time-space norms -----------------------------------------------------------------

def l2_time_norm(z: np.ndarray, h: float, inner) -> float:
    """``L2(0,T;Z)`` norm of the right-endpoint piecewise constant interpolant."""
    return math.sqrt(h * sum(inner(v, v) for v in z[1:]))


def linf_time_norm(z: np.ndarray, inner) -> float:
    return math.sqrt(max(inner(v, v) for v in z))


def dependence_aggregate(dmu, dphi, ds, h, problem: Problem) -> float:
    """Left-hand side of the continuous-dependence estimate for a difference of runs.

    ``1*mu`` is the left-rectangle cumulative sum ``h sum_{k<n} mu^k``.
    """
    g, ops, cfg = problem.grid, problem.ops, problem.cfg

    def graph(op, e):
        return lambda u, v: g.inner(u, v) + g.inner(op.apply_fractional(e, u), op.apply_fractional(e, v))

    cum = np.concatenate([np.zeros((1,) + dmu.shape[1:]), h * np.cumsum(dmu[:-1], axis=0)])
    return (l2_time_norm(dmu, h, g.inner)
            + max(ops.A.graph_norm(cfg.rho, c) for c in cum)
            + linf_time_norm(dphi, g.inner) + l2_time_norm(dphi, h, graph(ops.B, cfg.sigma))
            + linf_time_norm(ds, g.inner) + l2_time_norm(ds, h, graph(ops.C, cfg.tau)))


@dataclass
class DependenceRow:
    target: str
    eps: float
    lhs: float
    rhs: float

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs if self.rhs > 0 else math.nan


@dataclass
class DependenceResult:
    rows: list
    factor: float = 2.0

    def stability(self, target: str) -> float:
        r = [row.ratio for row in self.rows if row.target == target]
        return max(r) / min(r)

    @property
    def passed(self) -> bool:
        targets = {row.target for row in self.rows if row.rhs > 0}
        return all(self.stability(t) <= self.factor for t in targets)


def smooth_random_field(problem: Problem, seed: int, decay: float = 1.0) -> np.ndarray:
    """Unit-norm field with mode amplitudes ``(1 + lambda_k)^(-decay)`` and random signs."""
    op = problem.ops.A
    rng = np.random.default_rng(seed)
    c = rng.choice([-1.0, 1.0], size=op.grid.shape) / (1.0 + op.eigenvalues) ** decay
    v = op.from_modes(c)
    return v / problem.grid.norm(v)


def probe_continuous_dependence(problem: Problem, eps=(1e-2, 5e-3), seed: int = 7,
                                targets=("u_mu", "u_phi", "u_s")) -> DependenceResult:
    """Linear-response ratios ``LHS(difference) / sum sqrt(T)|u|`` per forcing target.

    The target ``s0`` perturbs the initial nutrient instead; its rhs is reported as 0.
    """
    base = problem.run()
    g = problem.grid
    T = base.T
    w = smooth_random_field(problem, seed)
    rows = []
    for target in targets:
        for e in eps:
            if target == "s0":
                init = problem.initial
                pert = problem.with_initial(SimState(0, init.mu, init.phi, init.s + e * w))
                rhs = 0.0
            else:
                pert = problem.with_forcing(Forcing(**{target: e * w}))
                rhs = math.sqrt(T) * g.norm(e * w)
            tr = pert.run()
            lhs = dependence_aggregate(tr.mu - base.mu, tr.phi - base.phi, tr.s - base.s,
                                       base.h, problem)
            rows.append(DependenceRow(target, e, lhs, rhs))
    return DependenceResult(rows)


# -- refinement studies ---------------------------------------------------------------

@dataclass
class StudyResult:
    parameter: str
    values: list                    # h or lambda per level
    diffs: dict                     # field -> differences between successive levels
    extras: dict = field(default_factory=dict)

    @property
    def levels(self) -> int:
        return len(self.values)

    def orders(self, name: str) -> np.ndarray:
        d = np.asarray(self.diffs[name])
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.log2(d[:-1] / d[1:])

    def combined(self) -> np.ndarray:
        return np.sqrt(sum(np.asarray(self.diffs[f]) ** 2 for f in FIELDS))

    def decreasing(self, name: str | None = None) -> bool:
        d = self.combined() if name is None else np.asarray(self.diffs[name])
        return bool(np.all(np.diff(d) < 0))


def study_h(problem: Problem, levels: int = 3) -> StudyResult:
    """Runs ``h, h/2, ...`` to a fixed horizon; Cauchy differences of the hat interpolants."""
    if levels < 2:
        raise ValueError("need at least two levels")
    cfg, g = problem.cfg, problem.grid
    runs, hs = [], []
    for k in range(levels):
        h = cfg.h / 2 ** k
        runs.append(problem.with_config(h=h, n_steps=cfg.n_steps * 2 ** k).run())
        hs.append(h)
    diffs = {f: [l2_time_distance(runs[k].field(f), hs[k], runs[k + 1].field(f), hs[k + 1], g.inner)
                 for k in range(levels - 1)] for f in FIELDS}
    return StudyResult("h", hs, diffs, {"trajectories": runs})


def study_lambda(problem: Problem, lams=(1e-1, 5e-2, 2.5e-2, 1.25e-2)) -> StudyResult:
    """Fixed ``h``; Cauchy differences between successive Yosida levels plus obstacle data."""
    g = problem.grid
    runs = [problem.with_config(lam=lam).run() for lam in lams]
    diffs = {f: [l2_time_distance(runs[k].field(f), runs[k].h, runs[k + 1].field(f), runs[k + 1].h,
                                  g.inner) for k in range(len(lams) - 1)] for f in FIELDS}
    overshoot = [float(np.max(np.maximum(np.abs(tr.phi) - 1.0, 0.0))) for tr in runs]
    comp = [check_complementarity(tr, problem.with_config(lam=lam)) for tr, lam in zip(runs, lams)]
    return StudyResult("lambda", list(lams), diffs,
                       {"overshoot": overshoot, "complementarity": comp, "trajectories": runs})


def violations_shrink(comps, keys=("infeasibility", "gap")) -> bool:
    """Each obstacle violation norm strictly decreases from one Yosida level to the next."""
    return all(all(b.norms[k] < a.norms[k] for a, b in zip(comps, comps[1:])) for k in keys)


def nonincreasing_within(values, rel: float = 0.1) -> bool:
    v = np.asarray(values, dtype=float)
    return bool(np.all(v[1:] <= v[:-1] * (1.0 + rel) + 1e-300))


# -- complementarity --------------------------------------------------------------------

def selection_xi(traj: Trajectory, problem: Problem) -> np.ndarray:
    """``xi^n`` for n = 1..N recovered from the phase equation.

    The stabilization term ``L(phi^n - phi^{n-1})`` is included so that ``xi^n`` equals
    the Yosida derivative ``f1_lam(phi^n)`` up to solver residuals.
    """
    cfg, B, pot = problem.cfg, problem.ops.B, problem.potential
    h = traj.h
    out = np.empty_like(traj.phi[1:])
    for n in range(1, traj.n_steps + 1):
        phi, prev = traj.phi[n], traj.phi[n - 1]
        out[n - 1] = (traj.mu[n] - cfg.beta * (phi - prev) / h - B.apply_fractional(2 * cfg.sigma, phi)
                      - pot.f2(phi) - cfg.L * (phi - prev))
        if problem.forcing.u_phi is not None:
            out[n - 1] += problem.forcing.u_phi
    return out


@dataclass
class ComplementarityResult:
    variant: str
    lam: float
    delta: float
    tol: float
    norms: dict

    @property
    def passed(self) -> bool:
        n = self.norms
        if self.variant == "obstacle":
            return max(n["sign_upper"], n["sign_lower"], n["interior"]) <= self.tol
        if self.variant == "none":
            return n["xi"] <= self.tol
        return n["yosida_mismatch"] <= self.tol


def check_complementarity(traj: Trajectory, problem: Problem) -> ComplementarityResult:
    """Violation norms of ``xi in f1(phi)`` (band tests for the obstacle, defect norms otherwise).

    Bands: ``delta = max(10 lam, 1e-6)``, ``tol = 10 (lam + solver budget)``.
    """
    cfg, g, pot = problem.cfg, problem.grid, problem.potential
    lam = cfg.lam
    xi = selection_xi(traj, problem)
    phi = traj.phi[1:]
    y = YosidaParams(lam)
    budget = solver_budget(problem)
    delta, tol = max(10 * lam, 1e-6), 10 * (lam + budget)
    scale = 1.0 + max(float(np.max(np.abs(traj.mu))), 1.0)
    f1lam = pot.yosida_f1(phi, y)
    norms = {"yosida_mismatch": float(np.max(np.abs(xi - f1lam))) / scale}
    variant = pot.variant
    if variant == "obstacle":
        upper, lower = phi >= 1 - delta, phi <= -1 + delta
        interior = np.abs(phi) <= 1 - delta
        neg = np.maximum(-xi, 0.0)
        pos = np.maximum(xi, 0.0)
        over = np.maximum(np.abs(phi) - 1.0, 0.0)
        norms.update(
            sign_upper=float(np.max(np.where(upper, neg, 0.0), initial=0.0)),
            sign_lower=float(np.max(np.where(lower, pos, 0.0), initial=0.0)),
            interior=float(np.max(np.where(interior, np.abs(xi), 0.0), initial=0.0)),
            infeasibility=max(g.norm(o) for o in over),
            gap=max(g.integrate(np.abs(x) * o) for x, o in zip(xi, over)),
        )
    elif variant == "regular":
        norms["cubic_defect"] = max(g.norm(x - p ** 3) for x, p in zip(xi, phi))
    elif variant == "none":
        norms["xi"] = float(np.max(np.abs(xi))) / scale
    return ComplementarityResult(variant, lam, delta, tol, norms)


# -- regularity -------------------------------------------------------------------------

def regularity_gate(problem: Problem) -> None:
    """Reject data whose minimal section ``f1°(phi0)`` is not finite on the grid."""
    f = problem.potential.f1_min(problem.initial.phi)
    if not np.all(np.isfinite(f)):
        raise ConfigurationError("initial phi has unbounded minimal section f1°(phi0); "
                                 "regularity check requires it in H")


@dataclass
class RegularityResult:
    hs: list
    dt_phi_max: list
    mu_graph_max: list
    s_graph_max: list
    tolerance: float = 0.5

    @staticmethod
    def variation(v) -> float:
        v = np.asarray(v, dtype=float)
        lo = v.min()
        return float(v.max() / lo - 1.0) if lo > 0 else (0.0 if v.max() == 0 else math.inf)

    @property
    def passed(self) -> bool:
        return self.variation(self.dt_phi_max) <= self.tolerance


def check_regularity(problem: Problem, halvings: int = 3) -> RegularityResult:
    """Maxima of ``|(phi^{n+1}-phi^n)/h|`` and graph norms of mu, S over ``h, ..., h/2^halvings``."""
    regularity_gate(problem)
    cfg, ops = problem.cfg, problem.ops
    hs, dtp, gm, gs = [], [], [], []
    for k in range(halvings + 1):
        h = cfg.h / 2 ** k
        tr = problem.with_config(h=h, n_steps=cfg.n_steps * 2 ** k).run()
        q = interpolant_norms(tr.phi, h, problem.grid.inner)
        hs.append(h)
        dtp.append(q["dt_hat_Linf"])
        gm.append(max(ops.A.graph_norm(cfg.rho, v) for v in tr.mu))
        gs.append(max(ops.C.graph_norm(cfg.tau, v) for v in tr.s))
    return RegularityResult(hs, dtp, gm, gs)


# -- contraction probe ------------------------------------------------------------------

@dataclass
class ContractionProbe:
    h: float
    ratios: np.ndarray

    @property
    def K_hat(self) -> float:
        return float(self.ratios.max()) / self.h

    @property
    def spread(self) -> float:
        lo = float(self.ratios.min())
        return float(self.ratios.max()) / lo if lo > 0 else (1.0 if self.ratios.max() == 0 else math.inf)


def probe_contraction(problem: Problem, pairs: int = 20, seed: int = 0, state: SimState | None = None,
                      amplitude: float = 1e-2) -> ContractionProbe:
    """Ratios ``|Phi(m1) - Phi(m2)| / |m1 - m2|`` at ``state`` (default: the initial data).

    Pairs are ``m1 = mu^n`` and ``m2 = mu^n + d`` with ``d`` built from a fixed smooth
    amplitude spectrum and random signs, so the ratio barely depends on the draw.
    """
    scheme = problem.scheme()
    state = problem.initial if state is None else state
    h = problem.cfg.h
    p = scheme.coefficient(state.phi)
    base, _, _ = scheme.fixed_point_map(state, state.mu, h, p)
    ratios = np.empty(pairs)
    for i in range(pairs):
        d = amplitude * smooth_random_field(problem, seed * 100003 + i)
        out, _, _ = scheme.fixed_point_map(state, state.mu + d, h, p)
        ratios[i] = problem.grid.norm(out - base) / problem.grid.norm(d)
    return ContractionProbe(h, ratios)


# -- exact linear reference -------------------------------------------------------------

def linear_modal_reference(problem: Problem, times) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Exact solution of the linear system (P = 0, f = 0, no forcing) at ``times``.

    Per eigenmode ``(mu, phi)`` solve ``alpha mu' + phi' = -a mu``, ``beta phi' = mu - b phi``
    through a 2x2 matrix exponential; ``S`` decays as ``exp(-c t)``.
    Requires A and B to share their eigenbasis.
    """
    cfg, ops = problem.cfg, problem.ops
    if not ops.A.same_basis(ops.B):
        raise ValueError("linear reference needs A and B on the same eigenbasis")
    a = ops.A.symbol(2 * cfg.rho).ravel()
    b = ops.B.symbol(2 * cfg.sigma).ravel()
    c = ops.C.symbol(2 * cfg.tau)
    mu0 = ops.A.to_modes(problem.initial.mu).ravel()
    phi0 = ops.A.to_modes(problem.initial.phi).ravel()
    s0 = ops.C.to_modes(problem.initial.s)
    al, be = cfg.alpha, cfg.beta
    shape = problem.grid.shape
    times = np.asarray(times, dtype=float)
    mu = np.empty((times.size,) + shape)
    phi = np.empty_like(mu)
    s = np.empty_like(mu)
    # distinct (a, b) pairs share one exponential
    keys, inverse = np.unique(np.stack([a, b], axis=1), axis=0, return_inverse=True)
    inverse = inverse.ravel()
    for ti, t in enumerate(times):
        cm = np.empty_like(mu0)
        cp = np.empty_like(phi0)
        for kidx, (ak, bk) in enumerate(keys):
            M = np.array([[-(ak + 1.0 / be) / al, bk / (al * be)], [1.0 / be, -bk / be]])
            E = expm(t * M)
            sel = inverse == kidx
            cm[sel] = E[0, 0] * mu0[sel] + E[0, 1] * phi0[sel]
            cp[sel] = E[1, 0] * mu0[sel] + E[1, 1] * phi0[sel]
        mu[ti] = ops.A.from_modes(cm.reshape(shape))
        phi[ti] = ops.A.from_modes(cp.reshape(shape))
        s[ti] = ops.C.from_modes(np.exp(-c * t) * s0)
    return mu, phi, s


def linear_modal_recursion(problem: Problem, n_steps: int | None = None):
    """The scheme's own per-mode recursion for the linear system (exact in exact arithmetic)."""
    cfg, ops = problem.cfg, problem.ops
    N = cfg.n_steps if n_steps is None else n_steps
    h = cfg.h
    a = ops.A.symbol(2 * cfg.rho)
    b = ops.B.symbol(2 * cfg.sigma)
    c = ops.C.symbol(2 * cfg.tau)
    cm = ops.A.to_modes(problem.initial.mu)
    cp = ops.A.to_modes(problem.initial.phi)
    cs = ops.C.to_modes(problem.initial.s)
    al, be, L = cfg.alpha, cfg.beta, cfg.L
    shape = (N + 1,) + problem.grid.shape
    mu, phi, s = np.empty(shape), np.empty(shape), np.empty(shape)
    mu[0], phi[0], s[0] = problem.initial.mu, problem.initial.phi, problem.initial.s
    m11, m12 = al / h + a, 1.0 / h
    m21, m22 = -1.0, be / h + b + L
    det = m11 * m22 - m12 * m21
    for n in range(N):
        r1 = al / h * cm + cp / h
        r2 = (be / h + L) * cp
        cm, cp = (m22 * r1 - m12 * r2) / det, (m11 * r2 - m21 * r1) / det
        cs = cs / (1.0 + h * c)
        mu[n + 1], phi[n + 1], s[n + 1] = ops.A.from_modes(cm), ops.A.from_modes(cp), ops.C.from_modes(cs)
    return mu, phi, s


def linear_errors(problem: Problem, levels: int = 4) -> dict:
    """``L2(0,T;H)`` errors of the hat interpolants against the exact linear solution."""
    cfg, g = problem.cfg, problem.grid
    errs = {f: [] for f in FIELDS}
    hs = []
    for k in range(levels):
        sub = problem.with_config(h=cfg.h / 2 ** k, n_steps=cfg.n_steps * 2 ** k)
        tr = sub.run()
        ref = linear_modal_reference(problem, tr.times)
        for f, r in zip(FIELDS, ref):
            errs[f].append(math.sqrt(interpolant_norms(tr.field(f) - r, tr.h, g.inner)["hat_L2sq"]))
        hs.append(sub.cfg.h)
    return {"h": hs, **errs}
