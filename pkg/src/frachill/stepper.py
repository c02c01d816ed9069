"""Semi-implicit Euler for the regularized system, solved per step by a contraction.

One step maps ``(mu^n, phi^n, S^n)`` to the solution of

    alpha (mu' - mu)/h + (phi' - phi)/h + A^{2 rho} mu' + P(phi) mu' = P(phi) S' + u_mu
    beta (phi' - phi)/h + B^{2 sigma} phi' + f_lam(phi') + L (phi' - phi) = mu' + u_phi
    (S' - S)/h + C^{2 tau} S' + P(phi) S' = P(phi) mu' + u_S

with ``P`` frozen at ``phi^n``.  Writing ``A_h = alpha/h + A^{2 rho} + P(phi^n)``,
the step is the fixed point of ``mu_bar -> Phi1(Phi2(Phi3(mu_bar)), Phi3(mu_bar))``:
Phi3 solves the nutrient equation for ``S'``, Phi2 solves the monotone phase
equation with ``mu'`` eliminated through ``A_h^{-1}``, and Phi1 recovers ``mu'``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .linalg import SolverFailure, pcg
from .potentials import Potential, Proliferation, YosidaParams
from .spectral import NEUMANN, ConfigurationError, GridSpec, SpectralOperator
from .trajectory import Trajectory

log = logging.getLogger(__name__)

ABS_FLOOR = 1e-14
# a Newton iterate that stalls within this factor of its target is accepted
ROUNDING_SLACK = 10.0
EPS = float(np.finfo(float).eps)


@dataclass(frozen=True)
class SimConfig:
    alpha: float = 1.0
    beta: float = 1.0
    rho: float = 0.5
    sigma: float = 0.5
    tau: float = 0.5
    h: float = 1e-3
    n_steps: int = 100
    lam: float = 1e-3
    L: float = 1.1
    tol_outer: float = 1e-10
    tol_cg: float = 1e-12
    tol_newton: float = 1e-11
    max_outer: int = 100
    max_cg: int = 2000
    max_newton: int = 50
    adapt_h: bool = False
    dealias: bool = False

    def __post_init__(self):
        for name in ("alpha", "beta", "rho", "sigma", "tau", "h", "lam",
                     "tol_outer", "tol_cg", "tol_newton"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ConfigurationError(f"{name} must be positive, got {v}")
        if self.n_steps < 0:
            raise ConfigurationError(f"n_steps must be >= 0, got {self.n_steps}")
        if not self.L >= 0:
            raise ConfigurationError(f"L must be nonnegative, got {self.L}")

    @property
    def T(self) -> float:
        return self.n_steps * self.h


class Operators(NamedTuple):
    A: SpectralOperator
    B: SpectralOperator
    C: SpectralOperator


def make_operators(grid: GridSpec, bc_a=NEUMANN, bc_b=NEUMANN, bc_c=NEUMANN) -> Operators:
    A = SpectralOperator(grid, bc_a)
    B = A if bc_b == bc_a else SpectralOperator(grid, bc_b)
    if bc_c == bc_a:
        C = A
    elif bc_c == bc_b:
        C = B
    else:
        C = SpectralOperator(grid, bc_c)
    return Operators(A, B, C)


@dataclass
class Forcing:
    """Time-independent source fields added to the three equations."""

    u_mu: np.ndarray | None = None
    u_phi: np.ndarray | None = None
    u_s: np.ndarray | None = None


@dataclass
class SimState:
    n: int
    mu: np.ndarray
    phi: np.ndarray
    s: np.ndarray


@dataclass
class StepReport:
    outer_iters: int = 0
    cg_iters: int = 0
    newton_iters: int = 0
    outer_ratio: float = 0.0
    residual_mu: float = 0.0
    residual_phi: float = 0.0
    residual_s: float = 0.0
    K_hat: float = 0.0
    substeps: int = 1
    fallback_used: bool = False
    outer_diffs: list = field(default_factory=list)

    @property
    def success(self) -> bool:
        return self.outer_ratio < 1.0


class StepFailure(SolverFailure):
    pass


class _Counters:
    __slots__ = ("cg", "newton", "fallback")

    def __init__(self):
        self.cg = 0
        self.newton = 0
        self.fallback = False


class Scheme:
    """The discrete problem for fixed operators, potential and proliferation."""

    def __init__(self, cfg: SimConfig, ops: Operators, potential: Potential,
                 prolif: Proliferation, forcing: Forcing | None = None):
        if potential.lip_f2 > 0 and not cfg.L > potential.lip_f2:
            raise ConfigurationError(
                f"stabilization L = {cfg.L} must exceed Lip f2 = {potential.lip_f2}")
        self.cfg = cfg
        self.ops = ops
        self.grid = ops.A.grid
        if not (ops.B.grid == self.grid and ops.C.grid == self.grid):
            raise ConfigurationError("operators live on different grids")
        self.potential = potential
        self.prolif = prolif
        self.forcing = forcing or Forcing()
        self.yosida = YosidaParams(cfg.lam)
        self._counters = _Counters()

    # -- pieces ---------------------------------------------------------------

    def coefficient(self, phi_n: np.ndarray) -> np.ndarray:
        """``P(phi^n)`` on the grid (optionally after 2/3 truncation of ``phi^n``)."""
        if self.cfg.dealias:
            phi_n = self.ops.B.truncate(phi_n)
        return np.maximum(self.prolif(phi_n), 0.0)

    def _h(self, h):
        return self.cfg.h if h is None else h

    def apply_Ah(self, phi_n, v, h=None, p=None):
        h = self._h(h)
        p = self.coefficient(phi_n) if p is None else p
        return (self.cfg.alpha / h) * v + self.ops.A.apply_fractional(2 * self.cfg.rho, v) + p * v

    def solve_Ah(self, phi_n, rhs, h=None, p=None, tol=None):
        h = self._h(h)
        p = self.coefficient(phi_n) if p is None else p
        shift = self.cfg.alpha / h + 0.5 * (p.min() + p.max())
        A, e = self.ops.A, 2 * self.cfg.rho
        x, it, _ = pcg(lambda v: self.apply_Ah(None, v, h, p), rhs,
                       lambda r: A.solve_shifted(e, shift, r),
                       tol=self.cfg.tol_cg if tol is None else tol, maxiter=self.cfg.max_cg)
        self._counters.cg += it
        return x

    def phi3_solve(self, phi_n, s_n, mu_bar, h=None, p=None):
        h = self._h(h)
        p = self.coefficient(phi_n) if p is None else p
        C, e = self.ops.C, 2 * self.cfg.tau
        # solve for the increment S' - S^n; S^n/h would otherwise dominate the rhs
        rhs = p * (mu_bar - s_n) - C.apply_fractional(e, s_n)
        if self.forcing.u_s is not None:
            rhs = rhs + self.forcing.u_s
        shift = 1.0 / h + 0.5 * (p.min() + p.max())
        x, it, _ = pcg(lambda v: v / h + C.apply_fractional(e, v) + p * v, rhs,
                       lambda r: C.solve_shifted(e, shift, r),
                       tol=self.cfg.tol_cg, maxiter=self.cfg.max_cg)
        self._counters.cg += it
        return s_n + x

    def phi2_residual(self, phi, phi_n, mu_n, s_np1, h, p):
        """Residual of the phase equation with ``mu' = Phi1(phi, S')`` substituted.

        Returns ``(residual, scale)`` where ``scale`` is the largest term norm.  The
        difference form ``A_h^{-1}(alpha/h mu^n - (phi - phi^n)/h + P S')`` avoids the
        cancellation between ``A_h^{-1} phi / h`` and ``A_h^{-1} phi^n / h``.
        """
        cfg = self.cfg
        dphi = phi - phi_n
        mu = self.phi1_apply(phi_n, mu_n, phi, s_np1, h, p)
        terms = [(cfg.beta / h) * dphi, self.ops.B.apply_fractional(2 * cfg.sigma, phi),
                 self.potential.yosida_f(phi, self.yosida), cfg.L * dphi, -mu]
        if self.forcing.u_phi is not None:
            terms.append(-self.forcing.u_phi)
        scale = max(self.grid.norm(t) for t in terms)
        return sum(terms), scale

    def phi2_solve(self, phi_n, mu_n, s_np1, h=None, p=None, phi_guess=None):
        """Solve the phase equation with ``mu'`` eliminated (semismooth Newton).

        The Jacobian is ``beta/h + L + (f_lam)'(phi) + B^{2 sigma} + A_h^{-1}/h``, applied
        matrix-free inside PCG.  Falls back to a damped preconditioned fixed-point
        iteration on stagnation.
        """
        cfg = self.cfg
        h = self._h(h)
        p = self.coefficient(phi_n) if p is None else p
        pot, y = self.potential, self.yosida
        B, A = self.ops.B, self.ops.A
        p_mid = 0.5 * (p.min() + p.max())
        symB = B.symbol(2 * cfg.sigma)
        if A.same_basis(B):
            schur = (1.0 / h) / (cfg.alpha / h + A.symbol(2 * cfg.rho) + p_mid)
        else:
            schur = 1.0 / (cfg.alpha + h * p_mid)

        # rounding noise of a residual evaluation: eps * |Jacobian| * |phi|
        jac_bound = cfg.beta / h + cfg.L + 1.0 / cfg.lam + float(symB.max()) + float(np.max(schur))

        def target(scale, phi):
            return max(cfg.tol_newton * scale, EPS * jac_bound * self.grid.norm(phi), ABS_FLOOR)

        phi = (phi_n if phi_guess is None else phi_guess).copy()
        g, scale = self.phi2_residual(phi, phi_n, mu_n, s_np1, h, p)
        gn = self.grid.norm(g)
        attempted = False
        for _ in range(cfg.max_newton):
            if gn <= target(scale, phi):
                return phi
            self._counters.newton += 1
            # forcing term of the inexact Newton method; the nested solve only needs
            # to be accurate relative to it
            eta = min(max(gn / max(scale, ABS_FLOOR), 1e-4), 1e-2)
            inner = max(1e-2 * eta, cfg.tol_cg)
            d = (cfg.beta / h + cfg.L) + pot.yosida_f1_prime(phi, y) + pot.f2_prime(phi)
            diag_modes = np.maximum(float(d.mean()) + symB + schur, cfg.beta / h)

            def jac(v, d=d, inner=inner):
                return (d * v + B.apply_fractional(2 * cfg.sigma, v)
                        + self.solve_Ah(None, v, h, p, tol=inner) / h)

            def prec(r, diag_modes=diag_modes):
                return B.from_modes(B.to_modes(r) / diag_modes)

            try:
                dphi, it, _ = pcg(jac, -g, prec, tol=eta, maxiter=cfg.max_cg)
            except SolverFailure:
                break
            self._counters.cg += it
            attempted = True
            t, accepted = 1.0, False
            at_floor = gn <= ROUNDING_SLACK * target(scale, phi)
            for _ls in range(1 if at_floor else 12):
                trial = phi + t * dphi
                gt, st = self.phi2_residual(trial, phi_n, mu_n, s_np1, h, p)
                gtn = self.grid.norm(gt)
                if gtn < (1.0 - 1e-4 * t) * gn or gtn <= target(st, trial):
                    accepted = True
                    break
                t *= 0.5
            if not accepted:
                break
            phi, g, gn, scale = trial, gt, gtn, st
        if gn <= target(scale, phi):
            return phi
        if attempted and gn <= ROUNDING_SLACK * target(scale, phi):
            # stalled at the rounding floor of the inner solves
            return phi
        log.debug("Newton stagnated at residual %.3e (scale %.3e); damped fallback", gn, scale)
        return self._phi2_fallback(phi, phi_n, mu_n, s_np1, h, p, target)

    def _phi2_fallback(self, phi, phi_n, mu_n, s_np1, h, p, target):
        cfg = self.cfg
        B = self.ops.B
        self._counters.fallback = True
        # bound on the diagonal part of the residual's Lipschitz constant
        lip = cfg.beta / h + cfg.L + 1.0 / cfg.lam + 1.0 / cfg.alpha
        diag = lip + B.symbol(2 * cfg.sigma)
        g, scale = self.phi2_residual(phi, phi_n, mu_n, s_np1, h, p)
        gn = self.grid.norm(g)
        for _ in range(20 * cfg.max_newton):
            if gn <= target(scale, phi):
                return phi
            step = B.from_modes(B.to_modes(g) / diag)
            t = 1.0
            for _ls in range(30):
                trial = phi - t * step
                gt, st = self.phi2_residual(trial, phi_n, mu_n, s_np1, h, p)
                if self.grid.norm(gt) < gn:
                    break
                t *= 0.5
            else:
                break
            phi, g, gn, scale = trial, gt, self.grid.norm(gt), st
        if gn <= ROUNDING_SLACK * target(scale, phi):
            return phi
        raise StepFailure(f"phase equation solve failed: residual {gn:.3e} (scale {scale:.3e})")

    def phi1_apply(self, phi_n, mu_n, phi_np1, s_np1, h=None, p=None, tol=None):
        h = self._h(h)
        p = self.coefficient(phi_n) if p is None else p
        # increment form: A_h (mu' - mu^n) = rhs - A_h mu^n without the alpha/h mu^n term
        rhs = (p * (s_np1 - mu_n) - self.ops.A.apply_fractional(2 * self.cfg.rho, mu_n)
               - (phi_np1 - phi_n) / h)
        if self.forcing.u_mu is not None:
            rhs = rhs + self.forcing.u_mu
        return mu_n + self.solve_Ah(None, rhs, h, p, tol=tol)

    def fixed_point_map(self, state: SimState, mu_bar, h=None, p=None, phi_guess=None):
        """One application of the composite map; returns ``(Phi(mu_bar), phi', S')``."""
        h = self._h(h)
        p = self.coefficient(state.phi) if p is None else p
        s_new = self.phi3_solve(state.phi, state.s, mu_bar, h, p)
        phi_new = self.phi2_solve(state.phi, state.mu, s_new, h, p, phi_guess=phi_guess)
        mu_new = self.phi1_apply(state.phi, state.mu, phi_new, s_new, h, p)
        return mu_new, phi_new, s_new

    # -- residuals --------------------------------------------------------------

    def residuals(self, old: SimState, new: SimState, h=None) -> tuple[float, float, float]:
        """Relative residuals of the three discrete equations at an accepted step."""
        cfg, ops = self.cfg, self.ops
        h = self._h(h)
        p = self.coefficient(old.phi)
        f = self.forcing
        zero = np.zeros(self.grid.shape)
        norm = self.grid.norm

        def rel(terms):
            total = sum(terms)
            scale = max(norm(t) for t in terms)
            return norm(total) / scale if scale > 0 else 0.0

        dphi = (new.phi - old.phi) / h
        r_mu = rel([cfg.alpha * (new.mu - old.mu) / h, dphi,
                    ops.A.apply_fractional(2 * cfg.rho, new.mu), p * new.mu, -p * new.s,
                    -(f.u_mu if f.u_mu is not None else zero)])
        r_phi = rel([cfg.beta * dphi, ops.B.apply_fractional(2 * cfg.sigma, new.phi),
                     self.potential.yosida_f(new.phi, self.yosida), cfg.L * (new.phi - old.phi),
                     -new.mu, -(f.u_phi if f.u_phi is not None else zero)])
        r_s = rel([(new.s - old.s) / h, ops.C.apply_fractional(2 * cfg.tau, new.s), p * new.s,
                   -p * new.mu, -(f.u_s if f.u_s is not None else zero)])
        return r_mu, r_phi, r_s

    # -- stepping ---------------------------------------------------------------

    def _single_step(self, state: SimState, h: float) -> tuple[SimState, StepReport]:
        cfg = self.cfg
        self._counters = _Counters()
        p = self.coefficient(state.phi)
        mu_bar = state.mu
        diffs = []
        converged = False
        phi_new = None
        # with P = 0 the nutrient solve ignores mu_bar, so Phi is constant
        constant_map = not p.any()
        for k in range(1 if constant_map else cfg.max_outer):
            mu_new, phi_new, s_new = self.fixed_point_map(state, mu_bar, h, p, phi_guess=phi_new)
            if constant_map:
                diffs.append(self.grid.norm(mu_new - mu_bar))
                converged = True
                break
            d = self.grid.norm(mu_new - mu_bar)
            diffs.append(d)
            mu_bar = mu_new
            target = max(cfg.tol_outer * (1.0 + self.grid.norm(mu_new)), ABS_FLOOR)
            if d <= target:
                converged = True
                break
            if k >= 1 and diffs[-1] >= diffs[-2] and d > ROUNDING_SLACK * target:
                raise StepFailure(f"fixed-point map not contractive: "
                                  f"|d_k|/|d_k-1| = {diffs[-1] / diffs[-2]:.3e}", history=diffs)
        if not converged:
            raise StepFailure(f"outer iteration did not converge in {cfg.max_outer} iterations",
                              history=diffs)
        ratio = diffs[1] / diffs[0] if len(diffs) >= 2 and diffs[0] > 0 else 0.0
        if diffs[-1] > 0 and not constant_map:
            # make the nutrient equation exact for the accepted mu; the change is O(h d_k)
            s_new = self.phi3_solve(state.phi, state.s, mu_new, h, p)
        new = SimState(state.n + 1, mu_new, phi_new, s_new)
        r_mu, r_phi, r_s = self.residuals(state, new, h)
        report = StepReport(outer_iters=len(diffs), cg_iters=self._counters.cg,
                            newton_iters=self._counters.newton, outer_ratio=ratio,
                            residual_mu=r_mu, residual_phi=r_phi, residual_s=r_s,
                            K_hat=ratio / h, fallback_used=self._counters.fallback,
                            outer_diffs=diffs)
        return new, report

    def step(self, state: SimState) -> tuple[SimState, StepReport]:
        """Advance one step of size ``cfg.h``.

        With ``adapt_h`` a failed step is retried as ``2^m`` substeps of ``h / 2^m``
        (m = 1..10) so the stored time levels stay uniform.
        """
        h = self.cfg.h
        try:
            return self._single_step(state, h)
        except (SolverFailure, FloatingPointError) as exc:
            if not self.cfg.adapt_h:
                if isinstance(exc, SolverFailure):
                    exc.step = state.n
                raise
            last = exc
        for m in range(1, 11):
            sub = 2 ** m
            try:
                cur = state
                reports = []
                for _ in range(sub):
                    cur, rep = self._single_step(cur, h / sub)
                    cur.n = state.n
                    reports.append(rep)
            except (SolverFailure, FloatingPointError) as exc:
                last = exc
                continue
            cur.n = state.n + 1
            merged = replace(max(reports, key=lambda r: r.outer_ratio),
                             outer_iters=sum(r.outer_iters for r in reports),
                             cg_iters=sum(r.cg_iters for r in reports),
                             newton_iters=sum(r.newton_iters for r in reports),
                             substeps=sub)
            merged.residual_mu, merged.residual_phi, merged.residual_s = (
                max(r.residual_mu for r in reports), max(r.residual_phi for r in reports),
                max(r.residual_s for r in reports))
            return cur, merged
        raise StepFailure(f"step {state.n} failed after 10 halvings: {last}", step=state.n)

    def check_admissible(self, initial: SimState):
        lo, hi = self.potential.domain_bounds()
        for name in ("mu", "phi", "s"):
            v = getattr(initial, name)
            if v.shape != self.grid.shape or not np.all(np.isfinite(v)):
                raise ConfigurationError(f"initial {name} must be a finite field on the grid")
        if np.any(initial.phi < lo) or np.any(initial.phi > hi):
            raise ConfigurationError(
                f"initial phi outside D(F1) = [{lo}, {hi}] "
                f"(max |phi0| = {np.abs(initial.phi).max():.6g}); F1(phi0) must be integrable")

    def run(self, initial: SimState, n_steps: int | None = None, callback=None) -> Trajectory:
        """Run ``n_steps`` (default ``cfg.n_steps``) steps from ``initial``."""
        N = self.cfg.n_steps if n_steps is None else n_steps
        self.check_admissible(initial)
        shape = (N + 1,) + self.grid.shape
        mu, phi, s = np.empty(shape), np.empty(shape), np.empty(shape)
        state = SimState(0, np.array(initial.mu, float), np.array(initial.phi, float),
                         np.array(initial.s, float))
        mu[0], phi[0], s[0] = state.mu, state.phi, state.s
        reports = []
        for n in range(N):
            state, rep = self.step(state)
            mu[n + 1], phi[n + 1], s[n + 1] = state.mu, state.phi, state.s
            reports.append(rep)
            if callback is not None:
                callback(state, rep)
        return Trajectory(self.cfg.h, mu, phi, s, reports)


@dataclass
class Problem:
    """Everything a run needs: step configuration, operators, nonlinearities, data."""

    cfg: SimConfig
    ops: Operators
    potential: Potential
    prolif: Proliferation
    initial: SimState
    forcing: Forcing = field(default_factory=Forcing)

    @property
    def grid(self) -> GridSpec:
        return self.ops.A.grid

    def scheme(self) -> Scheme:
        return Scheme(self.cfg, self.ops, self.potential, self.prolif, self.forcing)

    def run(self, callback=None) -> Trajectory:
        return self.scheme().run(self.initial, callback=callback)

    def with_config(self, **changes) -> "Problem":
        return replace(self, cfg=replace(self.cfg, **changes))

    def with_forcing(self, forcing: Forcing) -> "Problem":
        return replace(self, forcing=forcing)

    def with_initial(self, initial: SimState) -> "Problem":
        return replace(self, initial=initial)
