"""Split potentials F = F1 + F2, their Moreau-Yosida regularization, and proliferation P.

Every scalar function here is vectorized over numpy arrays.  The Yosida pair is
computed through the resolvent ``J = (I + lam f1)^{-1}``:

    f1_lam(r) = (r - J(r)) / lam,     F1_lam(r) = F1(J(r)) + (r - J(r))**2 / (2 lam).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class RootFindingError(RuntimeError):
    """Resolvent iteration did not reach its tolerance."""

    def __init__(self, message, bracket=None):
        super().__init__(message)
        self.bracket = bracket


@dataclass(frozen=True)
class YosidaParams:
    lam: float
    root_tolerance: float = 1e-15
    max_root_iters: int = 200

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"Yosida parameter must be positive, got {self.lam}")


def _arr(r):
    return np.asarray(r, dtype=float)


class Potential:
    """Base class; subclasses define F1, f1 (minimal section), F2, f2 and the resolvent."""

    variant = "abstract"
    lip_f2 = 0.0

    def domain_bounds(self) -> tuple[float, float]:
        """Closed hull of the effective domain D(F1)."""
        return (-math.inf, math.inf)

    def in_domain(self, r) -> np.ndarray:
        lo, hi = self.domain_bounds()
        r = _arr(r)
        return (r >= lo) & (r <= hi)

    def F1(self, r):
        raise NotImplementedError

    def f1_min(self, r):
        raise NotImplementedError

    def F2(self, r):
        raise NotImplementedError

    def f2(self, r):
        raise NotImplementedError

    def f2_prime(self, r):
        return np.full_like(_arr(r), -self.lip_f2)

    def F(self, r):
        return self.F1(r) + self.F2(r)

    def resolvent(self, r, y: YosidaParams):
        raise NotImplementedError

    def resolvent_slope(self, J, y: YosidaParams):
        """Derivative of the Yosida derivative, ``(1 - J'(r)) / lam``, expressed through ``J``."""
        raise NotImplementedError

    def yosida_f1(self, r, y: YosidaParams):
        r = _arr(r)
        return (r - self.resolvent(r, y)) / y.lam

    def yosida_F1(self, r, y: YosidaParams):
        r = _arr(r)
        J = self.resolvent(r, y)
        return self.F1(J) + (r - J) ** 2 / (2.0 * y.lam)

    def yosida_f1_prime(self, r, y: YosidaParams):
        return self.resolvent_slope(self.resolvent(_arr(r), y), y)

    def yosida_f(self, r, y: YosidaParams):
        return self.yosida_f1(r, y) + self.f2(r)

    def yosida_F(self, r, y: YosidaParams):
        return self.yosida_F1(r, y) + self.F2(r)

    def lower_bound_c0(self) -> tuple[float, float]:
        """``(C0, lam_max)`` with ``F1_lam + F2 >= -C0`` for every ``lam <= lam_max``."""
        raise NotImplementedError

    def stabilization_L(self, margin: float = 0.1) -> float:
        return self.lip_f2 * (1.0 + margin)


class RegularPotential(Potential):
    """``(r^2 - 1)^2 / 4`` split as ``r^4/4`` plus ``-r^2/2 + 1/4``."""

    variant = "regular"
    lip_f2 = 1.0

    def F1(self, r):
        return _arr(r) ** 4 / 4.0

    def f1_min(self, r):
        return _arr(r) ** 3

    def F2(self, r):
        return 0.25 - 0.5 * _arr(r) ** 2

    def f2(self, r):
        return -_arr(r)

    def resolvent(self, r, y):
        # real root of lam J^3 + J - r = 0 (Cardano), polished by two Newton steps
        r = _arr(r)
        p = 1.0 / (3.0 * y.lam)
        q = r / (2.0 * y.lam)
        disc = np.sqrt(q * q + p ** 3)
        J = np.cbrt(q + disc) + np.cbrt(q - disc)
        for _ in range(2):
            J = J - (y.lam * J ** 3 + J - r) / (3.0 * y.lam * J * J + 1.0)
        return J

    def resolvent_slope(self, J, y):
        return 3.0 * J * J / (1.0 + 3.0 * y.lam * J * J)

    def lower_bound_c0(self):
        return 0.75, 0.5


class LogarithmicPotential(Potential):
    """``(1+r)ln(1+r) + (1-r)ln(1-r) - c1 r^2`` on [-1, 1]."""

    variant = "log"

    def __init__(self, c1: float = 2.0):
        if not c1 > 0:
            raise ValueError(f"c1 must be positive, got {c1}")
        self.c1 = float(c1)
        self.lip_f2 = 2.0 * self.c1

    def domain_bounds(self):
        return (-1.0, 1.0)

    def F1(self, r):
        r = _arr(r)
        inside = np.abs(r) <= 1.0
        rc = np.clip(r, -1.0, 1.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            val = _xlogx(1.0 + rc) + _xlogx(1.0 - rc)
        return np.where(inside, val, np.inf)

    def f1_min(self, r):
        r = _arr(r)
        with np.errstate(divide="ignore", invalid="ignore"):
            val = 2.0 * np.arctanh(np.clip(r, -1.0, 1.0))
        return np.where(np.abs(r) <= 1.0, val, np.nan)

    def F2(self, r):
        return -self.c1 * _arr(r) ** 2

    def f2(self, r):
        return -2.0 * self.c1 * _arr(r)

    def resolvent(self, r, y):
        # J = tanh(w) with tanh(w) + 2 lam w = r: the slope sech^2 w + 2 lam is bounded
        # away from 0, so Newton safeguarded by bisection stays well conditioned even
        # when J is within rounding of +-1
        r = _arr(r)
        out_shape = r.shape
        r = r.ravel()
        two_lam = 2.0 * y.lam
        lo = (r - 1.0) / two_lam
        hi = (r + 1.0) / two_lam
        w = np.clip(np.arctanh(np.clip(r, -0.5, 0.5)), lo, hi)
        prev_step = hi - lo
        active = np.ones(r.shape, dtype=bool)
        for _ in range(y.max_root_iters):
            if not active.any():
                break
            wa = w[active]
            t = np.tanh(wa)
            g = t + two_lam * wa - r[active]
            lo_a = np.where(g < 0, wa, lo[active])
            hi_a = np.where(g > 0, wa, hi[active])
            wn = wa - g / ((1.0 - t) * (1.0 + t) + two_lam)
            # bisect when Newton leaves the bracket or fails to halve the previous step
            bad = (~((wn >= lo_a) & (wn <= hi_a)) | ~np.isfinite(wn)
                   | (np.abs(wn - wa) > 0.5 * prev_step[active]))
            wn = np.where(bad, 0.5 * (lo_a + hi_a), wn)
            tol = y.root_tolerance * (1.0 + np.abs(wn))
            done = (np.abs(wn - wa) <= tol) | (g == 0) | (hi_a - lo_a <= tol)
            prev_step[active] = np.where(bad, hi_a - lo_a, np.abs(wn - wa))
            lo[active], hi[active], w[active] = lo_a, hi_a, wn
            idx = np.flatnonzero(active)
            active[idx[done]] = False
        else:
            if active.any():
                raise RootFindingError(
                    "logarithmic resolvent did not converge",
                    bracket=(np.tanh(lo[active]), np.tanh(hi[active])))
        return np.tanh(w).reshape(out_shape)

    def resolvent_slope(self, J, y):
        return 2.0 / ((1.0 - J) * (1.0 + J) + 2.0 * y.lam)

    def lower_bound_c0(self):
        return 2.0 * self.c1, 1.0 / (4.0 * self.c1)


class DoubleObstaclePotential(Potential):
    """Indicator of [-1, 1] plus ``c2 (1 - r^2)``."""

    variant = "obstacle"

    def __init__(self, c2: float = 1.0):
        if not c2 > 0:
            raise ValueError(f"c2 must be positive, got {c2}")
        self.c2 = float(c2)
        self.lip_f2 = 2.0 * self.c2

    def domain_bounds(self):
        return (-1.0, 1.0)

    def F1(self, r):
        return np.where(np.abs(_arr(r)) <= 1.0, 0.0, np.inf)

    def f1_min(self, r):
        return np.where(np.abs(_arr(r)) <= 1.0, 0.0, np.nan)

    def F2(self, r):
        return self.c2 * (1.0 - _arr(r) ** 2)

    def f2(self, r):
        return -2.0 * self.c2 * _arr(r)

    def resolvent(self, r, y):
        return np.clip(_arr(r), -1.0, 1.0)

    def resolvent_slope(self, J, y):
        # J is the clamp; on the contact set J' = 0 (right-continuous branch at +1)
        return np.where((J >= 1.0) | (J <= -1.0), 1.0 / y.lam, 0.0)

    def yosida_f1_prime(self, r, y):
        r = _arr(r)
        return np.where((r >= 1.0) | (r < -1.0), 1.0 / y.lam, 0.0)

    def lower_bound_c0(self):
        return self.c2, 1.0 / (4.0 * self.c2)


class ZeroPotential(Potential):
    """F identically zero; used for linear benchmarks."""

    variant = "none"
    lip_f2 = 0.0

    def F1(self, r):
        return np.zeros_like(_arr(r))

    f1_min = F2 = f2 = F1

    def resolvent(self, r, y):
        return _arr(r).copy()

    def resolvent_slope(self, J, y):
        return np.zeros_like(J)

    def lower_bound_c0(self):
        return 0.0, math.inf


class PolynomialPotential(Potential):
    """Custom hook: ``F1 = sum_k a_k r^(2k)`` (k >= 1, a_k >= 0) and ``F2 = -b r^2 + d``."""

    variant = "polynomial"

    def __init__(self, even_coeffs, b: float = 0.0, d: float = 0.0):
        self.a = np.asarray(even_coeffs, dtype=float)
        if self.a.ndim != 1 or (self.a < 0).any():
            raise ValueError("even coefficients must be a nonnegative 1-D sequence")
        self.b, self.d = float(b), float(d)
        self.lip_f2 = 2.0 * abs(self.b)

    def F1(self, r):
        r = _arr(r)
        return sum(a * r ** (2 * (k + 1)) for k, a in enumerate(self.a))

    def f1_min(self, r):
        r = _arr(r)
        return sum(2 * (k + 1) * a * r ** (2 * k + 1) for k, a in enumerate(self.a))

    def _f1_prime(self, r):
        return sum(2 * (k + 1) * (2 * k + 1) * a * r ** (2 * k) for k, a in enumerate(self.a))

    def F2(self, r):
        return self.d - self.b * _arr(r) ** 2

    def f2(self, r):
        return -2.0 * self.b * _arr(r)

    def f2_prime(self, r):
        return np.full_like(_arr(r), -2.0 * self.b)

    def resolvent(self, r, y):
        r = _arr(r)
        lo, hi = np.minimum(r, 0.0), np.maximum(r, 0.0)
        J = 0.5 * (lo + hi)
        for _ in range(y.max_root_iters):
            g = J + y.lam * self.f1_min(J) - r
            lo = np.where(g < 0, J, lo)
            hi = np.where(g > 0, J, hi)
            Jn = J - g / (1.0 + y.lam * self._f1_prime(J))
            Jn = np.where((Jn >= lo) & (Jn <= hi), Jn, 0.5 * (lo + hi))
            if np.all(np.abs(Jn - J) <= y.root_tolerance * (1.0 + np.abs(r))):
                return Jn
            J = Jn
        raise RootFindingError("polynomial resolvent did not converge", bracket=(lo, hi))

    def resolvent_slope(self, J, y):
        d = self._f1_prime(J)
        return d / (1.0 + y.lam * d)

    def lower_bound_c0(self):
        # with 1/(2 lam) >= 2 b the quadratic part is absorbed as in the canonical cases
        if self.b <= 0:
            return max(0.0, -self.d), math.inf
        s = np.linspace(-10, 10, 20001)
        return float(max(0.0, -np.min(self.F1(s) - 2 * self.b * s * s + self.d))), 1.0 / (4.0 * self.b)


def _xlogx(x):
    return np.where(x > 0, x * np.log(np.where(x > 0, x, 1.0)), 0.0)


def make_potential(variant: str, c1: float = 2.0, c2: float = 1.0) -> Potential:
    variant = variant.lower()
    if variant == "regular":
        return RegularPotential()
    if variant in ("log", "logarithmic"):
        return LogarithmicPotential(c1)
    if variant in ("obstacle", "double_obstacle"):
        return DoubleObstaclePotential(c2)
    if variant in ("none", "zero"):
        return ZeroPotential()
    raise ValueError(f"unknown potential variant {variant!r}")


@dataclass
class Proliferation:
    """Bounded, Lipschitz, nonnegative P.  ``kind`` is constant, smooth_clamp or tabulated."""

    kind: str = "smooth_clamp"
    p0: float = 1.0
    width: float = 1.0
    nodes: np.ndarray | None = field(default=None, repr=False)
    values: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in ("constant", "smooth_clamp", "tabulated"):
            raise ValueError(f"unknown proliferation kind {self.kind!r}")
        if self.kind == "tabulated":
            self.nodes = np.asarray(self.nodes, dtype=float)
            self.values = np.asarray(self.values, dtype=float)
            if self.nodes.shape != self.values.shape or self.nodes.size < 2:
                raise ValueError("tabulated P needs matching node/value arrays")
            if np.any(np.diff(self.nodes) <= 0) or np.any(self.values < 0):
                raise ValueError("tabulated P needs increasing nodes and nonnegative values")
        elif self.p0 < 0:
            raise ValueError("P0 must be nonnegative")
        if self.kind == "smooth_clamp" and not self.width > 0:
            raise ValueError("width must be positive")

    def __call__(self, s):
        s = _arr(s)
        if self.kind == "constant":
            return np.full_like(s, self.p0)
        if self.kind == "smooth_clamp":
            return self.p0 * 0.5 * (1.0 + np.tanh(s / self.width))
        return np.interp(s, self.nodes, self.values)

    @property
    def sup(self) -> float:
        if self.kind == "tabulated":
            return float(self.values.max())
        return float(self.p0)

    @property
    def lip(self) -> float:
        if self.kind == "constant":
            return 0.0
        if self.kind == "smooth_clamp":
            return self.p0 / (2.0 * self.width)
        return float(np.max(np.abs(np.diff(self.values) / np.diff(self.nodes))))

    @property
    def is_zero(self) -> bool:
        return self.kind == "constant" and self.p0 == 0.0
