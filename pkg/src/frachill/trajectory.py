"""Stored time levels and their piecewise-constant / piecewise-linear interpolants."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

FIELDS = ("mu", "phi", "s")


@dataclass
class Trajectory:
    """Time levels ``z^0..z^N`` of the three unknowns on a uniform step ``h``.

    Arrays have shape ``(N + 1, *grid.shape)``.  ``reports[n]`` describes the step
    ``n -> n + 1``.
    """

    h: float
    mu: np.ndarray
    phi: np.ndarray
    s: np.ndarray
    reports: list = field(default_factory=list)

    @property
    def n_steps(self) -> int:
        return self.mu.shape[0] - 1

    @property
    def T(self) -> float:
        return self.n_steps * self.h

    @property
    def times(self) -> np.ndarray:
        return self.h * np.arange(self.n_steps + 1)

    def field(self, name: str) -> np.ndarray:
        if name not in FIELDS:
            raise KeyError(name)
        return getattr(self, name)

    def _locate(self, t: float) -> tuple[int, float]:
        if not (0.0 <= t <= self.T * (1 + 1e-14)) or self.n_steps == 0 and t != 0.0:
            raise ValueError(f"t = {t} outside [0, {self.T}]")
        pos = t / self.h
        n = min(int(math.ceil(pos - 1e-12)), self.n_steps)
        return max(n, 1), pos

    def bar(self, name: str, t: float) -> np.ndarray:
        """Right-endpoint piecewise constant interpolant: ``z^n`` on ``((n-1)h, nh]``."""
        if self.n_steps == 0:
            return self._locate_zero(name, t)
        n, _ = self._locate(t)
        return self.field(name)[n]

    def underline(self, name: str, t: float) -> np.ndarray:
        """Left-endpoint piecewise constant interpolant: ``z^(n-1)`` on ``((n-1)h, nh]``."""
        if self.n_steps == 0:
            return self._locate_zero(name, t)
        n, _ = self._locate(t)
        return self.field(name)[n - 1]

    def hat(self, name: str, t: float) -> np.ndarray:
        """Piecewise linear nodal interpolant."""
        if self.n_steps == 0:
            return self._locate_zero(name, t)
        n, pos = self._locate(t)
        z = self.field(name)
        theta = min(max(pos - (n - 1), 0.0), 1.0)
        # snap nodal times so that hat(nh) is exactly z^n
        if abs(theta - 1.0) <= 1e-12:
            theta = 1.0
        elif theta <= 1e-12:
            theta = 0.0
        if theta == 1.0:
            return z[n].copy()
        if theta == 0.0:
            return z[n - 1].copy()
        return z[n - 1] + theta * (z[n] - z[n - 1])

    def evaluate(self, kind: str, name: str, t: float) -> np.ndarray:
        try:
            fn = {"bar": self.bar, "underline": self.underline, "hat": self.hat}[kind]
        except KeyError:
            raise ValueError(f"unknown interpolant kind {kind!r}") from None
        return fn(name, t)

    def _locate_zero(self, name, t):
        if t != 0.0:
            raise ValueError(f"t = {t} outside [0, 0]")
        return self.field(name)[0]


def interpolant_norms(z: np.ndarray, h: float, inner) -> dict[str, float]:
    """Norms of the interpolants of the sequence ``z`` computed from its values.

    ``inner(u, v)`` is the inner product of the space Z.  Keys follow the usual
    identities: L-infinity and L2(0,T;Z) norms of bar, underline, hat and the time
    derivative of hat, plus the differences ``bar - hat`` and ``bar - underline``.
    """
    N = z.shape[0] - 1
    sq = np.array([inner(z[n], z[n]) for n in range(N + 1)])
    dz = np.diff(z, axis=0)
    dsq = np.array([inner(d, d) for d in dz])
    cross = np.array([inner(z[n], z[n + 1]) for n in range(N)])
    out = {
        "bar_Linf": math.sqrt(sq[1:].max()) if N else math.sqrt(sq[0]),
        "underline_Linf": math.sqrt(sq[:-1].max()) if N else math.sqrt(sq[0]),
        "dt_hat_Linf": math.sqrt(dsq.max()) / h if N else 0.0,
        "bar_L2sq": h * sq[1:].sum(),
        "underline_L2sq": h * sq[:-1].sum(),
        "dt_hat_L2sq": h * (dsq / h ** 2).sum(),
        "hat_Linf": math.sqrt(sq.max()),
        # exact integral of a quadratic in time on each interval
        "hat_L2sq": h / 3.0 * (sq[:-1] + cross + sq[1:]).sum(),
        "bar_minus_hat_Linf": math.sqrt(dsq.max()) if N else 0.0,
        "bar_minus_hat_L2sq": h / 3.0 * dsq.sum(),
        "bar_minus_underline_L2sq": h * dsq.sum(),
    }
    return out


def l2_time_distance(z_coarse: np.ndarray, h_coarse: float, z_fine: np.ndarray, h_fine: float,
                     inner) -> float:
    """``||hat z_coarse - hat z_fine||_{L2(0,T;Z)}`` for nested uniform meshes.

    The coarse interpolant is linear on each fine interval, so the difference is
    piecewise linear on the fine mesh and its squared norm integrates exactly.
    """
    ratio = int(round(h_coarse / h_fine))
    if abs(ratio * h_fine - h_coarse) > 1e-12 * h_coarse or ratio < 1:
        raise ValueError("meshes are not nested")
    Nc = z_coarse.shape[0] - 1
    if z_fine.shape[0] - 1 != Nc * ratio:
        raise ValueError("meshes cover different horizons")
    theta = np.arange(ratio)[:, None] / ratio
    fine_from_coarse = np.empty_like(z_fine)
    zc = z_coarse.reshape(Nc + 1, -1)
    interp = (zc[:-1, None, :] * (1.0 - theta[None]) + zc[1:, None, :] * theta[None])
    fine_from_coarse[:-1] = interp.reshape((Nc * ratio,) + z_fine.shape[1:])
    fine_from_coarse[-1] = z_coarse[-1]
    e = z_fine - fine_from_coarse
    sq = np.array([inner(v, v) for v in e])
    cross = np.array([inner(e[n], e[n + 1]) for n in range(e.shape[0] - 1)])
    return math.sqrt(max(h_fine / 3.0 * (sq[:-1] + cross + sq[1:]).sum(), 0.0))
