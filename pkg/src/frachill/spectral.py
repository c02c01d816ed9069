"""Spectral setting on rectangles: grids, eigenbases of -Laplacian, fractional powers.

Fields are plain ``numpy`` arrays of shape ``grid.shape`` holding values at the
cell-centred collocation nodes.  Mode coefficients are arrays of the same shape,
laid out in transform order (index ``k`` along each axis).
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

NEUMANN = "neumann"
DIRICHLET = "dirichlet"
BOUNDARY_CONDITIONS = (NEUMANN, DIRICHLET)


class ConfigurationError(ValueError):
    """Invalid grid, operator or run configuration."""


def fft_workers() -> int:
    """Thread count for the trigonometric transforms, pinned by ``FRACHILL_THREADS``."""
    try:
        return max(1, int(os.environ.get("FRACHILL_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class GridSpec:
    extents: tuple[float, ...]
    points: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "extents", tuple(float(L) for L in self.extents))
        object.__setattr__(self, "points", tuple(int(n) for n in self.points))
        if len(self.extents) not in (1, 2) or len(self.points) != len(self.extents):
            raise ConfigurationError(
                f"only 1-D and 2-D rectangles are supported, got extents={self.extents} "
                f"points={self.points}")
        if any(not (L > 0 and math.isfinite(L)) for L in self.extents):
            raise ConfigurationError(f"extents must be positive, got {self.extents}")
        if any(n < 2 for n in self.points):
            raise ConfigurationError(f"need at least 2 points per axis, got {self.points}")

    @property
    def dimension(self) -> int:
        return len(self.extents)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.points

    @property
    def size(self) -> int:
        return math.prod(self.points)

    @property
    def volume(self) -> float:
        return math.prod(self.extents)

    @property
    def quadrature_weight(self) -> float:
        return self.volume / self.size

    def axes(self) -> list[np.ndarray]:
        """Cell-centred node coordinates ``(i + 1/2) L / n`` per axis."""
        return [(np.arange(n) + 0.5) * L / n for L, n in zip(self.extents, self.points)]

    def coordinates(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*self.axes(), indexing="ij"))

    def inner(self, u: np.ndarray, v: np.ndarray) -> float:
        return self.quadrature_weight * float(np.vdot(u, v))

    def norm(self, v: np.ndarray) -> float:
        return math.sqrt(self.inner(v, v))

    def integrate(self, v: np.ndarray) -> float:
        return self.quadrature_weight * float(np.sum(v))

    def mean(self, v: np.ndarray) -> float:
        return float(np.mean(v))


class SpectralOperator:
    """-Laplacian on ``grid`` with homogeneous Neumann or Dirichlet conditions.

    The eigenpairs are the exact continuous ones truncated to ``grid.size`` modes:
    cosines ``k >= 0`` (Neumann) or sines ``k >= 1`` (Dirichlet).  On the cell-centred
    grid the sampled eigenfunctions are orthonormal for the uniform quadrature
    ``(u, v)_h = |Omega|/N sum u v``, so the DCT-II/DST-II with orthonormal scaling is
    an isometry between fields and coefficients up to the factor ``sqrt(w)``.
    """

    def __init__(self, grid: GridSpec, bc: str = NEUMANN):
        bc = bc.lower()
        if bc not in BOUNDARY_CONDITIONS:
            raise ConfigurationError(f"unknown boundary condition {bc!r}")
        self.grid = grid
        self.bc = bc
        offset = 0 if bc == NEUMANN else 1
        per_axis = [((np.arange(n) + offset) * math.pi / L) ** 2
                    for L, n in zip(grid.extents, grid.points)]
        lam = per_axis[0]
        for extra in per_axis[1:]:
            lam = lam[:, None] + extra[None, :]
        self.eigenvalues = np.ascontiguousarray(lam, dtype=float)
        # stable sort so that ties keep transform order
        self.mode_order = np.argsort(self.eigenvalues, axis=None, kind="stable")
        self._sqrt_w = math.sqrt(grid.quadrature_weight)
        self._symbols: dict[float, np.ndarray] = {}
        self._transform = sfft.dctn if bc == NEUMANN else sfft.dstn
        self._inverse = sfft.idctn if bc == NEUMANN else sfft.idstn

    def __repr__(self):
        return f"SpectralOperator(bc={self.bc!r}, extents={self.grid.extents}, points={self.grid.points})"

    @property
    def sorted_eigenvalues(self) -> np.ndarray:
        return self.eigenvalues.ravel()[self.mode_order]

    def mode_index(self, rank: int) -> tuple[int, ...]:
        """Multi-index (transform layout) of the ``rank``-th smallest eigenvalue."""
        return tuple(int(i) for i in np.unravel_index(self.mode_order[rank], self.grid.shape))

    def same_basis(self, other: "SpectralOperator") -> bool:
        return self.grid == other.grid and self.bc == other.bc

    def _check(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape != self.grid.shape:
            raise ConfigurationError(f"field shape {v.shape} does not match grid {self.grid.shape}")
        return v

    def symbol(self, exponent: float) -> np.ndarray:
        """``lambda_j ** exponent`` with ``0 ** exponent := 0``."""
        exponent = float(exponent)
        if not (exponent > 0 and math.isfinite(exponent)):
            raise ValueError(f"exponent must be positive and finite, got {exponent}")
        sym = self._symbols.get(exponent)
        if sym is None:
            sym = np.where(self.eigenvalues > 0, self.eigenvalues, 0.0) ** exponent
            self._symbols[exponent] = sym
        return sym

    def eigenfunction(self, index: tuple[int, ...]) -> np.ndarray:
        """Sampled eigenfunction for a transform multi-index (normalized in ``(.,.)_h``)."""
        c = np.zeros(self.grid.shape)
        c[tuple(index)] = 1.0
        return self.from_modes(c)

    def to_modes(self, v: np.ndarray) -> np.ndarray:
        v = self._check(v)
        return self._sqrt_w * self._transform(v, type=2, norm="ortho", workers=fft_workers())

    def from_modes(self, c: np.ndarray) -> np.ndarray:
        c = self._check(c)
        return self._inverse(c, type=2, norm="ortho", workers=fft_workers()) / self._sqrt_w

    def apply_fractional(self, exponent: float, v: np.ndarray) -> np.ndarray:
        return self.from_modes(self.symbol(exponent) * self.to_modes(v))

    def graph_norm(self, exponent: float, v: np.ndarray) -> float:
        c = self.to_modes(v)
        return math.sqrt(float(np.sum((1.0 + self.symbol(2 * exponent)) * c * c)))

    def dual_norm(self, exponent: float, v: np.ndarray) -> float:
        c = self.to_modes(v)
        return math.sqrt(float(np.sum(c * c / (1.0 + self.symbol(2 * exponent)))))

    def power_norm(self, exponent: float, v: np.ndarray) -> float:
        """``||A^exponent v||_h`` without forming the field."""
        c = self.to_modes(v)
        return math.sqrt(float(np.sum(self.symbol(2 * exponent) * c * c)))

    def solve_shifted(self, exponent: float, a: float, rhs: np.ndarray) -> np.ndarray:
        """Solve ``(a I + A^exponent) v = rhs`` by diagonal inversion."""
        if not a > 0:
            raise ValueError(f"shift must be positive, got {a}")
        return self.from_modes(self.to_modes(rhs) / (a + self.symbol(exponent)))

    def truncate(self, v: np.ndarray, keep: float = 2.0 / 3.0) -> np.ndarray:
        """Zero all modes outside the lowest ``keep`` fraction along each axis."""
        c = self.to_modes(v)
        for axis, n in enumerate(self.grid.shape):
            cut = int(math.floor(keep * n))
            sl = [slice(None)] * c.ndim
            sl[axis] = slice(cut, None)
            c[tuple(sl)] = 0.0
        return self.from_modes(c)


def build_operator(grid: GridSpec, bc: str = NEUMANN) -> SpectralOperator:
    return SpectralOperator(grid, bc)
