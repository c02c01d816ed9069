"""Flat ``key = value`` run configuration, initial-data catalog, and problem assembly.

Config files hold one ``key = value`` per line; ``#`` starts a comment.  ``h`` and
``n_steps`` are required; every other key has a default.  ``canonical()`` writes every
effective value in a fixed key order with round-trippable float formatting.

Initial-data expressions (``init.mu``, ``init.phi``, ``init.s``):

``constant:<v>``
    the constant ``v``.
``cosine:<k>:<amp>``
    ``amp * prod_i cos(k pi x_i / L_i)`` (a Neumann eigenfunction shape).
``gaussian:<center>:<width>:<amp>``
    ``amp * exp(-|x - c|^2 / (2 width^2))`` with ``c = (center, ..., center)``.
``random:<seed>:<amp>``
    ``amp * (2u - 1)`` per node in row-major order, ``u = (z >> 11) / 2^53`` where ``z``
    runs through the splitmix64 stream started at ``seed``.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .potentials import Proliferation, make_potential
from .spectral import BOUNDARY_CONDITIONS, ConfigurationError, GridSpec
from .stepper import Problem, SimConfig, SimState, make_operators

POTENTIALS = ("regular", "log", "obstacle", "none")
P_KINDS = ("constant", "smooth_clamp")
REQUIRED = ("h", "n_steps")


@dataclass(frozen=True)
class RunConfig:
    dimension: int = 1
    extent_x: float = 2 * math.pi
    extent_y: float = 2 * math.pi
    n_x: int = 128
    n_y: int = 64
    bc_A: str = "neumann"
    bc_B: str = "neumann"
    bc_C: str = "neumann"
    rho: float = 0.5
    sigma: float = 0.5
    tau: float = 0.5
    alpha: float = 1.0
    beta: float = 1.0
    h: float = 1e-3
    n_steps: int = 100
    lam: float = 1e-3
    potential: str = "regular"
    c1: float = 2.0
    c2: float = 1.0
    P_kind: str = "smooth_clamp"
    P_p0: float = 1.0
    P_width: float = 1.0
    L_margin: float = 0.1
    tol_outer: float = 1e-10
    tol_cg: float = 1e-12
    tol_newton: float = 1e-11
    max_outer: int = 100
    max_cg: int = 2000
    max_newton: int = 50
    adapt_h: bool = False
    dealias: bool = False
    init_mu: str = "constant:0"
    init_phi: str = "cosine:2:0.5"
    init_s: str = "constant:1"
    out_dir: str = "out"
    snapshots_every: int = 0

    def __post_init__(self):
        validate(self)

    # -- assembly ---------------------------------------------------------------

    @property
    def grid(self) -> GridSpec:
        if self.dimension == 1:
            return GridSpec((self.extent_x,), (self.n_x,))
        return GridSpec((self.extent_x, self.extent_y), (self.n_x, self.n_y))

    def potential_object(self):
        return make_potential(self.potential, self.c1, self.c2)

    def stabilization(self) -> float:
        return self.potential_object().stabilization_L(self.L_margin)

    def sim_config(self) -> SimConfig:
        return SimConfig(alpha=self.alpha, beta=self.beta, rho=self.rho, sigma=self.sigma,
                         tau=self.tau, h=self.h, n_steps=self.n_steps, lam=self.lam,
                         L=self.stabilization(), tol_outer=self.tol_outer, tol_cg=self.tol_cg,
                         tol_newton=self.tol_newton, max_outer=self.max_outer,
                         max_cg=self.max_cg, max_newton=self.max_newton,
                         adapt_h=self.adapt_h, dealias=self.dealias)

    def initial_state(self) -> SimState:
        g = self.grid
        return SimState(0, evaluate_init(self.init_mu, g), evaluate_init(self.init_phi, g),
                        evaluate_init(self.init_s, g))

    def build(self) -> Problem:
        g = self.grid
        ops = make_operators(g, self.bc_A, self.bc_B, self.bc_C)
        prolif = Proliferation(self.P_kind, self.P_p0, self.P_width)
        problem = Problem(self.sim_config(), ops, self.potential_object(), prolif, self.initial_state())
        problem.scheme().check_admissible(problem.initial)
        return problem

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    # -- serialization ----------------------------------------------------------

    def canonical(self) -> str:
        lines = []
        for key, name in KEYS.items():
            lines.append(f"{key} = {format_value(getattr(self, name))}")
        return "\n".join(lines) + "\n"


# file key -> field name, in canonical order
KEYS = {
    "dimension": "dimension", "extent.x": "extent_x", "extent.y": "extent_y",
    "n.x": "n_x", "n.y": "n_y", "bc.A": "bc_A", "bc.B": "bc_B", "bc.C": "bc_C",
    "rho": "rho", "sigma": "sigma", "tau": "tau", "alpha": "alpha", "beta": "beta",
    "h": "h", "n_steps": "n_steps", "lambda": "lam", "potential": "potential",
    "c1": "c1", "c2": "c2", "P.kind": "P_kind", "P.p0": "P_p0", "P.width": "P_width",
    "L.margin": "L_margin", "tol.outer": "tol_outer", "tol.cg": "tol_cg",
    "tol.newton": "tol_newton", "max.outer": "max_outer", "max.cg": "max_cg",
    "max.newton": "max_newton", "adapt_h": "adapt_h", "dealias": "dealias",
    "init.mu": "init_mu", "init.phi": "init_phi", "init.s": "init_s",
    "out.dir": "out_dir", "snapshots.every": "snapshots_every",
}
_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(RunConfig)}


def format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _convert(kind: str, text: str):
    if kind == "bool":
        t = text.lower()
        if t in ("true", "yes", "1", "on"):
            return True
        if t in ("false", "no", "0", "off"):
            return False
        raise ValueError(f"expected a boolean, got {text!r}")
    if kind == "int":
        return int(text)
    if kind == "float":
        v = float(text)
        if not math.isfinite(v):
            raise ValueError(f"expected a finite number, got {text!r}")
        return v
    return text


def validate(cfg: RunConfig) -> None:
    if cfg.dimension not in (1, 2):
        raise ConfigurationError(f"dimension must be 1 or 2, got {cfg.dimension}")
    for name in ("bc_A", "bc_B", "bc_C"):
        if getattr(cfg, name).lower() not in BOUNDARY_CONDITIONS:
            raise ConfigurationError(f"{name} must be one of {BOUNDARY_CONDITIONS}")
    if cfg.potential not in POTENTIALS:
        raise ConfigurationError(f"potential must be one of {POTENTIALS}, got {cfg.potential!r}")
    if cfg.P_kind not in P_KINDS:
        raise ConfigurationError(f"P.kind must be one of {P_KINDS}, got {cfg.P_kind!r}")
    if cfg.n_steps < 1:
        raise ConfigurationError(f"n_steps must be >= 1, got {cfg.n_steps}")
    if cfg.snapshots_every < 0:
        raise ConfigurationError("snapshots.every must be >= 0")
    if not cfg.L_margin > 0:
        raise ConfigurationError("L.margin must be positive")
    for name in ("c1", "c2", "P_width"):
        if not getattr(cfg, name) > 0:
            raise ConfigurationError(f"{name} must be positive")
    if cfg.P_p0 < 0:
        raise ConfigurationError("P.p0 must be nonnegative")
    for name in ("max_outer", "max_cg", "max_newton"):
        if getattr(cfg, name) < 1:
            raise ConfigurationError(f"{name} must be >= 1")
    for name in ("init_mu", "init_phi", "init_s"):
        parse_init(getattr(cfg, name))
    # SimConfig checks the remaining positivity constraints
    cfg.sim_config()


def parse_config_text(text: str, source: str = "<config>") -> RunConfig:
    values = {}
    seen = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in KEYS:
            raise ConfigurationError(f"{source}:{lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigurationError(f"{source}:{lineno}: duplicate key {key!r} "
                                     f"(first set on line {seen[key]})")
        name = KEYS[key]
        try:
            values[name] = _convert(_FIELD_TYPES[name], value)
            if name.startswith("init_"):
                parse_init(values[name])
        except (ValueError, ConfigurationError) as exc:
            raise ConfigurationError(f"{source}:{lineno}: bad value for {key!r}: {exc}") from None
        seen[key] = lineno
    missing = [k for k in REQUIRED if KEYS[k] not in values]
    if missing:
        raise ConfigurationError(f"{source}: missing required key(s): {', '.join(missing)}")
    try:
        cfg = RunConfig(**values)
    except ConfigurationError as exc:
        raise ConfigurationError(f"{source}: {exc}") from None
    return cfg


def parse_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from None
    cfg = parse_config_text(text, str(path))
    # admissibility gates on the initial data
    try:
        cfg.build()
    except ConfigurationError as exc:
        line = _line_of(text, "init.phi")
        where = f"{path}:{line}" if line else str(path)
        raise ConfigurationError(f"{where}: {exc}") from None
    return cfg


def _line_of(text: str, key: str) -> int | None:
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if raw.split("#", 1)[0].split("=", 1)[0].strip() == key:
            return lineno
    return None


# -- initial data -----------------------------------------------------------------------

def parse_init(expr: str) -> tuple[str, tuple]:
    parts = expr.strip().split(":")
    kind, args = parts[0], parts[1:]
    arity = {"constant": 1, "cosine": 2, "gaussian": 3, "random": 2}
    if kind not in arity:
        raise ConfigurationError(f"unknown initial-data expression {expr!r}; "
                                 f"expected one of {sorted(arity)}")
    if len(args) != arity[kind]:
        raise ConfigurationError(f"{kind} takes {arity[kind]} argument(s), got {expr!r}")
    try:
        if kind == "cosine":
            vals = (int(args[0]), float(args[1]))
        elif kind == "random":
            vals = (int(args[0]), float(args[1]))
            if not 0 <= vals[0] < 2 ** 64:
                raise ValueError("seed must fit in 64 bits")
        else:
            vals = tuple(float(a) for a in args)
    except ValueError as exc:
        raise ConfigurationError(f"bad argument in {expr!r}: {exc}") from None
    if not all(math.isfinite(v) for v in vals):
        raise ConfigurationError(f"non-finite argument in {expr!r}")
    if kind == "gaussian" and not vals[1] > 0:
        raise ConfigurationError(f"gaussian width must be positive in {expr!r}")
    return kind, vals


_MASK = (1 << 64) - 1


def splitmix64(seed: int, count: int) -> np.ndarray:
    """First ``count`` outputs of the splitmix64 generator started at ``seed``."""
    with np.errstate(over="ignore"):
        k = np.arange(1, count + 1, dtype=np.uint64)
        z = np.uint64(seed & _MASK) + k * np.uint64(0x9E3779B97F4A7C15)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))


def evaluate_init(expr: str, grid: GridSpec) -> np.ndarray:
    kind, args = parse_init(expr)
    if kind == "constant":
        return np.full(grid.shape, args[0])
    coords = grid.coordinates()
    if kind == "cosine":
        k, amp = args
        out = np.full(grid.shape, amp)
        for x, L in zip(coords, grid.extents):
            out = out * np.cos(k * math.pi * x / L)
        return out
    if kind == "gaussian":
        c, w, amp = args
        r2 = sum((x - c) ** 2 for x in coords)
        return amp * np.exp(-r2 / (2 * w * w))
    seed, amp = args
    u = (splitmix64(seed, grid.size) >> np.uint64(11)).astype(np.float64) * 2.0 ** -53
    return amp * (2.0 * u - 1.0).reshape(grid.shape)
