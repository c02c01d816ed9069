"""Measured contraction constant of the fixed-point map versus alpha and h.

The map's Lipschitz constant behaves like ``h^2 P^2 / alpha`` unless ``alpha`` is of
order ``h sup P``, where it becomes ``O(h)``.  This prints ``ratio / h`` at h and h/2:
a constant column means the O(h) regime, a halving column the O(h^2) regime.

    python3 scripts/contraction_regimes.py
"""
from pathlib import Path

from frachill import harness
from frachill.config import parse_config

ROOT = Path(__file__).resolve().parents[1]


def main():
    base = parse_config(ROOT / "configs" / "regular.cfg")
    print(f"{'alpha':>8} {'K_hat(h)':>10} {'K_hat(h/2)':>11} {'variation':>10}")
    for alpha in (1.0, 1e-2, 1e-3, 1e-4):
        k = []
        for h in (base.h, base.h / 2):
            prob = base.replace(alpha=alpha, h=h).build()
            k.append(harness.probe_contraction(prob, pairs=5).K_hat)
        print(f"{alpha:8.0e} {k[0]:10.4g} {k[1]:11.4g} {abs(k[1] - k[0]) / k[0]:10.3f}")


if __name__ == "__main__":
    main()
