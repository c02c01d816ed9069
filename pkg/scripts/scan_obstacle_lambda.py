"""Scan obstacle-run parameters for the lambda study (Cauchy decrease per field).

Short horizons are pre-asymptotic: the difference between lambda and lambda/2 can grow
before the contact set forms.  This prints, per setting, whether every field's
Cauchy differences decrease and whether overshoot and infeasibility shrink.

    python3 scripts/scan_obstacle_lambda.py
"""
import itertools
from pathlib import Path

from frachill import harness
from frachill.config import parse_config

ROOT = Path(__file__).resolve().parents[1]


def main():
    base = parse_config(ROOT / "configs" / "obstacle.cfg")
    print("alpha c2 amp n_steps | fields_decrease overshoot_ok violations_shrink")
    for alpha, c2, amp, n in itertools.product((1e-2, 1.0), (1.0, 2.0), (0.8, 0.95), (200, 400)):
        prob = base.replace(alpha=alpha, c2=c2, init_phi=f"cosine:2:{amp}", n_steps=n).build()
        res = harness.study_lambda(prob)
        fields = all(res.decreasing(f) for f in ("mu", "phi", "s"))
        over = harness.nonincreasing_within(res.extras["overshoot"], 0.1)
        shrink = harness.violations_shrink(res.extras["complementarity"])
        print(f"{alpha:g} {c2:g} {amp:g} {n} | {fields} {over} {shrink}", flush=True)


if __name__ == "__main__":
    main()
