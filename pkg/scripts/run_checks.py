"""Run every CLI command on the shipped configs; outputs land in out/<name>/.

    python3 scripts/run_checks.py [--quick]

``--quick`` shortens the check runs to 50 steps; studies keep their horizons.  Exit status is the worst CLI exit code.
"""
import argparse
import sys
import tempfile
from pathlib import Path

from frachill.cli import main
from frachill.config import parse_config

ROOT = Path(__file__).resolve().parents[1]
PLAN = [
    ("regular", "check", []),
    ("regular", "probe-contraction", ["--pairs", "10"]),
    ("regular", "study-h", ["--levels", "4"]),
    ("obstacle", "check", []),
    ("obstacle", "study-lambda", ["--levels", "4"]),
    ("linear", "check", []),
    ("regular_2d", "check", []),
]


def main_(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--quick", action="store_true")
    args = ap.parse_args(argv)
    worst = 0
    with tempfile.TemporaryDirectory() as tmp:
        for name, cmd, extra in PLAN:
            cfg_path = ROOT / "configs" / f"{name}.cfg"
            steps = {"study-h": 100, "check": 50 if args.quick else None}.get(cmd)
            if steps:
                # the h-study runs 100 coarse steps (8x finer at the last level)
                cfg = parse_config(cfg_path).replace(n_steps=steps)
                cfg_path = Path(tmp) / f"{name}.cfg"
                cfg_path.write_text(cfg.canonical())
            out = ROOT / "out" / name / cmd
            print(f"== {name}: {cmd}")
            code = main([cmd, "--config", str(cfg_path), "--out", str(out), *extra])
            worst = max(worst, code)
    return worst


if __name__ == "__main__":
    sys.exit(main_())
