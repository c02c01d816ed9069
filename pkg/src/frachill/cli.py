"""``frachill run|check|study-h|study-lambda|probe-contraction --config <path>``.

Exit codes: 0 success, 2 configuration error, 3 solver failure, 4 check failure.
``FRACHILL_THREADS`` pins the transform thread count.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import harness
from .config import parse_config
from .io import SERIES_COLUMNS, write_snapshot, write_table
from .linalg import SolverFailure
from .spectral import ConfigurationError
from .stepper import SimState

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_CHECK = 0, 2, 3, 4
SUMMARY_COLUMNS = ("name", "value", "threshold", "status")

log = logging.getLogger("frachill")


def series_rows(traj, problem):
    g, ops, cfg = problem.grid, problem.ops, problem.cfg
    rows = []
    for n in range(traj.n_steps + 1):
        st = SimState(n, traj.mu[n], traj.phi[n], traj.s[n])
        if n == 0:
            it, ratio, res = 0, 0.0, (0.0, 0.0, 0.0)
        else:
            r = traj.reports[n - 1]
            it, ratio, res = r.outer_iters, r.outer_ratio, (r.residual_mu, r.residual_phi, r.residual_s)
        rows.append([n, n * traj.h, it, ratio, harness.energy(st, problem),
                     float(np.mean(cfg.alpha * st.mu + st.phi + st.s)), g.norm(st.mu),
                     ops.B.power_norm(cfg.sigma, st.phi), g.norm(st.s), *res])
    return rows


def _emit_summary(lines, out: Path, append: bool = True) -> bool:
    path = out / "check_summary.csv"
    new = not (append and path.exists())
    with open(path, "w" if new else "a") as fh:
        if new:
            fh.write(",".join(SUMMARY_COLUMNS) + "\n")
        for line in lines:
            fh.write(line.csv() + "\n")
    for line in lines:
        print(line.csv())
    return all(line.status == "pass" or line.status.startswith("skipped") for line in lines)


def cmd_run(cfg, problem, out: Path, args):
    every = cfg.snapshots_every
    if every:
        write_snapshot(out / "snap_000000.fcht", 0.0, problem.initial.mu, problem.initial.phi,
                       problem.initial.s)

    def snap(state, report):
        if every and state.n % every == 0:
            write_snapshot(out / f"snap_{state.n:06d}.fcht", state.n * cfg.h, state.mu, state.phi,
                           state.s)

    traj = problem.run(callback=snap)
    write_table(out / "series.csv", SERIES_COLUMNS, series_rows(traj, problem))
    print(f"wrote {out / 'series.csv'} ({traj.n_steps} steps)")
    return EXIT_OK, traj


def check_lines(traj, problem):
    budget = harness.solver_budget(problem)
    worst = max((max(r.residual_mu, r.residual_phi, r.residual_s) for r in traj.reports), default=0.0)
    lines = [harness.CheckLine("step_residuals", worst, 10 * budget,
                               harness._status(worst <= 10 * budget))]
    ratio = max((r.outer_ratio for r in traj.reports), default=0.0)
    lines.append(harness.CheckLine("outer_ratio", ratio, 1.0, harness._status(ratio < 1.0)))
    _, energy_line = harness.check_energy_inequality(traj, problem)
    lines.append(energy_line)
    mass = harness.check_mass_conservation(traj, problem)
    lines.append(harness.CheckLine("mass_drift", mass.drift, mass.bound, mass.status))
    comp = harness.check_complementarity(traj, problem)
    key = {"obstacle": "sign_upper", "none": "xi"}.get(comp.variant, "yosida_mismatch")
    value = max(comp.norms.get(k, 0.0) for k in (key, "sign_lower", "interior"))
    lines.append(harness.CheckLine("complementarity", value, comp.tol, harness._status(comp.passed)))
    return lines


def cmd_check(cfg, problem, out: Path, args):
    code, traj = cmd_run(cfg, problem, out, args)
    ok = _emit_summary(check_lines(traj, problem), out)
    return (EXIT_OK if ok else EXIT_CHECK), traj


def cmd_study_h(cfg, problem, out: Path, args):
    levels = args.levels or 3
    res = harness.study_h(problem, levels)
    comb = res.combined()
    rows = [[0, res.values[0], cfg.n_steps, "", "", "", "", ""]]
    for k in range(1, levels):
        order = float(np.log2(comb[k - 2] / comb[k - 1])) if k >= 2 else ""
        rows.append([k, res.values[k], cfg.n_steps * 2 ** k, res.diffs["mu"][k - 1],
                     res.diffs["phi"][k - 1], res.diffs["s"][k - 1], comb[k - 1], order])
    write_table(out / "study_h.csv", ("level", "h", "n_steps", "diff_mu", "diff_phi", "diff_s",
                                      "diff_L2", "order"), rows)
    lines = [harness.CheckLine("study_h_decreasing", float(comb[-1]), float(comb[0]),
                               harness._status(all(res.decreasing(f) for f in ("mu", "phi", "s"))))]
    if levels >= 3:
        p = min(float(res.orders(f).min()) for f in ("mu", "phi", "s"))
        lines.append(harness.CheckLine("study_h_order", p, 0.4, harness._status(p >= 0.4)))
    ok = _emit_summary(lines, out)
    return (EXIT_OK if ok else EXIT_CHECK), res


def cmd_study_lambda(cfg, problem, out: Path, args):
    levels = args.levels or 4
    lams = [cfg.lam / 2 ** k for k in range(levels)]
    res = harness.study_lambda(problem, lams)
    comb = res.combined()
    comp = res.extras["complementarity"]
    rows = []
    for k in range(levels):
        d = [res.diffs[f][k - 1] for f in ("mu", "phi", "s")] + [comb[k - 1]] if k else [""] * 4
        rows.append([k, lams[k], *d, res.extras["overshoot"][k],
                     comp[k].norms.get("infeasibility", ""), comp[k].norms.get("gap", ""),
                     comp[k].norms.get("cubic_defect", "")])
    write_table(out / "study_lambda.csv", ("level", "lambda", "diff_mu", "diff_phi", "diff_s",
                                           "diff_L2", "overshoot", "infeasibility", "gap",
                                           "cubic_defect"), rows)
    lines = [harness.CheckLine("study_lambda_decreasing", float(comb[-1]), float(comb[0]),
                               harness._status(all(res.decreasing(f) for f in ("mu", "phi", "s"))))]
    if problem.potential.variant == "obstacle":
        ov = res.extras["overshoot"]
        lines.append(harness.CheckLine("overshoot_nonincreasing", ov[-1], ov[0],
                                       harness._status(harness.nonincreasing_within(ov, 0.1))))
        worst = max(c.norms["infeasibility"] for c in comp)
        lines.append(harness.CheckLine("violations_shrink", comp[-1].norms["infeasibility"], worst,
                                       harness._status(harness.violations_shrink(comp))))
    ok = _emit_summary(lines, out)
    return (EXIT_OK if ok else EXIT_CHECK), res


def cmd_probe_contraction(cfg, problem, out: Path, args):
    pairs = args.pairs
    probes = [harness.probe_contraction(problem.with_config(h=cfg.h / 2 ** k), pairs, args.seed)
              for k in range(2)]
    rows = [[p.h, i, float(r), float(r) / p.h] for p in probes for i, r in enumerate(p.ratios)]
    write_table(out / "probe_contraction.csv", ("h", "pair", "ratio", "K_hat"), rows)
    k0, k1 = probes[0].K_hat, probes[1].K_hat
    var = abs(k1 - k0) / k0 if k0 > 0 else 0.0
    spread = max(p.spread for p in probes)
    lines = [harness.CheckLine("K_hat_variation", var, 0.25, harness._status(var <= 0.25)),
             harness.CheckLine("pair_spread", spread, 2.0, harness._status(spread <= 2.0))]
    ok = _emit_summary(lines, out)
    return (EXIT_OK if ok else EXIT_CHECK), probes


COMMANDS = {"run": cmd_run, "check": cmd_check, "study-h": cmd_study_h,
            "study-lambda": cmd_study_lambda, "probe-contraction": cmd_probe_contraction}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="frachill", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="flat key = value config file")
    ap.add_argument("--out", help="output directory (default: out.dir from the config)")
    ap.add_argument("--levels", type=int, default=None, help="refinement levels for studies")
    ap.add_argument("--seed", type=int, default=0, help="seed for the contraction probe")
    ap.add_argument("--pairs", type=int, default=20, help="pairs for the contraction probe")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = parse_config(args.config)
        if args.levels is not None and args.levels < 2:
            raise ConfigurationError("--levels must be at least 2")
        problem = cfg.build()
        out = Path(args.out or cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        code, _ = COMMANDS[args.command](cfg, problem, out, args)
        return code
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverFailure as exc:
        where = f" at step {exc.step}" if exc.step is not None else ""
        print(f"solver failure{where}: {exc}", file=sys.stderr)
        if exc.history:
            tail = ", ".join(f"{v:.3e}" for v in exc.history[-5:])
            print(f"  last residuals: {tail}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
