"""Command line: run, reproduce, fit and validate scenarios."""

import argparse
import os
from pathlib import Path
import sys

import numpy as np

from . import config, fitkit
from .levels import ValidationError
from .pulses import SchedulingError
from .runner import run_scenario, BudgetError, csv_text, json_text
from .reproduce import reproduce, FIGURES, UnknownFigureError

OUT_DIR_ENV = "RAMANQD_OUT_DIR"


def _out_dir(args, default):
    if args.out_dir:
        return Path(args.out_dir)
    env = os.environ.get(OUT_DIR_ENV)
    return Path(env) if env else Path(default)


def cmd_run(args):
    scn = config.load(args.file)
    if args.seed is not None:
        scn = scn.with_seed(args.seed)
    out = _out_dir(args, Path("out") / scn.name)
    res = run_scenario(scn, out, args.workers)
    print(f"{scn.experiment}: wrote {', '.join(sorted(res.files))} and manifest.json to {out}")
    for key in ("tau", "g2_zero", "center_slope", "preparation_efficiency"):
        if key in res.summary:
            print(f"  {key} = {res.summary[key]:.6g}")
    return 0


def cmd_reproduce(args):
    out = _out_dir(args, Path("out") / f"fig{args.id}")
    res, checks = reproduce(args.id, out, args.workers, args.seed)
    print(f"figure {args.id}: tables in {out}")
    for c in checks:
        print("  " + c.line())
    return 0 if all(c.passed for c in checks) else 1


def _read_xy(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] < 2:
        raise ValueError(f"{path}: need at least two columns")
    return data[:, 0], data[:, 1]


def cmd_fit(args):
    try:
        fitter = fitkit.MODELS[args.model]
    except KeyError:
        raise ValueError(f"unknown model {args.model!r}; choose from {', '.join(fitkit.MODELS)}")
    src = Path(args.csv)
    paths = sorted(src.glob("*.csv")) if src.is_dir() else [src]
    if not paths:
        raise ValueError(f"no CSV files in {src}")
    results = []
    for p in paths:
        x, y = _read_xy(p)
        results.append((p, fitter(x, y)))
    out = _out_dir(args, ".") if (args.out_dir or os.environ.get(OUT_DIR_ENV)) else None
    if len(results) == 1 and not src.is_dir():
        text = results[0][1].to_json(indent=2, sort_keys=True) + "\n"
        if out:
            out.mkdir(parents=True, exist_ok=True)
            (out / f"{src.stem}_{args.model}.json").write_text(text)
        print(text, end="")
        return 0 if results[0][1].converged else 1
    # batch mode: one summary row per file
    names = list(results[0][1].params)
    header = ["file"] + names + [f"{n}_err" for n in names] + ["r2", "converged", "flags"]
    rows = [[p.name] + [r.params[n] for n in names] + [r.errors.get(n, float("nan")) for n in names]
            + [r.r2, r.converged, "|".join(r.flags)] for p, r in results]
    text = csv_text(header, rows)
    if out:
        out.mkdir(parents=True, exist_ok=True)
        (out / f"fit_{args.model}_summary.csv").write_text(text)
    print(text, end="")
    return 0 if all(r.converged for _, r in results) else 1


def cmd_validate(args):
    scn = config.load(args.file)
    # building the sequence surfaces scheduling errors without running anything
    from .runner import control_spec, _scheme
    from .protocols import raman_sequence
    seq = scn["sequence"]
    if scn.experiment in ("hbt", "shaping", "spectrum_scan", "linewidth_vs_intensity"):
        raman_sequence(scn.level_system(), control_spec(scn), _scheme(scn), seq["detuning"],
                       seq["pump_duration"], seq["period"], seq["gap"],
                       eom_rise_time=seq["eom_rise_time"], n_repeats=seq["n_repeats"])
    print(f"{args.file}: ok ({scn.experiment}, seed {scn.seed})")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="ramanqd", description=__doc__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    common.add_argument("--workers", type=int, default=1, help="worker processes")
    common.add_argument("--out-dir", default=None,
                        help=f"output directory (else ${OUT_DIR_ENV}, else ./out/<name>)")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", parents=[common], help="run a scenario file")
    r.add_argument("file")
    r.set_defaults(func=cmd_run)
    r = sub.add_parser("reproduce", parents=[common], help="run a bundled figure scenario")
    r.add_argument("id", help=", ".join(FIGURES))
    r.set_defaults(func=cmd_reproduce)
    r = sub.add_parser("fit", parents=[common], help="fit a model to a CSV or a directory of CSVs")
    r.add_argument("model", help=", ".join(fitkit.MODELS))
    r.add_argument("csv")
    r.set_defaults(func=cmd_fit)
    r = sub.add_parser("validate", parents=[common], help="parse and check a scenario file")
    r.add_argument("file")
    r.set_defaults(func=cmd_validate)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.workers < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (config.ScenarioError, ValidationError, SchedulingError, BudgetError,
            UnknownFigureError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
