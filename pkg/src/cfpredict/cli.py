"""Command-line entry point: ``cfpredict {synth,analyze,coverage}``.

Exit codes: 0 success, 2 invalid input or usage, 1 internal error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import conformal
from .counterfactual import analysis_json, analyze_unit, pairwise_table
from .data import DataError, Dataset, load_csv, save_csv, save_schema
from .experiments import (
    DEFAULTS,
    EXPERIMENTS,
    CoverageConfig,
    HighDimWorld,
    NonlinearWorld,
    coverage_run,
    sample,
    suggested_knots,
)
from .feature_map import build_spec

log = logging.getLogger("cfpredict")


def parse_unit(text: str, data: Dataset) -> np.ndarray:
    """Covariate row from a JSON object keyed by column name.

    ``"__all__": v`` fills every column not named explicitly.  Missing
    categorical columns default to the reference category with a warning.
    """
    path = Path(text)
    if not text.lstrip().startswith("{") and path.is_file():
        text = path.read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise DataError(f"--unit is not valid JSON ({err})") from None
    if not isinstance(doc, dict):
        raise DataError("--unit must be a JSON object keyed by column name")
    unknown = set(doc) - set(data.names) - {"__all__"}
    if unknown:
        raise DataError(f"--unit names unknown column(s): {sorted(unknown)}")
    fill = doc.get("__all__")
    x = np.empty(len(data.schema))
    defaulted = []
    for j, col in enumerate(data.schema):
        if col.name in doc:
            value = doc[col.name]
        elif fill is not None:
            value = fill
        elif col.is_categorical:
            value = 0
            defaulted.append(col.name)
        else:
            raise DataError(f"--unit is missing continuous column {col.name!r}")
        try:
            x[j] = float(value)
        except (TypeError, ValueError):
            raise DataError(f"--unit value for {col.name!r} is not a number") from None
    if defaulted:
        warnings.warn(f"unit columns defaulted to 0: {', '.join(defaulted)}", stacklevel=2)
    return x


def cmd_synth(args) -> int:
    rng = np.random.default_rng(args.seed)
    if args.experiment == "nonlinear":
        world = NonlinearWorld()
    else:
        world = HighDimWorld.draw(args.d, args.rank, rng)
    n = args.n or DEFAULTS[args.experiment]["n"]
    data, _ = sample(world, n, rng)
    save_csv(data, args.out)
    schema_out = args.schema_out or str(Path(args.out).with_suffix(".schema.json"))
    save_schema(data.schema, schema_out)
    log.info("wrote %d rows to %s and schema to %s", data.n, args.out, schema_out)
    return 0


def cmd_analyze(args) -> int:
    data = load_csv(args.data, args.schema)
    x = parse_unit(args.unit, data)
    m = args.knots
    if m is None:
        cap = suggested_knots(data)
        m = 10 if cap is None else min(10, cap)
    spec = build_spec(data, m)
    grid = conformal.make_grid(data.y, args.grid_size, args.margin)
    analyses = analyze_unit(data, x, m, spec=spec, grid=grid)
    table = pairwise_table(analyses, x) if len(analyses) >= 2 else None
    out = analysis_json(analyses, args.beta, spec, data.exposure_labels, table)
    out["exposure_labels"] = list(data.exposure_labels)
    text = json.dumps(out, indent=2)
    if args.out and args.out != "-":
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)
    if args.scores_csv:
        conformal.write_scores_csv(
            args.scores_csv, [(data.exposure_labels[a.exposure], a.scores) for a in analyses]
        )
    for a, e in zip(analyses, out["exposures"]):
        spans = ", ".join(f"[{lo:.4g}, {hi:.4g}]" for lo, hi in e["intervals"]) or "empty"
        print(f"exposure {e['z']}: n={a.n} point={a.point:.4g} {round(100 * args.beta)}% set {spans}",
              file=sys.stderr)
    if table is not None:
        labelled = dataclasses.replace(table, exposures=tuple(data.exposure_labels))
        print("counterfactual confidence:\n" + labelled.format(), file=sys.stderr)
    return 0


def cmd_coverage(args) -> int:
    cfg = CoverageConfig(
        experiment=args.experiment,
        runs=args.runs,
        beta=args.beta,
        seed=args.seed,
        n=args.n,
        m=args.knots,
        d=args.d,
        rank=args.rank,
        grid_size=args.grid_size,
        margin=args.margin,
        fixed_covariances=args.fixed_covariances,
    )
    report = coverage_run(cfg, threads=args.threads)
    print(report.table())
    if args.json:
        Path(args.json).write_text(report.to_json() + "\n", encoding="utf-8")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cfpredict", description="Counterfactual prediction sets and confidence from observational data.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="draw a synthetic observational dataset")
    p.add_argument("--experiment", choices=EXPERIMENTS, required=True)
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--schema-out")
    p.add_argument("--d", type=int, default=200)
    p.add_argument("--rank", type=int, default=150)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("analyze", help="prediction sets and confidences for one unit")
    p.add_argument("--data", required=True)
    p.add_argument("--schema")
    p.add_argument("--unit", required=True, help="JSON object (or file) keyed by column name")
    p.add_argument("--beta", type=float, default=0.9)
    p.add_argument("--knots", type=int)
    p.add_argument("--grid-size", type=int, default=conformal.GRID_SIZE)
    p.add_argument("--margin", type=float, default=conformal.GRID_MARGIN)
    p.add_argument("--out")
    p.add_argument("--scores-csv")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("coverage", help="Monte Carlo coverage of the prediction sets")
    p.add_argument("--experiment", choices=EXPERIMENTS, required=True)
    p.add_argument("--runs", type=int, default=1000)
    p.add_argument("--beta", type=float, default=0.9)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--n", type=int)
    p.add_argument("--knots", type=int)
    p.add_argument("--d", type=int, default=200)
    p.add_argument("--rank", type=int, default=150)
    p.add_argument("--grid-size", type=int, default=conformal.GRID_SIZE)
    p.add_argument("--margin", type=float, default=conformal.GRID_MARGIN)
    p.add_argument("--fixed-covariances", action="store_true",
                   help="draw the high-dimensional covariances once, not per replicate")
    p.add_argument("--json")
    p.set_defaults(func=cmd_coverage)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    beta = getattr(args, "beta", None)
    if beta is not None and not 0 < beta < 1:
        parser.error("--beta must lie in (0, 1)")
    try:
        return args.func(args)
    except (DataError, ValueError, FileNotFoundError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except Exception:
        log.exception("internal error")
        return 1


if __name__ == "__main__":
    sys.exit(main())
