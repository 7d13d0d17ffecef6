"""
Command-line interface.

Exit codes: 0 success, 2 validation error (bad input file, config key,
experiment spec), 3 fit failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from . import io as pio
from .errors import FitError, PcwqdError, Unreachable, ValidationError
from .geometry import PRESETS, area_fraction, read_geometry_spec, solve_distance
from .pipeline import (
    KINDS,
    SCENARIO_SEED,
    SCENARIOS,
    Experiment,
    PipelineError,
    geometry_record,
    merge,
    run_experiment,
    synthesize_inputs,
    validate_config,
    _geometry_from_config,
)

EXIT_OK, EXIT_VALIDATION, EXIT_FIT = 0, 2, 3


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ValidationError("config must be a JSON object")
    return cfg


def _emit(report, out_dir: Path) -> None:
    sys.stdout.write(report.to_text())
    sys.stdout.write(f"# report written to {out_dir / 'report.txt'}\n")


def _run(kind, inputs, args) -> int:
    config = _load_config(args.config)
    if kind == "rt-scan" and args.scenario:
        config = merge(SCENARIOS[args.scenario], config)
    seed = args.seed if args.seed is not None else (SCENARIO_SEED if getattr(args, "scenario", None) else 0)
    e = Experiment(kind=kind, inputs={k: v for k, v in inputs.items() if v is not None},
                   seed=seed, config=config)
    out = Path(args.out_dir or ".")
    report = run_experiment(e, out, keep_going=args.keep_going)
    _emit(report, out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    """Write synthetic input files (and the scan ground truth) without fitting."""
    config = _load_config(args.config)
    if args.scenario:
        config = merge(SCENARIOS[args.scenario], config)
    seed = args.seed if args.seed is not None else (SCENARIO_SEED if args.scenario else 0)
    e = Experiment(kind=args.kind, seed=seed, config=config)
    out = Path(args.out_dir or ".")
    files, warns = synthesize_inputs(e, out)
    for w in warns:
        sys.stderr.write(f"warning: {w}\n")
    for f in files:
        print(out / f)
    return EXIT_OK


def cmd_geometry(args) -> int:
    config = _load_config(args.config)
    extra = set(config) - {"geometry"}
    if extra:
        raise ValidationError(f"unknown config keys {sorted(extra)} for geometry")
    validate_config("rt-scan", config)
    gcfg = dict(config.get("geometry", {}))
    if args.region:
        gcfg["region"] = args.region
    if args.spec:
        g, region = read_geometry_spec(args.spec), f"file:{Path(args.spec).name}"
    else:
        g, region = _geometry_from_config(gcfg)
    if not 0 < args.fraction <= 1:
        raise ValidationError("--fraction must lie in (0, 1]")
    try:
        d = solve_distance(g, args.fraction, d_max=args.d_max_nm * 1e-9 if args.d_max_nm else None)
    except Unreachable as exc:
        raise PipelineError("geometry", exc) from exc
    rec = geometry_record(g, region, args.fraction)
    rec["d_m"] = d
    rec["fraction_at_d"] = area_fraction(g, d)
    sys.stdout.write(pio.key_tree(json.loads(pio.dumps_json(rec))) + "\n")
    if args.out_dir is not None:
        pio.atomic_write(Path(args.out_dir) / "geometry.json", pio.dumps_json(rec))
    return EXIT_OK


def cmd_report(args) -> int:
    try:
        with open(args.experiment) as fh:
            spec = json.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read {args.experiment}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{args.experiment} is not valid JSON: {exc}") from None
    if isinstance(spec, dict) and args.config:
        spec = dict(spec, config=merge(spec.get("config", {}), _load_config(args.config)))
    if isinstance(spec, dict) and args.seed is not None:
        spec = dict(spec, seed=args.seed)
    e = Experiment.from_dict(spec)
    base = Path(args.experiment).parent
    e.inputs = {k: str(base / v) if not Path(v).is_absolute() else v for k, v in e.inputs.items()}
    out = Path(args.out_dir or ".")
    report = run_experiment(e, out, keep_going=args.keep_going)
    _emit(report, out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="64-bit seed for synthesis (default 0)")
    common.add_argument("--config", default=None, help="JSON file with per-module overrides")
    common.add_argument("--out-dir", default=None, help="directory for reports and plot data (default .)")
    common.add_argument("--keep-going", action="store_true",
                        help="record fitter failures in the report instead of exiting with 3")

    p = argparse.ArgumentParser(prog="pcwqd", description=__doc__.strip().splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="write synthetic input files")
    s.add_argument("kind", choices=KINDS)
    s.add_argument("--scenario", choices=sorted(SCENARIOS), default=None,
                   help="calibrated population preset (rt-scan only)")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("fit-scan", parents=[common], help="detect and fit dips in a scan CSV")
    s.add_argument("scan", nargs="?", default=None, help="scan CSV (synthesized if omitted)")
    s.add_argument("--histogram", default=None, help="decay histogram CSV for the ratio table")
    s.add_argument("--scenario", choices=sorted(SCENARIOS), default=None)
    s.set_defaults(func=lambda a: _run("rt-scan", {"scan": a.scan, "histogram": a.histogram}, a))

    s = sub.add_parser("fit-lifetime", parents=[common], help="fit a decay histogram CSV")
    s.add_argument("histogram", nargs="?", default=None)
    s.set_defaults(func=lambda a: _run("lifetime", {"histogram": a.histogram}, a), scenario=None)

    s = sub.add_parser("fit-iv", parents=[common], help="fit a diode I-V CSV")
    s.add_argument("iv", nargs="?", default=None)
    s.set_defaults(func=lambda a: _run("iv", {"iv": a.iv}, a), scenario=None)

    s = sub.add_parser("fit-rc", parents=[common], help="fit an RC modulation sweep CSV")
    s.add_argument("rc", nargs="?", default=None)
    s.set_defaults(func=lambda a: _run("rc-sweep", {"rc": a.rc}, a), scenario=None)

    s = sub.add_parser("geometry", help="W1 area-fraction tools")
    gsub = s.add_subparsers(dest="geometry_command", required=True)
    g = gsub.add_parser("solve", parents=[common], help="distance d for an area fraction")
    g.add_argument("--fraction", type=float, default=51 / 79, help="target area fraction (default 51/79)")
    g.add_argument("--region", choices=sorted(PRESETS), default=None, help="lattice preset (default first-row)")
    g.add_argument("--spec", default=None, help="geometry spec file (a_nm, r_nm, ...)")
    g.add_argument("--d-max-nm", type=float, default=None,
                   help="largest admissible distance; fractions below f(d_max) are unreachable")
    g.set_defaults(func=cmd_geometry)

    s = sub.add_parser("report", parents=[common], help="run an experiment JSON and write its report")
    s.add_argument("experiment", help="JSON with kind, inputs, seed, config")
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_VALIDATION
    except (PipelineError, FitError) as exc:
        sys.stderr.write(f"fit failure: {exc}\n")
        return EXIT_FIT
    except PcwqdError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_FIT


if __name__ == "__main__":
    sys.exit(main())
