"""Command-line front end.

Exit codes: 0 success / stealthy, 1 alarm raised or case-study values off
tolerance, 2 configuration error, 3 runtime data fault.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ConfigError, builtin_scenario, builtin_scenario_names, load_config
from .dynamics import ControlInput
from .observer import StepFault
from . import pipeline

EXIT_OK, EXIT_ALARM, EXIT_CONFIG, EXIT_FAULT = 0, 1, 2, 3


def _load(args):
    if args.config is None:
        raise ConfigError("--config is required (a path, or builtin:<name>)")
    if args.config.startswith("builtin:"):
        cfg = builtin_scenario(args.config.split(":", 1)[1])
    else:
        cfg = load_config(args.config)
    return cfg.with_overrides(seed=args.seed, output_dir=args.out)


def _outdir(cfg) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _parse_input(text: str) -> ControlInput:
    try:
        v, omega = (float(p) for p in text.split(","))
        return ControlInput(v, omega)
    except ValueError:
        raise ConfigError(f"--input expects finite V,OMEGA, got {text!r}") from None


def cmd_analyze_centralizer(args) -> int:
    if args.input:
        rows = pipeline.centralizer_rows([_parse_input(t) for t in args.input])
    else:
        rows = pipeline.centralizer_rows_for(_load(args))
    for row in rows:
        print(json.dumps(row))
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _load(args)
    result = pipeline.run_simulation(cfg)
    out = _outdir(cfg)
    result.trajectory.write_csv(out / "trajectory.csv")
    result.trace.write_csv(out / "observer.csv")
    norms = result.trace.innovation_norms
    print(
        f"{cfg.name}: {len(result.trajectory.inputs)} steps, "
        f"max innovation {norms.max() if norms.size else 0.0:.3f} m, "
        f"{int(result.trace.alarms.sum())} alarm steps -> {out}"
    )
    return EXIT_OK


def cmd_transfer(args) -> int:
    cfg = _load(args)
    result = pipeline.run_transfer_pipeline(cfg)
    out = _outdir(cfg)
    result.victim.write_csv(out / "trajectory.csv")
    result.nominal.write_csv(out / "nominal_trajectory.csv")
    result.training.write_csv(out / "training.csv")
    result.transfer.write_csv(out / "impact.csv")
    (out / "learned_attack.json").write_text(result.learned.to_json() + "\n")
    verdict = result.verdict()
    (out / "verdict.json").write_text(json.dumps(verdict, indent=2, sort_keys=True) + "\n")
    state = "stealthy" if verdict["stealthy"] else f"ALARM at t={verdict['alarm_times'][0]:.2f} s"
    print(
        f"{cfg.name}: {state}; max innovation {verdict['max_innovation']:.3f} m, "
        f"max bound {verdict['max_bound']:.3f} m (tau {verdict['tau']:g} m), epsilon {verdict['epsilon']:.3f}"
    )
    return EXIT_OK if verdict["stealthy"] else EXIT_ALARM


def cmd_reproduce_case_study(args) -> int:
    rows = pipeline.reproduce_rows()
    print(f"{'quantity':<26}{'reported':>12}{'computed':>16}{'abs diff':>12}{'tol':>10}  ok")
    for r in rows:
        print(f"{r.quantity:<26}{r.reported:>12.6g}{r.computed:>16.9g}{r.diff:>12.3g}{r.tol:>10.0e}  {'yes' if r.ok else 'NO'}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        lines = ["quantity,reported,computed,abs_diff,tol,ok"]
        lines += [f"{r.quantity},{r.reported!r},{r.computed!r},{r.diff!r},{r.tol!r},{int(r.ok)}" for r in rows]
        (out / "reproduce.csv").write_text("\n".join(lines) + "\n")
    return EXIT_OK if all(r.ok for r in rows) else EXIT_ALARM


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="liespoof", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="scenario JSON path, or builtin:<name> (" + ", ".join(builtin_scenario_names()) + ")")
        p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
        p.add_argument("--out", default=None, help="output directory (overrides output_dir)")

    p = sub.add_parser("analyze-centralizer", help="commuting-subspace report per input segment (JSON lines)")
    common(p)
    p.add_argument("--input", action="append", metavar="V,OMEGA", help="analyze this input instead of a config")
    p.set_defaults(func=cmd_analyze_centralizer)

    p = sub.add_parser("simulate", help="run the nominal scenario; write trajectory.csv and observer.csv")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("transfer", help="generate, learn and transfer an attack; exit 1 on alarm")
    common(p)
    p.set_defaults(func=cmd_transfer)

    p = sub.add_parser("reproduce-paper", help="case-study values vs computed; exit 1 if off tolerance")
    p.add_argument("--out", default=None, help="also write reproduce.csv here")
    p.set_defaults(func=cmd_reproduce_case_study)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StepFault as exc:
        print(f"runtime fault at step {exc.step}: {exc.cause}", file=sys.stderr)
        return EXIT_FAULT


if __name__ == "__main__":
    sys.exit(main())
