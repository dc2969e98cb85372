"""Command-line entry point.

Exit codes: 0 success, 1 validation or usage error, 2 invariant-audit failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import sys

from . import __version__
from .engine import SimulationError, find_equilibrium, run
from .modes import ModeKind
from .params import OperatingEnvelope, ParameterError
from .plots import emit_plots
from .scenario import ScenarioError, load_scenario, scenario_to_dict, serialize_scenario
from .supervisor import schedule_steady_state
from .traceio import read_trace, write_trace
from .verify import verify_trace

EXIT_OK, EXIT_INVALID, EXIT_AUDIT = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _digest(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def _file_digest(path) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def build_manifest(scenario, outputs: dict[str, str]) -> dict:
    return {
        "tool": "h2grid",
        "version": __version__,
        "scenario": scenario.name,
        "scenario_digest": _digest(scenario_to_dict(scenario)),
        "config_digest": _digest(scenario.microgrid_params().to_dict()),
        "seed": scenario.seed,
        "outputs": {k: {"path": os.path.basename(p), "sha256": _file_digest(p)} for k, p in outputs.items()},
    }


def cmd_run(args) -> int:
    sc = load_scenario(args.scenario, lenient=args.lenient)
    if args.seed is not None:
        sc = sc.with_seed(args.seed)
    if args.dt is not None:
        if not args.dt > 0:
            raise ScenarioError([f"--dt: must be > 0, got {args.dt!r}"])
        sc = dataclasses.replace(sc, dt=args.dt)
    out = args.out or os.path.join("runs", sc.name)
    os.makedirs(out, exist_ok=True)
    trace = run(sc)
    outputs = {"scenario": os.path.join(out, "scenario.yaml"), "trace": os.path.join(out, "trace.csv")}
    with open(outputs["scenario"], "w", encoding="utf-8", newline="\n") as fh:
        fh.write(serialize_scenario(sc))
    write_trace(trace, outputs["trace"])
    for path in emit_plots(trace, out, title=sc.name):
        outputs[os.path.splitext(os.path.basename(path))[0]] = path
    manifest = build_manifest(sc, outputs)
    with open(os.path.join(out, "manifest.json"), "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    report = verify_trace(trace, sc)
    switches = sum(e.startswith("mode:") for r in trace for e in r.events)
    print(f"{sc.name}: {len(trace)} records, final mode {trace[-1].mode}, {switches} mode switches -> {out}")
    print(report.summary())
    if args.strict and not report.passed:
        return EXIT_AUDIT
    return EXIT_OK


def cmd_equilibrium(args) -> int:
    sc = load_scenario(args.scenario, lenient=args.lenient)
    if args.wind < 0:
        raise ScenarioError([f"--wind: must be >= 0, got {args.wind!r}"])
    mode = ModeKind.N if args.mode == "n" else ModeKind.E
    eq = find_equilibrium(mode, args.wind, sc.microgrid_params(), duty=args.duty)
    print(f"mode={eq.mode.value} U_ac={eq.U_ac:.9g} p.u. P={eq.P:.9g} p.u. P_AEL={eq.P_AEL:.9g} p.u. {eq.classification}")
    return EXIT_OK


def cmd_schedule(args) -> int:
    try:
        env = OperatingEnvelope(
            P_AEL_min=args.min_frac * args.rated,
            P_AEL_rated=args.rated,
            delta_ael=args.delta,
            delta_wind=args.delta,
            U_trip=float("inf"),
            trip_dwell=0.0,
            mode_dwell=0.0,
            ramp_limits=not args.no_ramp,
        )
        res = schedule_steady_state(args.mppt, args.prev, env, args.dt)
    except (ParameterError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    print(f"{res.P_AEL_result:.9g} {res.binding.value}")
    return EXIT_OK


def cmd_validate(args) -> int:
    sc = load_scenario(args.scenario, lenient=args.lenient)
    print(f"ok: {sc.name}")
    return EXIT_OK


def cmd_verify(args) -> int:
    ref = args.scenario or os.path.join(os.path.dirname(os.path.abspath(args.trace)), "scenario.yaml")
    if not args.scenario and not os.path.exists(ref):
        raise ScenarioError([f"verify: no scenario given and no scenario.yaml next to {args.trace}"])
    sc = load_scenario(ref, lenient=args.lenient)
    try:
        trace = read_trace(args.trace)
    except (OSError, ValueError) as exc:
        raise ScenarioError([f"trace: {exc}"]) from None
    report = verify_trace(trace, sc)
    print(report.summary())
    return EXIT_OK if report.passed else EXIT_AUDIT


def make_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="h2grid", description="Storage-less wind-to-electrolyzer microgrid simulator")
    p.add_argument("--version", action="version", version=f"h2grid {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def scenario_arg(sp):
        sp.add_argument("scenario", help="built-in name (case1..case5) or YAML file")
        sp.add_argument("--lenient", action="store_true", help="warn on unknown keys instead of failing")

    r = sub.add_parser("run", help="simulate, write trace, plots and manifest")
    scenario_arg(r)
    r.add_argument("--out", help="output directory (default runs/<name>)")
    r.add_argument("--seed", type=int, help="override the Weibull seed")
    r.add_argument("--dt", type=float, help="override the time step (s)")
    r.add_argument("--strict", action="store_true", help="exit 2 if the trace audit fails")
    r.set_defaults(func=cmd_run)

    e = sub.add_parser("equilibrium", help="steady operating point on the P-U curves")
    scenario_arg(e)
    e.add_argument("--wind", type=float, required=True, help="wind speed (m/s)")
    e.add_argument("--mode", choices=("n", "e"), default="n")
    e.add_argument("--duty", type=float, help="IPBC duty for N-mode (default: rated-voltage duty)")
    e.set_defaults(func=cmd_equilibrium)

    s = sub.add_parser("schedule", help="steady-state AEL power and its binding constraint (p.u.)")
    s.add_argument("--mppt", type=float, required=True)
    s.add_argument("--prev", type=float, required=True)
    s.add_argument("--dt", type=float, required=True)
    s.add_argument("--rated", type=float, default=1.0, help="AEL rated power (p.u.)")
    s.add_argument("--min-frac", type=float, default=0.1, help="minimum load as a fraction of rated")
    s.add_argument("--delta", type=float, default=0.05, help="ramp limit (fraction of rated per s)")
    s.add_argument("--no-ramp", action="store_true", help="drop the ramp-rate cap")
    s.set_defaults(func=cmd_schedule)

    v = sub.add_parser("validate", help="parse and validate a scenario")
    scenario_arg(v)
    v.set_defaults(func=cmd_validate)

    a = sub.add_parser("verify", help="audit a trace CSV")
    a.add_argument("trace")
    a.add_argument("--scenario", help="scenario the trace came from (default: sibling scenario.yaml)")
    a.add_argument("--lenient", action="store_true")
    a.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        for e in exc.errors:
            print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except SimulationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
