"""Command line front end.

Subcommands: run a scenario, batch over a seed range, serve live mode,
validate a swapped-in decision rule file, and render reports from traces.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import harness, report
from .decision import DecisionState, decide_action
from .logic import EngineError
from .protocol import DEFAULT_PORT, PORT_ENV_VAR
from .sensors import LookOutcome, PerceptionRecord


def _env_port() -> int:
    value = os.environ.get(PORT_ENV_VAR)
    if value is None:
        return DEFAULT_PORT
    try:
        return int(value)
    except ValueError:
        raise SystemExit(f"{PORT_ENV_VAR} must be an integer, got {value!r}")


def _read_rules(path: str | None) -> str | None:
    if path is None:
        return None
    return Path(path).read_text("utf-8")


def _seed_range(text: str) -> range:
    if ".." in text:
        lo, hi = text.split("..", 1)
        return range(int(lo), int(hi) + 1)
    value = int(text)
    return range(value, value + 1)


def cmd_run(args: argparse.Namespace) -> int:
    scenario = harness.load_scenario(args.scenario)
    mode = "socket" if args.socket else "in-process"
    result, trace = harness.run(scenario, args.seed, mode=mode,
                                trace_path=args.trace,
                                rules_text=_read_rules(args.rules),
                                backend=args.backend,
                                port=args.port if args.socket else 0)
    print(f"{scenario.name} seed {args.seed}: "
          f"{'reached' if result.reached else 'failed'} "
          f"({result.reason}) in {result.cycles_used} cycles, "
          f"path {result.path_length_m:.2f} m, "
          f"recoveries {result.detect_loss_recoveries}")
    if args.trace:
        print(f"trace written to {args.trace}")
    if args.report_dir:
        paths = report.write_run_report(trace, args.report_dir)
        print("report: " + ", ".join(str(p) for p in paths))
    return 0 if result.reached else 1


def cmd_batch(args: argparse.Namespace) -> int:
    scenario = harness.load_scenario(args.scenario)
    seeds = _seed_range(args.seeds)
    aggregate = harness.batch(scenario, seeds, rules_text=_read_rules(args.rules),
                              backend=args.backend)
    print(f"{scenario.name}: {aggregate['successes']}/{aggregate['runs']} reached, "
          f"success rate {aggregate['success_rate']:.3f}, "
          f"mean cycles {aggregate['mean_cycles']:.1f}, "
          f"mean path {aggregate['mean_path_length_m']:.2f} m")
    if args.out_dir:
        paths = report.write_batch_report(aggregate, args.out_dir)
        print("report: " + ", ".join(str(p) for p in paths))
    if args.min_success is not None and aggregate["success_rate"] < args.min_success:
        print(f"success rate below required {args.min_success}", file=sys.stderr)
        return 1
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    from .live import serve_live  # imports websockets lazily

    scenario = harness.load_scenario(args.scenario)
    print(f"live endpoint: ws://{args.host}:{args.port} "
          f"(scenario {scenario.name}, seed {args.seed}, {args.speed} ticks/s)")
    serve_live(scenario, args.seed, args.port, ticks_per_second=args.speed,
               rules_text=_read_rules(args.rules), host=args.host)
    return 0


def cmd_engine(args: argparse.Namespace) -> int:
    """Validate a decision rule file by driving all eight first/found/blocked
    combinations and comparing against the built-in branch table."""
    try:
        rules_text = _read_rules(args.rules)
        failures = 0
        print("first  found  blocked -> command")
        for first in (True, False):
            for found in (True, False):
                for obj in (0, 1):
                    state = DecisionState(rules_text=rules_text)
                    perception = PerceptionRecord(direction=90.0, x=0.0, y=0.0,
                                                  obstacle_flag=obj)
                    look = lambda: LookOutcome(found=found, bearing=30.0 if found else 0.0)
                    if not first:
                        state.step(PerceptionRecord(90.0, 0.0, 0.0, 0), look)
                    command = state.step(perception, look)
                    if first:
                        expected = "none"
                    else:
                        expected_cmd = decide_action(found, 30.0, 90.0, obj)
                        expected = f"{expected_cmd.kind}({expected_cmd.direction:.0f})"
                    got = command.kind if command.direction is None else \
                        f"{command.kind}({command.direction:.0f})"
                    ok = got == expected
                    failures += 0 if ok else 1
                    print(f"{str(first):5}  {str(found):5}  {obj}       -> {got}"
                          + ("" if ok else f"   MISMATCH (expected {expected})"))
        if failures:
            print(f"{failures} mismatches against the built-in table", file=sys.stderr)
            return 1
        print("rule file matches the built-in decision table")
        return 0
    except (EngineError, OSError) as err:
        print(f"rule file rejected: {err}", file=sys.stderr)
        return 1


def cmd_report(args: argparse.Namespace) -> int:
    trace = harness.load_trace(args.trace)
    paths = report.write_run_report(trace, args.out_dir)
    print("report: " + ", ".join(str(p) for p in paths))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rnav",
        description="sense-while-acting robot navigation simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one scenario run")
    p_run.add_argument("--scenario", required=True)
    p_run.add_argument("--seed", type=int, required=True)
    p_run.add_argument("--socket", action="store_true",
                       help="use the loopback socket transport")
    p_run.add_argument("--port", type=int, default=_env_port(),
                       help="socket-mode port (0 picks a free one)")
    p_run.add_argument("--trace", help="write the trace JSONL here")
    p_run.add_argument("--rules", help="substitute decision rule file")
    p_run.add_argument("--backend", choices=("rules", "direct"), default="rules")
    p_run.add_argument("--report-dir", help="render trajectory figure and CSV here")
    p_run.set_defaults(func=cmd_run)

    p_batch = sub.add_parser("batch", help="run a seed range and aggregate")
    p_batch.add_argument("--scenario", required=True)
    p_batch.add_argument("--seeds", required=True, help="A..B inclusive, or one seed")
    p_batch.add_argument("--min-success", type=float, default=None,
                         help="exit nonzero when the success rate is below this")
    p_batch.add_argument("--rules", help="substitute decision rule file")
    p_batch.add_argument("--backend", choices=("rules", "direct"), default="rules")
    p_batch.add_argument("--out-dir", help="render batch CSVs and histogram here")
    p_batch.set_defaults(func=cmd_batch)

    p_serve = sub.add_parser("serve", help="serve live mode over a websocket")
    p_serve.add_argument("--scenario", required=True)
    p_serve.add_argument("--seed", type=int, required=True)
    p_serve.add_argument("--port", type=int, default=8700)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--speed", type=float, default=50.0,
                         help="simulation ticks per second")
    p_serve.add_argument("--rules", help="substitute decision rule file")
    p_serve.set_defaults(func=cmd_serve)

    p_engine = sub.add_parser("engine", help="validate a decision rule file")
    p_engine.add_argument("--rules", required=True)
    p_engine.set_defaults(func=cmd_engine)

    p_report = sub.add_parser("report", help="render figures and CSV from a trace")
    p_report.add_argument("--trace", required=True)
    p_report.add_argument("--out-dir", required=True)
    p_report.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
