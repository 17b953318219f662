"""Command-line entry point: run, validate, replay and explain scenarios."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .episode import EpisodeError, TraceLog, emit_outputs, replay, run_episode
from .scenario import ScenarioError, load_scenario

EXIT_OK, EXIT_SCHEMA, EXIT_RUNTIME = 0, 2, 3


def _cmd_run(args) -> int:
    s = load_scenario(args.scenario)
    update = {}
    if args.seed is not None:
        update["seed"] = args.seed
    if args.ticks is not None:
        update["duration"] = args.ticks * s.horizon.dt
    if update:
        s = s.model_copy(update=update)
    trace = run_episode(s, ticks=args.ticks)
    files = emit_outputs(trace, args.out)
    last = trace.ticks[-1]
    print(f"{s.name}: {len(trace.ticks)} ticks, last decision {last['result']['selected']}")
    print(f"wrote {len(files)} files to {args.out}")
    return EXIT_OK


def _cmd_validate(args) -> int:
    s = load_scenario(args.scenario)
    print(f"{s.name}: valid ({s.mode}, {len(s.participants)} participants)")
    return EXIT_OK


def _cmd_replay(args) -> int:
    trace = TraceLog.load(args.trace)
    bad = replay(trace)
    for tick, want, got in bad:
        print(f"tick {tick}: recorded {want['selected']}, replayed {got['selected']}")
    print(f"replayed {len(trace.ticks)} ticks, {len(bad)} mismatches")
    return EXIT_OK if not bad else EXIT_RUNTIME


def _cmd_explain(args) -> int:
    trace = TraceLog.load(args.trace)
    print(trace.tick(args.tick)["description"])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="scene-arbiter", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a scenario and write trace, grids and plot data")
    r.add_argument("scenario", help="scenario file or bundled scenario name")
    r.add_argument("--out", default="out", type=Path)
    r.add_argument("--seed", type=int)
    r.add_argument("--ticks", type=int)
    r.set_defaults(func=_cmd_run)

    v = sub.add_parser("validate", help="check a scenario file against the schema")
    v.add_argument("scenario")
    v.set_defaults(func=_cmd_validate)

    rp = sub.add_parser("replay", help="re-arbitrate a recorded trace and compare")
    rp.add_argument("trace", type=Path)
    rp.set_defaults(func=_cmd_replay)

    e = sub.add_parser("explain", help="print the decision description for one tick")
    e.add_argument("trace", type=Path)
    e.add_argument("--tick", type=int, required=True)
    e.set_defaults(func=_cmd_explain)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except (EpisodeError, OSError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
