"""Command-line interface: ``rulehier run|bench|surface|gradcheck``.

Failures exit nonzero and print one JSON object on stderr with an ``error``
category (see ``EXIT_CODES``).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import artifacts, sim

EXIT_CODES = {
    "usage": 2,
    "unknown_scenario": 3,
    "invalid_config": 4,
    "io": 5,
    "check_failed": 6,
    "internal": 1,
}


class CliError(Exception):
    def __init__(self, category: str, message: str):
        super().__init__(message)
        self.category = category


def _cmd_run(args) -> dict:
    result = sim.run_scenario(args.scenario, cycles=args.cycles, seed=args.seed, initial_noise=args.noise)
    out = Path(args.out)
    sim.write_trace(result, out)
    summary_path = out.with_name(out.stem + ".summary.json")
    sim.write_summary(result, summary_path)
    report = {"trace": str(out), "summary": str(summary_path), "violated": result.summary["violated"]}
    if args.frames:
        report["frames"] = len(artifacts.emit_frames(result, args.frames))
    return report


def _cmd_bench(args) -> dict:
    names = sim.registered_scenarios() if args.all else args.scenario
    if not names:
        raise CliError("usage", "bench needs --all or at least one --scenario")
    rows = []
    summaries = {}
    for name in names:
        result = sim.run_scenario(name, seed=args.seed)
        rows.append((name, result.summary["timing"]))
        summaries[name] = result.summary
        if args.out:
            sim.write_summary(result, Path(args.out) / f"{name}.summary.json")
    print(sim.format_timing_table(rows))
    return {"scenarios": len(rows), "max_cycle_time": max(s["timing"]["max"] for s in summaries.values())}


def _cmd_surface(args) -> dict:
    path = artifacts.emit_reward_surface(args.out, args.a, args.c, args.res)
    axis, grid = artifacts.reward_surface(args.a, args.c, args.res)
    return {"grid": str(path), "quadrant_means": artifacts.quadrant_means(axis, grid)}


def _cmd_gradcheck(args) -> dict:
    results = artifacts.gradient_check(args.trials, seed=args.seed, rtol=args.rtol)
    worst = max(results, key=lambda r: r["normwise_rel_err"])
    report = {"trials": len(results), "failed": sum(not r["ok"] for r in results), "worst": worst}
    if report["failed"]:
        raise CliError("check_failed", json.dumps(report))
    return report


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rulehier", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="closed-loop simulation of one scenario")
    r.add_argument("--scenario", required=True, help="registered name or path to a scenario JSON file")
    r.add_argument("--cycles", type=int, default=None)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--noise", type=float, default=0.0, help="std of initial-state noise (default off)")
    r.add_argument("--out", required=True, help="JSON-lines trace path")
    r.add_argument("--frames", default=None, help="directory for SVG frames")
    r.set_defaults(func=_cmd_run)

    b = sub.add_parser("bench", help="planning-time statistics per scenario")
    b.add_argument("--all", action="store_true")
    b.add_argument("--scenario", action="append", default=[])
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", default=None, help="directory for per-scenario summaries")
    b.set_defaults(func=_cmd_bench)

    s = sub.add_parser("surface", help="reward surface of a 2-rule hierarchy as CSV")
    s.add_argument("--a", type=float, default=2.01)
    s.add_argument("--c", type=float, default=30.0)
    s.add_argument("--res", type=int, default=101)
    s.add_argument("--out", default="reward_surface.csv")
    s.set_defaults(func=_cmd_surface)

    g = sub.add_parser("gradcheck", help="autodiff gradient against central differences")
    g.add_argument("--trials", type=int, default=50)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--rtol", type=float, default=1e-4)
    g.set_defaults(func=_cmd_gradcheck)
    return p


def _fail(category: str, message: str) -> int:
    print(json.dumps({"error": category, "message": message}), file=sys.stderr)
    return EXIT_CODES[category]


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_CODES["usage"] if e.code else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        report = args.func(args)
    except CliError as e:
        return _fail(e.category, str(e))
    except sim.UnknownScenario as e:
        return _fail("unknown_scenario", e.args[0])
    except (KeyError, TypeError, ValueError) as e:
        return _fail("invalid_config", f"{type(e).__name__}: {e}")
    except OSError as e:
        return _fail("io", str(e))
    except Exception as e:  # pragma: no cover - last-resort category
        return _fail("internal", f"{type(e).__name__}: {e}")
    print(json.dumps(report, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
