"""Command-line driver.

Exit codes: 0 safe, 1 unsafe, 2 bound exceeded, 3 usage or model error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import engine
from .dot import export_dot
from .errors import GTSError
from .model import ModelFile, load_model
from .report import analysis_report, concrete_report, dumps, structure_from_json, trace_steps_from_json

log = logging.getLogger("gtshape")

EXIT = {engine.SAFE: 0, engine.UNSAFE: 1, engine.BOUND_EXCEEDED: 2}
EXIT_ERROR = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _positive_int(text: str) -> int:
    v = int(text)
    if v <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="gtshape", description="Shape analysis for graph transformation systems.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    a = sub.add_parser("analyze", help="compute the reachable shapes and check forbidden patterns")
    a.add_argument("model")
    a.add_argument("--split", action="store_true", help="MODEL is a directory of .gts files")
    a.add_argument("--max-structures", type=_positive_int)
    a.add_argument("--max-seconds", type=float)
    a.add_argument("--no-blur", action="store_true")
    a.add_argument("--eager-check", action="store_true")
    a.add_argument("--check-mat", action="store_true", help="assert each materialisation lies in the focus set")
    a.add_argument("--deterministic", action="store_true")
    a.add_argument("--jobs", type=_positive_int, default=1)
    a.add_argument("--dot", metavar="DIR")
    a.add_argument("--json", metavar="PATH")

    c = sub.add_parser("concrete", help="bounded exploration of the concrete start graph")
    c.add_argument("model")
    c.add_argument("--split", action="store_true")
    c.add_argument("--bound", type=int, required=True)
    c.add_argument("--dot", metavar="DIR")
    c.add_argument("--json", metavar="PATH")

    d = sub.add_parser("dot", help="render a named structure")
    d.add_argument("model")
    d.add_argument("--split", action="store_true")
    d.add_argument("--structure", required=True)
    d.add_argument("-o", "--output", required=True)

    r = sub.add_parser("replay", help="replay the counterexample of an UNSAFE report")
    r.add_argument("model")
    r.add_argument("report")
    r.add_argument("--split", action="store_true")

    pr = sub.add_parser("print", help="print the normalised model")
    pr.add_argument("model")
    pr.add_argument("--split", action="store_true")
    return p


def _load(args) -> ModelFile:
    path = Path(args.model)
    if args.split and not path.is_dir():
        raise GTSError(f"--split expects a directory, got {path}")
    model = load_model(path)
    for w in model.warnings:
        log.warning("%s", w)
    return model


def _emit(report: dict, path) -> None:
    text = dumps(report)
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_analyze(args) -> int:
    model = _load(args)
    opts = engine.Options(blur=not args.no_blur, eager_check=args.eager_check, check_mat=args.check_mat)
    limits = engine.Limits(args.max_structures, args.max_seconds)
    jobs = 1 if args.deterministic else args.jobs
    result = engine.explore(model.start_structure, model.rules, model.patterns, model.all_constraints,
                            limits, opts, jobs)
    st = result.stats
    log.info("verdict %s: %d intermediate structures, %d in the maximal set, %.3fs",
             result.verdict, st["intermediate_structures"], st["max_set_size"], st["wall_time"])
    options = {"blur": opts.blur, "eager_check": opts.eager_check, "max_structures": args.max_structures,
               "max_seconds": args.max_seconds}
    report = analysis_report(result, Path(args.model).name, options, args.deterministic)
    if args.dot:
        out = Path(args.dot)
        out.mkdir(parents=True, exist_ok=True)
        for i, s in enumerate(result.reach):
            export_dot(s, out / f"reach_{i:03d}.dot", f"reach_{i}")
        if result.trace is not None:
            s = model.start_structure
            export_dot(engine.prepare_start(s, model.all_constraints, opts), out / "trace_000_start.dot", "start")
            cur = engine.prepare_start(s, model.all_constraints, opts)
            by_name = {r.name: r for r in model.rules}
            for i, stp in enumerate(result.trace.steps, 1):
                cur = engine.replay_step(cur, by_name[stp.rule], stp, model.all_constraints, opts)
                export_dot(cur, out / f"trace_{i:03d}_{stp.rule}_{stp.stage}.dot", f"step_{i}")
    _emit(report, args.json)
    return EXIT[result.verdict]


def cmd_concrete(args) -> int:
    if args.bound <= 0:
        raise _UsageError("--bound must be positive")
    model = _load(args)
    g0 = model.concrete_graph()
    result = engine.concrete_explore(g0, [r.rule for r in model.rules], model.sig, model.patterns, args.bound)
    if args.dot:
        from .structure import encode_graph
        out = Path(args.dot)
        out.mkdir(parents=True, exist_ok=True)
        for i, g in enumerate(result.graphs):
            export_dot(encode_graph(g, model.sig), out / f"graph_{i:03d}.dot", f"graph_{i}")
    _emit(concrete_report(result, Path(args.model).name, args.bound), args.json)
    return EXIT[result.verdict]


def cmd_dot(args) -> int:
    model = _load(args)
    if args.structure not in model.structures:
        raise GTSError(f"no structure named {args.structure!r}")
    export_dot(model.structures[args.structure], args.output, args.structure)
    return 0


def cmd_replay(args) -> int:
    model = _load(args)
    report = json.loads(Path(args.report).read_text(encoding="utf-8"))
    trace = report.get("trace")
    if not trace:
        raise GTSError("report has no trace")
    opts = engine.Options(blur=report.get("options", {}).get("blur", True))
    final = engine.replay(model.start_structure, model.rules, trace_steps_from_json(trace),
                          model.all_constraints, opts)
    expected = structure_from_json(trace["final"], model.sig)
    if final != expected:
        print("replay diverged from the recorded structure", file=sys.stderr)
        return 1
    print(f"replay reproduces the structure flagged by pattern {trace['pattern']}")
    return 0


def cmd_print(args) -> int:
    from .model import print_model
    sys.stdout.write(print_model(_load(args)))
    return 0


class _UsageError(Exception):
    pass


def main(argv=None) -> int:
    level = os.environ.get("GTSHAPE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    handler = {"analyze": cmd_analyze, "concrete": cmd_concrete, "dot": cmd_dot,
               "replay": cmd_replay, "print": cmd_print}[args.command]
    try:
        return handler(args)
    except _UsageError as e:
        print(f"gtshape: error: {e}", file=sys.stderr)
        return EXIT_ERROR
    except (GTSError, OSError) as e:
        print(f"gtshape: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
