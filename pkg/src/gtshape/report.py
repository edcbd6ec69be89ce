"""JSON report for analysis runs (schema ``gtshape.report/1``)."""
from __future__ import annotations

import json

from .engine import AnalysisResult, ConcreteResult, TraceStep
from .kleene import MAYBE, TruthValue
from .structure import Graph, LogicalStructure, Signature

SCHEMA = "gtshape.report/1"


def structure_to_json(s: LogicalStructure) -> dict:
    names = s.sig.unary_names
    unary: dict[str, dict[str, str]] = {}
    for c, pred in enumerate(names[1:], 1):
        vals = {u: str(TruthValue(int(s.unary[k, c]))) for k, u in enumerate(s.universe) if s.unary[k, c]}
        if vals:
            unary[pred] = vals
    binary: dict[str, list] = {}
    for p, pred in enumerate(s.sig.binary):
        vals = [[ua, ub, str(TruthValue(int(s.binary[p, a, b])))]
                for a, ua in enumerate(s.universe) for b, ub in enumerate(s.universe) if s.binary[p, a, b]]
        if vals:
            binary[pred] = vals
    return {
        "universe": list(s.universe),
        "summary": [u for k, u in enumerate(s.universe) if s.unary[k, 0] == MAYBE],
        "unary": unary,
        "binary": binary,
    }


def structure_from_json(d: dict, sig: Signature) -> LogicalStructure:
    values = {}
    for pred, vals in d.get("unary", {}).items():
        for u, v in vals.items():
            values[(pred, u)] = TruthValue.parse(v)
    for pred, vals in d.get("binary", {}).items():
        for a, b, v in vals:
            values[(pred, a, b)] = TruthValue.parse(v)
    return LogicalStructure.build(sig, d["universe"], values, d.get("summary", ()))


def analysis_report(result: AnalysisResult, model_name: str, options: dict,
                    deterministic: bool = False) -> dict:
    stats = dict(result.stats)
    if deterministic:
        stats["wall_time"] = None
    out = {
        "schema": SCHEMA,
        "command": "analyze",
        "model": model_name,
        "options": options,
        "verdict": result.verdict,
        "statistics": stats,
        "reach": [structure_to_json(s) for s in result.reach],
        "trace": None,
    }
    if result.trace is not None:
        t = result.trace
        out["trace"] = {
            "steps": [st.to_json() for st in t.steps],
            "pattern": t.pattern,
            "pattern_assignment": dict(t.hit.assignment) if t.hit else None,
            "pattern_keep": (None if t.hit is None or t.hit.keep is None else list(t.hit.keep)),
            "final": structure_to_json(t.final),
        }
    return out


def trace_steps_from_json(d: dict) -> list[TraceStep]:
    return [TraceStep.from_json(x) for x in d["steps"]]


def graph_to_json(g: Graph) -> dict:
    return {"nodes": list(g.nodes), "edges": [list(e) for e in sorted(g.edges)]}


def concrete_report(result: ConcreteResult, model_name: str, bound: int) -> dict:
    out = {
        "schema": SCHEMA,
        "command": "concrete",
        "model": model_name,
        "bound": bound,
        "verdict": result.verdict,
        "statistics": {"reachable_graphs": len(result.graphs)},
        "witness": None,
    }
    if result.witness is not None:
        g, pattern = result.witness
        out["witness"] = {"pattern": pattern, "graph": graph_to_json(g)}
    return out


def dumps(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"
