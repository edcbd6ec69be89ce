"""Graphviz rendering of logical structures.

Summary nodes are dashed boxes, ``1/2`` edges are dashed, ``0`` edges are
omitted. Unary predicates with value 1 go in the node label, ``1/2``
values as ``p?``.
"""
from __future__ import annotations

from pathlib import Path

from .kleene import MAYBE, TRUE
from .structure import LogicalStructure


def _q(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_dot(s: LogicalStructure, name: str = "S") -> str:
    lines = [f"digraph {_q(name)} {{"]
    names = s.sig.unary_names
    for k, u in enumerate(s.universe):
        sure = [p for c, p in enumerate(names) if c and s.unary[k, c] == TRUE]
        maybe = [p + "?" for c, p in enumerate(names) if c and s.unary[k, c] == MAYBE]
        label = u + (" : " + ", ".join(sure) if sure else "")
        if maybe:
            label += "\\n" + ", ".join(maybe)
        style = "dashed" if s.unary[k, 0] == MAYBE else "solid"
        lines.append(f"  {_q(u)} [shape=box, style={style}, label={_q(label)}];")
    for p, pred in enumerate(s.sig.binary):
        for a, ua in enumerate(s.universe):
            for b, ub in enumerate(s.universe):
                v = s.binary[p, a, b]
                if v:
                    style = "solid" if v == TRUE else "dashed"
                    lines.append(f"  {_q(ua)} -> {_q(ub)} [label={_q(pred)}, style={style}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def export_dot(s: LogicalStructure, path, name: str = "S") -> Path:
    path = Path(path)
    path.write_text(to_dot(s, name), encoding="utf-8")
    return path
