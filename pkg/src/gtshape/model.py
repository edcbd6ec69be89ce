"""Model files: predicates, instrumentation, constraints, structures,
rules and forbidden patterns in one text file.

Example::

    predicates
      unary RC, T, S
      binary on, next
    end
    instr empty(v) := T(v) & !(exists r: on(r,v))
    constraint empty(t) & RC(r) ==> !on(r,t)

    structure s0
      node t sm=1/2
      set T(t) = 1
      set empty(t) = 1/2
    end
    start s0

    rule Move
      lhs
        node r : RC
        node a : T
        node b : T, empty
        edge on(r,a)
        edge next(a,b)
      rhs
        node r : RC
        node a : T
        node b : T
        edge on(r,b)
        edge next(a,b)
      update empty(a) := !(exists x: !(x == r) & on(x,a))
      update empty(b) := 0
    end

    pattern crash
      node r1 : RC
      ...
    end

``#`` starts a comment; a trailing ``\\`` continues a line.
"""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Union

from .engine import CompatibilityConstraint, coerce, derive_constraints
from .errors import GTSError, ModelError, ParseError
from .formula import Formula, parse as parse_formula, to_text
from .kleene import MAYBE, TruthValue
from .rules import ForbiddenPattern, GraphRule, ShapeRule
from .structure import Graph, Instrumentation, LogicalStructure, Signature, decode_graph

log = logging.getLogger(__name__)

_ID = r"[A-Za-z_][A-Za-z0-9_.]*"
_NAME = r"[A-Za-z_][A-Za-z0-9_]*"


@dataclass
class ModelFile:
    sig: Signature
    structures: dict[str, LogicalStructure]
    start: str
    rules: list[ShapeRule] = field(default_factory=list)
    patterns: list[ForbiddenPattern] = field(default_factory=list)
    constraints: list[CompatibilityConstraint] = field(default_factory=list)
    concrete: Optional[str] = None
    warnings: list[str] = field(default_factory=list)

    @property
    def start_structure(self) -> LogicalStructure:
        return self.structures[self.start]

    @property
    def all_constraints(self) -> list[CompatibilityConstraint]:
        return derive_constraints(self.sig) + list(self.constraints)

    def concrete_graph(self, name: Optional[str] = None) -> Graph:
        """The declared concrete start graph, or the structure ``name``."""
        name = name or self.concrete
        if name is None:
            raise ModelError("model has no concrete start graph")
        s = self.structures.get(name)
        if s is None:
            raise ModelError(f"no structure named {name!r}")
        if not s.is_two_valued():
            raise ModelError(f"structure {name!r} is not 2-valued")
        return decode_graph(s)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ModelFile):
            return NotImplemented
        return (self.sig == other.sig and self.start == other.start and self.concrete == other.concrete
                and list(self.structures.items()) == list(other.structures.items())
                and self.rules == other.rules and self.patterns == other.patterns
                and self.constraints == other.constraints)


@dataclass
class _Line:
    no: int
    indent: int
    text: str


def _lines(text: str) -> list[_Line]:
    out: list[_Line] = []
    pending: Optional[_Line] = None
    for no, raw in enumerate(text.splitlines(), 1):
        body = raw.split("#", 1)[0].rstrip()
        if pending is not None:
            cont = body.strip()
            if cont.endswith("\\"):
                pending.text += " " + cont[:-1].strip()
                continue
            pending.text += " " + cont
            out.append(pending)
            pending = None
            continue
        if not body.strip():
            continue
        indent = len(body) - len(body.lstrip())
        line = _Line(no, indent + 1, body.strip())
        if line.text.endswith("\\"):
            line.text = line.text[:-1].rstrip()
            pending = line
            continue
        out.append(line)
    if pending is not None:
        out.append(pending)
    return out


class _Reader:
    def __init__(self, text: str, source: str):
        self.lines = _lines(text)
        self.i = 0
        self.source = source

    def error(self, msg: str, line: Optional[_Line] = None, col: int = 0) -> ParseError:
        line = line or (self.lines[self.i] if self.i < len(self.lines) else None)
        if line is None:
            return ParseError(msg, 0, 0, self.source)
        return ParseError(msg, line.no, col or line.indent, self.source)

    def next(self) -> Optional[_Line]:
        if self.i >= len(self.lines):
            return None
        ln = self.lines[self.i]
        self.i += 1
        return ln

    def block(self, what: str) -> list[_Line]:
        start = self.lines[self.i - 1]
        body = []
        while True:
            ln = self.next()
            if ln is None:
                raise self.error(f"unterminated {what} block (missing 'end')", start)
            if ln.text == "end":
                return body
            body.append(ln)


def _formula(text: str, sig: Signature, ln: _Line, offset: int, source: str) -> Formula:
    try:
        return parse_formula(text, sig, line=ln.no, column=ln.indent + offset)
    except ParseError as e:
        raise ParseError(e.message, e.line, e.column, source) from None
    except GTSError as e:
        raise ParseError(str(e), ln.no, ln.indent + offset, source) from None


def parse_model(text: str, source: str = "<model>", validate: bool = True) -> ModelFile:
    rd = _Reader(text, source)
    unary: list[str] = []
    binary: list[str] = []
    instr: list[Instrumentation] = []
    raw_constraints: list[tuple[_Line, str, str, int]] = []
    raw_structures: list[tuple[_Line, list[_Line]]] = []
    raw_rules: list[tuple[_Line, list[_Line]]] = []
    raw_patterns: list[tuple[_Line, list[_Line]]] = []
    start: Optional[str] = None
    concrete: Optional[str] = None
    sig = Signature()

    def current_sig() -> Signature:
        try:
            return Signature(tuple(unary), tuple(binary), tuple(instr))
        except GTSError as e:
            raise rd.error(str(e)) from None

    while True:
        ln = rd.next()
        if ln is None:
            break
        head, _, rest = ln.text.partition(" ")
        rest = rest.strip()
        if head == "predicates":
            for item in rd.block("predicates"):
                kind, _, names = item.text.partition(" ")
                names_l = [n.strip() for n in names.split(",") if n.strip()]
                for n in names_l:
                    if not re.fullmatch(_NAME, n):
                        raise rd.error(f"bad predicate name {n!r}", item)
                if kind == "unary":
                    unary.extend(names_l)
                elif kind == "binary":
                    binary.extend(names_l)
                else:
                    raise rd.error(f"expected 'unary' or 'binary', found {kind!r}", item)
            sig = current_sig()
        elif head == "instr":
            mt = re.fullmatch(rf"({_NAME})\s*\(\s*({_NAME})\s*\)\s*:=\s*(.+)", rest)
            if not mt:
                raise rd.error("expected 'instr name(var) := formula'", ln)
            name, var, body = mt.groups()
            partial = Signature(tuple(unary), tuple(binary), tuple(instr))
            f = _formula(body, partial, ln, ln.text.index(":=") + 2 + (len(body) - len(body.lstrip())) + 1, source)
            instr.append(Instrumentation(name, var, f))
            sig = current_sig()
        elif head == "constraint":
            if "==>" not in rest:
                raise rd.error("expected 'constraint body ==> head'", ln)
            body, headf = rest.split("==>", 1)
            raw_constraints.append((ln, body.strip(), headf.strip(), ln.text.index("==>") + 3))
        elif head == "structure":
            raw_structures.append((ln, rd.block("structure")))
        elif head == "rule":
            raw_rules.append((ln, rd.block("rule")))
        elif head == "pattern":
            raw_patterns.append((ln, rd.block("pattern")))
        elif head == "start":
            if start is not None:
                raise rd.error("start structure designated twice", ln)
            start = rest
        elif head == "concrete":
            concrete = rest
        else:
            raise rd.error(f"unknown section {head!r}", ln)

    structures: dict[str, LogicalStructure] = {}
    for ln, body in raw_structures:
        name = ln.text.split(None, 1)[1].strip() if " " in ln.text else ""
        if not re.fullmatch(_ID, name):
            raise rd.error("structure needs a name", ln)
        if name in structures:
            raise rd.error(f"structure {name!r} defined twice", ln)
        structures[name] = _parse_structure(body, sig, rd)

    constraints = []
    for ln, body, headf, off in raw_constraints:
        b = _formula(body, sig, ln, len("constraint") + 2, source)
        h = _formula(headf, sig, ln, off + 2, source)
        try:
            constraints.append(CompatibilityConstraint(b, h))
        except GTSError as e:
            raise rd.error(str(e), ln) from None

    rules = [_parse_rule(ln, body, sig, rd) for ln, body in raw_rules]
    patterns = [_parse_pattern(ln, body, sig, rd) for ln, body in raw_patterns]
    names = [r.name for r in rules]
    if len(set(names)) != len(names):
        raise ModelError("duplicate rule names")

    if start is None and "start" in structures:
        start = "start"
    if start is None:
        raise ModelError(f"{source}: no start structure")
    if start not in structures:
        raise ModelError(f"{source}: start structure {start!r} is not defined")
    if concrete is not None:
        if concrete not in structures:
            raise ModelError(f"{source}: concrete structure {concrete!r} is not defined")
        if not structures[concrete].is_two_valued():
            raise ModelError(f"{source}: concrete structure {concrete!r} is not 2-valued")
    warnings = []
    for r in rules:
        if r.defaulted:
            warnings.append(f"rule {r.name}: update formula defaulted to 1/2 for "
                            + ", ".join(f"{q}({v})" for q, v in r.defaulted))
    model = ModelFile(sig, structures, start, rules, patterns, constraints, concrete, warnings)
    if validate and coerce(model.start_structure, model.all_constraints) is None:
        raise ModelError(f"{source}: start structure {start!r} fails coercion")
    return model


def _parse_structure(body: list[_Line], sig: Signature, rd: _Reader) -> LogicalStructure:
    universe: list[str] = []
    summary: list[str] = []
    values: dict[tuple, TruthValue] = {}
    for ln in body:
        mt = re.fullmatch(rf"node\s+({_ID})(\s+sm\s*=\s*(0|1/2))?", ln.text)
        if mt:
            if mt.group(1) in universe:
                raise rd.error(f"node {mt.group(1)!r} declared twice", ln)
            universe.append(mt.group(1))
            if mt.group(3) == "1/2":
                summary.append(mt.group(1))
            continue
        mt = re.fullmatch(rf"set\s+({_NAME})\s*\(\s*({_ID})\s*(?:,\s*({_ID})\s*)?\)\s*=\s*(0|1/2|1)", ln.text)
        if not mt:
            raise rd.error(f"cannot parse structure line {ln.text!r}", ln)
        pred, a, b, v = mt.groups()
        nodes = (a,) if b is None else (a, b)
        if pred == "sm":
            raise rd.error("set sm through 'node <id> sm=1/2'", ln)
        if sig.arity(pred) != len(nodes):
            raise rd.error(f"unknown predicate {pred}/{len(nodes)}", ln)
        for n in nodes:
            if n not in universe:
                raise rd.error(f"unknown node {n!r}", ln)
        values[(pred, *nodes)] = TruthValue.parse(v)
    return LogicalStructure.build(sig, universe, values, summary)


def _parse_graph_lines(lines: list[_Line], sig: Signature, rd: _Reader, allow_guards: bool):
    nodes: list[str] = []
    loops: list[tuple[str, str, str]] = []
    edges: list[tuple[str, str, str]] = []
    guards: list[tuple[str, str]] = []
    for ln in lines:
        mt = re.fullmatch(rf"node\s+({_NAME})\s*(?::\s*(.*))?", ln.text)
        if mt:
            n = mt.group(1)
            if n in nodes:
                raise rd.error(f"node {n!r} declared twice", ln)
            nodes.append(n)
            for label in filter(None, (x.strip() for x in (mt.group(2) or "").split(","))):
                if label in sig.instrumentation_names:
                    if not allow_guards:
                        raise rd.error(f"instrumentation predicate {label!r} cannot label a right-hand node", ln)
                    guards.append((n, label))
                elif sig.arity(label) == 1 and label != "sm":
                    loops.append((n, label, n))
                else:
                    raise rd.error(f"{label!r} is not a unary predicate", ln)
            continue
        mt = re.fullmatch(rf"edge\s+({_NAME})\s*\(\s*({_NAME})\s*,\s*({_NAME})\s*\)", ln.text)
        if mt:
            label, a, b = mt.groups()
            if sig.arity(label) != 2:
                raise rd.error(f"{label!r} is not a binary predicate", ln)
            for x in (a, b):
                if x not in nodes:
                    raise rd.error(f"unknown node {x!r}", ln)
            edges.append((a, label, b))
            continue
        raise rd.error(f"cannot parse graph line {ln.text!r}", ln)
    return Graph(tuple(nodes), tuple(loops + edges)), tuple(guards)


def _parse_rule(head: _Line, body: list[_Line], sig: Signature, rd: _Reader) -> ShapeRule:
    name = head.text.split(None, 1)[1].strip() if " " in head.text else ""
    if not re.fullmatch(_NAME, name):
        raise rd.error("rule needs a name", head)
    section = None
    parts: dict[str, list[_Line]] = {"lhs": [], "rhs": []}
    updates: dict[tuple[str, str], Formula] = {}
    for ln in body:
        if ln.text in ("lhs", "rhs"):
            section = ln.text
            continue
        if ln.text.startswith("update "):
            mt = re.fullmatch(rf"update\s+({_NAME})\s*\(\s*({_NAME})\s*\)\s*:=\s*(.+)", ln.text)
            if not mt:
                raise rd.error("expected 'update pred(node) := formula'", ln)
            q, v, ftext = mt.groups()
            if (q, v) in updates:
                raise rd.error(f"duplicate update for {q}({v})", ln)
            updates[(q, v)] = _formula(ftext, sig, ln, ln.text.index(":=") + 3, rd.source)
            continue
        if section is None:
            raise rd.error("expected 'lhs' or 'rhs'", ln)
        parts[section].append(ln)
    lhs, guards = _parse_graph_lines(parts["lhs"], sig, rd, True)
    rhs, _ = _parse_graph_lines(parts["rhs"], sig, rd, False)
    try:
        return ShapeRule.make(GraphRule(name, lhs, rhs, guards), sig, updates)
    except GTSError as e:
        raise rd.error(str(e), head) from None


def _parse_pattern(head: _Line, body: list[_Line], sig: Signature, rd: _Reader) -> ForbiddenPattern:
    name = head.text.split(None, 1)[1].strip() if " " in head.text else ""
    if not re.fullmatch(_NAME, name):
        raise rd.error("pattern needs a name", head)
    g, guards = _parse_graph_lines(body, sig, rd, True)
    return ForbiddenPattern(name, g, guards)


def load_model(path: Union[str, Path, Iterable[Union[str, Path]]], validate: bool = True) -> ModelFile:
    """Load a model file, a directory of ``*.gts`` files, or several files
    (concatenated in the given order)."""
    if isinstance(path, (str, Path)):
        p = Path(path)
        paths = sorted(p.glob("*.gts")) if p.is_dir() else [p]
    else:
        paths = [Path(x) for x in path]
    if not paths:
        raise ModelError(f"no model files found at {path}")
    text = "\n".join(p.read_text(encoding="utf-8") for p in paths)
    return parse_model(text, str(paths[0]) if len(paths) == 1 else str(paths[0].parent), validate)


# ---------------------------------------------------------------- printing

def structure_to_text(s: LogicalStructure, name: str) -> str:
    out = [f"structure {name}"]
    sig = s.sig
    for k, u in enumerate(s.universe):
        out.append(f"  node {u}" + (" sm=1/2" if s.unary[k, 0] == MAYBE else ""))
    for k, u in enumerate(s.universe):
        for c, pred in enumerate(sig.unary_names[1:], 1):
            v = int(s.unary[k, c])
            if v:
                out.append(f"  set {pred}({u}) = {TruthValue(v)}")
    for p, pred in enumerate(sig.binary):
        for a, ua in enumerate(s.universe):
            for b, ub in enumerate(s.universe):
                v = int(s.binary[p, a, b])
                if v:
                    out.append(f"  set {pred}({ua},{ub}) = {TruthValue(v)}")
    out.append("end")
    return "\n".join(out)


def _graph_lines(g: Graph, guards, indent: str, sig: Signature) -> list[str]:
    out = []
    for n in g.nodes:
        labels = [l for l in g.loops(n) if sig.arity(l) == 1] + [l for gn, l in guards if gn == n]
        out.append(f"{indent}node {n}" + (" : " + ", ".join(labels) if labels else ""))
    for a, l, b in g.edges:
        if sig.arity(l) == 2:
            out.append(f"{indent}edge {l}({a},{b})")
    return out


def rule_to_text(r: ShapeRule, sig: Signature) -> str:
    out = [f"rule {r.name}", "  lhs"]
    out += _graph_lines(r.rule.lhs, r.rule.guards, "    ", sig)
    out.append("  rhs")
    out += _graph_lines(r.rule.rhs, (), "    ", sig)
    skip = set(r.defaulted)
    for (q, v), f in r.updates.items():
        if (q, v) not in skip:
            out.append(f"  update {q}({v}) := {to_text(f)}")
    out.append("end")
    return "\n".join(out)


def pattern_to_text(p: ForbiddenPattern, sig: Signature) -> str:
    return "\n".join([f"pattern {p.name}"] + _graph_lines(p.graph, p.guards, "  ", sig) + ["end"])


def print_model(model: ModelFile) -> str:
    sig = model.sig
    out = ["predicates"]
    if sig.unary:
        out.append("  unary " + ", ".join(sig.unary))
    if sig.binary:
        out.append("  binary " + ", ".join(sig.binary))
    out.append("end")
    for ins in sig.instrumentation:
        out.append(f"instr {ins.name}({ins.var}) := {to_text(ins.meaning)}")
    for c in model.constraints:
        out.append(f"constraint {to_text(c.body)} ==> {to_text(c.head)}")
    out.append("")
    for name, s in model.structures.items():
        out.append(structure_to_text(s, name))
        out.append("")
    out.append(f"start {model.start}")
    if model.concrete is not None:
        out.append(f"concrete {model.concrete}")
    for r in model.rules:
        out.append("")
        out.append(rule_to_text(r, sig))
    for p in model.patterns:
        out.append("")
        out.append(pattern_to_text(p, sig))
    return "\n".join(out) + "\n"
