"""Graph production rules and shape production rules."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Optional, Union

import numpy as np

from .errors import PreconditionError, SignatureError
from .formula import Const, Eq, Formula, Not, Pred1, Pred2, conj, eval_indexed, free_vars, type_check
from .kleene import FALSE, MAYBE, TRUE, TruthValue
from .structure import Graph, LogicalStructure, Signature

log = logging.getLogger(__name__)


def fresh_name(base: str, taken) -> str:
    """``base`` if unused, else the first free ``root.k``."""
    if base not in taken:
        return base
    root = base.split(".", 1)[0]
    k = 1
    while f"{root}.{k}" in taken:
        k += 1
    return f"{root}.{k}"


@dataclass(frozen=True)
class GraphRule:
    """``<L, R>`` with shared node names denoting preserved nodes.

    ``guards`` are ``(node, instrumentation predicate)`` pairs that must
    hold at the matched node; they take part in matching but are never
    rewritten.
    """

    name: str
    lhs: Graph
    rhs: Graph
    guards: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "guards", tuple(dict.fromkeys(tuple(g) for g in self.guards)))
        for n, _ in self.guards:
            if n not in self.lhs.nodes:
                raise ValueError(f"guard on unknown node {n!r}")

    @property
    def deleted_nodes(self) -> tuple[str, ...]:
        keep = set(self.rhs.nodes)
        return tuple(n for n in self.lhs.nodes if n not in keep)

    @property
    def created_nodes(self) -> tuple[str, ...]:
        old = set(self.lhs.nodes)
        return tuple(n for n in self.rhs.nodes if n not in old)

    @property
    def deleted_edges(self) -> tuple[tuple[str, str, str], ...]:
        keep = self.rhs.edge_set
        return tuple(e for e in self.lhs.edges if e not in keep)

    @property
    def created_edges(self) -> tuple[tuple[str, str, str], ...]:
        old = self.lhs.edge_set
        return tuple(e for e in self.rhs.edges if e not in old)

    def check(self, sig: Signature) -> None:
        for g in (self.lhs, self.rhs):
            for a, label, b in g.edges:
                ar = sig.arity(label)
                if ar is None or not sig.is_core(label):
                    raise SignatureError(f"rule {self.name}: {label!r} is not a core predicate")
                if ar == 1 and a != b:
                    raise SignatureError(f"rule {self.name}: unary {label!r} used on edge {a}->{b}")
        for _, label in self.guards:
            if label not in sig.instrumentation_names:
                raise SignatureError(f"rule {self.name}: guard {label!r} is not an instrumentation predicate")


@dataclass(frozen=True)
class ShapeRule:
    rule: GraphRule
    updates: Mapping[tuple[str, str], Formula] = field(default_factory=dict)
    defaulted: tuple[tuple[str, str], ...] = ()

    @property
    def name(self) -> str:
        return self.rule.name

    @classmethod
    def make(cls, rule: GraphRule, sig: Signature,
             updates: Optional[Mapping[tuple[str, str], Formula]] = None) -> "ShapeRule":
        """Validate and fill missing update formulas with the constant ``1/2``."""
        rule.check(sig)
        updates = dict(updates or {})
        lnodes = set(rule.lhs.nodes)
        for (q, v), f in updates.items():
            if q not in sig.instrumentation_names:
                raise SignatureError(f"rule {rule.name}: update for non-instrumentation predicate {q!r}")
            if v not in rule.rhs.nodes:
                raise SignatureError(f"rule {rule.name}: update for {q}({v}) but {v!r} is not a right-hand node")
            extra = free_vars(f) - lnodes
            if extra:
                raise SignatureError(f"rule {rule.name}: update {q}({v}) has free variables {sorted(extra)} outside the left-hand side")
            type_check(f, sig)
        defaulted = []
        for ins in sig.instrumentation:
            for v in rule.rhs.nodes:
                if (ins.name, v) not in updates:
                    updates[(ins.name, v)] = Const(MAYBE)
                    defaulted.append((ins.name, v))
        if defaulted:
            log.warning("rule %s: no update formula for %s; using 1/2", rule.name,
                        ", ".join(f"{q}({v})" for q, v in defaulted))
        return cls(rule, updates, tuple(defaulted))


@dataclass(frozen=True)
class ForbiddenPattern:
    name: str
    graph: Graph
    guards: tuple[tuple[str, str], ...] = ()

    def as_rule(self) -> GraphRule:
        return GraphRule(self.name, self.graph, self.graph, self.guards)


AnyRule = Union[GraphRule, ShapeRule, ForbiddenPattern]


def graph_rule(r: AnyRule) -> GraphRule:
    if isinstance(r, ShapeRule):
        return r.rule
    if isinstance(r, ForbiddenPattern):
        return r.as_rule()
    return r


def production_formula(rule: AnyRule, sig: Optional[Signature] = None) -> Formula:
    """Edges, then loops, then pairwise disequalities, then ``!sm``."""
    r = graph_rule(rule)
    edges, loops = [], []
    for a, label, b in r.lhs.edges:
        unary = a == b and (sig.arity(label) == 1 if sig is not None else _looks_unary(r, label))
        if unary:
            loops.append(Pred1(label, a))
        else:
            edges.append(Pred2(label, a, b))
    loops += [Pred1(label, n) for n, label in r.guards]
    nodes = r.lhs.nodes
    inj = [Not(Eq(a, b)) for i, a in enumerate(nodes) for b in nodes[i + 1:]]
    nsm = [Not(Pred1("sm", n)) for n in nodes]
    return conj(*edges, *loops, *inj, *nsm)


def _looks_unary(r: GraphRule, label: str) -> bool:
    return all(a == b for a, l, b in r.lhs.edges + r.rhs.edges if l == label)


# ------------------------------------------------------------ shape matching

@dataclass(frozen=True)
class _Compiled:
    nodes: tuple[str, ...]
    unary: tuple[tuple[int, ...], ...]                   # per node: unary columns
    binary: tuple[tuple[int, int, int], ...]             # (layer, i, j) node positions


def _compile(r: GraphRule, sig: Signature) -> _Compiled:
    pos = {n: k for k, n in enumerate(r.lhs.nodes)}
    un: list[list[int]] = [[] for _ in r.lhs.nodes]
    bi = []
    for a, label, b in r.lhs.edges:
        if label in sig.binary_index:
            bi.append((sig.binary_index[label], pos[a], pos[b]))
        elif label in sig.unary_index:
            un[pos[a]].append(sig.unary_index[label])
        else:
            raise SignatureError(f"unknown label {label!r}")
    for n, label in r.guards:
        un[pos[n]].append(sig.unary_index[label])
    return _Compiled(r.lhs.nodes, tuple(map(tuple, un)), tuple(bi))


def find_matchings(s: LogicalStructure, rule: AnyRule) -> list[tuple[dict[str, str], TruthValue]]:
    """All assignments of left-hand nodes with a non-zero production-formula
    value, in lexicographic universe order."""
    r = graph_rule(rule)
    c = _compile(r, s.sig)
    k = len(c.nodes)
    n = len(s.universe)
    if k == 0:
        return [({}, TRUE)]
    un, bi = s.unary, s.binary
    sm = un[:, 0].tolist()
    # search order: degree descending, then declaration order
    deg = [len(c.unary[i]) for i in range(k)]
    for _, a, b in c.binary:
        deg[a] += 1
        deg[b] += 1
    order = sorted(range(k), key=lambda i: (-deg[i], i))
    rank = {i: p for p, i in enumerate(order)}
    cand = []
    for i in range(k):
        ci = []
        for u in range(n):
            v = 2 if sm[u] == 0 else 1
            for col in c.unary[i]:
                x = un[u, col]
                if x < v:
                    v = x
            if v:
                ci.append((u, v))
        cand.append(ci)
    # binary checks become available once the later endpoint is assigned
    checks: list[list[tuple[int, int, int]]] = [[] for _ in range(k)]
    for layer, a, b in c.binary:
        later = a if rank[a] > rank[b] else b
        checks[later].append((layer, a, b))

    out = []
    f = [-1] * k

    def go(p: int, val: int) -> None:
        if p == k:
            out.append((tuple(f), val))
            return
        i = order[p]
        for u, v in cand[i]:
            v = min(val, v)
            for q in range(p):
                if f[order[q]] == u:
                    if sm[u] == 0:
                        v = 0
                        break
                    v = min(v, 1)
            if not v:
                continue
            f[i] = u
            for layer, a, b in checks[i]:
                x = bi[layer, f[a], f[b]]
                if x < v:
                    v = x
                    if not v:
                        break
            if v:
                go(p + 1, v)
            f[i] = -1

    go(0, 2)
    out.sort()
    return [({c.nodes[i]: s.universe[t[i]] for i in range(k)}, TruthValue(v)) for t, v in out]


# ---------------------------------------------------------- shape application

def _core_target(sig: Signature, label: str):
    if label in sig.binary_index:
        return "b", sig.binary_index[label]
    return "u", sig.unary_index[label]


def apply_shape(s: LogicalStructure, rule: ShapeRule, m: Mapping[str, str]) -> LogicalStructure:
    """Apply ``rule`` at the definite matching ``m``.

    Update formulas are evaluated in ``s`` (the pre-state) under ``m``.
    """
    r = rule.rule
    sig = s.sig
    if set(m) != set(r.lhs.nodes):
        raise PreconditionError("matching must be total on the left-hand side")
    if len(set(m.values())) != len(m):
        raise PreconditionError("matching must be injective")
    env = {v: s.index(u) for v, u in m.items()}
    c = _compile(r, sig)
    for i, cols in enumerate(c.unary):
        for col in cols:
            if s.unary[env[c.nodes[i]], col] != TRUE:
                raise PreconditionError(f"rule {r.name}: unary {sig.unary_names[col]}({c.nodes[i]}) is not 1")
    for layer, a, b in c.binary:
        if s.binary[layer, env[c.nodes[a]], env[c.nodes[b]]] != TRUE:
            raise PreconditionError(f"rule {r.name}: edge {sig.binary[layer]}({c.nodes[a]},{c.nodes[b]}) is not 1")
    for u in m.values():
        if s.is_summary(u):
            raise PreconditionError(f"rule {r.name}: matched node {u!r} is a summary node")

    deleted = {m[n] for n in r.deleted_nodes}
    kept = [u for u in s.universe if u not in deleted]
    taken = set(kept)
    mhat = dict(m)
    for n in r.created_nodes:
        mhat[n] = fresh_name(n, taken)
        taken.add(mhat[n])
    new_ids = [mhat[n] for n in r.created_nodes]
    universe = kept + new_ids
    ix = np.array([s.index(u) for u in kept], dtype=np.intp)
    nk, nn = len(kept), len(universe)
    un = np.zeros((nn, len(sig.unary_names)), dtype=np.uint8)
    bi = np.zeros((len(sig.binary), nn, nn), dtype=np.uint8)
    un[:nk] = s.unary[ix]
    bi[:, :nk, :nk] = s.binary[:, ix][:, :, ix]
    pos = {u: k for k, u in enumerate(universe)}

    for (a, label, b), value in [(e, FALSE) for e in r.deleted_edges] + [(e, TRUE) for e in r.created_edges]:
        ua, ub = mhat[a], mhat[b]
        if ua not in pos or ub not in pos:
            continue
        kind, col = _core_target(sig, label)
        if kind == "u":
            un[pos[ua], col] = value
        else:
            bi[col, pos[ua], pos[ub]] = value

    for (q, v), f in rule.updates.items():
        u = mhat[v]
        if u in pos:
            un[pos[u], sig.unary_index[q]] = eval_indexed(f, s, dict(env))
    return LogicalStructure(sig, universe, un, bi)


# --------------------------------------------------------- concrete graphs

def graph_matchings(g: Graph, rule: AnyRule, guard=None) -> Iterator[dict[str, str]]:
    """Injective morphisms ``L -> G`` (edge-preserving), in a fixed order.

    ``guard(node, label) -> bool`` decides guard predicates on ``g``.
    """
    r = graph_rule(rule)
    lnodes = r.lhs.nodes
    gedges = g.edge_set
    f: dict[str, str] = {}

    def ok(n: str) -> bool:
        for a, label, b in r.lhs.edges:
            if (a == n or b == n) and a in f and b in f:
                if (f[a], label, f[b]) not in gedges:
                    return False
        for gn, label in r.guards:
            if gn == n and (guard is None or not guard(f[n], label)):
                return False
        return True

    def go(i: int):
        if i == len(lnodes):
            yield dict(f)
            return
        n = lnodes[i]
        used = set(f.values())
        for u in g.nodes:
            if u in used:
                continue
            f[n] = u
            if ok(n):
                yield from go(i + 1)
            del f[n]

    yield from go(0)


def apply_concrete(g: Graph, rule: AnyRule, m: Mapping[str, str]) -> Graph:
    """Single-pushout application; edges at deleted nodes are dropped."""
    r = graph_rule(rule)
    if set(m) != set(r.lhs.nodes):
        raise PreconditionError("matching must be total on the left-hand side")
    if len(set(m.values())) != len(m):
        raise PreconditionError("matching must be injective")
    gedges = g.edge_set
    for a, label, b in r.lhs.edges:
        if (m[a], label, m[b]) not in gedges:
            raise PreconditionError(f"matching does not preserve edge {(a, label, b)}")
    deleted = {m[n] for n in r.deleted_nodes}
    kept = [u for u in g.nodes if u not in deleted]
    taken = set(kept)
    mhat = dict(m)
    for n in r.created_nodes:
        mhat[n] = fresh_name(n, taken)
        taken.add(mhat[n])
    nodes = kept + [mhat[n] for n in r.created_nodes]
    removed = {(m[a], l, m[b]) for a, l, b in r.deleted_edges}
    added = [(mhat[a], l, mhat[b]) for a, l, b in r.created_edges]
    ns = set(nodes)
    edges = [e for e in g.edges if e not in removed] + added
    edges = [e for e in edges if e[0] in ns and e[2] in ns]
    return Graph(tuple(nodes), tuple(edges))
