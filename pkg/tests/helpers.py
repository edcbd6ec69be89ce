"""Random generators and brute-force oracles shared by the test modules."""
from __future__ import annotations

import itertools
import random
from pathlib import Path

import numpy as np

from gtshape.engine import coerce
from gtshape.formula import (And, Const, Eq, Exists, Forall, Implies, Not, Or, Pred1, Pred2, parse)
from gtshape.kleene import FALSE, MAYBE, TRUE, TruthValue
from gtshape.rules import ForbiddenPattern, GraphRule, ShapeRule, graph_matchings
from gtshape.structure import (Graph, Instrumentation, LogicalStructure, Signature, canonical_abstraction,
                               check_embedding, encode_graph, with_meanings)

MODELS = Path(__file__).resolve().parent.parent / "src" / "gtshape" / "models"

PLAIN = Signature(unary=("A", "B"), binary=("e", "f"))

INSTR = Signature(
    unary=("A", "B"),
    binary=("e", "f"),
    instrumentation=(
        Instrumentation("out", "v", parse("exists w: e(v,w)")),
        Instrumentation("lone", "v", parse("A(v) & !(exists w: !(w == v) & A(w))")),
    ),
)


# ------------------------------------------------------------- structures

def random_structure(sig: Signature, rng: random.Random, n: int, summary_p: float = 0.4,
                     maybe_p: float = 0.3) -> LogicalStructure:
    """Any 3-valued structure with ``n`` nodes (not necessarily consistent)."""
    def val():
        if rng.random() < maybe_p:
            return MAYBE
        return rng.choice((FALSE, TRUE))
    un = np.zeros((n, len(sig.unary_names)), dtype=np.uint8)
    for k in range(n):
        un[k, 0] = MAYBE if rng.random() < summary_p else FALSE
        for c in range(1, len(sig.unary_names)):
            un[k, c] = val()
    bi = np.zeros((len(sig.binary), n, n), dtype=np.uint8)
    for p in range(len(sig.binary)):
        for a in range(n):
            for b in range(n):
                bi[p, a, b] = val()
    return LogicalStructure(sig, [f"u{k}" for k in range(n)], un, bi)


def random_graph(sig: Signature, rng: random.Random, n: int, density: float = 0.35,
                 prefix: str = "g") -> Graph:
    nodes = [f"{prefix}{k}" for k in range(n)]
    edges = []
    for u in nodes:
        for label in sig.unary:
            if rng.random() < 0.5:
                edges.append((u, label, u))
    for label in sig.binary:
        for a in nodes:
            for b in nodes:
                if rng.random() < density:
                    edges.append((a, label, b))
    return Graph(tuple(nodes), tuple(edges))


def weaken(s: LogicalStructure, rng: random.Random, p: float = 0.15) -> LogicalStructure:
    """Raise random values to 1/2; the result embeds ``s`` via the identity."""
    un = np.array(s.unary)
    bi = np.array(s.binary)
    mask = np.array([[rng.random() < p for _ in range(un.shape[1])] for _ in range(un.shape[0])],
                    dtype=bool).reshape(un.shape)
    un[mask] = MAYBE
    bmask = np.array([rng.random() < p for _ in range(bi.size)], dtype=bool).reshape(bi.shape)
    bi[bmask] = MAYBE
    return LogicalStructure(s.sig, s.universe, un, bi)


def random_shape(sig: Signature, rng: random.Random, constraints=(), max_concrete: int = 5):
    """A coerced shape with at least one concretisation (the graph it came
    from). Returns ``(shape, graph)``."""
    while True:
        g = random_graph(sig, rng, rng.randint(1, max_concrete))
        s = encode_graph(g, sig)
        if coerce(s, constraints) is not s:
            continue
        shape = weaken(canonical_abstraction(s), rng)
        shape = coerce(shape, constraints)
        if shape is not None:
            return shape, g


def concretise(s: LogicalStructure, rng: random.Random, max_nodes: int = 5, constraints=(),
               tries: int = 20):
    """Sample a 2-valued structure that embeds in ``s`` and satisfies the
    constraints, or ``None``. Instrumentation follows the meaning formulas."""
    sig = s.sig
    n = len(s.universe)
    if n > max_nodes:
        return None
    for _ in range(tries):
        budget = max_nodes - n
        counts = []
        for k in range(n):
            c = 1
            if s.unary[k, 0] == MAYBE and budget > 0:
                extra = rng.randint(0, budget)
                c += extra
                budget -= extra
            counts.append(c)
        origin = [k for k in range(n) for _ in range(counts[k])]
        names = [f"{s.universe[k]}#{i}" for k in range(n) for i in range(counts[k])]
        m = len(origin)
        un = np.zeros((m, len(sig.unary_names)), dtype=np.uint8)
        bi = np.zeros((len(sig.binary), m, m), dtype=np.uint8)

        def pick(v):
            return rng.choice((FALSE, TRUE)) if v == MAYBE else v
        for i, k in enumerate(origin):
            for c in range(1, len(sig.unary_names)):
                un[i, c] = pick(s.unary[k, c])
        for p in range(len(sig.binary)):
            for i, a in enumerate(origin):
                for j, b in enumerate(origin):
                    bi[p, i, j] = pick(s.binary[p, a, b])
        g = with_meanings(LogicalStructure(sig, names, un, bi))
        proj = {names[i]: s.universe[origin[i]] for i in range(m)}
        if not check_embedding(g, s, proj):
            continue
        if coerce(g, constraints) is not g:
            continue
        return g
    return None


def brute_embedding(s: LogicalStructure, t: LogicalStructure):
    """Exhaustive search over all maps; the oracle for ``find_embedding``."""
    for image in itertools.product(t.universe, repeat=len(s.universe)):
        f = dict(zip(s.universe, image))
        if check_embedding(s, t, f):
            return f
    return None


def graph_guard(s: LogicalStructure):
    return lambda node, label: s.value(label, node) == TRUE


def matches(g: LogicalStructure, rule) -> bool:
    from gtshape.structure import decode_graph
    return next(graph_matchings(decode_graph(g), rule, graph_guard(g)), None) is not None


# ----------------------------------------------------------------- rules

def random_rule(sig: Signature, rng: random.Random, name: str = "r", max_lhs: int = 3,
                guards: bool = False) -> GraphRule:
    k = rng.randint(1, max_lhs)
    lnodes = [f"n{i}" for i in range(k)]
    ledges = []
    for n in lnodes:
        for label in sig.unary:
            if rng.random() < 0.35:
                ledges.append((n, label, n))
    for label in sig.binary:
        for a in lnodes:
            for b in lnodes:
                if rng.random() < 0.25:
                    ledges.append((a, label, b))
    g = []
    if guards and sig.instrumentation:
        for n in lnodes:
            if rng.random() < 0.25:
                g.append((n, rng.choice(sig.instrumentation).name))
    # right-hand side: maybe delete a node, maybe create one, reshuffle edges
    rnodes = [n for n in lnodes if rng.random() > 0.2]
    if rng.random() < 0.4:
        rnodes.append("m")
    redges = []
    for e in ledges:
        if e[0] in rnodes and e[2] in rnodes and rng.random() > 0.3:
            redges.append(e)
    for label in sig.binary:
        for a in rnodes:
            for b in rnodes:
                if rng.random() < 0.15:
                    redges.append((a, label, b))
    for n in rnodes:
        if n not in lnodes:
            for label in sig.unary:
                if rng.random() < 0.5:
                    redges.append((n, label, n))
    return GraphRule(name, Graph(tuple(lnodes), tuple(ledges)), Graph(tuple(rnodes), tuple(redges)),
                     tuple(g))


def random_pattern(sig: Signature, rng: random.Random, name: str = "F") -> ForbiddenPattern:
    r = random_rule(sig, rng, name, max_lhs=3, guards=True)
    return ForbiddenPattern(name, r.lhs, r.guards)


# -------------------------------------------------------------- formulas

def random_formula(sig: Signature, rng: random.Random, variables=("x", "y"), depth: int = 3,
                   half: bool = True):
    """Random formula whose free variables are drawn from ``variables``.
    ``half=False`` leaves out the constant ``1/2``."""
    vs = list(variables)
    if depth == 0 or rng.random() < 0.25:
        kind = rng.randrange(4)
        if kind == 0:
            return Const(TruthValue(rng.choice((0, 1, 2) if half else (0, 2))))
        if kind == 1:
            return Pred1(rng.choice(sig.unary_names), rng.choice(vs))
        if kind == 2 and sig.binary:
            return Pred2(rng.choice(sig.binary), rng.choice(vs), rng.choice(vs))
        return Eq(rng.choice(vs), rng.choice(vs))
    kind = rng.randrange(6)
    if kind == 0:
        return Not(random_formula(sig, rng, vs, depth - 1, half))
    if kind in (1, 2, 3):
        op = (And, Or, Implies)[kind - 1]
        return op(random_formula(sig, rng, vs, depth - 1, half), random_formula(sig, rng, vs, depth - 1, half))
    q = rng.choice(("z", "w", vs[0]))
    body = random_formula(sig, rng, vs + [q], depth - 1, half)
    return (Exists if kind == 4 else Forall)(q, body)


def coarsen(s: LogicalStructure, rng: random.Random):
    """Random structure ``t`` with an embedding ``f`` of ``s`` into ``t``."""
    n = len(s.universe)
    blocks = rng.randint(1, n)
    assign = list(range(blocks)) + [rng.randrange(blocks) for _ in range(n - blocks)]
    rng.shuffle(assign)
    members = [[k for k in range(n) if assign[k] == b] for b in range(blocks)]
    sig = s.sig
    un = np.zeros((blocks, len(sig.unary_names)), dtype=np.uint8)
    bi = np.zeros((len(sig.binary), blocks, blocks), dtype=np.uint8)

    def join(vals):
        vals = set(int(v) for v in vals)
        return vals.pop() if len(vals) == 1 else MAYBE
    for b, m in enumerate(members):
        for c in range(len(sig.unary_names)):
            un[b, c] = join(s.unary[k, c] for k in m)
        if len(m) > 1 or rng.random() < 0.2:
            un[b, 0] = MAYBE
    for p in range(len(sig.binary)):
        for b1, m1 in enumerate(members):
            for b2, m2 in enumerate(members):
                bi[p, b1, b2] = join(s.binary[p, i, j] for i in m1 for j in m2)
    t = weaken(LogicalStructure(sig, [f"b{b}" for b in range(blocks)], un, bi), rng, 0.1)
    f = {s.universe[k]: t.universe[assign[k]] for k in range(n)}
    return t, f


def shape_rule(rule: GraphRule, sig: Signature) -> ShapeRule:
    """Shape rule with default updates and the missing-update warning muted."""
    import logging
    logging.getLogger("gtshape.rules").disabled = True
    try:
        return ShapeRule.make(rule, sig)
    finally:
        logging.getLogger("gtshape.rules").disabled = False
