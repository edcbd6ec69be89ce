"""Materialisation, coercion, blur and the reachability fixpoint."""
from __future__ import annotations

import itertools
import logging
import time
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .errors import PreconditionError, SignatureError
from .formula import Eq, Formula, Not, Pred1, Pred2, compile_all, free_vars, predicates, to_text, type_check
from .kleene import FALSE, TRUE
from .rules import (AnyRule, ForbiddenPattern, ShapeRule, _compile, apply_concrete,
                    apply_shape, find_matchings, fresh_name, graph_matchings, graph_rule)
from .structure import (Antichain, Graph, LogicalStructure, Signature,
                        canonical_abstraction, check_embedding, encode_graph, find_embedding,
                        structure_invariant)

log = logging.getLogger(__name__)

SAFE = "SAFE"
UNSAFE = "UNSAFE"
BOUND_EXCEEDED = "BOUND_EXCEEDED"


# ------------------------------------------------------------- constraints

@dataclass(frozen=True)
class CompatibilityConstraint:
    """``body ==> head`` where ``head`` is a possibly negated atom."""

    body: Formula
    head: Formula

    def __post_init__(self):
        atom = self.head.body if isinstance(self.head, Not) else self.head
        if not isinstance(atom, (Pred1, Pred2, Eq)):
            raise SignatureError(f"constraint head must be a literal, got {to_text(self.head)}")
        if isinstance(atom, Pred1) and atom.name == "sm":
            raise SignatureError("constraint heads may not mention sm")
        extra = free_vars(self.head) - free_vars(self.body)
        if extra:
            raise SignatureError(f"head variables {sorted(extra)} do not occur free in the body")

    @property
    def atom(self) -> Formula:
        return self.head.body if isinstance(self.head, Not) else self.head

    @property
    def polarity(self) -> int:
        return FALSE if isinstance(self.head, Not) else TRUE

    def check(self, sig: Signature) -> None:
        type_check(self.body, sig)
        type_check(self.head, sig)

    def __str__(self) -> str:
        return f"{to_text(self.body)} ==> {to_text(self.head)}"


def derive_constraints(sig: Signature) -> list[CompatibilityConstraint]:
    out = []
    for ins in sig.instrumentation:
        atom = Pred1(ins.name, ins.var)
        out.append(CompatibilityConstraint(ins.meaning, atom))
        out.append(CompatibilityConstraint(Not(ins.meaning), Not(atom)))
    return out


class _Scratch:
    """Mutable stand-in for a structure while coercion sharpens it."""

    __slots__ = ("sig", "universe", "unary", "binary")

    def __init__(self, s: LogicalStructure):
        self.sig = s.sig
        self.universe = s.universe
        self.unary = np.array(s.unary)
        self.binary = np.array(s.binary)

    def unary_column(self, name):
        return self.sig.unary_index[name]

    def binary_layer(self, name):
        return self.sig.binary_index[name]


_PLAN_CACHE: dict = {}


def _plans(constraints):
    key = tuple(map(id, constraints))
    hit = _PLAN_CACHE.get(key)
    plan = hit[1] if hit is not None else None
    if plan is None:
        plan = []
        for c in constraints:
            reads = frozenset(name for name, _ in predicates(c.body)) | \
                frozenset(name for name, _ in predicates(c.atom))
            vs = sorted(free_vars(c.body))
            plan.append((compile_all(c.body, vs), vs, c.atom, compile_all(c.atom, vs),
                         int(c.polarity), reads))
        if len(_PLAN_CACHE) > 64:
            _PLAN_CACHE.clear()
        # Holding the constraints keeps their ids from being reused.
        _PLAN_CACHE[key] = (tuple(constraints), plan)
    return plan


def coerce(s: LogicalStructure, constraints: Sequence[CompatibilityConstraint]) -> Optional[LogicalStructure]:
    """Sharpen ``1/2`` values forced by constraints whose body is definitely
    true; ``None`` when a forced value contradicts a definite one."""
    if not constraints or not s.universe:
        return s
    w = _Scratch(s)
    plans = _plans(constraints)
    n = len(s.universe)
    dirty = None  # predicates sharpened in the previous round; None = all
    while True:
        touched = set()
        for body, vs, atom, head, pol, reads in plans:
            if dirty is not None and not (reads & dirty):
                continue
            fire = body(w) == 2
            if not fire.any():
                continue
            cur = head(w)
            wrong = fire & (cur != pol)
            if not wrong.any():
                continue
            if (wrong & (cur != 1)).any():
                return None
            if isinstance(atom, Eq):
                continue
            wrong = np.broadcast_to(wrong, (n,) * len(vs))
            for combo in zip(*np.nonzero(wrong)):
                env = dict(zip(vs, combo))
                if isinstance(atom, Pred1):
                    w.unary[env[atom.var], w.unary_column(atom.name)] = pol
                else:
                    w.binary[w.binary_layer(atom.name), env[atom.left], env[atom.right]] = pol
            touched.add(atom.name)
        if not touched:
            break
        dirty = touched
    if np.array_equal(w.unary, s.unary) and np.array_equal(w.binary, s.binary):
        return s
    return LogicalStructure(s.sig, s.universe, w.unary, w.binary)


# ---------------------------------------------------------- materialisation

def gamma(s: LogicalStructure, m: Mapping[str, str]) -> list[str]:
    """Matched summary nodes, in universe order."""
    hit = set(m.values())
    return [u for u in s.universe if u in hit and s.is_summary(u)]


def materialise_with_map(s: LogicalStructure, rule: AnyRule, m: Mapping[str, str],
                         keep: Iterable[str] = ()) -> tuple[LogicalStructure, dict[str, str], dict[str, str]]:
    """Materialise the left-hand side at ``m`` keeping the summary nodes in
    ``keep``. Returns the structure, the definite matching of the left-hand
    side into it, and the projection back onto ``s``."""
    r = graph_rule(rule)
    keep = set(keep)
    gam = set(gamma(s, m))
    if not keep <= gam:
        raise PreconditionError(f"kept nodes {sorted(keep - gam)} are not matched summary nodes")
    matched = set(m.values())
    names = set(s.universe)
    new_of: dict[str, str] = {}
    for n in r.lhs.nodes:
        u = m[n]
        if s.is_summary(u):
            new_of[n] = fresh_name(u, names)
        else:
            new_of[n] = u
        names.add(new_of[n])
    by_origin: dict[str, list[str]] = {}
    for n in r.lhs.nodes:
        by_origin.setdefault(m[n], []).append(n)
    universe: list[str] = []
    origin: list[int] = []
    is_new: list[bool] = []
    for k, u in enumerate(s.universe):
        if u not in matched or u in keep:
            universe.append(u)
            origin.append(k)
            is_new.append(False)
        for n in by_origin.get(u, ()):
            universe.append(new_of[n])
            origin.append(k)
            is_new.append(True)
    ix = np.array(origin, dtype=np.intp)
    un = np.array(s.unary[ix])
    bi = np.array(s.binary[:, ix][:, :, ix])
    pos = {u: k for k, u in enumerate(universe)}
    un[np.array(is_new, dtype=bool), 0] = FALSE
    c = _compile(r, s.sig)
    for i, cols in enumerate(c.unary):
        for col in cols:
            un[pos[new_of[c.nodes[i]]], col] = TRUE
    for layer, a, b in c.binary:
        bi[layer, pos[new_of[c.nodes[a]]], pos[new_of[c.nodes[b]]]] = TRUE
    out = LogicalStructure(s.sig, universe, un, bi)
    proj = {v: s.universe[o] for v, o in zip(universe, origin)}
    return out, {n: new_of[n] for n in r.lhs.nodes}, proj


def materialise(s: LogicalStructure, rule: AnyRule, m: Mapping[str, str],
                keep: Iterable[str] = ()) -> LogicalStructure:
    return materialise_with_map(s, rule, m, keep)[0]


def _subsets(items: Sequence[str]) -> Iterable[tuple[str, ...]]:
    for k in range(len(items) + 1):
        yield from itertools.combinations(items, k)


@dataclass(frozen=True)
class Focus:
    """One element of the materialisation set together with how it arose."""

    structure: LogicalStructure
    matching: dict            # left-hand node -> node of ``structure``
    assignment: dict          # left-hand node -> node of the source structure
    keep: Optional[tuple]     # None for a regular (definite) application
    projection: dict          # node of ``structure`` -> node of the source


def focus(s: LogicalStructure, rule: AnyRule) -> list[Focus]:
    out = []
    for m, v in find_matchings(s, rule):
        if v == TRUE:
            out.append(Focus(s, m, m, None, {u: u for u in s.universe}))
            continue
        for keep in _subsets(gamma(s, m)):
            mat, mm, proj = materialise_with_map(s, rule, m, keep)
            out.append(Focus(mat, mm, m, keep, proj))
    return out


def materialisations(s: LogicalStructure, rule: AnyRule) -> list[LogicalStructure]:
    """Regular application target plus every materialisation, deduplicated."""
    seen, out = set(), []
    for fc in focus(s, rule):
        k = fc.structure.key()
        if k not in seen:
            seen.add(k)
            out.append(fc.structure)
    return out


def mat_in_focus(s: LogicalStructure, rule: AnyRule, fc: Focus) -> bool:
    """The materialised structure embeds in ``s`` and matches definitely."""
    if not check_embedding(fc.structure, s, fc.projection):
        return False
    for m, v in find_matchings(fc.structure, rule):
        if m == fc.matching:
            return v == TRUE
    return False


# ------------------------------------------------------------------- steps

@dataclass(frozen=True)
class TraceStep:
    rule: str
    assignment: tuple          # ((lhs node, source node), ...)
    keep: Optional[tuple]      # kept summary nodes, None = regular application

    @property
    def stage(self) -> str:
        return "regular" if self.keep is None else "materialised"

    def to_json(self) -> dict:
        return {"rule": self.rule, "assignment": dict(self.assignment),
                "keep": None if self.keep is None else list(self.keep), "stage": self.stage}

    @classmethod
    def from_json(cls, d: dict) -> "TraceStep":
        keep = d.get("keep")
        return cls(d["rule"], tuple(d["assignment"].items()), None if keep is None else tuple(keep))


@dataclass
class Options:
    blur: bool = True
    eager_check: bool = False
    check_mat: bool = False


@dataclass
class Counters:
    intermediate: int = 0
    mat_checks: int = 0
    mat_violations: int = 0


def transition(s: LogicalStructure, rule: ShapeRule, fc: Focus,
               constraints: Sequence[CompatibilityConstraint], opts: Options,
               counters: Optional[Counters] = None) -> Optional[LogicalStructure]:
    """Coerce, apply, coerce and (optionally) blur one focused structure."""
    if counters is not None and opts.check_mat and fc.keep is not None:
        counters.mat_checks += 1
        if not mat_in_focus(s, rule, fc):
            counters.mat_violations += 1
            log.error("materialisation outside focus for rule %s at %s", rule.name, fc.assignment)
    s2 = coerce(fc.structure, constraints)
    if s2 is None:
        return None
    s3 = apply_shape(s2, rule, fc.matching)
    if counters is not None:
        counters.intermediate += 1
    s4 = coerce(s3, constraints)
    if s4 is None:
        return None
    return canonical_abstraction(s4) if opts.blur else s4


def step_traced(s: LogicalStructure, rule: ShapeRule, constraints: Sequence[CompatibilityConstraint],
                opts: Options = Options(), counters: Optional[Counters] = None
                ) -> list[tuple[LogicalStructure, TraceStep]]:
    out: dict[bytes, tuple[LogicalStructure, TraceStep]] = {}
    for fc in focus(s, rule):
        if counters is not None:
            counters.intermediate += 1
        t = transition(s, rule, fc, constraints, opts, counters)
        if t is None:
            continue
        key = t.key()
        if key not in out:
            out[key] = (t, TraceStep(rule.name, tuple(fc.assignment.items()), fc.keep))
    return [out[k] for k in sorted(out)]


def step(s: LogicalStructure, rule: ShapeRule, constraints: Sequence[CompatibilityConstraint] = (),
         blur: bool = True) -> list[LogicalStructure]:
    return [t for t, _ in step_traced(s, rule, constraints, Options(blur=blur))]


def replay_step(s: LogicalStructure, rule: ShapeRule, st: TraceStep,
                constraints: Sequence[CompatibilityConstraint], opts: Options) -> Optional[LogicalStructure]:
    m = dict(st.assignment)
    if st.keep is None:
        fc = Focus(s, m, m, None, {u: u for u in s.universe})
    else:
        mat, mm, proj = materialise_with_map(s, rule, m, st.keep)
        fc = Focus(mat, mm, m, tuple(st.keep), proj)
    return transition(s, rule, fc, constraints, opts)


# --------------------------------------------------------- pattern checking

@dataclass(frozen=True)
class PatternHit:
    pattern: str
    assignment: tuple
    keep: Optional[tuple]


def pattern_witness(s: LogicalStructure, pattern: ForbiddenPattern,
                    constraints: Sequence[CompatibilityConstraint]) -> Optional[PatternHit]:
    for fc in focus(s, pattern):
        if coerce(fc.structure, constraints) is not None:
            return PatternHit(pattern.name, tuple(fc.assignment.items()), fc.keep)
    return None


def check_pattern(s: LogicalStructure, pattern: ForbiddenPattern,
                  constraints: Sequence[CompatibilityConstraint] = ()) -> bool:
    """True when the pattern may occur in ``s`` and survives coercion."""
    return pattern_witness(s, pattern, constraints) is not None


# ------------------------------------------------------------- exploration

@dataclass
class Trace:
    steps: list[TraceStep]
    pattern: str
    final: LogicalStructure
    hit: Optional[PatternHit] = None


@dataclass
class AnalysisResult:
    verdict: str
    reach: list[LogicalStructure] = field(default_factory=list)
    trace: Optional[Trace] = None
    stats: dict = field(default_factory=dict)


@dataclass
class Limits:
    max_structures: Optional[int] = None
    max_seconds: Optional[float] = None


_WORKER: dict = {}


def _worker_init(rules, constraints, opts):
    _WORKER.update(rules=rules, constraints=constraints, opts=opts)


def _worker_successors(s: LogicalStructure):
    counters = Counters()
    out = []
    for rule in _WORKER["rules"]:
        out.append(step_traced(s, rule, _WORKER["constraints"], _WORKER["opts"], counters))
    return out, counters


def _successors(s, rules, constraints, opts):
    counters = Counters()
    return [step_traced(s, rule, constraints, opts, counters) for rule in rules], counters


def prepare_start(s0: LogicalStructure, constraints: Sequence[CompatibilityConstraint],
                  opts: Options) -> LogicalStructure:
    s = coerce(s0, constraints)
    if s is None:
        raise PreconditionError("start structure is inconsistent with the compatibility constraints")
    return canonical_abstraction(s) if opts.blur else s


def explore(s0: LogicalStructure, rules: Sequence[ShapeRule], patterns: Sequence[ForbiddenPattern] = (),
            constraints: Sequence[CompatibilityConstraint] = (), limits: Limits = Limits(),
            opts: Options = Options(), jobs: int = 1) -> AnalysisResult:
    """Worklist fixpoint over shapes, checking forbidden patterns."""
    t0 = time.perf_counter()
    counters = Counters()
    start = prepare_start(s0, constraints, opts)
    maxset = Antichain()
    parent: dict[bytes, tuple[Optional[bytes], Optional[TraceStep]]] = {}
    by_key: dict[bytes, LogicalStructure] = {}

    def stats(**extra):
        d = {
            "intermediate_structures": counters.intermediate,
            "max_set_size": len(maxset),
            "inserted": inserted,
            "processed": processed,
            "embedding_checks": maxset.embedding_checks,
            "mat_checks": counters.mat_checks,
            "mat_violations": counters.mat_violations,
            "wall_time": time.perf_counter() - t0,
        }
        d.update(extra)
        return d

    def trace_to(key: bytes) -> list[TraceStep]:
        steps = []
        while True:
            pk, st = parent[key]
            if pk is None:
                return steps[::-1]
            steps.append(st)
            key = pk

    def first_hit(s: LogicalStructure) -> Optional[PatternHit]:
        for p in patterns:
            hit = pattern_witness(s, p, constraints)
            if hit is not None:
                return hit
        return None

    inserted = processed = 0
    key0 = start.key()
    parent[key0] = (None, None)
    by_key[key0] = start
    hit = first_hit(start)
    if hit is not None:
        return AnalysisResult(UNSAFE, [], Trace([], hit.pattern, start, hit), stats())
    maxset.insert(start)
    inserted = 1
    queue = deque([start])
    pool = None
    if jobs > 1:
        pool = ProcessPoolExecutor(max_workers=jobs, initializer=_worker_init,
                                   initargs=(list(rules), list(constraints), opts))
    try:
        while queue:
            batch = [queue.popleft() for _ in range(min(len(queue), max(1, jobs * 2)))]
            if pool is not None:
                results = list(pool.map(_worker_successors, batch))
            else:
                results = [_successors(s, rules, constraints, opts) for s in batch]
            for s, (per_rule, c) in zip(batch, results):
                processed += 1
                counters.intermediate += c.intermediate
                counters.mat_checks += c.mat_checks
                counters.mat_violations += c.mat_violations
                skey = s.key()
                for succs in per_rule:
                    for t, st in succs:
                        tkey = t.key()
                        if opts.eager_check:
                            hit = first_hit(t)
                            if hit is not None:
                                parent.setdefault(tkey, (skey, st))
                                return AnalysisResult(UNSAFE, [], Trace(trace_to(tkey), hit.pattern, t, hit),
                                                      stats())
                        if not maxset.insert(t):
                            continue
                        inserted += 1
                        parent.setdefault(tkey, (skey, st))
                        by_key.setdefault(tkey, t)
                        hit = first_hit(t)
                        if hit is not None:
                            return AnalysisResult(UNSAFE, [], Trace(trace_to(tkey), hit.pattern, t, hit), stats())
                        queue.append(t)
                        if limits.max_structures is not None and inserted > limits.max_structures:
                            return AnalysisResult(BOUND_EXCEEDED, list(maxset), None,
                                                  stats(bound="max_structures"))
                if limits.max_seconds is not None and time.perf_counter() - t0 > limits.max_seconds:
                    return AnalysisResult(BOUND_EXCEEDED, list(maxset), None, stats(bound="max_seconds"))
    finally:
        if pool is not None:
            pool.shutdown()
    return AnalysisResult(SAFE, list(maxset), None, stats())


def replay(s0: LogicalStructure, rules: Sequence[ShapeRule], trace_steps: Sequence[TraceStep],
           constraints: Sequence[CompatibilityConstraint] = (), opts: Options = Options()) -> LogicalStructure:
    """Re-run the recorded steps from the start structure."""
    by_name = {r.name: r for r in rules}
    s = prepare_start(s0, constraints, opts)
    for st in trace_steps:
        nxt = replay_step(s, by_name[st.rule], st, constraints, opts)
        if nxt is None:
            raise PreconditionError(f"trace step {st.rule} is not replayable")
        s = nxt
    return s


# -------------------------------------------------------- concrete oracle

@dataclass
class ConcreteResult:
    verdict: str
    graphs: list[Graph]
    witness: Optional[tuple[Graph, str]] = None


def concrete_explore(g0: Graph, rules: Sequence[AnyRule], sig: Signature,
                     patterns: Sequence[ForbiddenPattern] = (), bound: int = 1000) -> ConcreteResult:
    """Breadth-first enumeration of concretely reachable graphs, up to
    isomorphism, stopping after ``bound`` distinct graphs."""
    if bound <= 0:
        raise ValueError("bound must be positive")
    classes: dict[tuple, list[LogicalStructure]] = {}
    graphs: list[Graph] = []

    class _Full(Exception):
        pass

    def add(g: Graph) -> Optional[LogicalStructure]:
        s = encode_graph(g, sig)
        inv = structure_invariant(s)
        bucket = classes.setdefault(inv, [])
        for other in bucket:
            if find_embedding(s, other) is not None:
                return None
        if len(graphs) >= bound:
            raise _Full
        bucket.append(s)
        graphs.append(g)
        return s

    def guard_for(s: LogicalStructure):
        return lambda node, label: s.value(label, node) == TRUE

    def violated(g: Graph, s: LogicalStructure) -> Optional[str]:
        for p in patterns:
            if next(graph_matchings(g, p, guard_for(s)), None) is not None:
                return p.name
        return None

    s0 = add(g0)
    bad = violated(g0, s0)
    if bad:
        return ConcreteResult(UNSAFE, graphs, (g0, bad))
    queue = deque([(g0, s0)])
    while queue:
        g, s = queue.popleft()
        for rule in rules:
            for m in list(graph_matchings(g, rule, guard_for(s))):
                h = apply_concrete(g, rule, m)
                try:
                    sh = add(h)
                except _Full:
                    return ConcreteResult(BOUND_EXCEEDED, graphs)
                if sh is None:
                    continue
                bad = violated(h, sh)
                if bad:
                    return ConcreteResult(UNSAFE, graphs, (h, bad))
                queue.append((h, sh))
    return ConcreteResult(SAFE, graphs)
