"""Logical structures, graphs and the embedding order between them.

A :class:`LogicalStructure` stores its interpretation densely:

* ``unary``  -- ``uint8`` array of shape ``(n, len(sig.unary_names))``;
  column 0 is always ``sm``.
* ``binary`` -- ``uint8`` array of shape ``(len(sig.binary), n, n)``.

Values use the :mod:`gtshape.kleene` encoding (0, 1 = maybe, 2).
Structures are immutable; the arrays are flagged read-only.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping, Optional

import numpy as np

from . import kernels
from .errors import SignatureError
from .formula import Formula, eval_indexed, free_vars, predicates
from .kleene import MAYBE, TRUE, TruthValue

log = logging.getLogger(__name__)

SM = "sm"


@dataclass(frozen=True)
class Instrumentation:
    name: str
    var: str
    meaning: Formula


@dataclass(frozen=True)
class Signature:
    """Predicate vocabulary: core unary (``sm`` implicit), core binary and
    unary instrumentation predicates with their meaning formulas."""

    unary: tuple[str, ...] = ()
    binary: tuple[str, ...] = ()
    instrumentation: tuple[Instrumentation, ...] = ()

    def __post_init__(self):
        names = list(self.unary) + list(self.binary) + [i.name for i in self.instrumentation]
        if SM in names:
            raise SignatureError("'sm' is reserved")
        seen = set()
        for n in names:
            if n in seen:
                raise SignatureError(f"predicate {n!r} declared twice")
            seen.add(n)
        known: dict[str, int] = {SM: 1, **{u: 1 for u in self.unary}, **{b: 2 for b in self.binary}}
        for ins in self.instrumentation:
            extra = free_vars(ins.meaning) - {ins.var}
            if extra:
                raise SignatureError(f"meaning of {ins.name!r} has stray free variables {sorted(extra)}")
            for name, arity in predicates(ins.meaning):
                if known.get(name) != arity:
                    raise SignatureError(
                        f"meaning of {ins.name!r} uses {name!r}/{arity}, which is unknown or not yet declared"
                    )
            known[ins.name] = 1

    @cached_property
    def unary_names(self) -> tuple[str, ...]:
        return (SM,) + self.unary + tuple(i.name for i in self.instrumentation)

    @cached_property
    def unary_index(self) -> dict[str, int]:
        return {n: k for k, n in enumerate(self.unary_names)}

    @cached_property
    def binary_index(self) -> dict[str, int]:
        return {n: k for k, n in enumerate(self.binary)}

    @cached_property
    def instrumentation_names(self) -> frozenset[str]:
        return frozenset(i.name for i in self.instrumentation)

    def arity(self, name: str) -> Optional[int]:
        if name in self.unary_index:
            return 1
        if name in self.binary_index:
            return 2
        return None

    def is_core(self, name: str) -> bool:
        return name in self.binary_index or (name in self.unary_index and name not in self.instrumentation_names)

    def __getstate__(self):
        return (self.unary, self.binary, self.instrumentation)

    def __setstate__(self, state):
        for k, v in zip(("unary", "binary", "instrumentation"), state):
            object.__setattr__(self, k, v)


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


class LogicalStructure:
    __slots__ = ("sig", "universe", "unary", "binary", "_index", "_key")

    def __init__(self, sig: Signature, universe: Iterable[str], unary=None, binary=None):
        self.sig = sig
        self.universe = tuple(universe)
        n = len(self.universe)
        if len(set(self.universe)) != n:
            raise ValueError("duplicate node ids in universe")
        if unary is None:
            unary = np.zeros((n, len(sig.unary_names)), dtype=np.uint8)
        if binary is None:
            binary = np.zeros((len(sig.binary), n, n), dtype=np.uint8)
        unary = np.array(unary, dtype=np.uint8, copy=True).reshape(n, len(sig.unary_names))
        binary = np.array(binary, dtype=np.uint8, copy=True).reshape(len(sig.binary), n, n)
        if n and unary[:, 0].max() > MAYBE:
            raise ValueError("sm must never be 1")
        self.unary = _frozen(unary)
        self.binary = _frozen(binary)
        self._index: Optional[dict[str, int]] = None
        self._key: Optional[bytes] = None

    @classmethod
    def build(cls, sig: Signature, universe: Iterable[str],
              values: Mapping[tuple, TruthValue] = (), summary: Iterable[str] = ()) -> "LogicalStructure":
        """Build from sparse values keyed by ``(pred, node)`` or ``(pred, a, b)``."""
        universe = tuple(universe)
        idx = {u: k for k, u in enumerate(universe)}
        un = np.zeros((len(universe), len(sig.unary_names)), dtype=np.uint8)
        bi = np.zeros((len(sig.binary), len(universe), len(universe)), dtype=np.uint8)
        for u in summary:
            un[idx[u], 0] = MAYBE
        for key, v in dict(values).items():
            pred, *nodes = key
            if len(nodes) == 1 and pred in sig.unary_index:
                un[idx[nodes[0]], sig.unary_index[pred]] = v
            elif len(nodes) == 2 and pred in sig.binary_index:
                bi[sig.binary_index[pred], idx[nodes[0]], idx[nodes[1]]] = v
            else:
                raise SignatureError(f"bad predicate application {pred}/{len(nodes)}")
        return cls(sig, universe, un, bi)

    # -- access

    def __len__(self) -> int:
        return len(self.universe)

    def index(self, node: str) -> int:
        if self._index is None:
            self._index = {u: k for k, u in enumerate(self.universe)}
        try:
            return self._index[node]
        except KeyError:
            raise KeyError(f"node {node!r} not in universe") from None

    def __contains__(self, node: str) -> bool:
        try:
            self.index(node)
        except KeyError:
            return False
        return True

    def unary_column(self, name: str) -> int:
        try:
            return self.sig.unary_index[name]
        except KeyError:
            raise SignatureError(f"unknown unary predicate {name!r}") from None

    def binary_layer(self, name: str) -> int:
        try:
            return self.sig.binary_index[name]
        except KeyError:
            raise SignatureError(f"unknown binary predicate {name!r}") from None

    def value(self, pred: str, *nodes: str) -> TruthValue:
        if len(nodes) == 1:
            return TruthValue(int(self.unary[self.index(nodes[0]), self.unary_column(pred)]))
        if len(nodes) == 2:
            a, b = self.index(nodes[0]), self.index(nodes[1])
            return TruthValue(int(self.binary[self.binary_layer(pred), a, b]))
        raise SignatureError("only unary and binary predicates exist")

    def is_summary(self, node: str) -> bool:
        return self.unary[self.index(node), 0] == MAYBE

    @property
    def summary_nodes(self) -> tuple[str, ...]:
        return tuple(u for k, u in enumerate(self.universe) if self.unary[k, 0] == MAYBE)

    def is_two_valued(self) -> bool:
        return not ((self.unary == MAYBE).any() or (self.binary == MAYBE).any())

    def count_maybe(self) -> int:
        return int((self.unary == MAYBE).sum() + (self.binary == MAYBE).sum())

    # -- derivation

    def replace(self, universe=None, unary=None, binary=None) -> "LogicalStructure":
        return LogicalStructure(
            self.sig,
            self.universe if universe is None else universe,
            self.unary if unary is None else unary,
            self.binary if binary is None else binary,
        )

    def restrict(self, keep: Iterable[str]) -> "LogicalStructure":
        keep = list(keep)
        ix = np.array([self.index(u) for u in keep], dtype=np.intp)
        return LogicalStructure(self.sig, keep, self.unary[ix], self.binary[:, ix][:, :, ix])

    def renamed(self, mapping: Mapping[str, str]) -> "LogicalStructure":
        return self.replace(universe=[mapping.get(u, u) for u in self.universe])

    # -- identity

    def key(self) -> bytes:
        """Canonical key: equal keys imply isomorphic structures."""
        if self._key is None:
            order = canonical_order(self)
            ix = np.array(order, dtype=np.intp)
            un = self.unary[ix]
            bi = self.binary[:, ix][:, :, ix]
            header = np.array([len(self.universe), un.shape[1], bi.shape[0]], dtype=np.int64)
            self._key = header.tobytes() + un.tobytes() + bi.tobytes()
        return self._key

    def __eq__(self, other) -> bool:
        if not isinstance(other, LogicalStructure):
            return NotImplemented
        return (self.universe == other.universe and self.sig == other.sig
                and np.array_equal(self.unary, other.unary)
                and np.array_equal(self.binary, other.binary))

    def __hash__(self) -> int:
        return hash((self.universe, self.unary.tobytes(), self.binary.tobytes()))

    def __repr__(self) -> str:
        return f"<LogicalStructure |U|={len(self.universe)} sm={list(self.summary_nodes)}>"

    def __getstate__(self):
        return (self.sig, self.universe, np.asarray(self.unary), np.asarray(self.binary))

    def __setstate__(self, state):
        sig, universe, un, bi = state
        self.sig, self.universe = sig, universe
        self.unary, self.binary = _frozen(np.array(un)), _frozen(np.array(bi))
        self._index = self._key = None


def canonical_order(s: LogicalStructure) -> list[int]:
    """Node order by unary vector, then by binary degree profile, then id."""
    n = len(s.universe)
    if n == 0:
        return []
    profile = []
    for k in range(n):
        out = tuple(np.bincount(s.binary[:, k, :].ravel() if s.binary.size else np.zeros(0, np.uint8),
                                minlength=3).tolist())
        out_by_layer = tuple(tuple(np.bincount(s.binary[p, k, :], minlength=3).tolist())
                             + tuple(np.bincount(s.binary[p, :, k], minlength=3).tolist())
                             + (int(s.binary[p, k, k]),)
                             for p in range(s.binary.shape[0]))
        profile.append((tuple(s.unary[k].tolist()), out_by_layer, out, s.universe[k]))
    return sorted(range(n), key=lambda k: profile[k])


# ------------------------------------------------------------------ graphs

@dataclass(frozen=True, eq=False)
class Graph:
    """Node set plus labelled edges ``(src, label, dst)``; type loops are
    edges ``(n, T, n)``. Both keep insertion order but compare as sets."""

    nodes: tuple[str, ...]
    edges: tuple[tuple[str, str, str], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(dict.fromkeys(self.nodes)))
        object.__setattr__(self, "edges", tuple(dict.fromkeys(tuple(e) for e in self.edges)))
        ns = set(self.nodes)
        for a, _, b in self.edges:
            if a not in ns or b not in ns:
                raise ValueError(f"edge endpoint not a node: {(a, b)}")

    @property
    def edge_set(self) -> frozenset:
        return frozenset(self.edges)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return set(self.nodes) == set(other.nodes) and self.edge_set == other.edge_set

    def __hash__(self) -> int:
        return hash((frozenset(self.nodes), self.edge_set))

    def __repr__(self) -> str:
        return f"Graph(nodes={list(self.nodes)}, edges={sorted(self.edges)})"

    def loops(self, node: str) -> list[str]:
        return [l for a, l, b in self.edges if a == b == node]


def encode_graph(g: Graph, sig: Signature) -> LogicalStructure:
    """2-valued encoding; instrumentation values come from meaning formulas."""
    idx = {u: k for k, u in enumerate(g.nodes)}
    n = len(g.nodes)
    un = np.zeros((n, len(sig.unary_names)), dtype=np.uint8)
    bi = np.zeros((len(sig.binary), n, n), dtype=np.uint8)
    for a, label, b in g.edges:
        if label in sig.binary_index:
            bi[sig.binary_index[label], idx[a], idx[b]] = TRUE
        elif label in sig.unary_index and sig.is_core(label):
            if a != b:
                raise SignatureError(f"unary label {label!r} on a non-loop edge {a}->{b}")
            un[idx[a], sig.unary_index[label]] = TRUE
        else:
            raise SignatureError(f"label {label!r} is not a core predicate")
    return with_meanings(LogicalStructure(sig, g.nodes, un, bi))


def with_meanings(s: LogicalStructure) -> LogicalStructure:
    """Recompute every instrumentation predicate from its meaning formula."""
    if not s.sig.instrumentation:
        return s
    un = np.array(s.unary)
    cur = s
    for ins in s.sig.instrumentation:
        col = s.sig.unary_index[ins.name]
        for k in range(len(s.universe)):
            un[k, col] = eval_indexed(ins.meaning, cur, {ins.var: k})
        cur = s.replace(unary=un)
    return cur


def decode_graph(s: LogicalStructure) -> Graph:
    if not s.is_two_valued():
        raise ValueError("only 2-valued structures decode to graphs")
    edges = set()
    for name in s.sig.unary:
        col = s.sig.unary_index[name]
        for k in np.flatnonzero(s.unary[:, col] == TRUE):
            u = s.universe[k]
            edges.add((u, name, u))
    for name, p in s.sig.binary_index.items():
        for a, b in zip(*np.nonzero(s.binary[p] == TRUE)):
            edges.add((s.universe[a], name, s.universe[b]))
    return Graph(s.universe, tuple(sorted(edges)))


# --------------------------------------------------------------- embedding

def _info_le(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return (a == b) | (b == MAYBE)


def check_embedding(s: LogicalStructure, t: LogicalStructure, f: Mapping[str, str]) -> bool:
    """True iff ``f`` embeds ``s`` in ``t`` (surjective, values ⊑, summary)."""
    if set(f) != set(s.universe):
        raise ValueError("embedding map must be total on the source universe")
    try:
        fmap = np.array([t.index(f[u]) for u in s.universe], dtype=np.intp)
    except KeyError as e:
        raise ValueError(f"embedding image outside codomain: {e}") from None
    counts = np.bincount(fmap, minlength=len(t.universe)) if len(fmap) else np.zeros(len(t.universe), np.intp)
    if (counts == 0).any():
        return False
    if not _info_le(s.unary, t.unary[fmap]).all():
        return False
    if not _info_le(s.binary, t.binary[:, fmap][:, :, fmap]).all():
        return False
    return bool(((counts <= 1) | (t.unary[:, 0] == MAYBE)).all())


def find_embedding(s: LogicalStructure, t: LogicalStructure) -> Optional[dict[str, str]]:
    """Search for an embedding of ``s`` into ``t``; ``None`` if there is none."""
    if s.sig != t.sig:
        raise SignatureError("structures over different signatures")
    res = kernels.search_embedding(s.unary, t.unary, s.binary, t.binary)
    if res is None:
        return None
    return {u: t.universe[j] for u, j in zip(s.universe, res)}


def embeds(s: LogicalStructure, t: LogicalStructure) -> bool:
    if len(s.universe) < len(t.universe):
        return False
    return find_embedding(s, t) is not None


# ------------------------------------------------------- canonical abstraction

def _blur_once(s: LogicalStructure) -> tuple[LogicalStructure, list[int]]:
    blocks: dict[bytes, list[int]] = {}
    for k in range(len(s.universe)):
        blocks.setdefault(s.unary[k].tobytes(), []).append(k)
    if len(blocks) == len(s.universe):
        return s, list(range(len(s.universe)))
    members = list(blocks.values())
    un = np.array([s.unary[m[0]] for m in members], dtype=np.uint8)
    for b, m in enumerate(members):
        if len(m) > 1:
            un[b, 0] = MAYBE
    order = [k for m in members for k in m]
    starts = np.cumsum([0] + [len(m) for m in members[:-1]])
    grouped = s.binary[:, order][:, :, order]
    lo = np.minimum.reduceat(np.minimum.reduceat(grouped, starts, axis=1), starts, axis=2)
    hi = np.maximum.reduceat(np.maximum.reduceat(grouped, starts, axis=1), starts, axis=2)
    bi = np.where(lo == hi, lo, MAYBE).astype(np.uint8)
    proj = [0] * len(s.universe)
    for b, m in enumerate(members):
        for k in m:
            proj[k] = b
    names = [s.universe[m[0]] for m in members]
    return LogicalStructure(s.sig, names, un, bi), proj


def _blur(s: LogicalStructure) -> tuple[LogicalStructure, list[int]]:
    # A merged block of concrete nodes becomes a summary node and may then
    # share its vector with an existing summary node, so repeat to a fixpoint.
    proj = list(range(len(s.universe)))
    while True:
        nxt, step = _blur_once(s)
        if nxt is s:
            return s, proj
        proj = [step[p] for p in proj]
        s = nxt


def canonical_abstraction(s: LogicalStructure) -> LogicalStructure:
    """Merge nodes whose unary vectors (including ``sm``) agree."""
    return _blur(s)[0]


def block_map(s: LogicalStructure) -> dict[str, str]:
    """The projection witnessing ``s ⊑ canonical_abstraction(s)``."""
    t, proj = _blur(s)
    return {u: t.universe[p] for u, p in zip(s.universe, proj)}


# ---------------------------------------------------------------- antichain

class Antichain:
    """Set of structures kept maximal under the embedding order."""

    def __init__(self):
        self.members: list[LogicalStructure] = []
        self._keys: set[bytes] = set()
        self.embedding_checks = 0

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def __contains__(self, s: LogicalStructure) -> bool:
        return s.key() in self._keys

    def _embeds(self, a: LogicalStructure, b: LogicalStructure) -> bool:
        if len(a.universe) < len(b.universe):
            return False
        self.embedding_checks += 1
        return find_embedding(a, b) is not None

    def insert(self, s: LogicalStructure) -> bool:
        """Add ``s`` unless an existing member already covers it.

        Members strictly below ``s`` are dropped. Structures that embed both
        ways (isomorphic copies) count as already present.
        """
        if s.key() in self._keys:
            return False
        for x in self.members:
            if self._embeds(s, x):
                return False
        dominated = [x for x in self.members if self._embeds(x, s)]
        for x in dominated:
            self.members.remove(x)
            self._keys.discard(x.key())
        self.members.append(s)
        self._keys.add(s.key())
        return True


def max_insert(members: Iterable[LogicalStructure], s: LogicalStructure) -> tuple[list[LogicalStructure], bool]:
    """Functional form of :meth:`Antichain.insert`."""
    ac = Antichain()
    ac.members = list(members)
    ac._keys = {m.key() for m in ac.members}
    inserted = ac.insert(s)
    return ac.members, inserted


def structure_invariant(s: LogicalStructure) -> tuple:
    """Isomorphism-invariant fingerprint (node-name free)."""
    order = canonical_order(s)
    rows = []
    for k in order:
        per_layer = tuple(
            (tuple(np.bincount(s.binary[p, k, :], minlength=3).tolist()),
             tuple(np.bincount(s.binary[p, :, k], minlength=3).tolist()),
             int(s.binary[p, k, k]))
            for p in range(s.binary.shape[0]))
        rows.append((tuple(s.unary[k].tolist()), per_layer))
    return (len(s.universe), tuple(sorted(rows)))
