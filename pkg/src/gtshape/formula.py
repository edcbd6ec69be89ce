"""First-order formulas over unary/binary predicates and their
3-valued evaluation on logical structures.

Grammar (ASCII)::

    formula := implication
    implication := disjunction ('->' implication)?
    disjunction := conjunction ('|' conjunction)*
    conjunction := unary ('&' unary)*
    unary := '!' unary | quantifier | atom | '(' formula ')'
    quantifier := ('exists' | 'forall') var (',' var)* ':' formula
    atom := '0' | '1/2' | '1' | p '(' var ')' | p '(' var ',' var ')'
          | var '==' var | var '!=' var

A quantifier body extends as far to the right as possible.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterator, Mapping, Sequence, Union

import numpy as np

from .errors import ParseError, SignatureError
from .kleene import FALSE, MAYBE, TRUE, TruthValue

if TYPE_CHECKING:
    from .structure import LogicalStructure, Signature


@dataclass(frozen=True)
class Const:
    value: TruthValue


@dataclass(frozen=True)
class Pred1:
    name: str
    var: str


@dataclass(frozen=True)
class Pred2:
    name: str
    left: str
    right: str


@dataclass(frozen=True)
class Eq:
    left: str
    right: str


@dataclass(frozen=True)
class Not:
    body: "Formula"


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Implies:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Exists:
    var: str
    body: "Formula"


@dataclass(frozen=True)
class Forall:
    var: str
    body: "Formula"


Formula = Union[Const, Pred1, Pred2, Eq, Not, And, Or, Implies, Exists, Forall]

KEYWORDS = frozenset({"exists", "forall"})


def conj(*parts: Formula) -> Formula:
    """Left-nested conjunction; the empty conjunction is ``1``."""
    if not parts:
        return Const(TRUE)
    out = parts[0]
    for p in parts[1:]:
        out = And(out, p)
    return out


def disj(*parts: Formula) -> Formula:
    if not parts:
        return Const(FALSE)
    out = parts[0]
    for p in parts[1:]:
        out = Or(out, p)
    return out


def free_vars(f: Formula) -> frozenset[str]:
    if isinstance(f, Const):
        return frozenset()
    if isinstance(f, Pred1):
        return frozenset((f.var,))
    if isinstance(f, (Pred2, Eq)):
        return frozenset((f.left, f.right))
    if isinstance(f, Not):
        return free_vars(f.body)
    if isinstance(f, (And, Or, Implies)):
        return free_vars(f.left) | free_vars(f.right)
    if isinstance(f, (Exists, Forall)):
        return free_vars(f.body) - {f.var}
    raise TypeError(f"not a formula: {f!r}")


def predicates(f: Formula) -> Iterator[tuple[str, int]]:
    """Yield ``(name, arity)`` for every predicate occurrence."""
    if isinstance(f, Pred1):
        yield f.name, 1
    elif isinstance(f, Pred2):
        yield f.name, 2
    elif isinstance(f, (Not, Exists, Forall)):
        yield from predicates(f.body)
    elif isinstance(f, (And, Or, Implies)):
        yield from predicates(f.left)
        yield from predicates(f.right)


def rename(f: Formula, mapping: Mapping[str, str]) -> Formula:
    """Rename free variables. Bound variables are left alone."""
    if not mapping:
        return f
    if isinstance(f, Const):
        return f
    if isinstance(f, Pred1):
        return Pred1(f.name, mapping.get(f.var, f.var))
    if isinstance(f, Pred2):
        return Pred2(f.name, mapping.get(f.left, f.left), mapping.get(f.right, f.right))
    if isinstance(f, Eq):
        return Eq(mapping.get(f.left, f.left), mapping.get(f.right, f.right))
    if isinstance(f, Not):
        return Not(rename(f.body, mapping))
    if isinstance(f, (And, Or, Implies)):
        return type(f)(rename(f.left, mapping), rename(f.right, mapping))
    if isinstance(f, (Exists, Forall)):
        inner = {k: v for k, v in mapping.items() if k != f.var}
        if f.var in inner.values():
            raise ValueError(f"renaming would capture bound variable {f.var!r}")
        return type(f)(f.var, rename(f.body, inner))
    raise TypeError(f"not a formula: {f!r}")


def type_check(f: Formula, sig: "Signature") -> None:
    for name, arity in predicates(f):
        declared = sig.arity(name)
        if declared is None:
            raise SignatureError(f"unknown predicate {name!r}")
        if declared != arity:
            raise SignatureError(f"predicate {name!r} has arity {declared}, used with {arity}")


# ---------------------------------------------------------------- printing

_PREC = {Implies: 1, Or: 2, And: 3}


def to_text(f: Formula) -> str:
    return _print(f, 0)


def _print(f: Formula, ctx: int) -> str:
    if isinstance(f, Const):
        return str(f.value)
    if isinstance(f, Pred1):
        return f"{f.name}({f.var})"
    if isinstance(f, Pred2):
        return f"{f.name}({f.left},{f.right})"
    if isinstance(f, Eq):
        return f"{f.left} == {f.right}"
    if isinstance(f, Not):
        if isinstance(f.body, (Eq, And, Or, Implies, Exists, Forall)):
            return f"!({_print(f.body, 0)})"
        return "!" + _print(f.body, 4)
    if isinstance(f, (Exists, Forall)):
        kw = "exists" if isinstance(f, Exists) else "forall"
        text = f"{kw} {f.var}: {_print(f.body, 0)}"
        return f"({text})" if ctx > 0 else text
    prec = _PREC[type(f)]
    op = {Implies: "->", Or: "|", And: "&"}[type(f)]
    if isinstance(f, Implies):
        # right-associative
        text = f"{_print(f.left, prec + 1)} {op} {_print(f.right, prec)}"
    else:
        text = f"{_print(f.left, prec)} {op} {_print(f.right, prec + 1)}"
    return f"({text})" if ctx > prec else text


# ----------------------------------------------------------------- parsing

_TOKEN = re.compile(
    r"""(?P<ws>\s+)
      |(?P<half>1/2)
      |(?P<num>[01])(?![0-9/])
      |(?P<op>->|==|!=|[!&|(),:])
      |(?P<name>[A-Za-z_][A-Za-z0-9_]*)
    """,
    re.VERBOSE,
)


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str, line0: int = 1, col0: int = 1) -> list[_Tok]:
    toks: list[_Tok] = []
    pos, line, col = 0, line0, col0
    while pos < len(text):
        mt = _TOKEN.match(text, pos)
        if mt is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = mt.lastgroup
        chunk = mt.group()
        if kind != "ws":
            toks.append(_Tok(kind, chunk, line, col))
        for ch in chunk:
            if ch == "\n":
                line, col = line + 1, 1
            else:
                col += 1
        pos = mt.end()
    toks.append(_Tok("eof", "", line, col))
    return toks


class _Parser:
    def __init__(self, toks: list[_Tok]):
        self.toks = toks
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def error(self, msg: str) -> ParseError:
        t = self.tok
        found = t.text or "end of input"
        return ParseError(f"{msg}, found {found!r}", t.line, t.col)

    def accept(self, text: str) -> bool:
        if self.tok.text == text and self.tok.kind != "eof":
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> None:
        if not self.accept(text):
            raise self.error(f"expected {text!r}")

    def name(self) -> str:
        t = self.tok
        if t.kind != "name" or t.text in KEYWORDS:
            raise self.error("expected a name")
        self.i += 1
        return t.text

    def formula(self) -> Formula:
        left = self.disjunction()
        if self.accept("->"):
            return Implies(left, self.formula())
        return left

    def disjunction(self) -> Formula:
        out = self.conjunction()
        while self.accept("|"):
            out = Or(out, self.conjunction())
        return out

    def conjunction(self) -> Formula:
        out = self.unary()
        while self.accept("&"):
            out = And(out, self.unary())
        return out

    def unary(self) -> Formula:
        t = self.tok
        if self.accept("!"):
            return Not(self.unary())
        if self.accept("("):
            inner = self.formula()
            self.expect(")")
            return inner
        if t.kind == "half":
            self.i += 1
            return Const(MAYBE)
        if t.kind == "num":
            self.i += 1
            return Const(TRUE if t.text == "1" else FALSE)
        if t.kind == "name" and t.text in KEYWORDS:
            self.i += 1
            names = [self.name()]
            while self.accept(","):
                names.append(self.name())
            self.expect(":")
            body = self.formula()
            node = Exists if t.text == "exists" else Forall
            for v in reversed(names):
                body = node(v, body)
            return body
        if t.kind == "name":
            first = self.name()
            if self.accept("("):
                a = self.name()
                if self.accept(","):
                    b = self.name()
                    self.expect(")")
                    return Pred2(first, a, b)
                self.expect(")")
                return Pred1(first, a)
            if self.accept("=="):
                return Eq(first, self.name())
            if self.accept("!="):
                return Not(Eq(first, self.name()))
            raise self.error("expected '(' or '==' after variable")
        raise self.error("expected a formula")


def parse(text: str, sig: "Signature | None" = None, *, line: int = 1, column: int = 1) -> Formula:
    """Parse ``text``; when ``sig`` is given, predicates are checked against it."""
    p = _Parser(_tokenize(text, line, column))
    f = p.formula()
    if p.tok.kind != "eof":
        raise p.error("unexpected trailing input")
    if sig is not None:
        type_check(f, sig)
    return f


# -------------------------------------------------------------- evaluation

def evaluate(f: Formula, s: "LogicalStructure", assignment: Mapping[str, str]) -> TruthValue:
    """Kleene value of ``f`` in ``s`` with free variables bound to node ids."""
    missing = free_vars(f) - assignment.keys()
    if missing:
        raise ValueError(f"unbound free variables: {sorted(missing)}")
    env = {v: s.index(n) for v, n in assignment.items()}
    return TruthValue(eval_indexed(f, s, env))


def eval_indexed(f: Formula, s: "LogicalStructure", env: dict[str, int]) -> int:
    """Evaluate with variables bound to universe indices. Returns a raw int."""
    t = type(f)
    if t is Pred1:
        return int(s.unary[env[f.var], s.unary_column(f.name)])
    if t is Pred2:
        return int(s.binary[s.binary_layer(f.name), env[f.left], env[f.right]])
    if t is And:
        a = eval_indexed(f.left, s, env)
        if a == 0:
            return 0
        b = eval_indexed(f.right, s, env)
        return a if a < b else b
    if t is Or:
        a = eval_indexed(f.left, s, env)
        if a == 2:
            return 2
        b = eval_indexed(f.right, s, env)
        return a if a > b else b
    if t is Not:
        return 2 - eval_indexed(f.body, s, env)
    if t is Eq:
        i, j = env[f.left], env[f.right]
        if i != j:
            return 0
        return 1 if s.unary[i, 0] == 1 else 2
    if t is Const:
        return int(f.value)
    if t is Implies:
        a = 2 - eval_indexed(f.left, s, env)
        if a == 2:
            return 2
        b = eval_indexed(f.right, s, env)
        return a if a > b else b
    if t is Exists or t is Forall:
        saved = env.get(f.var)
        best = 0 if t is Exists else 2
        stop = 2 - best
        for k in range(len(s.universe)):
            env[f.var] = k
            v = eval_indexed(f.body, s, env)
            if t is Exists:
                best = v if v > best else best
            else:
                best = v if v < best else best
            if best == stop:
                break
        if saved is None:
            env.pop(f.var, None)
        else:
            env[f.var] = saved
        return best
    raise TypeError(f"not a formula: {f!r}")


def eval_all(f: Formula, s: "LogicalStructure", variables: Sequence[str]) -> np.ndarray:
    """Values of ``f`` for every binding of ``variables`` as an integer array
    with one axis per variable. Axes a variable does not occur in may have
    length 1, so the result broadcasts against ``(n,) * len(variables)``."""
    return compile_all(f, variables)(s)


def compile_all(f: Formula, variables: Sequence[str]):
    """Turn ``f`` into a function ``s -> array`` computing :func:`eval_all`."""
    fv = free_vars(f) - set(variables)
    if fv:
        raise ValueError(f"unbound free variables: {sorted(fv)}")
    return _compile(f, tuple(variables))


def _layout(axes: tuple, names: tuple):
    # How to lay a (n,)*len(names) array out along ``axes``: the axis
    # positions, whether to take the diagonal, and whether to transpose.
    k = len(axes)
    if len(names) == 1:
        return k, (axes.index(names[0]),), False, False
    p, q = axes.index(names[0]), axes.index(names[1])
    if p == q:
        return k, (p,), True, False
    if p > q:
        return k, (q, p), False, True
    return k, (p, q), False, False


def _shaper(axes: tuple, names: tuple):
    k, pos, diag, trans = _layout(axes, names)

    def shape(vec):
        if diag:
            vec = np.diagonal(vec)
        elif trans:
            vec = vec.T
        dims = [1] * k
        for p in pos:
            dims[p] = vec.shape[0]
        return vec.reshape(dims)
    return shape


def _compile(f: Formula, axes: tuple):
    t = type(f)
    k = len(axes)
    if t is Pred1:
        shape = _shaper(axes, (f.var,))
        name = f.name
        return lambda s: shape(s.unary[:, s.unary_column(name)])
    if t is Pred2:
        shape = _shaper(axes, (f.left, f.right))
        name = f.name
        return lambda s: shape(s.binary[s.binary_layer(name)])
    if t is And or t is Or or t is Implies:
        left, right = _compile(f.left, axes), _compile(f.right, axes)
        if t is And:
            return lambda s: np.minimum(left(s), right(s))
        if t is Or:
            return lambda s: np.maximum(left(s), right(s))
        return lambda s: np.maximum(2 - left(s), right(s))
    if t is Not:
        body = _compile(f.body, axes)
        return lambda s: 2 - body(s)
    if t is Const:
        const = np.full((1,) * k, int(f.value), dtype=np.int16)
        return lambda s: const
    if t is Eq:
        if f.left == f.right:
            shape = _shaper(axes, (f.left,))
            return lambda s: shape(np.where(s.unary[:, 0] == 1, 1, 2))
        shape = _shaper(axes, (f.left, f.right))
        return lambda s: shape(np.diag(np.where(s.unary[:, 0] == 1, 1, 2)))
    if t is Exists or t is Forall:
        inner = tuple("" if v == f.var else v for v in axes) + (f.var,)
        body = _compile(f.body, inner)
        empty = np.full((1,) * k, 0 if t is Exists else 2, dtype=np.int16)
        if t is Exists:
            return lambda s: body(s).max(axis=-1) if len(s.universe) else empty
        return lambda s: body(s).min(axis=-1) if len(s.universe) else empty
    raise TypeError(f"not a formula: {f!r}")
