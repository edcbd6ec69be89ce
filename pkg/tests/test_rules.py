import itertools
import random

import pytest

from gtshape.errors import PreconditionError, SignatureError
from gtshape.formula import Const, Pred1, evaluate, free_vars, parse, to_text
from gtshape.kleene import FALSE, MAYBE, TRUE
from gtshape.model import load_model
from gtshape.rules import (GraphRule, ShapeRule, apply_concrete, apply_shape,
                           find_matchings, fresh_name, graph_matchings, production_formula)
from gtshape.structure import Graph, Instrumentation, LogicalStructure, Signature, encode_graph

from helpers import INSTR, MODELS, PLAIN, graph_guard, random_graph, random_rule, random_structure, shape_rule

RAIL = load_model(MODELS / "railcab.gts")
SIG = RAIL.sig
RULES = {r.name: r for r in RAIL.rules}
ENTER = RULES["EnterStation"]

TYPED = (("r", "RC", "r"), ("t", "T", "t"), ("s", "S", "s"))
ENTER_LHS = Graph(("r", "t", "s"), TYPED + (("r", "on", "t"), ("t", "next", "s")))


def maybe_start():
    """Start shape with every type-consistent edge at 1/2."""
    v = {("RC", "r"): TRUE, ("T", "t"): TRUE, ("S", "s"): TRUE, ("empty", "t"): MAYBE,
         ("at_station", "r"): MAYBE}
    for a, b in (("r", "t"), ("r", "s")):
        v[("on", a, b)] = MAYBE
    for a in ("t", "s"):
        for b in ("t", "s"):
            v[("next", a, b)] = MAYBE
    return LogicalStructure.build(SIG, ["r", "t", "s"], v, summary=["r", "t", "s"])


# ------------------------------------------------------------- deltas

def test_delta_sets():
    r = ENTER.rule
    assert r.deleted_nodes == () and r.created_nodes == ()
    assert r.deleted_edges == (("r", "on", "t"),)
    assert r.created_edges == (("r", "on", "s"),)
    g = GraphRule("d", Graph(("a", "b"), (("a", "e", "b"),)), Graph(("a", "c"), (("a", "e", "c"),)))
    assert g.deleted_nodes == ("b",) and g.created_nodes == ("c",)


def test_fresh_name():
    assert fresh_name("n", {"m"}) == "n"
    assert fresh_name("n", {"n", "n.1"}) == "n.2"
    assert fresh_name("u.1", {"u.1"}) == "u.2"


# -------------------------------------------------- production formulas

def test_production_formula_enter():
    f = production_formula(GraphRule("e", ENTER_LHS, ENTER_LHS), SIG)
    assert f == parse("on(r,t) & next(t,s) & RC(r) & T(t) & S(s) & !(r == t) & !(r == s) & !(t == s)"
                      " & !sm(r) & !sm(t) & !sm(s)")
    assert free_vars(f) == {"r", "t", "s"}


def test_production_formula_single_node():
    g = Graph(("n",), (("n", "RC", "n"),))
    assert production_formula(GraphRule("x", g, g), SIG) == parse("RC(n) & !sm(n)")


def test_production_formula_collision():
    (pat,) = RAIL.patterns
    f = production_formula(pat, SIG)
    assert f == parse("on(r1,t) & on(r2,t) & RC(r1) & RC(r2) & T(t) & !(r1 == r2) & !(r1 == t) & !(r2 == t)"
                      " & !sm(r1) & !sm(r2) & !sm(t)")


def test_production_formula_empty_and_guards():
    e = GraphRule("e", Graph(()), Graph(()))
    assert production_formula(e) == Const(TRUE)
    guarded = RULES["Move"]
    f = production_formula(guarded, SIG)
    assert "empty(b)" in to_text(f)


# --------------------------------------------------------------- matching

def test_find_matchings_empty_structure():
    assert find_matchings(LogicalStructure(SIG, []), ENTER) == []


def test_find_matchings_exact_occurrence():
    g = Graph(("r", "t", "s", "x"), TYPED + (("r", "on", "t"), ("t", "next", "s"), ("x", "S", "x")))
    ms = find_matchings(encode_graph(g, SIG), ENTER)
    assert ms == [({"r": "r", "t": "t", "s": "s"}, TRUE)]


def test_find_matchings_on_maybe_start():
    ms = find_matchings(maybe_start(), ENTER)
    assert ms == [({"r": "r", "t": "t", "s": "s"}, MAYBE)]


def test_find_matchings_agrees_with_formula():
    rng = random.Random(21)
    for _ in range(200):
        sig = rng.choice((PLAIN, INSTR))
        s = random_structure(sig, rng, rng.randint(0, 4))
        rule = random_rule(sig, rng, guards=True)
        phi = production_formula(rule, sig)
        expected = []
        for combo in itertools.product(s.universe, repeat=len(rule.lhs.nodes)):
            m = dict(zip(rule.lhs.nodes, combo))
            v = evaluate(phi, s, m)
            if v != FALSE:
                expected.append((m, v))
        got = find_matchings(s, rule)
        assert sorted((tuple(sorted(m.items())), v) for m, v in got) == \
            sorted((tuple(sorted(m.items())), v) for m, v in expected)


def test_two_valued_matchings_are_graph_morphisms():
    rng = random.Random(22)
    for _ in range(200):
        g = random_graph(INSTR, rng, rng.randint(1, 5))
        s = encode_graph(g, INSTR)
        rule = random_rule(INSTR, rng, guards=True)
        shape = find_matchings(s, rule)
        assert all(v == TRUE for _, v in shape)
        concrete = list(graph_matchings(g, rule, graph_guard(s)))
        key = lambda m: tuple(sorted(m.items()))
        assert sorted(map(key, (m for m, _ in shape))) == sorted(map(key, concrete))


# ------------------------------------------------------- concrete apply

def test_apply_identity_rule():
    g = Graph(("a", "b"), (("a", "e", "b"), ("a", "A", "a")))
    lhs = Graph(("x",), (("x", "A", "x"),))
    h = apply_concrete(g, GraphRule("id", lhs, lhs), {"x": "a"})
    assert h == g


def test_apply_deletion_clips_dangling_edges():
    g = Graph(("a", "b", "c"), (("a", "e", "b"), ("b", "e", "c"), ("c", "f", "a")))
    rule = GraphRule("del", Graph(("x",)), Graph(()))
    h = apply_concrete(g, rule, {"x": "b"})
    assert h == Graph(("a", "c"), (("c", "f", "a"),))


def test_apply_enter_station():
    g = Graph(("r", "t", "s"), TYPED + (("r", "on", "t"), ("t", "next", "s")))
    h = apply_concrete(g, ENTER, {"r": "r", "t": "t", "s": "s"})
    assert ("r", "on", "t") not in h.edge_set
    assert ("r", "on", "s") in h.edge_set
    assert len(h.edges) == len(g.edges)


def test_apply_creation_gets_fresh_name():
    g = Graph(("m",))
    rule = GraphRule("mk", Graph(()), Graph(("m",), (("m", "A", "m"),)))
    h = apply_concrete(g, rule, {})
    assert set(h.nodes) == {"m", "m.1"} and ("m.1", "A", "m.1") in h.edge_set


def test_apply_concrete_preconditions():
    g = Graph(("a", "b"), (("a", "e", "b"),))
    lhs = Graph(("x", "y"), (("x", "e", "y"),))
    rule = GraphRule("r", lhs, lhs)
    with pytest.raises(PreconditionError):
        apply_concrete(g, rule, {"x": "a", "y": "a"})
    with pytest.raises(PreconditionError):
        apply_concrete(g, rule, {"x": "b", "y": "a"})
    with pytest.raises(PreconditionError):
        apply_concrete(g, rule, {"x": "a"})


# ---------------------------------------------------------- shape apply

def test_apply_shape_enter_updates():
    # two railcabs on t, one of which enters s: t stops being colliding
    g = Graph(("r", "q", "t", "s"), TYPED + (("q", "RC", "q"), ("r", "on", "t"), ("q", "on", "t"),
                                             ("t", "next", "s")))
    s = encode_graph(g, SIG)
    assert s.value("is_colliding", "t") == TRUE
    out = apply_shape(s, ENTER, {"r": "r", "t": "t", "s": "s"})
    assert out.value("is_colliding", "t") == FALSE
    assert out.value("is_colliding", "r") == FALSE and out.value("is_colliding", "s") == FALSE
    assert out.value("empty", "t") == FALSE
    assert out.value("on", "r", "s") == TRUE and out.value("on", "r", "t") == FALSE
    # updates read the pre-state, so the result agrees with the meanings here
    assert out == encode_graph(apply_concrete(g, ENTER, {"r": "r", "t": "t", "s": "s"}), SIG)


def test_apply_shape_identity_rule_with_identity_updates():
    rng = random.Random(23)
    lhs = Graph(("x",), (("x", "A", "x"),))
    updates = {(i.name, "x"): Pred1(i.name, "x") for i in INSTR.instrumentation}
    rule = ShapeRule.make(GraphRule("id", lhs, lhs), INSTR, updates)
    for _ in range(50):
        s = random_structure(INSTR, rng, 3)
        for m, v in find_matchings(s, rule):
            if v == TRUE:
                assert apply_shape(s, rule, m) == s


def test_apply_shape_creation_default_half():
    sig = Signature(unary=("RC",), instrumentation=(Instrumentation("busy", "v", parse("RC(v)")),))
    rule = ShapeRule.make(GraphRule("mk", Graph(()), Graph(("n",), (("n", "RC", "n"),))), sig)
    assert rule.defaulted == (("busy", "n"),)
    s = LogicalStructure(sig, [])
    out = apply_shape(s, rule, {})
    assert out.universe == ("n",)
    assert out.value("sm", "n") == FALSE and out.value("RC", "n") == TRUE
    assert out.value("busy", "n") == MAYBE


def test_apply_shape_preconditions():
    s = maybe_start()
    with pytest.raises(PreconditionError):
        apply_shape(s, ENTER, {"r": "r", "t": "t", "s": "s"})
    with pytest.raises(PreconditionError):
        apply_shape(s, ENTER, {"r": "r", "t": "r", "s": "s"})


def test_apply_shape_never_sets_summary_to_one():
    rng = random.Random(24)
    for _ in range(200):
        s = random_structure(INSTR, rng, rng.randint(1, 4))
        rule = shape_rule(random_rule(INSTR, rng), INSTR)
        for m, v in find_matchings(s, rule):
            if v == TRUE:
                out = apply_shape(s, rule, m)
                assert int(out.unary[:, 0].max(initial=0)) <= MAYBE


def test_shape_rule_validation():
    lhs = Graph(("x",), (("x", "A", "x"),))
    r = GraphRule("r", lhs, lhs)
    with pytest.raises(SignatureError):
        ShapeRule.make(r, INSTR, {("A", "x"): Const(TRUE)})
    with pytest.raises(SignatureError):
        ShapeRule.make(r, INSTR, {("out", "y"): Const(TRUE)})
    with pytest.raises(SignatureError):
        ShapeRule.make(r, INSTR, {("out", "x"): parse("A(z)")})
    with pytest.raises(SignatureError):
        ShapeRule.make(GraphRule("r", Graph(("x",), (("x", "out", "x"),)), lhs), INSTR)


def test_pattern_as_identity_rule():
    (pat,) = RAIL.patterns
    r = pat.as_rule()
    assert r.lhs == r.rhs == pat.graph
    assert r.deleted_edges == () and r.created_edges == ()
