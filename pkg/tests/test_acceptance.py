"""End-to-end acceptance criteria. Each test appends one PASS/FAIL line that
the terminal summary prints at the end of the run."""
import itertools
import json
import logging
import random
import subprocess
import sys
import time
from contextlib import contextmanager

from gtshape.engine import (SAFE, UNSAFE, Limits, Options, check_pattern, derive_constraints, explore,
                            concrete_explore, focus, step)
from gtshape.formula import evaluate, free_vars
from gtshape.kleene import FALSE, MAYBE, TRUE, and_, info_le, not_, or_
from gtshape.model import load_model, parse_model, print_model
from gtshape.rules import apply_concrete, graph_matchings
from gtshape.structure import LogicalStructure, check_embedding, decode_graph, encode_graph, find_embedding

from conftest import ACCEPTANCE
from helpers import (INSTR, MODELS, PLAIN, coarsen, concretise, graph_guard, matches, random_formula,
                     random_graph, random_pattern, random_rule, random_shape, random_structure,
                     shape_rule)

log = logging.getLogger("acceptance")

MODEL_FILES = sorted(MODELS.glob("*.gts"))


@contextmanager
def criterion(label):
    info = {}
    try:
        yield info
    except BaseException:
        ACCEPTANCE.append(f"FAIL  {label}  {info.get('detail', '')}".rstrip())
        raise
    ACCEPTANCE.append(f"PASS  {label}  {info.get('detail', '')}".rstrip())


def analyze(model, **kw):
    opts = Options(check_mat=True, **kw)
    return explore(model.start_structure, model.rules, model.patterns, model.all_constraints,
                   Limits(max_structures=100000, max_seconds=120), opts)


# 3a collects the violation counters from the criterion 1 and 2 runs
MAT_VIOLATIONS: dict[str, int] = {}


# ------------------------------------------------------------ criterion 1

def test_c1_railcab_safe():
    with criterion("C1 railcab analyze SAFE, <10 s, maximal set in [5, 50]") as info:
        model = load_model(MODELS / "railcab.gts")
        t0 = time.perf_counter()
        res = analyze(model)
        dt = time.perf_counter() - t0
        n = res.stats["max_set_size"]
        MAT_VIOLATIONS["railcab.gts (C1)"] = res.stats["mat_violations"]
        info["detail"] = (f"verdict={res.verdict} max_set={n} intermediate="
                          f"{res.stats['intermediate_structures']} time={dt:.2f}s "
                          "(reference: 108 intermediate, 17 maximal, 250 ms)")
        log.info(info["detail"])
        assert res.verdict == SAFE
        assert dt < 10.0
        assert 5 <= n <= 50


# ------------------------------------------------------------ criterion 2

SOUNDNESS_MODELS = [("railcab.gts", None), ("railcab.gts", "loop"), ("passengers.gts", None),
                    ("token_ring.gts", None)]


def test_c2_soundness():
    with criterion("C2 every concrete reachable graph embeds into an analyze shape") as info:
        t0 = time.perf_counter()
        checked = []
        for name, graph in SOUNDNESS_MODELS:
            model = load_model(MODELS / name)
            g0 = model.concrete_graph(graph)
            assert len(g0.nodes) <= 8
            conc = concrete_explore(g0, [r.rule for r in model.rules], model.sig, model.patterns, 200)
            assert conc.verdict == SAFE
            assert len(conc.graphs) <= 200
            res = analyze(model)
            MAT_VIOLATIONS[name] = res.stats["mat_violations"]
            assert res.verdict == SAFE
            for g in conc.graphs:
                assert len(g.nodes) <= 8
                s = encode_graph(g, model.sig)
                assert any(find_embedding(s, t) is not None for t in res.reach), (name, g)
            checked.append(f"{name}/{graph or model.concrete}:{len(conc.graphs)}")
        dt = time.perf_counter() - t0
        info["detail"] = f"graphs {' '.join(checked)} time={dt:.2f}s"
        assert dt < 60.0


# ------------------------------------------------------------ criterion 3

def test_c3a_assert_mode_no_violations():
    with criterion("C3a assert-mode materialisation checks report zero violations") as info:
        if len(MAT_VIOLATIONS) < 4:
            # run standalone: redo the analyses
            for name in {name for name, _ in SOUNDNESS_MODELS}:
                res = analyze(load_model(MODELS / name))
                MAT_VIOLATIONS[name] = res.stats["mat_violations"]
        info["detail"] = " ".join(f"{k}:{v}" for k, v in sorted(MAT_VIOLATIONS.items()))
        assert all(v == 0 for v in MAT_VIOLATIONS.values())


def pinned_embedding(g: LogicalStructure, t: LogicalStructure, pinned: dict):
    """Search an embedding of ``g`` into ``t`` that extends ``pinned``."""
    free = [u for u in g.universe if u not in pinned]
    for image in itertools.product(t.universe, repeat=len(free)):
        f = dict(pinned)
        f.update(zip(free, image))
        if check_embedding(g, t, f):
            return f
    return None


def test_c3b_concretisations_covered_by_materialisations():
    with criterion("C3b applicable concretisations embed into a materialisation (>=500)") as info:
        rng = random.Random(3)
        triples = 0
        while triples < 500:
            shape, _ = random_shape(INSTR, rng, max_concrete=4)
            if len(shape.universe) > 3:
                continue
            rule = random_rule(INSTR, rng, guards=True)
            g = concretise(shape, rng, max_nodes=5)
            if g is None:
                continue
            gm = list(graph_matchings(decode_graph(g), rule, graph_guard(g)))
            if not gm:
                continue
            proj = find_embedding(g, shape)
            assert proj is not None
            foci = focus(shape, rule)
            for m in gm:
                target = {x: proj[v] for x, v in m.items()}
                ok = False
                for fc in foci:
                    if fc.assignment != target:
                        continue
                    pinned = {m[x]: fc.matching[x] for x in m}
                    if len(set(pinned.values())) == len(pinned) and pinned_embedding(g, fc.structure, pinned):
                        ok = True
                        break
                assert ok, (shape, rule, g, m)
            triples += 1
        info["detail"] = f"triples={triples}"


# ------------------------------------------------------------ criterion 4

def test_c4_pattern_soundness():
    with criterion("C4 check_pattern false implies no concretisation matches (>=500 pairs)") as info:
        rng = random.Random(4)
        cons = derive_constraints(INSTR)
        pairs = samples = 0
        while pairs < 500:
            shape, _ = random_shape(INSTR, rng, cons, max_concrete=4)
            pattern = random_pattern(INSTR, rng)
            if check_pattern(shape, pattern, cons):
                continue
            pairs += 1
            for _ in range(50):
                g = concretise(shape, rng, max_nodes=5, constraints=cons, tries=5)
                if g is None:
                    continue
                samples += 1
                assert not matches(g, pattern), (shape, pattern, g)
        info["detail"] = f"pairs={pairs} concretisations={samples}"


# ------------------------------------------------------------ criterion 5

V = (FALSE, MAYBE, TRUE)


def test_c5_kleene_and_embedding_monotonicity():
    with criterion("C5 Kleene laws exhaustive, embedding monotonicity (>=1000)") as info:
        for a, b, c in itertools.product(V, repeat=3):
            assert and_(a, b) == and_(b, a) and or_(a, b) == or_(b, a)
            assert and_(a, and_(b, c)) == and_(and_(a, b), c)
            assert or_(a, or_(b, c)) == or_(or_(a, b), c)
            assert and_(a, or_(b, c)) == or_(and_(a, b), and_(a, c))
            assert not_(and_(a, b)) == or_(not_(a), not_(b))
            assert not_(not_(a)) == a
            assert and_(a, TRUE) == a and or_(a, FALSE) == a
            for a2, b2 in itertools.product(V, repeat=2):
                if info_le(a, a2) and info_le(b, b2):
                    assert info_le(and_(a, b), and_(a2, b2))
                    assert info_le(or_(a, b), or_(a2, b2))
                    assert info_le(not_(a), not_(a2))
        rng = random.Random(5)
        instances = 0
        while instances < 1000:
            s = random_structure(PLAIN, rng, rng.randint(1, 4), summary_p=0.2)
            t, f = coarsen(s, rng)
            assert check_embedding(s, t, f)
            phi = random_formula(PLAIN, rng, ("x", "y"), depth=3)
            vs = sorted(free_vars(phi))
            for z in itertools.product(s.universe, repeat=len(vs)):
                za = dict(zip(vs, z))
                lo = evaluate(phi, s, za)
                hi = evaluate(phi, t, {v: f[n] for v, n in za.items()})
                assert info_le(lo, hi), (phi, s, t, f, za)
                instances += 1
        info["detail"] = f"instances={instances}"


# ------------------------------------------------------------ criterion 6

def test_c6_two_valued_agreement():
    with criterion("C6 two-valued shape step equals the concrete application (>=200)") as info:
        rng = random.Random(6)
        apps = 0
        while apps < 200:
            g = random_graph(PLAIN, rng, rng.randint(1, 4))
            rule = random_rule(PLAIN, rng)
            s = encode_graph(g, PLAIN)
            ms = list(graph_matchings(g, rule))
            expected = {encode_graph(apply_concrete(g, rule, m), PLAIN).key() for m in ms}
            got = {t.key() for t in step(s, shape_rule(rule, PLAIN), (), blur=False)}
            assert got == expected, (g, rule)
            apps += len(ms)
        info["detail"] = f"applications={apps}"


# ------------------------------------------------------------ criterion 7

def test_c7_node_creation_terminates():
    with criterion("C7 node-creating model with blur ends SAFE/UNSAFE within bounds") as info:
        model = load_model(MODELS / "passengers.gts")
        assert any(set(r.rule.rhs.nodes) - set(r.rule.lhs.nodes) for r in model.rules)
        res = explore(model.start_structure, model.rules, model.patterns, model.all_constraints,
                      Limits(max_structures=5000, max_seconds=60), Options())
        info["detail"] = f"verdict={res.verdict} max_set={res.stats['max_set_size']}"
        assert res.verdict in (SAFE, UNSAFE)


# ------------------------------------------------------------ criterion 8

def cli(*args):
    return subprocess.run([sys.executable, "-m", "gtshape", *map(str, args)], capture_output=True)


def test_c8_cli_roundtrips(tmp_path):
    with criterion("C8 parse/print identity, deterministic JSON, trace replay") as info:
        for path in MODEL_FILES:
            m = load_model(path)
            text = print_model(m)
            again = parse_model(text)
            assert again == m and print_model(again) == text
        outs = []
        for i in range(3):
            p = cli("analyze", MODELS / "railcab.gts", "--deterministic", "--json", tmp_path / f"r{i}.json")
            assert p.returncode == 0, p.stderr
            outs.append((tmp_path / f"r{i}.json").read_bytes())
        assert outs[0] == outs[1] == outs[2]
        p = cli("analyze", MODELS / "collision.gts", "--deterministic", "--json", tmp_path / "u.json")
        assert p.returncode == 1
        rep = json.loads((tmp_path / "u.json").read_text())
        p = cli("replay", MODELS / "collision.gts", tmp_path / "u.json")
        assert p.returncode == 0, p.stderr
        info["detail"] = f"models={len(MODEL_FILES)} trace_len={len(rep['trace']['steps'])}"
