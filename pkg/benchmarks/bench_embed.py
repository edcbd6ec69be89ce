"""Compare the compiled and pure-Python embedding kernels.

    python benchmarks/bench_embed.py [--pairs N] [--repeat R] [--model PATH]

Part one times ``search_embedding`` on random (structure, blurred structure)
pairs, half of which embed. Part two runs a full analysis with each backend.
"""
from __future__ import annotations

import argparse
import random
import statistics
import time
from pathlib import Path

from gtshape import kernels
from gtshape.engine import Limits, explore
from gtshape.model import load_model
from gtshape.structure import Graph, Signature, canonical_abstraction, encode_graph

SIG = Signature(unary=("A", "B", "C"), binary=("e", "f"))
RAILCAB = Path(__file__).resolve().parent.parent / "src" / "gtshape" / "models" / "railcab.gts"


def random_graph(rng: random.Random, n: int) -> Graph:
    nodes = tuple(f"g{k}" for k in range(n))
    edges = [(u, lab, u) for u in nodes for lab in SIG.unary if rng.random() < 0.4]
    edges += [(a, lab, b) for lab in SIG.binary for a in nodes for b in nodes if rng.random() < 0.2]
    return Graph(nodes, tuple(edges))


def make_pairs(count: int, seed: int):
    rng = random.Random(seed)
    pairs = []
    while len(pairs) < count:
        s = encode_graph(random_graph(rng, rng.randint(4, 9)), SIG)
        if len(pairs) % 2:
            t = canonical_abstraction(s)
        else:
            t = canonical_abstraction(encode_graph(random_graph(rng, rng.randint(4, 9)), SIG))
        pairs.append((s.unary, t.unary, s.binary, t.binary))
    return pairs


def time_kernel(backend: str, pairs, repeat: int) -> tuple[float, int]:
    kernels.use(backend)
    runs, hits = [], 0
    for _ in range(repeat):
        t0 = time.perf_counter()
        hits = sum(kernels.search_embedding(*p) is not None for p in pairs)
        runs.append(time.perf_counter() - t0)
    return statistics.median(runs), hits


def time_analysis(backend: str, path: Path) -> tuple[float, str]:
    kernels.use(backend)
    model = load_model(path)
    t0 = time.perf_counter()
    res = explore(model.start_structure, model.rules, model.patterns, model.all_constraints,
                  Limits(max_seconds=300))
    return time.perf_counter() - t0, res.verdict


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--pairs", type=int, default=400)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--model", type=Path, default=RAILCAB)
    args = ap.parse_args()

    backends = ["python"] + (["cython"] if kernels._embed_ext is not None else [])
    if len(backends) == 1:
        print("compiled kernel not built, timing the Python fallback only")

    pairs = make_pairs(args.pairs, args.seed)
    base = None
    print(f"search_embedding on {len(pairs)} pairs (median of {args.repeat})")
    for b in backends:
        dt, hits = time_kernel(b, pairs, args.repeat)
        base = base or dt
        print(f"  {b:7s} {dt * 1e3:9.1f} ms  {dt / len(pairs) * 1e6:8.1f} us/pair  "
              f"embeddings={hits}  speedup={base / dt:5.1f}x")

    print(f"analysis of {args.model.name}")
    base = None
    for b in backends:
        dt, verdict = time_analysis(b, args.model)
        base = base or dt
        print(f"  {b:7s} {dt:9.2f} s   verdict={verdict}  speedup={base / dt:5.1f}x")


if __name__ == "__main__":
    main()
