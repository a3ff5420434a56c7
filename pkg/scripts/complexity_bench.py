"""Wall-clock of sparse graph construction against context length (k fixed)."""
import argparse
import time

import numpy as np

from graphkv.graph import SourceSelection, build_sparse_graph
from graphkv.kv_model import LayerCache


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--dim", type=int, default=64)
    ap.add_argument("--k", type=int, default=150)
    ap.add_argument("--sizes", default="25000,50000,100000,200000")
    args = ap.parse_args()

    print("n,seconds,similarities,ns_per_similarity")
    for n in map(int, args.sizes.split(",")):
        rng = np.random.default_rng(n)
        keys = rng.standard_normal((n, args.dim)).astype(np.float32)
        cache, scores = LayerCache(keys, keys), rng.random(n)
        best = np.inf
        for _ in range(3):
            t = time.perf_counter()
            g = build_sparse_graph(cache, scores, SourceSelection(k=args.k), n)
            best = min(best, time.perf_counter() - t)
        print(f"{n},{best:.4f},{g.similarity_count},{1e9 * best / g.similarity_count:.2f}")


if __name__ == "__main__":
    main()
