#!/usr/bin/env python3
"""Compare the compiled feature kernels against the pure-Python reference.

Both backends expose the same two entry points (Brandes betweenness and
all-sources BFS moments).  This script times them on identical random
graphs, checks that the numbers agree to 1e-9, and prints a speedup table.

    python benchmarks/bench_features.py
    python benchmarks/bench_features.py --sizes 50,100,400 --graphs 10 --csv out.csv
"""

from __future__ import annotations

import argparse
import csv
import sys
import time

import numpy as np

from qgcn.features import _csr, available_backends
from qgcn.graphs import from_edge_list

KERNELS = ("betweenness", "bfs")


def random_graph(rng: np.random.Generator, n: int, avg_degree: float):
    p = min(1.0, avg_degree / max(n - 1, 1))
    edges = [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < p]
    if not edges:
        edges = [(0, 1)]
    return from_edge_list(n, edges)


def run_kernel(impl, kernel: str, csr, n: int):
    indptr, indices = csr
    if kernel == "betweenness":
        return np.asarray(impl.betweenness_raw(indptr, indices, indptr, indices, n))
    return np.asarray(impl.bfs_stats(indptr, indices, n))


def bench(impl, kernel: str, inputs, repeats: int) -> tuple[float, list[np.ndarray]]:
    """Best-of-`repeats` total seconds over all graphs, plus the outputs."""
    outputs = [run_kernel(impl, kernel, csr, n) for csr, n in inputs]  # warmup
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        for csr, n in inputs:
            run_kernel(impl, kernel, csr, n)
        best = min(best, time.perf_counter() - t0)
    return best, outputs


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", default="25,50,100,200",
                        help="comma list of vertex counts")
    parser.add_argument("--graphs", type=int, default=5, help="graphs per size")
    parser.add_argument("--avg-degree", type=float, default=4.0)
    parser.add_argument("--repeats", type=int, default=3, help="timing repeats")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--csv", help="optional CSV output path")
    args = parser.parse_args(argv)

    backends = available_backends()
    if "compiled" not in backends:
        print("compiled backend is not importable; timing python only", file=sys.stderr)

    rng = np.random.default_rng(args.seed)
    rows = []
    mismatch = 0.0
    for n in (int(s) for s in args.sizes.split(",") if s):
        graphs = [random_graph(rng, n, args.avg_degree) for _ in range(args.graphs)]
        inputs = [(_csr(g.neighbors_out()), g.n) for g in graphs]
        for kernel in KERNELS:
            timings = {}
            outputs = {}
            for name, impl in backends.items():
                timings[name], outputs[name] = bench(impl, kernel, inputs, args.repeats)
            if "compiled" in outputs:
                for a, b in zip(outputs["python"], outputs["compiled"]):
                    mismatch = max(mismatch, float(np.abs(a - b).max()))
            per_graph_ms = {k: v / args.graphs * 1e3 for k, v in timings.items()}
            rows.append({
                "n": n,
                "kernel": kernel,
                "python_ms": per_graph_ms["python"],
                "compiled_ms": per_graph_ms.get("compiled"),
                "speedup": (per_graph_ms["python"] / per_graph_ms["compiled"]
                            if "compiled" in per_graph_ms else None),
            })

    print(f"{'n':>6} {'kernel':<12} {'python ms':>11} {'compiled ms':>12} {'speedup':>9}")
    for r in rows:
        compiled = "-" if r["compiled_ms"] is None else f"{r['compiled_ms']:.3f}"
        speedup = "-" if r["speedup"] is None else f"{r['speedup']:.1f}x"
        print(f"{r['n']:>6} {r['kernel']:<12} {r['python_ms']:>11.3f} "
              f"{compiled:>12} {speedup:>9}")
    if "compiled" in backends:
        print(f"max |python - compiled| = {mismatch:.3e}")

    if args.csv:
        with open(args.csv, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
            writer.writeheader()
            writer.writerows(rows)
        print(f"table -> {args.csv}")

    if "compiled" in backends and mismatch > 1e-9:
        print("backends disagree beyond 1e-9", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
