"""Timing of the direct pair loop across backends, thread counts and grid sizes.

This is a reporting tool.  Results are wall-clock medians and vary between
machines; nothing here is asserted.
"""

from __future__ import annotations

import statistics
import time

import numpy as np

from . import backend
from .core import GridGeometry, ModelParams
from .kernel import get_operator


def evaluate(op, u, backend_name: str, threads: int) -> np.ndarray:
    """``sum_j W_ij (u_i - u_j)`` for every cell with the chosen backend."""
    ops = backend.ops(backend_name)
    rows = np.arange(op.geometry.num_cells, dtype=np.int64)
    out = np.empty(len(rows))
    if op.dense is not None:
        ops.interaction_rows_dense(op.dense, u, rows, out, threads)
    else:
        ops.interaction_rows_table(op._flat_table, op.idx, op.stride, op.scale, u, rows, out,
                                   threads)
    return out


def time_interaction(op, u, backend_name: str, threads: int, repeats: int = 3) -> float:
    """Median wall-clock seconds of :func:`evaluate`."""
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        evaluate(op, u, backend_name, threads)
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def run_bench(sizes=(256, 1024, 2048), threads=(1, 2, 4, 8), backends=None, n: int = 1,
              s: float = 0.25, repeats: int = 3, seed: int = 0) -> list:
    """Rows of ``(backend, threads, cells, seconds, pairs_per_second, max_abs_diff)``.

    ``max_abs_diff`` compares each result with the single-thread Python
    backend on the same input.
    """
    backends = list(backends) if backends else backend.available()
    params = ModelParams(n, s)
    rng = np.random.default_rng(seed)
    rows = []
    for N in sizes:
        m = int(round(N ** (1.0 / n)))
        op = get_operator(GridGeometry((0.0,) * n, 1.0, m), params)
        u = np.ascontiguousarray(rng.uniform(-1, 1, op.geometry.num_cells))
        ref = evaluate(op, u, "python", 1)
        for b in backends:
            for t in threads:
                sec = time_interaction(op, u, b, t, repeats)
                out = evaluate(op, u, b, t)
                pairs = float(len(u)) ** 2
                rows.append((b, int(t), int(len(u)), sec, pairs / sec if sec > 0 else float("inf"),
                             float(np.max(np.abs(out - ref)))))
    return rows
