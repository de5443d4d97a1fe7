"""Pure numpy versions of the compiled pair loops (same signatures).

Rows are processed in fixed blocks of ``BLOCK`` so the floating-point result
of each row is independent of how blocks are spread over threads.
"""

from concurrent.futures import ThreadPoolExecutor

import numpy as np

BLOCK = 64


def _blocks(num_rows):
    return [(a, min(a + BLOCK, num_rows)) for a in range(0, num_rows, BLOCK)]


def _run(fn, num_rows, nthreads):
    blocks = _blocks(num_rows)
    if nthreads <= 1 or len(blocks) == 1:
        for a, b in blocks:
            fn(a, b)
        return
    with ThreadPoolExecutor(max_workers=nthreads) as pool:
        list(pool.map(lambda ab: fn(*ab), blocks))


def _table_block(table, idx, stride, rows):
    off = np.zeros((len(rows), idx.shape[0]), dtype=np.int64)
    for k in range(idx.shape[1]):
        off += np.abs(idx[rows, k][:, None] - idx[None, :, k]) * stride[k]
    return table[off]


def interaction_rows_dense(W, u, rows, out, nthreads):
    u = np.asarray(u)

    def work(a, b):
        r = rows[a:b]
        out[a:b] = np.sum(W[r] * (u[r][:, None] - u[None, :]), axis=1)

    _run(work, len(rows), nthreads)


def interaction_rows_table(table, idx, stride, scale, u, rows, out, nthreads):
    u = np.asarray(u)

    def work(a, b):
        r = rows[a:b]
        Wb = _table_block(table, idx, stride, r)
        out[a:b] = scale * np.sum(Wb * (u[r][:, None] - u[None, :]), axis=1)

    _run(work, len(rows), nthreads)


def _energy(Wb, u, r, inside):
    d = u[r][:, None] - u[None, :]
    t = Wb * d * d
    mask = inside.astype(bool)[None, :]
    return 0.5 * np.sum(np.where(mask, t, 0.0), axis=1), np.sum(np.where(mask, 0.0, t), axis=1)


def energy_rows_dense(W, u, inside, rows, inner, cross, nthreads):
    u = np.asarray(u)

    def work(a, b):
        r = rows[a:b]
        inner[a:b], cross[a:b] = _energy(W[r], u, r, inside)

    _run(work, len(rows), nthreads)


def energy_rows_table(table, idx, stride, scale, u, inside, rows, inner, cross, nthreads):
    u = np.asarray(u)

    def work(a, b):
        r = rows[a:b]
        i_, c_ = _energy(_table_block(table, idx, stride, r), u, r, inside)
        inner[a:b] = scale * i_
        cross[a:b] = scale * c_

    _run(work, len(rows), nthreads)
