# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled O(N^2) pair loops.

Every row is accumulated sequentially in column order by a single thread, so
results do not depend on the number of threads.  Row results are reduced by
the caller.
"""

from cython.parallel cimport prange

ctypedef long long idx_t


cdef inline double table_weight(const double[::1] table, const idx_t[:, ::1] idx,
                                const idx_t[::1] stride, int n, idx_t i, idx_t j) noexcept nogil:
    cdef idx_t off = 0, d
    cdef int k
    for k in range(n):
        d = idx[i, k] - idx[j, k]
        if d < 0:
            d = -d
        off = off + d * stride[k]
    return table[off]


def interaction_rows_dense(const double[:, ::1] W, const double[::1] u,
                           const idx_t[::1] rows, double[::1] out, int nthreads):
    cdef Py_ssize_t r, j, i
    cdef Py_ssize_t N = u.shape[0], R = rows.shape[0]
    cdef double acc, ui
    for r in prange(R, nogil=True, num_threads=nthreads, schedule="static"):
        i = rows[r]
        ui = u[i]
        acc = 0.0
        for j in range(N):
            acc = acc + W[i, j] * (ui - u[j])
        out[r] = acc


def interaction_rows_table(const double[::1] table, const idx_t[:, ::1] idx,
                           const idx_t[::1] stride, double scale, const double[::1] u,
                           const idx_t[::1] rows, double[::1] out, int nthreads):
    cdef Py_ssize_t r, j, i
    cdef Py_ssize_t N = u.shape[0], R = rows.shape[0]
    cdef int n = idx.shape[1]
    cdef double acc, ui
    for r in prange(R, nogil=True, num_threads=nthreads, schedule="static"):
        i = rows[r]
        ui = u[i]
        acc = 0.0
        for j in range(N):
            acc = acc + table_weight(table, idx, stride, n, i, j) * (ui - u[j])
        out[r] = scale * acc


def energy_rows_dense(const double[:, ::1] W, const double[::1] u,
                      const unsigned char[::1] inside, const idx_t[::1] rows,
                      double[::1] inner, double[::1] cross, int nthreads):
    cdef Py_ssize_t r, j, i
    cdef Py_ssize_t N = u.shape[0], R = rows.shape[0]
    cdef double a, b, ui, d, t
    for r in prange(R, nogil=True, num_threads=nthreads, schedule="static"):
        i = rows[r]
        ui = u[i]
        a = 0.0
        b = 0.0
        for j in range(N):
            d = ui - u[j]
            t = W[i, j] * d * d
            if inside[j]:
                a = a + t
            else:
                b = b + t
        inner[r] = 0.5 * a
        cross[r] = b


def energy_rows_table(const double[::1] table, const idx_t[:, ::1] idx,
                      const idx_t[::1] stride, double scale, const double[::1] u,
                      const unsigned char[::1] inside, const idx_t[::1] rows,
                      double[::1] inner, double[::1] cross, int nthreads):
    cdef Py_ssize_t r, j, i
    cdef Py_ssize_t N = u.shape[0], R = rows.shape[0]
    cdef int n = idx.shape[1]
    cdef double a, b, ui, d, t
    for r in prange(R, nogil=True, num_threads=nthreads, schedule="static"):
        i = rows[r]
        ui = u[i]
        a = 0.0
        b = 0.0
        for j in range(N):
            d = ui - u[j]
            t = table_weight(table, idx, stride, n, i, j) * d * d
            if inside[j]:
                a = a + t
            else:
                b = b + t
        inner[r] = 0.5 * scale * a
        cross[r] = scale * b
