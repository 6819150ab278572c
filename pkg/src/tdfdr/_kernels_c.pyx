# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled scoring kernels.

Mirrors ``tdfdr._kernels_np`` operation for operation (same gather order,
same ascending-value summation, same NaN convention) so the two backends
return bit-identical arrays.  See that module for the conventions.
"""

import numpy as np

from libc.math cimport fabs, sqrt
from libc.stdlib cimport free, malloc

BACKEND_NAME = "compiled"

cdef double NAN = float("nan")


cdef inline void _fisher_yates(const double* u, int* scratch, Py_ssize_t n,
                               Py_ssize_t n1) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef int tmp
    for i in range(n):
        scratch[i] = <int> i
    for i in range(n1):
        j = i + <Py_ssize_t> (u[i] * (n - i))
        tmp = scratch[i]
        scratch[i] = scratch[j]
        scratch[j] = tmp


cdef inline void _insertion_sort(double* a, Py_ssize_t length) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double key
    for i in range(1, length):
        key = a[i]
        j = i - 1
        while j >= 0 and a[j] > key:
            a[j + 1] = a[j]
            j -= 1
        a[j + 1] = key


cdef inline double _t_from_buffers(double* case_buf, Py_ssize_t n1,
                                   double* ctrl_buf, Py_ssize_t n0,
                                   bint absolute) noexcept nogil:
    """Pooled t from gathered group buffers; sorts both buffers in place."""
    cdef Py_ssize_t i
    cdef double s1 = 0.0, s0 = 0.0, ssd1 = 0.0, ssd0 = 0.0
    cdef double mean1, mean0, ssd, pooled, inv, d, t
    _insertion_sort(case_buf, n1)
    _insertion_sort(ctrl_buf, n0)
    for i in range(n1):
        s1 += case_buf[i]
    for i in range(n0):
        s0 += ctrl_buf[i]
    mean1 = s1 / n1
    mean0 = s0 / n0
    for i in range(n1):
        d = case_buf[i] - mean1
        ssd1 += d * d
    for i in range(n0):
        d = ctrl_buf[i] - mean0
        ssd0 += d * d
    ssd = ssd1 + ssd0
    if ssd == 0.0:
        return NAN
    pooled = ssd / (n1 + n0 - 2)
    inv = 1.0 / n1 + 1.0 / n0
    t = (mean1 - mean0) / sqrt(pooled * inv)
    if absolute:
        t = fabs(t)
    return t


def t_scores_sampled(double[:, ::1] values, double[:, :, ::1] u, bint absolute):
    """Target plus sampled-regrouping t scores; see the numpy twin."""
    cdef Py_ssize_t m = values.shape[0]
    cdef Py_ssize_t n = values.shape[1]
    cdef Py_ssize_t k = u.shape[1]
    cdef Py_ssize_t n1 = u.shape[2]
    cdef Py_ssize_t n0 = n - n1
    out_arr = np.empty((m, k + 1))
    cdef double[:, ::1] out = out_arr
    cdef int* scratch = <int*> malloc(n * sizeof(int))
    cdef double* case_buf = <double*> malloc(n * sizeof(double))
    cdef double* ctrl_buf = <double*> malloc(n * sizeof(double))
    cdef Py_ssize_t j, q, i
    if scratch == NULL or case_buf == NULL or ctrl_buf == NULL:
        free(scratch); free(case_buf); free(ctrl_buf)
        raise MemoryError
    with nogil:
        for j in range(m):
            for i in range(n1):
                case_buf[i] = values[j, i]
            for i in range(n0):
                ctrl_buf[i] = values[j, n1 + i]
            out[j, 0] = _t_from_buffers(case_buf, n1, ctrl_buf, n0, absolute)
            for q in range(k):
                _fisher_yates(&u[j, q, 0], scratch, n, n1)
                for i in range(n1):
                    case_buf[i] = values[j, scratch[i]]
                for i in range(n0):
                    ctrl_buf[i] = values[j, scratch[n1 + i]]
                out[j, q + 1] = _t_from_buffers(case_buf, n1, ctrl_buf, n0,
                                                absolute)
    free(scratch); free(case_buf); free(ctrl_buf)
    return out_arr


def t_scores_subsets(double[:, ::1] values, int[:, ::1] case_idx,
                     int[:, ::1] ctrl_idx, bint absolute):
    """t scores for explicit shared case subsets; see the numpy twin."""
    cdef Py_ssize_t m = values.shape[0]
    cdef Py_ssize_t s = case_idx.shape[0]
    cdef Py_ssize_t n1 = case_idx.shape[1]
    cdef Py_ssize_t n0 = ctrl_idx.shape[1]
    out_arr = np.empty((m, s))
    cdef double[:, ::1] out = out_arr
    cdef double* case_buf = <double*> malloc(n1 * sizeof(double))
    cdef double* ctrl_buf = <double*> malloc(n0 * sizeof(double))
    cdef Py_ssize_t j, q, i
    if case_buf == NULL or ctrl_buf == NULL:
        free(case_buf); free(ctrl_buf)
        raise MemoryError
    with nogil:
        for j in range(m):
            for q in range(s):
                for i in range(n1):
                    case_buf[i] = values[j, case_idx[q, i]]
                for i in range(n0):
                    ctrl_buf[i] = values[j, ctrl_idx[q, i]]
                out[j, q] = _t_from_buffers(case_buf, n1, ctrl_buf, n0,
                                            absolute)
    free(case_buf); free(ctrl_buf)
    return out_arr


def rank_scores_sampled(double[:, ::1] midranks, double[:, :, ::1] u,
                        double expected):
    """Centered rank-sum scores for sampled regroupings; see the numpy twin."""
    cdef Py_ssize_t m = midranks.shape[0]
    cdef Py_ssize_t n = midranks.shape[1]
    cdef Py_ssize_t k = u.shape[1]
    cdef Py_ssize_t n1 = u.shape[2]
    out_arr = np.empty((m, k + 1))
    cdef double[:, ::1] out = out_arr
    cdef int* scratch = <int*> malloc(n * sizeof(int))
    cdef Py_ssize_t j, q, i
    cdef double w
    if scratch == NULL:
        raise MemoryError
    with nogil:
        for j in range(m):
            w = 0.0
            for i in range(n1):
                w += midranks[j, i]
            out[j, 0] = fabs(w - expected)
            for q in range(k):
                _fisher_yates(&u[j, q, 0], scratch, n, n1)
                w = 0.0
                for i in range(n1):
                    w += midranks[j, scratch[i]]
                out[j, q + 1] = fabs(w - expected)
    free(scratch)
    return out_arr


def rank_scores_subsets(double[:, ::1] midranks, int[:, ::1] case_idx,
                        double expected):
    """Centered rank-sum scores for explicit shared case subsets."""
    cdef Py_ssize_t m = midranks.shape[0]
    cdef Py_ssize_t s = case_idx.shape[0]
    cdef Py_ssize_t n1 = case_idx.shape[1]
    out_arr = np.empty((m, s))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t j, q, i
    cdef double w
    with nogil:
        for j in range(m):
            for q in range(s):
                w = 0.0
                for i in range(n1):
                    w += midranks[j, case_idx[q, i]]
                out[j, q] = fabs(w - expected)
    return out_arr


cdef inline bint _before(const double* score, const double* jit,
                         int a, int b) noexcept nogil:
    """Sort key: score descending, then jitter ascending, then position."""
    if score[a] > score[b]:
        return True
    if score[a] < score[b]:
        return False
    if jit[a] < jit[b]:
        return True
    if jit[a] > jit[b]:
        return False
    return a < b


cdef void _merge_sort(const double* score, const double* jit, int* idx,
                      int* tmp, Py_ssize_t lo, Py_ssize_t hi) noexcept nogil:
    cdef Py_ssize_t mid, a, b, w
    if hi - lo <= 1:
        return
    mid = (lo + hi) // 2
    _merge_sort(score, jit, idx, tmp, lo, mid)
    _merge_sort(score, jit, idx, tmp, mid, hi)
    a = lo
    b = mid
    w = lo
    while a < mid and b < hi:
        if _before(score, jit, idx[b], idx[a]):
            tmp[w] = idx[b]
            b += 1
        else:
            tmp[w] = idx[a]
            a += 1
        w += 1
    while a < mid:
        tmp[w] = idx[a]
        a += 1
        w += 1
    while b < hi:
        tmp[w] = idx[b]
        b += 1
        w += 1
    for w in range(lo, hi):
        idx[w] = tmp[w]


def rank_with_ties(double[:, ::1] scores, double[:, ::1] jitter):
    """Row-wise descending sort with random tie-breaking; see the numpy twin."""
    cdef Py_ssize_t m = scores.shape[0]
    cdef Py_ssize_t t = scores.shape[1]
    sorted_arr = np.empty((m, t))
    order_arr = np.empty((m, t), dtype=np.int32)
    rank_arr = np.empty(m, dtype=np.int64)
    cdef double[:, ::1] sorted_scores = sorted_arr
    cdef int[:, ::1] order = order_arr
    cdef long long[::1] rank0 = rank_arr
    cdef int* idx = <int*> malloc(t * sizeof(int))
    cdef int* tmp = <int*> malloc(t * sizeof(int))
    cdef Py_ssize_t j, p
    if idx == NULL or tmp == NULL:
        free(idx); free(tmp)
        raise MemoryError
    with nogil:
        for j in range(m):
            for p in range(t):
                idx[p] = <int> p
            _merge_sort(&scores[j, 0], &jitter[j, 0], idx, tmp, 0, t)
            for p in range(t):
                order[j, p] = idx[p]
                sorted_scores[j, p] = scores[j, idx[p]]
                if idx[p] == 0:
                    rank0[j] = p + 1
    free(idx)
    free(tmp)
    return sorted_arr, order_arr, rank_arr
