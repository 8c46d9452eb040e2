# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled LCS-length kernel over integer id sequences."""

from cpython.mem cimport PyMem_Free, PyMem_Malloc


def lcs_length(a, b):
    cdef Py_ssize_t n = len(a)
    cdef Py_ssize_t m = len(b)
    cdef Py_ssize_t i, j, up, left, result
    cdef long ai
    if n == 0 or m == 0:
        return 0
    if m > n:
        a, b = b, a
        n, m = m, n

    cdef long *av = <long *> PyMem_Malloc(n * sizeof(long))
    cdef long *bv = <long *> PyMem_Malloc(m * sizeof(long))
    cdef Py_ssize_t *prev = <Py_ssize_t *> PyMem_Malloc((m + 1) * sizeof(Py_ssize_t))
    cdef Py_ssize_t *curr = <Py_ssize_t *> PyMem_Malloc((m + 1) * sizeof(Py_ssize_t))
    cdef Py_ssize_t *tmp
    if av == NULL or bv == NULL or prev == NULL or curr == NULL:
        PyMem_Free(av)
        PyMem_Free(bv)
        PyMem_Free(prev)
        PyMem_Free(curr)
        raise MemoryError()

    try:
        for i in range(n):
            av[i] = a[i]
        for j in range(m):
            bv[j] = b[j]
        for j in range(m + 1):
            prev[j] = 0
            curr[j] = 0
        for i in range(n):
            ai = av[i]
            curr[0] = 0
            for j in range(m):
                if ai == bv[j]:
                    curr[j + 1] = prev[j] + 1
                else:
                    up = prev[j + 1]
                    left = curr[j]
                    curr[j + 1] = up if up >= left else left
            tmp = prev
            prev = curr
            curr = tmp
        result = prev[m]
    finally:
        PyMem_Free(av)
        PyMem_Free(bv)
        PyMem_Free(prev)
        PyMem_Free(curr)
    return result
