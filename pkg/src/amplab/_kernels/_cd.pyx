# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Coordinate-descent sweep for the l1-penalised least-squares problem."""

from scipy.linalg.cython_blas cimport daxpy, ddot


def cd_sweep(double[::1, :] A, double[::1] r, double[::1] x, const double[::1] col_sq,
             double lam, bint nonneg, const Py_ssize_t[::1] idx):
    """One cyclic pass over ``idx``, updating ``x`` and the residual ``r`` in place.

    Returns the largest squared coordinate move weighted by the column norm.
    """
    cdef int n = A.shape[0]
    cdef int one = 1
    cdef Py_ssize_t k, j
    cdef double g, old, new, d, cs, step, worst = 0.0
    for k in range(idx.shape[0]):
        j = idx[k]
        cs = col_sq[j]
        if cs == 0.0:
            continue
        old = x[j]
        g = ddot(&n, &A[0, j], &one, &r[0], &one) + cs * old
        if g > lam:
            new = (g - lam) / cs
        elif g < -lam and not nonneg:
            new = (g + lam) / cs
        else:
            new = 0.0
        d = new - old
        if d != 0.0:
            step = -d
            daxpy(&n, &step, &A[0, j], &one, &r[0], &one)
            x[j] = new
            step = d * d * cs
            if step > worst:
                worst = step
    return worst
