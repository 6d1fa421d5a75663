# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled cyclic Jacobi sweeps; see ``_jacobi_py`` for the reference version."""

from libc.math cimport sqrt, fabs


cdef double _off_norm_sq(double[:, ::1] a) noexcept nogil:
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t p, q
    cdef double s = 0.0
    for p in range(n - 1):
        for q in range(p + 1, n):
            s += a[p, q] * a[p, q]
    return 2.0 * s


def jacobi_sweeps(double[:, ::1] a, double[:, ::1] v, double threshold, int max_sweeps):
    """Diagonalize ``a`` in place, accumulating rotations into ``v``.

    Returns the number of sweeps performed, or -1 when the off-diagonal
    norm is still above ``threshold`` after ``max_sweeps`` sweeps.
    """
    if a.shape[0] != a.shape[1] or v.shape[0] != a.shape[0] or v.shape[1] != a.shape[0]:
        raise ValueError("a and v must be square and of equal size")
    cdef int result
    with nogil:
        result = _sweeps(a, v, threshold, max_sweeps)
    return result


cdef int _sweeps(double[:, ::1] a, double[:, ::1] v, double threshold, int max_sweeps) noexcept nogil:
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t p, q, k
    cdef int sweep
    cdef double apq, tau, t, c, s, x, y
    cdef double thr_sq = threshold * threshold

    for sweep in range(max_sweeps + 1):
        if _off_norm_sq(a) <= thr_sq:
            return sweep
        if sweep == max_sweeps:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                if fabs(tau) > 1e150:
                    t = 0.5 / tau
                elif tau >= 0.0:
                    t = 1.0 / (tau + sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + sqrt(1.0 + tau * tau))
                c = 1.0 / sqrt(1.0 + t * t)
                s = t * c
                for k in range(n):
                    x = a[k, p]
                    y = a[k, q]
                    a[k, p] = c * x - s * y
                    a[k, q] = s * x + c * y
                for k in range(n):
                    x = a[p, k]
                    y = a[q, k]
                    a[p, k] = c * x - s * y
                    a[q, k] = s * x + c * y
                a[p, q] = 0.0
                a[q, p] = 0.0
                for k in range(n):
                    x = v[k, p]
                    y = v[k, q]
                    v[k, p] = c * x - s * y
                    v[k, q] = s * x + c * y
    return -1
