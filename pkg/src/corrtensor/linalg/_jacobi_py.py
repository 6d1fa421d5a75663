"""Pure-Python cyclic Jacobi sweeps.

Same rotation sequence and arithmetic as the compiled kernel; each
rotation is applied with whole-row/column numpy operations.
"""

import math

import numpy as np


def _off_norm_sq(a):
    return 2.0 * float(np.sum(np.triu(a, 1) ** 2))


def jacobi_sweeps(a, v, threshold, max_sweeps):
    """Diagonalize ``a`` in place, accumulating rotations into ``v``.

    Returns the number of sweeps performed, or -1 on non-convergence.
    """
    n = a.shape[0]
    thr_sq = threshold * threshold
    for sweep in range(max_sweeps + 1):
        if _off_norm_sq(a) <= thr_sq:
            return sweep
        if sweep == max_sweeps:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                # Python floats: overflow here must give inf, as in C,
                # regardless of the caller's numpy error state.
                apq = float(a[p, q])
                if apq == 0.0:
                    continue
                tau = (float(a[q, q]) - float(a[p, p])) / (2.0 * apq)
                if abs(tau) > 1e150:
                    t = 0.5 / tau
                elif tau >= 0.0:
                    t = 1.0 / (tau + math.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                x = a[:, p].copy()
                y = a[:, q].copy()
                a[:, p] = c * x - s * y
                a[:, q] = s * x + c * y
                x = a[p, :].copy()
                y = a[q, :].copy()
                a[p, :] = c * x - s * y
                a[q, :] = s * x + c * y
                a[p, q] = 0.0
                a[q, p] = 0.0
                x = v[:, p].copy()
                y = v[:, q].copy()
                v[:, p] = c * x - s * y
                v[:, q] = s * x + c * y
    return -1
