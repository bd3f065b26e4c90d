"""Pure-numpy coordinate-descent sweep; same contract as the compiled kernel."""

import numpy as np


def cd_sweep(A, r, x, col_sq, lam, nonneg, idx):
    """One cyclic pass over ``idx``, updating ``x`` and the residual ``r`` in place.

    Returns the largest squared coordinate move weighted by the column norm.
    """
    worst = 0.0
    for j in idx:
        cs = col_sq[j]
        if cs == 0.0:
            continue
        col = A[:, j]
        old = x[j]
        g = np.dot(col, r) + cs * old
        if g > lam:
            new = (g - lam) / cs
        elif g < -lam and not nonneg:
            new = (g + lam) / cs
        else:
            new = 0.0
        d = new - old
        if d != 0.0:
            r -= d * col
            x[j] = new
            worst = max(worst, d * d * cs)
    return worst
