"""Coordinate-descent solver for l1-penalised least squares, certified by the duality gap."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from . import _kernels
from .errors import MaxIterExceeded
from .numerics import Tolerance

LASSO_TOL = Tolerance(1e-9, 1e-9, 100_000)
_INNER_MAX = 50


@dataclass
class LassoSolution:
    x: np.ndarray
    lambda_: float
    objective: float
    duality_gap: float
    iterations: int
    support_size: int
    converged: bool = True


def lasso_objective(A, y, x, lam):
    r = y - A @ x
    return 0.5 * float(r @ r) + lam * float(np.abs(x).sum())


def duality_gap(A, y, x, lam, nonneg=False, r=None):
    """(primal, dual, gap) using the residual rescaled into the dual feasible set."""
    if r is None:
        r = y - A @ x
    g = A.T @ r
    top = float(g.max()) if nonneg else float(np.abs(g).max())
    s = 1.0 if top <= lam else lam / top
    theta = s * r
    primal = 0.5 * float(r @ r) + lam * float(np.abs(x).sum())
    dual = float(theta @ y) - 0.5 * float(theta @ theta)
    return primal, dual, max(primal - dual, 0.0)


def _reduce_support(A, x):
    """Drop columns along null directions of the active submatrix until it is not wide.

    Each move keeps A x fixed and does not increase sum(sign(x) * x), so the
    objective cannot rise; it stops at the first coordinate reaching zero.
    """
    x = x.copy()
    n = A.shape[0]
    S = np.flatnonzero(x)
    if S.size <= n:
        return x
    # null basis once; each dropped column is then eliminated from it
    B = linalg.svd(A[:, S], full_matrices=True)[2][n:].T
    xs = x[S]
    while xs.size > n:
        d = B[:, 0]
        if np.sign(xs) @ d > 0:
            d = -d
        hit = np.flatnonzero(xs * d < 0)
        if hit.size == 0:
            return None
        steps = -xs[hit] / d[hit]
        k = int(np.argmin(steps))
        j = hit[k]
        xs = xs + steps[k] * d
        p = int(np.argmax(np.abs(B[j])))
        B = B - np.outer(B[:, p], B[j] / B[j, p])
        B = np.delete(np.delete(B, p, axis=1), j, axis=0)
        xs, S = np.delete(xs, j), np.delete(S, j)
    out = np.zeros_like(x)
    out[S] = xs
    return out


def _polish(A, y, x, lam):
    """Exact minimiser on the current support and sign pattern, or None.

    Only returned when the signs are preserved, so the objective cannot rise.
    A support wider than the number of rows is first reduced.
    """
    if np.count_nonzero(x) > A.shape[0]:
        x = _reduce_support(A, x)
        if x is None:
            return None
    S = np.flatnonzero(x)
    if S.size == 0:
        return None
    signs = np.sign(x[S])
    AS = A[:, S]
    try:
        xs = linalg.solve(AS.T @ AS, AS.T @ y - lam * signs, assume_a="pos", check_finite=False)
    except (linalg.LinAlgError, ValueError):
        return None
    if np.any(np.sign(xs) != signs):
        return None
    out = np.zeros_like(x)
    out[S] = xs
    return out


def _solve(A, y, lam, nonneg, tol, x_init, debug, sweep):
    n, N = A.shape
    A = np.asfortranarray(A, dtype=float)
    x = np.zeros(N) if x_init is None else np.array(x_init, dtype=float)
    if nonneg:
        np.maximum(x, 0.0, out=x)
    col_sq = np.einsum("ij,ij->j", A, A)
    all_idx = np.arange(N, dtype=np.intp)
    sweeps = 0
    last_obj = lasso_objective(A, y, x, lam)

    def run(idx):
        nonlocal sweeps, last_obj, r
        w = sweep(A, r, x, col_sq, float(lam), bool(nonneg), idx)
        sweeps += 1
        if debug:
            obj = lasso_objective(A, y, x, lam)
            assert obj <= last_obj + 1e-12 * (1 + abs(last_obj)), "objective increased"
            last_obj = obj
        return w

    r = y - A @ x
    primal, dual, gap = duality_gap(A, y, x, lam, nonneg, r)
    while True:
        target = tol.abs_tol * (1 + abs(primal))
        if gap <= target:
            return LassoSolution(x, lam, primal, gap, sweeps, int(np.count_nonzero(x)), True)
        if sweeps >= tol.max_iter:
            sol = LassoSolution(x, lam, primal, gap, sweeps, int(np.count_nonzero(x)), False)
            raise MaxIterExceeded(f"LASSO gap {gap:.3g} above {target:.3g} after {sweeps} sweeps",
                                  last=sol, residual=gap)
        run(all_idx)
        active = np.flatnonzero(x).astype(np.intp)
        for _ in range(_INNER_MAX):
            if active.size == 0 or sweeps >= tol.max_iter:
                break
            if run(active) <= 1e-3 * target:
                break
        # refresh the residual to stop drift from the incremental updates
        r = y - A @ x
        primal, dual, gap = duality_gap(A, y, x, lam, nonneg, r)
        if gap > tol.abs_tol * (1 + abs(primal)):
            cand = _polish(A, y, x, lam)
            if cand is not None:
                rc = y - A @ cand
                pc, dc, gc = duality_gap(A, y, cand, lam, nonneg, rc)
                if gc < gap and pc <= primal:
                    x[:] = cand
                    r, primal, dual, gap = rc, pc, dc, gc
                    last_obj = primal


def solve_lasso(instance, lam, nonneg=False, tol: Tolerance = LASSO_TOL, x_init=None,
                debug=False, backend=None) -> LassoSolution:
    """Minimise 0.5||y - Ax||^2 + lam ||x||_1, optionally over x >= 0.

    ``instance`` is a ProblemInstance or an ``(A, y)`` pair. Stops when the
    duality gap is below ``tol.abs_tol * (1 + |objective|)``. ``lam = 0`` is
    approached by warm-started continuation down to ``1e-6 * ||A^T y||_inf``.
    """
    A, y = (instance.A, instance.y) if hasattr(instance, "A") else instance
    y = np.asarray(y, dtype=float)
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    sweep = _kernels.cd_sweep if backend is None else _kernels.get_cd_sweep(backend)
    if lam == 0:
        top = float(np.abs(A.T @ y).max())
        x = x_init
        sol = None
        for lam_k in top * np.logspace(-1, -6, 11):
            sol = _solve(A, y, lam_k, nonneg, tol, x, debug, sweep)
            x = sol.x
        return sol
    return _solve(A, y, lam, nonneg, tol, x_init, debug, sweep)


def lasso_path_mse(instance, lambdas, nonneg=False, tol: Tolerance = LASSO_TOL):
    """Per-coordinate MSE against the true signal along a warm-started path.

    Results are returned in the order of ``lambdas``; solves run from the
    largest penalty down.
    """
    lambdas = [float(v) for v in lambdas]
    if not lambdas or min(lambdas) <= 0:
        raise ValueError("lambdas must be a non-empty list of positive values")
    out = {}
    x = None
    for lam in sorted(set(lambdas), reverse=True):
        sol = solve_lasso(instance, lam, nonneg, tol, x_init=x)
        x = sol.x
        out[lam] = float(np.mean((sol.x - instance.x0) ** 2))
    return [(lam, out[lam]) for lam in lambdas]
