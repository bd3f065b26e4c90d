"""Problem instances, the thresholded AMP iteration and a LASSO optimality check."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import Diverged
from .numerics import Tolerance
from .scalar_risk import DiscretePrior, soft_threshold, soft_threshold_pos

AMP_TOL = Tolerance(1e-8, 1e-8, 2000)
_OSCILLATION_WINDOW = 50
_MAD_SCALE = 0.6745


@dataclass
class ProblemInstance:
    A: np.ndarray
    x0: np.ndarray
    z0: np.ndarray
    y: np.ndarray
    delta: float
    rho: float
    sigma: float
    prior: DiscretePrior | None = None
    seed: object = None

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def N(self):
        return self.A.shape[1]

    def with_signal(self, x0):
        """Same matrix and noise, new signal; used for common-random-number scans."""
        x0 = np.asarray(x0, dtype=float)
        return ProblemInstance(self.A, x0, self.z0, self.A @ x0 + self.z0, self.delta, self.rho,
                               self.sigma, None, self.seed)


def make_rng(seed, trial=None):
    """Generator keyed by (seed, trial); independent of the order trials are drawn."""
    if trial is None:
        return np.random.default_rng(seed)
    return np.random.default_rng([int(seed), int(trial)])


SIGNAL_MODELS = ("fixed_support", "iid")


def generate_instance(delta, rho, sigma, prior: DiscretePrior, N: int, seed, trial=None,
                      signal="fixed_support") -> ProblemInstance:
    """Gaussian design with N(0, 1/n) entries, a signal from ``prior`` and N(0, sigma^2) noise.

    ``signal="fixed_support"`` places exactly round(epsilon*N) nonzeros at
    random positions; ``"iid"`` draws every coordinate from the prior, so the
    nonzero count is binomial.
    """
    if signal not in SIGNAL_MODELS:
        raise ValueError(f"signal must be one of {SIGNAL_MODELS}")
    if N < 10:
        raise ValueError("N must be at least 10")
    if not (0 < delta < 1 and 0 < rho < 1):
        raise ValueError("delta and rho must lie in (0, 1)")
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    if prior.epsilon > delta * rho + 1e-9:
        raise ValueError(f"prior has {prior.epsilon:.6g} mass off zero, more than delta*rho")
    rng = make_rng(seed, trial)
    n = int(round(delta * N))
    # drawn as N x n and transposed so columns are contiguous
    A = rng.standard_normal((N, n)).T / math.sqrt(n)
    x0 = prior.sample_fixed_support(rng, N) if signal == "fixed_support" else prior.sample(rng, N)
    z0 = sigma * rng.standard_normal(n)
    y = A @ x0 + z0
    return ProblemInstance(A, x0, z0, y, delta, rho, sigma, prior, (seed, trial))


@dataclass
class AMPState:
    x: np.ndarray
    z: np.ndarray
    df: int
    sigma_t: float
    theta_t: float
    iteration: int
    n: int
    mse_history: list = field(default_factory=list, repr=False)
    damped: bool = False

    @property
    def calibrated_lambda(self):
        """Penalty for which this fixed point solves the LASSO."""
        return self.theta_t * (1 - self.df / self.n)


def _scale(z, how):
    if how == "rms":
        return float(np.linalg.norm(z) / math.sqrt(z.size))
    if how == "mad":
        return float(np.median(np.abs(z)) / _MAD_SCALE)
    raise ValueError(f"unknown residual scale estimator {how!r}")


def amp_iterate(instance: ProblemInstance, tau, tol: Tolerance = AMP_TOL, onsager=True,
                scale="rms", nonneg=False, x_true=None):
    """Run thresholded AMP from zero until the relative change drops below ``tol.rel_tol``.

    Returns ``(state, converged)``. With ``x_true`` given, the per-iteration
    MSE (starting from the zero estimate) is recorded in ``state.mse_history``.
    ``onsager=False`` drops the memory term, giving plain iterative thresholding.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    A, y = instance.A, instance.y
    n, N = A.shape
    eta = soft_threshold_pos if nonneg else soft_threshold
    x = np.zeros(N)
    x_prev = x
    z = np.zeros(n)
    df = 0
    ynorm = float(np.linalg.norm(y))
    proxy = max(1 / math.sqrt(n / N) - 1, 1e-12)
    guard = 1e6 * ynorm / proxy
    history = [] if x_true is None else [float(np.mean((x - x_true) ** 2))]
    best, stall, damped = math.inf, 0, False
    sigma_t = theta = 0.0
    for t in range(1, tol.max_iter + 1):
        z = y - A @ x + (z * (df / n) if onsager else 0.0)
        sigma_t = _scale(z, scale)
        theta = tau * sigma_t
        x_new = eta(A.T @ z + x, theta)
        if not np.all(np.isfinite(x_new)) or np.linalg.norm(x_new) > guard > 0:
            raise Diverged(f"AMP estimate left the guard region at iteration {t}")
        change = float(np.linalg.norm(x_new - x) / max(np.linalg.norm(x), 1e-12))
        x_prev, x = x, x_new
        df = int(np.count_nonzero(x))
        if x_true is not None:
            history.append(float(np.mean((x - x_true) ** 2)))
        if change < tol.rel_tol or (ynorm == 0 and change == 0):
            return AMPState(x, z, df, sigma_t, theta, t, n, history, damped), True
        if change < best:
            best, stall = change, 0
        else:
            stall += 1
        if stall >= _OSCILLATION_WINDOW and not damped:
            x = 0.5 * (x + x_prev)
            df = int(np.count_nonzero(x))
            damped, stall = True, 0
    return AMPState(x, z, df, sigma_t, theta, tol.max_iter, n, history, damped), False


@dataclass(frozen=True)
class KKTCheck:
    passed: bool
    violation: float

    def __bool__(self):
        return self.passed


def kkt_violation(A, y, x, lam, nonneg=False):
    """Largest breach of the LASSO stationarity conditions."""
    g = A.T @ (y - A @ x)
    on = x != 0
    if nonneg:
        if np.any(x < 0):
            return math.inf
        v_on = np.abs(g[on] - lam)
        v_off = np.maximum(g[~on] - lam, 0.0)
    else:
        v_on = np.abs(g[on] - lam * np.sign(x[on]))
        v_off = np.maximum(np.abs(g[~on]) - lam, 0.0)
    worst = 0.0
    if v_on.size:
        worst = max(worst, float(v_on.max()))
    if v_off.size:
        worst = max(worst, float(v_off.max()))
    return worst


def verify_lasso_kkt(instance: ProblemInstance, xhat, lam, kkt_tol, nonneg=False) -> KKTCheck:
    """Certify ``xhat`` as a LASSO optimum at penalty ``lam`` up to ``kkt_tol``."""
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    v = kkt_violation(instance.A, instance.y, np.asarray(xhat, dtype=float), lam, nonneg)
    return KKTCheck(v <= kkt_tol, v)
