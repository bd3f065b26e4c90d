"""MSE map, its highest fixed point and the equilibrium observables it implies.

In equilibrium the estimator sees ``Y = X + sqrt(npi) Z`` with
``npi = sigma^2 + m/delta`` and thresholds at ``theta = tau sqrt(npi)``.
Every observable below is a closed-form Gaussian expectation in that model.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import MaxIterExceeded, UndefinedObservable
from .numerics import Interval, Tolerance, find_root, normal_cdf, normal_pdf
from .scalar_risk import DiscretePrior, scalar_mse, zero_risk

SE_TOL = Tolerance(1e-10, 1e-10, 100_000)
_SLOW_RATIO = 1 - 1e-3


@dataclass(frozen=True)
class SEParams:
    delta: float
    sigma: float
    tau: float
    prior: DiscretePrior

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.sigma == 0 and self.prior.second_moment == 0:
            raise ValueError("sigma = 0 with a zero signal is the trivial case")

    @property
    def nonneg(self):
        return self.prior.sign_constrained

    def npi(self, m):
        return self.sigma ** 2 + m / self.delta


@dataclass(frozen=True)
class SEFixedPoint:
    m_star: float
    stability: float
    iterations: int
    trajectory: tuple = field(repr=False, default=())
    method: str = "iteration"

    @property
    def finite(self):
        return math.isfinite(self.m_star)


@dataclass(frozen=True)
class EquilibriumReport:
    eq_mse: float
    npi: float
    theta: float
    eq_msr: float
    eq_mae: float
    eq_dr: float
    eq_pmsr: float


class ObservableKind(enum.Enum):
    MSE = "MSE"
    FAR = "FAR"
    DR = "DR"
    MDR = "MDR"
    FDeR = "FDeR"
    FDR = "FDR"


def mse_map(m, params: SEParams):
    """Risk of thresholding at the noise-plus-interference level implied by ``m``."""
    if m < 0:
        raise ValueError("m must be non-negative")
    return scalar_mse(params.prior, params.npi(m), params.tau)


def _stability(params, m):
    h = max(1e-6, 1e-6 * m)
    if m >= h:
        return (mse_map(m + h, params) - mse_map(m - h, params)) / (2 * h)
    return (mse_map(m + h, params) - mse_map(m, params)) / h


def _solve_fixed_point(params, m, tol):
    """Highest root of Psi(m) - m given an iterate ``m`` on the monotone path."""
    g = lambda v: mse_map(v, params) - v
    gm = g(m)
    if gm == 0:
        return m
    if gm < 0:
        hi, lo = m, 0.5 * m
        while g(lo) < 0:
            if lo < 1e-300:
                return 0.0
            hi, lo = lo, 0.5 * lo
    else:
        lo, hi = m, 2 * m + 1.0
        while g(hi) > 0:
            lo, hi = hi, 2 * hi
    return find_root(g, Interval(lo, hi), Tolerance(tol.abs_tol * 1e-2, tol.rel_tol * 1e-2, 500))


def find_hfp(params: SEParams, tol: Tolerance = SE_TOL) -> SEFixedPoint:
    """Highest fixed point of the MSE map, starting from the signal's second moment.

    If the zero-signal risk is at least ``delta`` the map grows without bound
    and the fixed point is reported as infinite.
    """
    slope_inf = zero_risk(params.tau, params.nonneg) / params.delta
    if slope_inf >= 1:
        return SEFixedPoint(math.inf, slope_inf, 0, (), "divergent")
    m = params.prior.second_moment
    traj = [m]
    prev_step = None
    for it in range(1, tol.max_iter + 1):
        nxt = mse_map(m, params)
        traj.append(nxt)
        step = nxt - m
        ratio = step / prev_step if prev_step else 0.0
        # the iteration contracts geometrically, so the distance left to the
        # fixed point is about step * ratio / (1 - ratio), not the step itself
        err = abs(step) * ratio / (1 - ratio) if 0 < ratio < 1 else abs(step)
        if err <= tol.abs_tol + tol.rel_tol * abs(nxt):
            return SEFixedPoint(nxt, _stability(params, nxt), it, tuple(traj))
        if ratio >= _SLOW_RATIO:
            root = _solve_fixed_point(params, nxt, tol)
            traj.append(root)
            return SEFixedPoint(root, _stability(params, root), it, tuple(traj), "bisection")
        prev_step = step
        m = nxt
    raise MaxIterExceeded(f"state evolution did not settle in {tol.max_iter} iterations",
                          last=m, residual=abs(mse_map(m, params) - m))


def se_trajectory(params: SEParams, n_iter: int, m0=None):
    """Predicted MSE sequence m_0, ..., m_n_iter of the iteration."""
    m = params.prior.second_moment if m0 is None else m0
    out = [m]
    for _ in range(n_iter):
        m = mse_map(m, params)
        out.append(m)
    return np.array(out)


def _band_moments(mu, lo, hi):
    """Integral of (mu+u)^2 phi(u) over the finite band (lo, hi)."""
    pl, ph = normal_pdf(lo), normal_pdf(hi)
    return (mu * mu + 1) * (normal_cdf(hi) - normal_cdf(lo)) + 2 * mu * (pl - ph) + (lo * pl - hi * ph)


def _unit_observables(prior: DiscretePrior, s, tau):
    """Per-atom detection probability, E|eta|/s and E[(Y-eta)^2]/s^2."""
    mu = prior.atom_array / s
    a = mu - tau
    if prior.sign_constrained:
        h = -a
        det = normal_cdf(a)
        mae = a * normal_cdf(a) + normal_pdf(a)
        # Y - eta(Y) is Y below the threshold and tau above it
        below = (mu * mu + 1) * normal_cdf(h) - 2 * mu * normal_pdf(h) - h * normal_pdf(h)
        msr = below + tau * tau * det
    else:
        b = -mu - tau
        det = normal_cdf(a) + normal_cdf(b)
        mae = a * normal_cdf(a) + normal_pdf(a) + b * normal_cdf(b) + normal_pdf(b)
        msr = _band_moments(mu, b, -a) + tau * tau * det
    return det, mae, msr


def equilibrium_report(params: SEParams, fp: SEFixedPoint) -> EquilibriumReport:
    """Equilibrium operating characteristics at the fixed point ``fp``."""
    if not fp.finite:
        raise ValueError("equilibrium quantities need a finite fixed point")
    m = fp.m_star
    npi = params.npi(m)
    s = math.sqrt(npi)
    theta = params.tau * s
    w = params.prior.weight_array
    if npi == 0:
        # noiseless and error-free: the estimator returns the signal itself
        x = params.prior.atom_array
        dr = float(w[x != 0].sum())
        mae = params.prior.first_abs_moment
        msr = 0.0
    else:
        det, mae_u, msr_u = _unit_observables(params.prior, s, params.tau)
        dr = float(np.dot(w, det))
        mae = s * float(np.dot(w, mae_u))
        msr = npi * float(np.dot(w, msr_u))
    dr = min(max(dr, 0.0), 1.0)
    pmsr = msr / 2 + theta * (1 - dr / params.delta) * mae
    return EquilibriumReport(m, npi, theta, msr, mae, dr, pmsr)


def _false_alarm_mass(params, s):
    w0 = params.prior.weight_array[params.prior.atom_array == 0].sum()
    p = normal_cdf(-params.tau) if params.nonneg else 2 * normal_cdf(-params.tau)
    return float(w0 * p) if s > 0 else 0.0


def formal_observable(kind: ObservableKind, params: SEParams, fp: SEFixedPoint) -> float:
    """Equilibrium value of an observable; rate normalisers use the prior's sparsity."""
    kind = ObservableKind(kind)
    rep = equilibrium_report(params, fp)
    eps = params.prior.epsilon
    s = math.sqrt(rep.npi)
    if kind is ObservableKind.MSE:
        return rep.eq_mse
    if kind is ObservableKind.DR:
        return rep.eq_dr
    if kind is ObservableKind.FAR:
        if eps >= 1:
            raise UndefinedObservable("FAR needs mass at zero")
        return _false_alarm_mass(params, s) / (1 - eps)
    if kind is ObservableKind.FDeR:
        if eps == 0:
            raise UndefinedObservable("FDeR needs a nonzero signal fraction")
        return _false_alarm_mass(params, s) / eps
    if kind is ObservableKind.MDR:
        if eps == 0:
            raise UndefinedObservable("MDR needs a nonzero signal fraction")
        nz = params.prior.atom_array != 0
        if s == 0:
            return 0.0
        det, _, _ = _unit_observables(params.prior, s, params.tau)
        return float(np.dot(params.prior.weight_array[nz], 1 - det[nz])) / eps
    # FDR
    if rep.eq_dr == 0:
        raise UndefinedObservable("FDR needs a positive detection rate")
    return formal_observable(ObservableKind.FDeR, params, fp) / rep.eq_dr


def empirical_observables(x0, xhat, epsilon):
    """Per-instance detection and error observables; undefined ratios are NaN."""
    x0 = np.asarray(x0)
    xhat = np.asarray(xhat)
    N = x0.size
    det = xhat != 0
    sig = x0 != 0
    out = {ObservableKind.MSE: float(np.sum((xhat - x0) ** 2) / N),
           ObservableKind.DR: float(det.mean())}
    fa = float(np.sum(det & ~sig) / N)
    out[ObservableKind.FAR] = fa / (1 - epsilon) if epsilon < 1 else math.nan
    out[ObservableKind.MDR] = float(np.sum(~det & sig) / N) / epsilon if epsilon > 0 else math.nan
    out[ObservableKind.FDeR] = fa / epsilon if epsilon > 0 else math.nan
    dr = out[ObservableKind.DR]
    out[ObservableKind.FDR] = out[ObservableKind.FDeR] / dr if dr > 0 else math.nan
    return out
