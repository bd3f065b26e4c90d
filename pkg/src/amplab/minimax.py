"""Minimax noise sensitivity over the (delta, rho) phase plane.

Everything is computed at unit noise and rescaled; all amplitudes and
penalties scale linearly in sigma, MSE quadratically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AbovePT, InadmissibleGamma, MaxIterExceeded, NoSolution, OversaturatedModel
from .numerics import DEFAULT_TOL, Interval, Tolerance, find_root, mills_ratio, normal_cdf, normal_pdf
from .scalar_risk import (DiscretePrior, least_favorable_mu, minimax_scalar,
                          scalar_mse_worst_case, zero_risk)
from .state_evolution import SEParams, equilibrium_report, find_hfp

DEFAULT_ALPHA = 0.02


@dataclass(frozen=True)
class PhasePoint:
    delta: float
    rho: float
    sign_constrained: bool = False

    def __post_init__(self):
        if not (0 < self.delta < 1 and 0 < self.rho < 1):
            raise ValueError(f"phase point ({self.delta}, {self.rho}) outside the open unit square")

    @property
    def epsilon(self):
        return self.delta * self.rho


@dataclass(frozen=True)
class PhasePointReport:
    delta: float
    rho: float
    epsilon: float
    below_pt: bool
    minimax_mse: float          # scalar minimax risk at epsilon
    m_star_sensitivity: float   # inf above the boundary
    tau_star: float
    npi_star: float
    alpha: float
    mu_unit: float              # least-favorable amplitude at unit noise
    mu_star: float
    lambda_star: float
    sign_constrained: bool = False


@dataclass(frozen=True)
class AbovePTConstruction:
    delta: float
    rho: float
    gamma: float
    tau: float
    alpha: float
    mu: float
    lambda_: float
    fmse: float
    fnpi: float
    sign_constrained: bool = False

    def prior(self, sigma=1.0) -> DiscretePrior:
        return DiscretePrior.sparse(self.delta * self.rho, self.mu * sigma, self.sign_constrained)


def phase_boundary(delta, sign_constrained=False, tol: Tolerance = DEFAULT_TOL):
    """rho at which the minimax scalar risk at epsilon = rho*delta equals delta."""
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")

    def excess(rho):
        return minimax_scalar(rho * delta, sign_constrained).minimax_mse - delta

    return find_root(excess, Interval(1e-6, 1 - 1e-6), Tolerance(1e-13, 1e-13, tol.max_iter))


def phase_boundary_parametric(tau, sign_constrained=False):
    """Boundary point (delta, rho) whose minimax threshold is ``tau``."""
    if np.any(np.asarray(tau) <= 0):
        raise ValueError("tau must be positive")
    tau = np.asarray(tau, dtype=float)
    r = mills_ratio(tau)
    tail = 1 - tau * r                        # (phi - tau Phi(-tau)) / phi
    inv_phi = 1 / normal_pdf(tau)
    k = 1.0 if sign_constrained else 2.0
    with np.errstate(over="ignore"):
        delta = k / (tau * inv_phi + k * tail)
    rho = tail
    if delta.ndim == 0:
        return float(delta), float(rho)
    return delta, rho


def _lf_prior(eps, mu, sign_constrained):
    return DiscretePrior.sparse(eps, mu, sign_constrained)


def noise_sensitivity(point: PhasePoint, alpha=DEFAULT_ALPHA) -> PhasePointReport:
    """Minimax formal noise sensitivity and its companions at a phase point (sigma = 1).

    The reported penalty evaluates the calibration in the minimax equilibrium
    itself, where the estimator sees the unit-scale least-favorable prior.
    """
    eps = point.epsilon
    sc = point.sign_constrained
    mm = minimax_scalar(eps, sc)
    tau = mm.minimax_tau
    try:
        mu_unit = least_favorable_mu(eps, alpha, tau, sc)
    except NoSolution:
        if mm.minimax_mse < point.delta:
            raise
        mu_unit = math.nan
    if mm.minimax_mse >= point.delta:
        return PhasePointReport(point.delta, point.rho, eps, False, mm.minimax_mse, math.inf, tau,
                                math.inf, alpha, mu_unit, math.inf, math.inf, sc)
    m_star = mm.minimax_mse / (1 - mm.minimax_mse / point.delta)
    npi = 1 + m_star / point.delta
    s = math.sqrt(npi)
    if sc:
        dr = eps * normal_cdf(mu_unit - tau) + (1 - eps) * normal_cdf(-tau)
    else:
        dr = (eps * (normal_cdf(mu_unit - tau) + normal_cdf(-mu_unit - tau))
              + (1 - eps) * 2 * normal_cdf(-tau))
    lam = tau * s * (1 - dr / point.delta)
    return PhasePointReport(point.delta, point.rho, eps, True, mm.minimax_mse, m_star, tau, npi,
                            alpha, mu_unit, mu_unit * s, lam, sc)


def least_favorable_prior(point: PhasePoint, alpha=DEFAULT_ALPHA, sigma=1.0) -> DiscretePrior:
    """Sparse prior at the near-least-favorable amplitude, scaled to noise ``sigma``."""
    rep = noise_sensitivity(point, alpha)
    if not rep.below_pt:
        raise AbovePT(f"({point.delta}, {point.rho}) lies above the phase boundary")
    return _lf_prior(point.epsilon, rep.mu_star * sigma, point.sign_constrained)


def alpha_tilde_factor(minimax_mse, delta, alpha):
    """(1 - alpha~) for the rescaled least-favorable prior, normalised risk M/delta."""
    m = minimax_mse / delta
    return (1 - alpha) * (1 - m) / (1 - (1 - alpha) * m)


def _equilibrium(params: SEParams):
    fp = find_hfp(params)
    if not fp.finite:
        return None, fp
    return equilibrium_report(params, fp), fp


def _with_tau(params: SEParams, tau):
    return SEParams(params.delta, params.sigma, tau, params.prior)


def _lambda_signed(tau, params):
    p = _with_tau(params, tau)
    rep, _ = _equilibrium(p)
    if rep is None:
        return -math.inf
    return rep.theta * (1 - rep.eq_dr / p.delta)


def calibrate_tau_to_lambda(tau, params: SEParams):
    """LASSO penalty whose solution matches the AMP fixed point at threshold ``tau``."""
    p = _with_tau(params, tau)
    rep, _ = _equilibrium(p)
    if rep is None or rep.eq_dr >= p.delta:
        dr = rep.eq_dr if rep is not None else detection_rate_limit(tau, p.nonneg)
        raise OversaturatedModel(f"equilibrium detection rate {dr:.6g} >= delta {p.delta}")
    return rep.theta * (1 - rep.eq_dr / p.delta)


def detection_rate_limit(tau, sign_constrained=False):
    """Detection rate when the effective noise swamps the signal."""
    return normal_cdf(-tau) if sign_constrained else 2 * normal_cdf(-tau)


def equilibrium_detection_rate(tau, params: SEParams):
    """EqDR at threshold ``tau``; the divergent-state limit where no fixed point exists."""
    p = _with_tau(params, tau)
    rep, _ = _equilibrium(p)
    if rep is None:
        return detection_rate_limit(tau, p.nonneg)
    return rep.eq_dr


def minimal_tau(params: SEParams, tol: Tolerance = DEFAULT_TOL):
    """Smallest threshold at which the equilibrium detection rate drops to delta."""
    f = lambda t: equilibrium_detection_rate(t, params) - params.delta
    lo, hi = 1e-6, 1.0
    while f(hi) > 0:
        lo, hi = hi, 2 * hi
        if hi > 1e3:
            raise NoSolution("detection rate never falls below delta")
    return find_root(f, Interval(lo, hi), Tolerance(1e-12, 1e-12, tol.max_iter))


def calibrate_lambda_to_tau(lam, params: SEParams, tol: Tolerance = DEFAULT_TOL):
    """Threshold whose AMP fixed point solves the LASSO at penalty ``lam``."""
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    tau0 = minimal_tau(params, tol)
    if lam == 0:
        return tau0
    f = lambda t: _lambda_signed(t, params) - lam
    lo, hi = tau0, tau0 + 1.0
    n = 0
    while f(hi) < 0:
        lo, hi = hi, hi + 2.0 * (hi - tau0)
        n += 1
        if n > 60:
            raise MaxIterExceeded("no threshold reaches the requested penalty", last=hi)
    return find_root(f, Interval(lo, hi), Tolerance(1e-12, 1e-12, tol.max_iter))


def maximin_lambda(point: PhasePoint, alpha=DEFAULT_ALPHA, sigma=1.0):
    """Penalty calibrated to the minimax threshold on the near-least-favorable prior.

    The fixed point is solved for that prior directly, so this is the value a
    LASSO experiment on that prior should use.
    """
    rep = noise_sensitivity(point, alpha)
    if not rep.below_pt:
        raise AbovePT(f"({point.delta}, {point.rho}) lies above the phase boundary")
    prior = _lf_prior(point.epsilon, rep.mu_star * sigma, point.sign_constrained)
    return calibrate_tau_to_lambda(rep.tau_star, SEParams(point.delta, sigma, rep.tau_star, prior))


def above_pt_construction(point: PhasePoint, gamma, tau) -> AbovePTConstruction:
    """Prior and penalty with formal MSE delta*gamma/(1-gamma) above the boundary (sigma = 1).

    Admissible when mse(0, tau) < gamma*delta < worst-case risk at (epsilon, tau).
    """
    if not 0 < gamma < 1:
        raise InadmissibleGamma(f"gamma={gamma} outside (0, 1)")
    if tau <= 0:
        raise ValueError("tau must be positive")
    eps, delta, sc = point.epsilon, point.delta, point.sign_constrained
    base = zero_risk(tau, sc)
    worst = scalar_mse_worst_case(eps, tau, sc)
    if not base < gamma * delta < worst:
        raise InadmissibleGamma(
            f"need mse(0,tau)={base:.6g} < gamma*delta={gamma * delta:.6g} < worst case {worst:.6g}")
    alpha = 1 - gamma * delta / worst
    mu_unit = least_favorable_mu(eps, alpha, tau, sc)
    shrink = math.sqrt(1 - gamma)
    if sc:
        dr = eps * normal_cdf(mu_unit - tau) + (1 - eps) * normal_cdf(-tau)
    else:
        dr = eps * (normal_cdf(mu_unit - tau) + normal_cdf(-mu_unit - tau)) + (1 - eps) * 2 * normal_cdf(-tau)
    lam = tau / shrink * (1 - dr / delta)
    return AbovePTConstruction(delta, point.rho, gamma, tau, alpha, mu_unit / shrink, lam,
                               delta * gamma / (1 - gamma), 1 / (1 - gamma), sc)


CONTOUR_QUANTITIES = ("M*", "mu*", "lambda*", "tau*")


def contour_value(report: PhasePointReport, quantity):
    if quantity not in CONTOUR_QUANTITIES:
        raise ValueError(f"unknown quantity {quantity!r}; choose from {CONTOUR_QUANTITIES}")
    if not report.below_pt:
        return math.inf
    return {"M*": report.m_star_sensitivity, "mu*": report.mu_star,
            "lambda*": report.lambda_star, "tau*": report.tau_star}[quantity]
