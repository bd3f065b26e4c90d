"""Soft-threshold risk over discrete sparse priors and its minimax behaviour.

Risks are computed in closed form from Gaussian integrals. For a single atom
at amplitude ``mu`` observed in unit noise, soft thresholding at ``tau`` has

    (1+tau^2) [Phi(mu-tau) + Phi(-tau-mu)] - (tau+mu) phi(tau-mu)
        - (tau-mu) phi(tau+mu) + mu^2 [Phi(tau-mu) - Phi(-tau-mu)]

and the one-sided rule ``max(x - tau, 0)`` has

    (1+tau^2) Phi(mu-tau) - (tau+mu) phi(tau-mu) + mu^2 Phi(tau-mu).

General noise levels follow by scale invariance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BracketFailure, NoSolution
from .numerics import DEFAULT_TOL, Interval, Tolerance, find_root, minimize_unimodal, normal_cdf, normal_pdf

_WEIGHT_SUM_TOL = 1e-12


@dataclass(frozen=True)
class DiscretePrior:
    """Finitely supported probability measure for the signal entries."""

    atoms: tuple
    weights: tuple
    sign_constrained: bool = False
    _a: np.ndarray = field(init=False, repr=False, compare=False)
    _w: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        a = np.asarray(self.atoms, dtype=float).ravel()
        w = np.asarray(self.weights, dtype=float).ravel()
        if a.size == 0 or a.size != w.size:
            raise ValueError("atoms and weights must be non-empty and of equal length")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(w))):
            raise ValueError("atoms and weights must be finite")
        if np.any(w <= 0) or np.any(w > 1):
            raise ValueError("weights must lie in (0, 1]")
        if abs(w.sum() - 1.0) > _WEIGHT_SUM_TOL:
            raise ValueError(f"weights sum to {w.sum():.15g}, expected 1")
        if np.unique(a).size != a.size:
            raise ValueError("atoms must be distinct")
        if self.sign_constrained and np.any(a < 0):
            raise ValueError("sign-constrained prior has a negative atom")
        a.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "atoms", tuple(a.tolist()))
        object.__setattr__(self, "weights", tuple(w.tolist()))
        object.__setattr__(self, "_a", a)
        object.__setattr__(self, "_w", w)

    @classmethod
    def from_pairs(cls, atoms, weights, sign_constrained=False):
        """Build a prior, merging repeated atoms and dropping zero weights."""
        acc = {}
        for x, p in zip(atoms, weights):
            if p < 0:
                raise ValueError("weights must be non-negative")
            if p > 0:
                acc[float(x)] = acc.get(float(x), 0.0) + float(p)
        xs = sorted(acc)
        ws = np.array([acc[x] for x in xs])
        return cls(tuple(xs), tuple(ws / ws.sum()), sign_constrained)

    @classmethod
    def zero(cls):
        return cls((0.0,), (1.0,), False)

    @classmethod
    def three_point(cls, epsilon, mu):
        """(1-eps) at 0 plus eps/2 at each of +-mu."""
        if not 0 <= epsilon <= 1:
            raise ValueError("epsilon must lie in [0, 1]")
        mu = abs(float(mu))
        return cls.from_pairs([-mu, 0.0, mu], [epsilon / 2, 1 - epsilon, epsilon / 2])

    @classmethod
    def two_point_positive(cls, epsilon, mu):
        """(1-eps) at 0 plus eps at +mu; the sign-constrained analogue."""
        if not 0 <= epsilon <= 1:
            raise ValueError("epsilon must lie in [0, 1]")
        if mu < 0:
            raise ValueError("mu must be non-negative")
        return cls.from_pairs([0.0, mu], [1 - epsilon, epsilon], sign_constrained=True)

    @classmethod
    def sparse(cls, epsilon, mu, sign_constrained=False):
        if sign_constrained:
            return cls.two_point_positive(epsilon, mu)
        return cls.three_point(epsilon, mu)

    @classmethod
    def mixture(cls, p0: "DiscretePrior", p1: "DiscretePrior", gamma):
        """(1-gamma) p0 + gamma p1."""
        if not 0 <= gamma <= 1:
            raise ValueError("gamma must lie in [0, 1]")
        atoms = list(p0.atoms) + list(p1.atoms)
        weights = [(1 - gamma) * w for w in p0.weights] + [gamma * w for w in p1.weights]
        return cls.from_pairs(atoms, weights, p0.sign_constrained and p1.sign_constrained)

    def scaled(self, c):
        """Law of c*X."""
        if c < 0 and self.sign_constrained:
            raise ValueError("negative scaling breaks the sign constraint")
        return DiscretePrior.from_pairs([c * x for x in self.atoms], self.weights,
                                        self.sign_constrained)

    @property
    def atom_array(self):
        return self._a

    @property
    def weight_array(self):
        return self._w

    @property
    def epsilon(self):
        """Mass off zero."""
        return float(self._w[self._a != 0].sum())

    @property
    def second_moment(self):
        return float(np.dot(self._w, self._a ** 2))

    @property
    def first_abs_moment(self):
        return float(np.dot(self._w, np.abs(self._a)))

    def sample(self, rng: np.random.Generator, size):
        idx = rng.choice(self._a.size, size=size, p=self._w)
        return self._a[idx]

    def sample_fixed_support(self, rng: np.random.Generator, size):
        """Exactly round(epsilon*size) nonzeros at uniform positions.

        Nonzero values are iid from the prior conditioned on being nonzero.
        """
        out = np.zeros(size)
        nz = self._a != 0
        k = int(round(self.epsilon * size))
        if k == 0:
            return out
        pos = rng.choice(size, size=k, replace=False)
        w = self._w[nz] / self._w[nz].sum()
        out[pos] = self._a[nz][rng.choice(int(nz.sum()), size=k, p=w)]
        return out


@dataclass(frozen=True)
class MinimaxScalarResult:
    epsilon: float
    minimax_mse: float
    minimax_tau: float
    sign_constrained: bool = False


def soft_threshold(x, theta):
    """Shrink toward zero by ``theta``; exact zeros inside [-theta, theta]."""
    if np.any(np.asarray(theta) < 0):
        raise ValueError("theta must be non-negative")
    x = np.asarray(x, dtype=float)
    out = np.sign(x) * np.maximum(np.abs(x) - theta, 0.0)
    return float(out) if out.ndim == 0 else out


def soft_threshold_pos(x, theta):
    """One-sided shrinkage max(x - theta, 0)."""
    if np.any(np.asarray(theta) < 0):
        raise ValueError("theta must be non-negative")
    x = np.asarray(x, dtype=float)
    out = np.maximum(x - theta, 0.0)
    return float(out) if out.ndim == 0 else out


def atom_risk(mu, tau):
    """Unit-noise soft-threshold risk at signal value ``mu`` (vectorised)."""
    mu = np.asarray(mu, dtype=float)
    t2 = 1.0 + tau * tau
    a, b = mu - tau, -tau - mu
    out = (t2 * (normal_cdf(a) + normal_cdf(b))
           - (tau + mu) * normal_pdf(a) - (tau - mu) * normal_pdf(b)
           + mu * mu * (normal_cdf(-a) - normal_cdf(b)))
    return np.maximum(out, 0.0)


def atom_risk_pos(mu, tau):
    """Unit-noise risk of ``max(x - tau, 0)`` at signal value ``mu``."""
    mu = np.asarray(mu, dtype=float)
    a = mu - tau
    out = (1.0 + tau * tau) * normal_cdf(a) - (tau + mu) * normal_pdf(a) + mu * mu * normal_cdf(-a)
    return np.maximum(out, 0.0)


def scalar_mse(prior: DiscretePrior, sigma2, tau, sign_constrained=None):
    """E[eta(X + sigma Z; tau sigma) - X]^2 for X ~ prior.

    The one-sided rule is used when ``sign_constrained`` is true, defaulting
    to the prior's own flag. ``sigma2 = 0`` gives 0 (the rule is the identity).
    """
    if sigma2 < 0 or tau < 0:
        raise ValueError("sigma2 and tau must be non-negative")
    if sign_constrained is None:
        sign_constrained = prior.sign_constrained
    if sigma2 == 0:
        return 0.0
    s = math.sqrt(sigma2)
    risk = atom_risk_pos if sign_constrained else atom_risk
    return float(sigma2 * np.dot(prior.weight_array, risk(prior.atom_array / s, tau)))


def zero_risk(tau, sign_constrained=False):
    """Unit-noise risk at a zero signal, mse(0, tau)."""
    if sign_constrained:
        return (1 + tau * tau) * normal_cdf(-tau) - tau * normal_pdf(tau)
    return 2 * (1 + tau * tau) * normal_cdf(-tau) - 2 * tau * normal_pdf(tau)


def scalar_mse_worst_case(epsilon, tau, sign_constrained=False):
    """Supremum of unit-noise risk over priors with at most ``epsilon`` mass off zero."""
    if not 0 <= epsilon <= 1:
        raise ValueError("epsilon must lie in [0, 1]")
    if tau < 0:
        raise ValueError("tau must be non-negative")
    return epsilon * (1 + tau * tau) + (1 - epsilon) * zero_risk(tau, sign_constrained)


def worst_case_slope(epsilon, tau, sign_constrained=False):
    """Derivative in tau of the worst-case risk."""
    tail = tau * normal_cdf(-tau) - normal_pdf(tau)
    k = 2.0 if sign_constrained else 4.0
    return 2 * epsilon * tau + k * (1 - epsilon) * tail


def _tau_bracket(epsilon):
    return Interval(1e-4, max(10.0, 2 * math.sqrt(2 * math.log(1 / epsilon))))


def minimax_scalar(epsilon, sign_constrained=False, tol: Tolerance = DEFAULT_TOL) -> MinimaxScalarResult:
    """Minimax threshold and risk over epsilon-sparse priors."""
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie strictly inside (0, 1)")
    br = _tau_bracket(epsilon)
    # the slope is negative at 0 and positive for large tau, so the minimiser is interior
    if not (worst_case_slope(epsilon, br.lo, sign_constrained) < 0
            < worst_case_slope(epsilon, br.hi, sign_constrained)):
        raise BracketFailure(f"worst-case risk not unimodal on [{br.lo}, {br.hi}] at eps={epsilon}")
    # root of the slope is sharper than a derivative-free minimiser
    tau = find_root(lambda t: worst_case_slope(epsilon, t, sign_constrained), br,
                    Tolerance(1e-14, 1e-14, tol.max_iter))
    return MinimaxScalarResult(epsilon, scalar_mse_worst_case(epsilon, tau, sign_constrained),
                               tau, sign_constrained)


def minimax_scalar_direct(epsilon, sign_constrained=False, tol: Tolerance = DEFAULT_TOL):
    """Same quantity via derivative-free minimisation of the worst-case risk."""
    r = minimize_unimodal(lambda t: scalar_mse_worst_case(epsilon, t, sign_constrained),
                          _tau_bracket(epsilon), Tolerance(1e-12, 1e-12, tol.max_iter))
    return MinimaxScalarResult(epsilon, r.fx, r.x, sign_constrained)


def least_favorable_mu(epsilon, alpha, tau, sign_constrained=False, tol: Tolerance = DEFAULT_TOL):
    """Smallest amplitude whose sparse prior reaches (1-alpha) of the worst-case risk."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie strictly inside (0, 1)")
    if tau <= 0:
        raise ValueError("tau must be positive")
    target = (1 - alpha) * scalar_mse_worst_case(epsilon, tau, sign_constrained)
    base = zero_risk(tau, sign_constrained)
    if target <= base:
        raise NoSolution(f"(1-alpha) worst case {target:.6g} is not above the zero-signal risk {base:.6g}")
    risk = atom_risk_pos if sign_constrained else atom_risk

    def gap(mu):
        return epsilon * float(risk(mu, tau)) + (1 - epsilon) * base - target

    hi = 20.0 * (1 + tau)
    while gap(hi) < 0:
        hi *= 2
        if hi > 1e8:
            raise NoSolution("amplitude search did not bracket the target risk")
    return find_root(gap, Interval(0.0, hi), Tolerance(1e-13, 1e-13, tol.max_iter))
