import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from amplab.errors import BracketFailure, NoSolution
from amplab.minimax import phase_boundary
from amplab.scalar_risk import (DiscretePrior, atom_risk, atom_risk_pos, least_favorable_mu,
                                minimax_scalar, minimax_scalar_direct, scalar_mse,
                                scalar_mse_worst_case, soft_threshold, soft_threshold_pos, zero_risk)

from oracles import Phi_mp, atom_risk_quad, mc_risk, phi_mp, prior_risk_quad, worst_case_brute


def row_eps(delta, frac):
    return delta * frac * phase_boundary(delta)


# ---- thresholding rules ----------------------------------------------------

@pytest.mark.parametrize("x,th,want", [(5, 2, 3), (-1, 2, 0), (-5, 2, -3), (2, 2, 0)])
def test_soft_threshold(x, th, want):
    assert soft_threshold(x, th) == want


@pytest.mark.parametrize("x,th,want", [(5, 2, 3), (-5, 2, 0), (2, 2, 0)])
def test_soft_threshold_pos(x, th, want):
    assert soft_threshold_pos(x, th) == want


def test_threshold_rejects_negative():
    with pytest.raises(ValueError):
        soft_threshold(1.0, -0.1)
    with pytest.raises(ValueError):
        soft_threshold_pos(1.0, -0.1)


@given(st.floats(-50, 50), st.floats(0, 10))
def test_soft_threshold_shrinks(x, th):
    v = soft_threshold(x, th)
    assert abs(v) <= abs(x) and abs(x - v) <= th + 1e-12
    assert v == 0 or math.copysign(1, v) == math.copysign(1, x)


# ---- priors ------------------------------------------------------------------

def test_prior_validation():
    with pytest.raises(ValueError):
        DiscretePrior((0.0, 1.0), (0.5, 0.6))
    with pytest.raises(ValueError):
        DiscretePrior((1.0, 1.0), (0.5, 0.5))
    with pytest.raises(ValueError):
        DiscretePrior((-1.0, 1.0), (0.5, 0.5), sign_constrained=True)
    with pytest.raises(ValueError):
        DiscretePrior((0.0, 1.0), (1.0, 0.0))


def test_prior_summaries():
    p = DiscretePrior.three_point(0.1, 5)
    assert p.epsilon == pytest.approx(0.1)
    assert p.second_moment == pytest.approx(2.5)
    assert p.first_abs_moment == pytest.approx(0.5)
    assert DiscretePrior.three_point(0.1, 0).atoms == (0.0,)
    q = DiscretePrior.two_point_positive(0.2, 3)
    assert q.sign_constrained and q.epsilon == pytest.approx(0.2)
    m = DiscretePrior.mixture(p, DiscretePrior.three_point(0.1, 2), 0.5)
    assert len(m.atoms) == 5 and m.epsilon == pytest.approx(0.1)
    assert p.scaled(2).second_moment == pytest.approx(10)


def test_prior_sampling_frequencies():
    p = DiscretePrior.three_point(0.2, 1.0)
    x = p.sample(np.random.default_rng(0), 200_000)
    assert np.mean(x != 0) == pytest.approx(0.2, abs=0.005)


# ---- closed-form risk --------------------------------------------------------

def test_identity_estimator_on_noise():
    assert scalar_mse(DiscretePrior.zero(), 1.0, 0.0) == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("tau", [0.3, 1.0, 1.96, 3.5])
def test_zero_signal_risk_formula(tau):
    want = 2 * (1 + tau ** 2) * Phi_mp(-tau) - 2 * tau * phi_mp(tau)
    assert scalar_mse(DiscretePrior.zero(), 1.0, tau) == pytest.approx(want, rel=1e-12)


@given(st.floats(-12, 12), st.floats(0.01, 5))
def test_atom_risk_matches_quadrature(mu, tau):
    assert float(atom_risk(mu, tau)) == pytest.approx(atom_risk_quad(mu, tau), rel=1e-8, abs=1e-12)


@given(st.floats(-12, 12), st.floats(0.01, 5))
def test_positive_atom_risk_matches_quadrature(mu, tau):
    assert float(atom_risk_pos(mu, tau)) == pytest.approx(atom_risk_quad(mu, tau, nonneg=True),
                                                          rel=1e-8, abs=1e-12)


def test_prior_risk_matches_quadrature():
    atoms, weights = (-3.0, 0.0, 0.5, 4.0), (0.1, 0.6, 0.2, 0.1)
    p = DiscretePrior(atoms, weights)
    assert scalar_mse(p, 2.3, 1.1) == pytest.approx(prior_risk_quad(atoms, weights, 2.3, 1.1), rel=1e-9)


def test_three_point_monte_carlo_example():
    tau = minimax_scalar(0.1).minimax_tau
    p = DiscretePrior.three_point(0.1, 5.0)
    mean, se = mc_risk(p.atoms, p.weights, 1.0, tau, 1_000_000, np.random.default_rng(11))
    assert abs(scalar_mse(p, 1.0, tau) - mean) < 3 * se


def test_positive_monte_carlo_example():
    p = DiscretePrior.two_point_positive(0.15, 2.5)
    mean, se = mc_risk(p.atoms, p.weights, 1.3, 0.9, 1_000_000, np.random.default_rng(12), nonneg=True)
    assert abs(scalar_mse(p, 1.69, 0.9) - mean) < 3 * se


@st.composite
def priors(draw, nonneg=False):
    k = draw(st.integers(1, 5))
    lo = 0.0 if nonneg else -8.0
    atoms = draw(st.lists(st.floats(lo, 8.0), min_size=k, max_size=k, unique=True))
    raw = draw(st.lists(st.floats(0.05, 1.0), min_size=k, max_size=k))
    w = np.array(raw) / sum(raw)
    return DiscretePrior.from_pairs(atoms, w, nonneg)


@given(priors(), st.floats(0.05, 4), st.floats(0.05, 4))
def test_scale_invariance(p, sigma, tau):
    lhs = scalar_mse(p, sigma ** 2, tau)
    rhs = sigma ** 2 * scalar_mse(p.scaled(1 / sigma), 1.0, tau)
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-14)


@given(st.floats(0.01, 0.9), st.floats(0.1, 4))
def test_risk_nondecreasing_in_amplitude(eps, tau):
    mus = np.linspace(0, 15, 61)
    r = [scalar_mse(DiscretePrior.three_point(eps, m), 1.0, tau) for m in mus]
    assert np.all(np.diff(r) >= -1e-12)


@given(st.floats(0.01, 0.9), st.floats(0.1, 4))
def test_risk_approaches_worst_case_from_below(eps, tau):
    worst = scalar_mse_worst_case(eps, tau)
    vals = [scalar_mse(DiscretePrior.three_point(eps, m), 1.0, tau) for m in (5, 10, 20, 40)]
    assert all(v <= worst + 1e-12 for v in vals)
    assert worst - vals[-1] < 1e-8


# ---- worst case and minimax -------------------------------------------------

def test_worst_case_examples():
    assert scalar_mse_worst_case(0.3, 0.0) == pytest.approx(1.0)
    assert scalar_mse_worst_case(0.01, 1.96) == pytest.approx(0.061, abs=1e-3)
    assert scalar_mse_worst_case(1.0, 1.7) == pytest.approx(1 + 1.7 ** 2)


@given(st.floats(0.01, 0.9), st.floats(0.05, 4), st.booleans())
def test_worst_case_matches_far_atom(eps, tau, nonneg):
    assert scalar_mse_worst_case(eps, tau, nonneg) == pytest.approx(worst_case_brute(eps, tau, nonneg),
                                                                    rel=1e-7)


@pytest.mark.parametrize("delta,frac,M,tau", [(0.10, 0.5, 0.06, 1.96), (0.50, 0.5, 0.32, 1.15),
                                              (0.50, 0.95, 0.48, 0.90)])
def test_minimax_row_examples(delta, frac, M, tau):
    r = minimax_scalar(row_eps(delta, frac))
    assert r.minimax_mse == pytest.approx(M, abs=0.01)
    assert r.minimax_tau == pytest.approx(tau, abs=0.01)


@pytest.mark.parametrize("eps", [0.001, 0.01, 0.1, 0.3, 0.6, 0.9])
@pytest.mark.parametrize("nonneg", [False, True])
def test_minimax_two_routes_agree(eps, nonneg):
    a = minimax_scalar(eps, nonneg)
    b = minimax_scalar_direct(eps, nonneg)
    assert a.minimax_mse == pytest.approx(b.minimax_mse, rel=1e-10)
    assert a.minimax_tau == pytest.approx(b.minimax_tau, abs=1e-5)
    assert a.minimax_mse <= b.minimax_mse + 1e-15


def test_minimax_monotone_concave_and_limits():
    eps = np.linspace(0.01, 0.5, 50)
    M = np.array([minimax_scalar(e).minimax_mse for e in eps])
    assert np.all(np.diff(M) > 0)
    assert np.all(np.diff(M, 2) <= 1e-12)
    assert minimax_scalar(1e-8).minimax_mse < 1e-5
    assert minimax_scalar(0.999).minimax_mse > 0.9999


def test_minimax_optimum_below_bracket():
    # the optimal threshold drops under the lower bracket end as eps -> 1
    with pytest.raises(BracketFailure):
        minimax_scalar(0.9999)


def test_minimax_rejects_endpoints():
    for e in (0.0, 1.0):
        with pytest.raises(ValueError):
            minimax_scalar(e)


def test_sign_information_helps():
    for e in np.linspace(0.01, 0.95, 40):
        assert minimax_scalar(e, True).minimax_mse <= minimax_scalar(e).minimax_mse


def test_positive_minimax_derivative_vanishes():
    r = minimax_scalar(0.1, True)
    h = 1e-5
    g = lambda t: scalar_mse_worst_case(0.1, t, True)
    assert abs(g(r.minimax_tau + h) - g(r.minimax_tau - h)) / (2 * h) < 1e-8


# ---- least-favorable amplitude ----------------------------------------------

@pytest.mark.parametrize("delta,frac,mu", [(0.10, 0.5, 3.74), (0.50, 0.5, 3.11)])
def test_least_favorable_row_examples(delta, frac, mu):
    eps = row_eps(delta, frac)
    tau = minimax_scalar(eps).minimax_tau
    assert least_favorable_mu(eps, 0.02, tau) == pytest.approx(mu, abs=0.01)


@given(st.floats(0.005, 0.5), st.floats(0.005, 0.3), st.booleans())
def test_least_favorable_defining_equation(eps, alpha, nonneg):
    tau = minimax_scalar(eps, nonneg).minimax_tau
    mu = least_favorable_mu(eps, alpha, tau, nonneg)
    p = DiscretePrior.sparse(eps, mu, nonneg)
    target = (1 - alpha) * scalar_mse_worst_case(eps, tau, nonneg)
    assert abs(scalar_mse(p, 1.0, tau) - target) < 1e-8
    # smallest such amplitude: a bit less falls short
    q = DiscretePrior.sparse(eps, mu * (1 - 1e-6), nonneg)
    assert scalar_mse(q, 1.0, tau) < target


def test_least_favorable_no_solution():
    tau = 2.5
    assume_alpha = 1 - zero_risk(tau) / scalar_mse_worst_case(0.01, tau) + 1e-3
    with pytest.raises(NoSolution):
        least_favorable_mu(0.01, min(assume_alpha, 0.999), tau)
