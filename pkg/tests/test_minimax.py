import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from amplab.harness import SADDLE_LAMBDA_FACTORS
from amplab.errors import AbovePT, InadmissibleGamma, OversaturatedModel
from amplab.minimax import (PhasePoint, above_pt_construction, alpha_tilde_factor, calibrate_lambda_to_tau,
                            calibrate_tau_to_lambda, contour_value, least_favorable_prior, maximin_lambda,
                            minimal_tau, noise_sensitivity, phase_boundary, phase_boundary_parametric)
from amplab.scalar_risk import DiscretePrior, minimax_scalar, scalar_mse, zero_risk
from amplab.state_evolution import SEParams, equilibrium_report, find_hfp

from oracles import Phi_mp

FRACTIONS = (0.5, 0.75, 0.9, 0.95)


def at_fraction(delta, frac, nonneg=False):
    return PhasePoint(delta, frac * phase_boundary(delta, nonneg), nonneg)


# ---- boundary ----------------------------------------------------------------

@pytest.mark.parametrize("delta,rho", [(0.25, 0.268), (0.10, 0.190)])
def test_boundary_examples(delta, rho):
    assert phase_boundary(delta) == pytest.approx(rho, abs=0.002)


def test_boundary_monotone_and_vanishing():
    d = np.linspace(0.01, 0.99, 60)
    r = np.array([phase_boundary(v) for v in d])
    assert np.all(np.diff(r) > 0)
    assert phase_boundary(1e-4) < 0.1


@pytest.mark.parametrize("nonneg", [False, True])
def test_boundary_root_vs_parametric(nonneg):
    for tau in np.linspace(0.3, 4.0, 200):
        delta, rho = phase_boundary_parametric(tau, nonneg)
        if not 1e-6 < delta < 1 - 1e-6:
            continue
        assert phase_boundary(delta, nonneg) == pytest.approx(rho, abs=1e-6)


@pytest.mark.parametrize("tau", [0.5, 1.0, 2.0, 3.0])
@pytest.mark.parametrize("nonneg", [False, True])
def test_parametric_point_is_on_boundary(tau, nonneg):
    delta, rho = phase_boundary_parametric(tau, nonneg)
    mm = minimax_scalar(rho * delta, nonneg)
    assert mm.minimax_mse == pytest.approx(delta, abs=1e-8)
    assert mm.minimax_tau == pytest.approx(tau, abs=1e-6)


def test_parametric_limits():
    d, r = phase_boundary_parametric(12.0)
    assert d < 1e-3 and r < 0.02


def test_sign_constraint_raises_boundary():
    for delta in (0.1, 0.3, 0.6, 0.9):
        assert phase_boundary(delta, True) > phase_boundary(delta)


# ---- noise sensitivity -------------------------------------------------------

def test_report_sparsest_row():
    rep = noise_sensitivity(at_fraction(0.10, 0.5))
    assert rep.below_pt
    assert rep.m_star_sensitivity == pytest.approx(0.14, abs=0.01)
    # amplitudes get 1% because the printed mu± column is itself rounded
    assert rep.mu_star == pytest.approx(5.79, rel=0.01)
    assert rep.lambda_star == pytest.approx(1.28, abs=0.01)


def test_report_mid_row():
    rep = noise_sensitivity(at_fraction(0.50, 0.75))
    assert rep.m_star_sensitivity == pytest.approx(2.55, abs=0.01)
    assert rep.mu_star == pytest.approx(7.35, rel=0.01)
    assert rep.tau_star == pytest.approx(1.00, abs=0.01)


def test_above_boundary_report():
    rep = noise_sensitivity(PhasePoint(0.25, 0.401))
    assert not rep.below_pt
    assert math.isinf(rep.m_star_sensitivity)
    assert contour_value(rep, "M*") == math.inf
    with pytest.raises(AbovePT):
        maximin_lambda(PhasePoint(0.25, 0.401))


@pytest.mark.parametrize("delta", [0.1, 0.25, 0.5])
def test_sensitivity_blows_up_towards_boundary(delta):
    vals = [noise_sensitivity(at_fraction(delta, f)).m_star_sensitivity for f in FRACTIONS]
    assert np.all(np.diff(vals) > 0)
    assert noise_sensitivity(at_fraction(delta, 0.999)).m_star_sensitivity > 10 * vals[0]


@given(st.floats(0.05, 0.95), st.floats(0.05, 0.95))
def test_report_consistency(delta, frac):
    pt = at_fraction(delta, frac)
    rep = noise_sensitivity(pt)
    mm = minimax_scalar(pt.epsilon)
    assert rep.below_pt == (mm.minimax_mse < delta)
    assert rep.npi_star == pytest.approx(1 + rep.m_star_sensitivity / delta)
    assert rep.mu_star == pytest.approx(rep.mu_unit * math.sqrt(rep.npi_star))
    assert rep.tau_star == mm.minimax_tau


def test_formal_mse_on_least_favorable_prior_is_nearly_minimax():
    for delta in (0.1, 0.25, 0.5):
        for f in FRACTIONS:
            pt = at_fraction(delta, f)
            rep = noise_sensitivity(pt)
            fmse = find_hfp(SEParams(delta, 1.0, rep.tau_star, least_favorable_prior(pt))).m_star
            lower = alpha_tilde_factor(rep.minimax_mse, delta, 0.02) * rep.m_star_sensitivity
            assert lower <= fmse <= rep.m_star_sensitivity


# ---- calibration -------------------------------------------------------------

@pytest.mark.parametrize("pt,want", [((0.25, 0.134), 0.961), ((0.50, 0.193), 0.689)])
def test_maximin_lambda_examples(pt, want):
    assert maximin_lambda(PhasePoint(*pt)) == pytest.approx(want, abs=0.006)


def test_maximin_lambda_scales_with_sigma():
    pt = PhasePoint(0.25, 0.134)
    assert maximin_lambda(pt, sigma=2.0) == pytest.approx(2 * maximin_lambda(pt), rel=1e-8)


@pytest.mark.parametrize("tau", [1.5, 2.0, 2.5])
def test_calibration_zero_signal_closed_form(tau):
    p = SEParams(0.5, 1.0, tau, DiscretePrior.zero())
    rep = equilibrium_report(p, find_hfp(p))
    want = tau * math.sqrt(rep.npi) * (1 - 2 * Phi_mp(-tau) / 0.5)
    assert calibrate_tau_to_lambda(tau, p) == pytest.approx(want, rel=1e-12)


def test_calibration_oversaturated():
    p = SEParams(0.25, 1.0, 1.0, DiscretePrior.three_point(0.03, 3))
    with pytest.raises(OversaturatedModel):
        calibrate_tau_to_lambda(0.5, p)


@given(st.floats(0.1, 0.9), st.floats(0.1, 0.9), st.floats(0.05, 3.0))
def test_calibration_round_trip(delta, frac, extra):
    eps = frac * delta * 0.3
    p = SEParams(delta, 1.0, 1.0, DiscretePrior.three_point(eps, 4.0))
    tau = minimal_tau(p) + extra
    lam = calibrate_tau_to_lambda(tau, p)
    assert calibrate_lambda_to_tau(lam, p) == pytest.approx(tau, abs=1e-6)


def test_zero_penalty_maps_to_minimal_tau():
    p = SEParams(0.5, 1.0, 1.0, DiscretePrior.three_point(0.05, 3))
    tau0 = minimal_tau(p)
    assert calibrate_lambda_to_tau(0.0, p) == tau0
    assert calibrate_tau_to_lambda(tau0 + 1e-9, p) == pytest.approx(0.0, abs=1e-6)


def test_maximin_lambda_maps_back_to_minimax_tau():
    pt = PhasePoint(0.25, 0.134)
    rep = noise_sensitivity(pt)
    p = SEParams(0.25, 1.0, rep.tau_star, least_favorable_prior(pt))
    assert calibrate_lambda_to_tau(maximin_lambda(pt), p) == pytest.approx(rep.tau_star, abs=1e-6)


def test_saddlepoint_in_formal_mse():
    pt = at_fraction(0.25, 0.5)
    rep = noise_sensitivity(pt)
    prior = least_favorable_prior(pt)
    lam_star = maximin_lambda(pt)
    grid = lam_star * np.array(SADDLE_LAMBDA_FACTORS)

    def fmse_at(lam, pr):
        base = SEParams(0.25, 1.0, 1.0, pr)
        tau = calibrate_lambda_to_tau(lam, base)
        return find_hfp(SEParams(0.25, 1.0, tau, pr)).m_star

    vals = [fmse_at(l, prior) for l in grid]
    assert int(np.argmin(vals)) == SADDLE_LAMBDA_FACTORS.index(1.0)
    # below mu*, weaker signals give no larger formal MSE at the minimax threshold
    mus = rep.mu_star * np.linspace(0.2, 1.0, 9)
    f = [find_hfp(SEParams(0.25, 1.0, rep.tau_star, DiscretePrior.three_point(pt.epsilon, m))).m_star
         for m in mus]
    assert np.all(np.diff(f) >= -1e-10)


# ---- above the boundary ------------------------------------------------------

def test_above_pt_first_row():
    c = above_pt_construction(PhasePoint(0.25, 0.401), 0.75, 1.5)
    assert c.mu == pytest.approx(2.874, abs=0.002)
    assert c.lambda_ == pytest.approx(0.984, abs=0.002)
    assert c.fmse == 0.25 * 0.75 / 0.25


@pytest.mark.parametrize("gamma", [0.75, 0.9, 0.95, 0.99, 0.995])
def test_above_pt_identities_rederived(gamma):
    pt = PhasePoint(0.25, 0.401)
    c = above_pt_construction(pt, gamma, 1.5)
    assert c.fmse == 0.25 * gamma / (1 - gamma)
    assert c.fnpi == 1 / (1 - gamma)
    p = SEParams(0.25, 1.0, 1.5, c.prior())
    fp = find_hfp(p)
    assert fp.m_star == pytest.approx(c.fmse, rel=1e-6)
    assert p.npi(fp.m_star) == pytest.approx(c.fnpi, rel=1e-6)
    assert calibrate_tau_to_lambda(1.5, p) == pytest.approx(c.lambda_, rel=1e-6)


def test_above_pt_example_fmse_values():
    pt = PhasePoint(0.25, 0.401)
    assert above_pt_construction(pt, 0.9, 1.5).fmse == pytest.approx(2.25)
    assert above_pt_construction(pt, 0.995, 1.5).fmse == pytest.approx(49.75)


def test_above_pt_inadmissible():
    pt = PhasePoint(0.25, 0.401)
    for gamma in (0.0, 1.0, 1.2):
        with pytest.raises(InadmissibleGamma):
            above_pt_construction(pt, gamma, 1.5)
    tau = 1.0
    low = zero_risk(tau) / 0.25 * 0.99
    with pytest.raises(InadmissibleGamma):
        above_pt_construction(pt, low, tau)
