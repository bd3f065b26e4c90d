"""Monte Carlo experiments comparing empirical LASSO/AMP error with formal predictions.

Trials are keyed by ``(seed, trial_index)`` so any subset can be rerun alone
and results do not depend on execution order or worker count.
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .amp import SIGNAL_MODELS, amp_iterate, generate_instance
from .errors import AmplabError, ConfigError
from .lasso import lasso_path_mse, solve_lasso
from .minimax import (CONTOUR_QUANTITIES, PhasePoint, above_pt_construction, calibrate_lambda_to_tau,
                      calibrate_tau_to_lambda, contour_value, noise_sensitivity, phase_boundary)
from .reporting import write_csv
from .scalar_risk import DiscretePrior, scalar_mse
from .state_evolution import SEParams, empirical_observables, find_hfp

SOLVERS = ("lasso", "ampt", "both")
LAMBDA_POLICIES = ("maximin", "explicit", "tau-calibrated")
PRIOR_KINDS = ("three_point", "five_point_mixture", "explicit")
NEAR_PT_FRACTION = 0.95


@dataclass
class ExperimentConfig:
    delta: float
    rho: float | None = None
    rho_fraction: float | None = None
    sigma: float = 1.0
    alpha: float = 0.02
    N: int = 1000
    R: int = 50
    seed: int = 0
    solver: str = "lasso"
    lambda_policy: str = "maximin"
    lambdas: list | None = None
    tau: float | None = None
    prior_spec: dict = field(default_factory=lambda: {"kind": "three_point"})
    nonneg: bool = False
    signal: str = "fixed_support"

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ConfigError("delta must lie in (0, 1)")
        if (self.rho is None) == (self.rho_fraction is None):
            raise ConfigError("give exactly one of rho and rho_fraction")
        if self.rho is not None and not 0 < self.rho < 1:
            raise ConfigError("rho must lie in (0, 1)")
        if self.rho_fraction is not None and not 0 < self.rho_fraction < 2:
            raise ConfigError("rho_fraction must lie in (0, 2)")
        if self.sigma < 0:
            raise ConfigError("sigma must be non-negative")
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha must lie in (0, 1)")
        if int(self.R) != self.R or self.R < 1:
            raise ConfigError("R must be a positive integer")
        if int(self.N) != self.N or self.N < 50:
            raise ConfigError("N must be an integer of at least 50")
        if self.solver not in SOLVERS:
            raise ConfigError(f"solver must be one of {SOLVERS}")
        if self.lambda_policy not in LAMBDA_POLICIES:
            raise ConfigError(f"lambda_policy must be one of {LAMBDA_POLICIES}")
        if self.lambda_policy == "explicit":
            if not self.lambdas or len(self.lambdas) != 1 or self.lambdas[0] <= 0:
                raise ConfigError("explicit policy takes exactly one positive lambda; "
                                  "use saddle_scan for sweeps")
        if self.lambda_policy == "tau-calibrated" and self.tau is not None and self.tau <= 0:
            raise ConfigError("tau must be positive")
        if self.signal not in SIGNAL_MODELS:
            raise ConfigError(f"signal must be one of {SIGNAL_MODELS}")
        kind = (self.prior_spec or {}).get("kind")
        if kind not in PRIOR_KINDS:
            raise ConfigError(f"prior_spec.kind must be one of {PRIOR_KINDS}")
        self.N, self.R, self.seed = int(self.N), int(self.R), int(self.seed)

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            d = json.load(fh)
        if not isinstance(d, dict):
            raise ConfigError("config file must hold a JSON object")
        return cls.from_dict(d)

    def to_dict(self):
        return dataclasses.asdict(self)

    def resolved_rho(self):
        if self.rho is not None:
            return self.rho
        return self.rho_fraction * phase_boundary(self.delta, self.nonneg)

    def effective_seed(self):
        env = os.environ.get("AMPLAB_SEED")
        return int(env) if env not in (None, "") else self.seed


@dataclass(frozen=True)
class ResolvedExperiment:
    """Concrete prior, threshold and penalty for a configuration."""
    delta: float
    rho: float
    sigma: float
    prior: DiscretePrior
    tau: float
    lambda_: float
    fmse: float
    nonneg: bool = False
    signal: str = "fixed_support"


@dataclass
class TrialResult:
    seed: int
    trial: int
    empirical_mse: float
    support_size: int = 0
    solver_iterations: int = 0
    observables: dict = field(default_factory=dict)
    amp_mse: float = math.nan
    amp_lasso_gap: float = math.nan
    amp_converged: bool | None = None
    error: str | None = None

    @property
    def ok(self):
        return self.error is None


@dataclass
class AggregateReport:
    mean_emse: float
    standard_error: float
    fmse_prediction: float
    n_trials: int
    z_score: float
    N: int = 0
    lambda_: float = math.nan
    tau: float = math.nan
    n_failed: int = 0
    amp_mean_emse: float = math.nan
    hint: str | None = None
    trials: list = field(default_factory=list, repr=False)


def workers():
    """Worker count from AMPLAB_WORKERS, default 1."""
    env = os.environ.get("AMPLAB_WORKERS")
    if env in (None, ""):
        return 1
    n = int(env)
    if n < 1:
        raise ConfigError("AMPLAB_WORKERS must be a positive integer")
    return n


def _map(fn, items):
    items = list(items)
    k = min(workers(), len(items))
    if k <= 1:
        return [fn(*it) for it in items]
    with ProcessPoolExecutor(max_workers=k) as ex:
        return list(ex.map(fn, *zip(*items)))


def three_point_prior(point: PhasePoint, alpha, sigma=1.0, mu=None):
    """Sparse prior at amplitude ``mu`` (default the near-least-favorable one)."""
    if mu is None:
        rep = noise_sensitivity(point, alpha)
        if not rep.below_pt:
            raise ConfigError("near-least-favorable amplitude is infinite above the phase boundary")
        mu = rep.mu_star * sigma
    return DiscretePrior.sparse(point.epsilon, mu, point.sign_constrained)


def build_prior(config: ExperimentConfig, rho=None) -> DiscretePrior:
    rho = config.resolved_rho() if rho is None else rho
    point = PhasePoint(config.delta, rho, config.nonneg)
    spec = dict(config.prior_spec)
    kind = spec.pop("kind")
    if kind == "three_point":
        allowed = {"alpha", "mu"}
        if set(spec) - allowed:
            raise ConfigError(f"unknown three_point keys: {sorted(set(spec) - allowed)}")
        return three_point_prior(point, spec.get("alpha", config.alpha), config.sigma, spec.get("mu"))
    if kind == "five_point_mixture":
        allowed = {"gamma", "alpha1", "alpha2"}
        if set(spec) != allowed:
            raise ConfigError("five_point_mixture needs exactly gamma, alpha1, alpha2")
        p0 = three_point_prior(point, spec["alpha1"], config.sigma)
        p1 = three_point_prior(point, spec["alpha2"], config.sigma)
        return DiscretePrior.mixture(p0, p1, spec["gamma"])
    if set(spec) - {"atoms", "weights"}:
        raise ConfigError("explicit prior takes atoms and weights only")
    return DiscretePrior.from_pairs(spec["atoms"], spec["weights"], config.nonneg)


def resolve(config: ExperimentConfig) -> ResolvedExperiment:
    """Pin down prior, threshold, penalty and the formal MSE prediction."""
    rho = config.resolved_rho()
    prior = build_prior(config, rho)
    base = SEParams(config.delta, config.sigma, 1.0, prior)
    if config.lambda_policy == "explicit":
        lam = float(config.lambdas[0])
        tau = calibrate_lambda_to_tau(lam, base)
    else:
        if config.lambda_policy == "tau-calibrated" and config.tau is not None:
            tau = float(config.tau)
        else:
            tau = noise_sensitivity(PhasePoint(config.delta, rho, config.nonneg)).tau_star
        lam = calibrate_tau_to_lambda(tau, base)
    fmse = find_hfp(SEParams(config.delta, config.sigma, tau, prior)).m_star
    return ResolvedExperiment(config.delta, rho, config.sigma, prior, tau, lam, fmse, config.nonneg,
                              config.signal)


def run_trial(res: ResolvedExperiment, N, seed, trial, solver="lasso") -> TrialResult:
    """One replication; solver failures are recorded rather than raised."""
    try:
        inst = generate_instance(res.delta, res.rho, res.sigma, res.prior, N, seed, trial, res.signal)
        eps = res.prior.epsilon
        out = TrialResult(seed, trial, math.nan)
        x_lasso = x_amp = None
        if solver in ("ampt", "both"):
            st, converged = amp_iterate(inst, res.tau, nonneg=res.nonneg)
            x_amp = st.x
            out.amp_mse = float(np.mean((st.x - inst.x0) ** 2))
            out.solver_iterations = st.iteration
            out.amp_converged = converged
            if not converged and solver == "ampt":
                out.error = "AMP did not converge"
        if solver in ("lasso", "both"):
            sol = solve_lasso(inst, res.lambda_, res.nonneg)
            x_lasso = sol.x
            out.solver_iterations = sol.iterations
        x = x_lasso if x_lasso is not None else x_amp
        out.empirical_mse = float(np.mean((x - inst.x0) ** 2))
        out.support_size = int(np.count_nonzero(x))
        out.observables = {k.value: v for k, v in empirical_observables(inst.x0, x, eps).items()}
        if x_lasso is not None and x_amp is not None:
            out.amp_lasso_gap = float(np.linalg.norm(x_amp - x_lasso) / max(np.linalg.norm(x_lasso), 1e-300))
        return out
    except AmplabError as exc:
        return TrialResult(seed, trial, math.nan, error=f"{type(exc).__name__}: {exc}")


def aggregate(trials, fmse, N=0, lam=math.nan, tau=math.nan, near_pt=False) -> AggregateReport:
    """Mean and standard error over successful trials, ordered by trial index."""
    trials = sorted(trials, key=lambda t: t.trial)
    good = [t for t in trials if t.ok and math.isfinite(t.empirical_mse)]
    vals = np.array([t.empirical_mse for t in good])
    amp = np.array([t.amp_mse for t in good if math.isfinite(t.amp_mse)])
    k = vals.size
    mean = float(vals.mean()) if k else math.nan
    se = float(vals.std(ddof=1) / math.sqrt(k)) if k > 1 else math.nan
    if math.isfinite(se) and se > 0:
        z = (mean - fmse) / se
    else:
        z = math.nan
    hint = None
    if near_pt and math.isfinite(z) and abs(z) > 3:
        hint = "near the phase boundary: finite-N bias expected; increase N and R"
    return AggregateReport(mean, se, fmse, k, z, N, lam, tau, len(trials) - k,
                           float(amp.mean()) if amp.size else math.nan, hint, trials)


def _near_pt(config, rho):
    if config.rho_fraction is not None:
        return config.rho_fraction >= NEAR_PT_FRACTION
    return rho >= NEAR_PT_FRACTION * phase_boundary(config.delta, config.nonneg)


def run_experiment(config: ExperimentConfig) -> AggregateReport:
    """R replications at one phase point, summarised against the formal MSE."""
    res = resolve(config)
    seed = config.effective_seed()
    trials = _map(run_trial, [(res, config.N, seed, i, config.solver) for i in range(config.R)])
    return aggregate(trials, res.fmse, config.N, res.lambda_, res.tau, _near_pt(config, res.rho))


def finite_n_sweep(config: ExperimentConfig, Ns):
    """One report per problem size, all sharing the same formal prediction."""
    Ns = [int(n) for n in Ns]
    if any(b <= a for a, b in zip(Ns, Ns[1:])):
        raise ConfigError("Ns must be strictly increasing")
    return [run_experiment(dataclasses.replace(config, N=n)) for n in Ns]


def finite_n_fit(reports):
    """Compare eMSE ~ a + b/N against eMSE ~ a + b/sqrt(N) by residual sum of squares."""
    N = np.array([r.N for r in reports], dtype=float)
    y = np.array([r.mean_emse for r in reports])
    out = {"points": [(1 / n, v) for n, v in zip(N, y)], "fmse": reports[0].fmse_prediction}
    if N.size < 3:
        return out
    for name, x in (("inv_n", 1 / N), ("inv_sqrt_n", 1 / np.sqrt(N))):
        X = np.column_stack([np.ones_like(x), x])
        coef, *_ = np.linalg.lstsq(X, y, rcond=None)
        out[name] = {"intercept": float(coef[0]), "slope": float(coef[1]),
                     "rss": float(np.sum((X @ coef - y) ** 2))}
    return out


def contour_grid(quantity, n_delta=64, n_rho=64, alpha=0.02, nonneg=False):
    """Rows (delta, rho, value) on a uniform interior lattice; inf above the boundary."""
    if quantity not in CONTOUR_QUANTITIES:
        raise ValueError(f"quantity must be one of {CONTOUR_QUANTITIES}")
    deltas = np.linspace(0, 1, n_delta + 2)[1:-1]
    rhos = np.linspace(0, 1, n_rho + 2)[1:-1]
    rows = []
    for d in deltas:
        for r in rhos:
            rep = noise_sensitivity(PhasePoint(float(d), float(r), nonneg), alpha)
            rows.append((float(d), float(r), contour_value(rep, quantity)))
    return rows


def emit_contour_grid(quantity, out, n_delta=64, n_rho=64, alpha=0.02, nonneg=False, above="inf"):
    """Write the contour lattice as CSV; above-boundary cells as ``inf`` or empty."""
    if above not in ("inf", "empty"):
        raise ValueError("above must be 'inf' or 'empty'")
    rows = contour_grid(quantity, n_delta, n_rho, alpha, nonneg)
    if above == "empty":
        rows = [(d, r, None if math.isinf(v) else v) for d, r, v in rows]
    write_csv(rows, ["delta", "rho", "value"], out)
    return rows


SADDLE_LAMBDA_FACTORS = (0.54, 1.0, 1.48, 2.25, 3.7)
SADDLE_MU_OFFSETS = (-1.0, -0.5, -0.25, -0.1, 0.0, 0.1, 0.25, 0.5, 1.0)


def _fmse(delta, sigma, tau, prior):
    return find_hfp(SEParams(delta, sigma, tau, prior)).m_star


def _summarise(values):
    v = np.asarray(values, dtype=float)
    v = v[np.isfinite(v)]
    se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else math.nan
    return float(v.mean()) if v.size else math.nan, se


def _lambda_path_trial(delta, rho, sigma, prior, N, seed, trial, lams, nonneg, signal):
    inst = generate_instance(delta, rho, sigma, prior, N, seed, trial, signal)
    return [m for _, m in lasso_path_mse(inst, lams, nonneg)]


def _mu_scan_trial(delta, rho, sigma, base_prior, base_mu, N, seed, trial, mus, lams, nonneg, signal):
    inst = generate_instance(delta, rho, sigma, base_prior, N, seed, trial, signal)
    out = []
    for mu, lam in zip(mus, lams):
        sub = inst.with_signal(inst.x0 * (mu / base_mu))
        sol = solve_lasso(sub, lam, nonneg)
        out.append(float(np.mean((sol.x - sub.x0) ** 2)))
    return out


def _mixture_trial(delta, rho, sigma, prior, N, seed, trial, lam, nonneg, signal):
    inst = generate_instance(delta, rho, sigma, prior, N, seed, trial, signal)
    sol = solve_lasso(inst, lam, nonneg)
    return float(np.mean((sol.x - inst.x0) ** 2))


def saddle_scan(point: PhasePoint, mode, config: ExperimentConfig, grid=None):
    """Formal and empirical MSE as one control moves away from the saddlepoint.

    vary_lambda: fixed near-least-favorable prior, penalty on ``grid``
        (default multiples of the maximin penalty); one warm-started path per trial.
    vary_mu: threshold fixed at the minimax value, amplitude on ``grid``
        (default offsets around the near-least-favorable amplitude), penalty
        recalibrated per amplitude; each trial reuses one matrix and noise draw.
    mixture: (1-g) nu(0.02) + g nu(0.50) for g on ``grid``, with the
        quasi-affinity bound and the three-point comparison.
    """
    sigma, alpha, N, R, nonneg = config.sigma, config.alpha, config.N, config.R, point.sign_constrained
    seed = config.effective_seed()
    delta, rho = point.delta, point.rho
    rep = noise_sensitivity(point, alpha)
    if not rep.below_pt:
        raise ConfigError("saddle scans need a point below the phase boundary")
    tau = rep.tau_star
    rows = []
    if mode == "vary_lambda":
        prior = three_point_prior(point, alpha, sigma)
        base = SEParams(delta, sigma, tau, prior)
        lam_star = calibrate_tau_to_lambda(tau, base)
        lams = list(grid) if grid is not None else [lam_star * f for f in SADDLE_LAMBDA_FACTORS]
        fm = [_fmse(delta, sigma, calibrate_lambda_to_tau(l, base), prior) for l in lams]
        per = _map(_lambda_path_trial, [(delta, rho, sigma, prior, N, seed, i, lams, nonneg, config.signal)
                                        for i in range(R)])
        per = np.array(per)
        for j, lam in enumerate(lams):
            m, se = _summarise(per[:, j])
            rows.append({"lambda": lam, "mu": rep.mu_star * sigma, "fmse": fm[j], "emse": m, "se": se})
        return rows
    if mode == "vary_mu":
        mu_star = rep.mu_star * sigma
        mus = list(grid) if grid is not None else [mu_star + o * sigma for o in SADDLE_MU_OFFSETS]
        mus = [m for m in mus if m > 0]
        priors = [DiscretePrior.sparse(point.epsilon, m, nonneg) for m in mus]
        lams = [calibrate_tau_to_lambda(tau, SEParams(delta, sigma, tau, p)) for p in priors]
        fm = [_fmse(delta, sigma, tau, p) for p in priors]
        base_prior = DiscretePrior.sparse(point.epsilon, mu_star, nonneg)
        per = np.array(_map(_mu_scan_trial, [(delta, rho, sigma, base_prior, mu_star, N, seed, i,
                                              mus, lams, nonneg, config.signal) for i in range(R)]))
        for j, mu in enumerate(mus):
            m, se = _summarise(per[:, j])
            rows.append({"mu": mu, "lambda": lams[j], "fmse": fm[j], "emse": m, "se": se})
        return rows
    if mode == "mixture":
        gammas = list(grid) if grid is not None else list(np.linspace(0, 1, 11))
        p0 = three_point_prior(point, 0.02, sigma)
        p1 = three_point_prior(point, 0.50, sigma)
        for g in gammas:
            prior = DiscretePrior.mixture(p0, p1, g)
            params = SEParams(delta, sigma, tau, prior)
            b = mixture_bound(p0, p1, g, delta, sigma, tau)
            mu_mix = (1 - g) * p0.atoms[-1] + g * p1.atoms[-1]
            f3 = _fmse(delta, sigma, tau, DiscretePrior.sparse(point.epsilon, mu_mix, nonneg))
            lam = calibrate_tau_to_lambda(tau, params)
            e = _map(_mixture_trial, [(delta, rho, sigma, prior, N, seed, i, lam, nonneg, config.signal)
                                      for i in range(R)]) if R > 0 else []
            m, se = _summarise(e) if e else (math.nan, math.nan)
            rows.append({"gamma": g, "lambda": lam, "fmse": _fmse(delta, sigma, tau, prior),
                         "bound": b, "fmse_three_point": f3, "emse": m, "se": se})
        return rows
    raise ValueError("mode must be vary_lambda, vary_mu or mixture")


def mixture_bound(p0: DiscretePrior, p1: DiscretePrior, gamma, delta, sigma, tau):
    """Quasi-affinity bound on the formal MSE of (1-gamma) p0 + gamma p1.

    Both components are evaluated at the equilibrium noise level of ``p0``;
    valid when ``p0`` is the component with the larger formal MSE.
    """
    npi0 = SEParams(delta, sigma, tau, p0).npi(_fmse(delta, sigma, tau, p0))
    return (1 - gamma) * scalar_mse(p0, npi0, tau) + gamma * scalar_mse(p1, npi0, tau)


def _above_trial(delta, rho, sigma, prior, N, seed, trial, lam, nonneg, signal):
    return _mixture_trial(delta, rho, sigma, prior, N, seed, trial, lam, nonneg, signal)


def above_pt_experiment(point: PhasePoint, gammas, taus, config: ExperimentConfig):
    """LASSO at the above-boundary constructions; one row per (gamma, tau) pair."""
    sigma, N, R = config.sigma, config.N, config.R
    seed = config.effective_seed()
    rows = []
    for tau in taus:
        for g in gammas:
            c = above_pt_construction(point, g, tau)
            prior = c.prior(sigma)
            lam = c.lambda_ * sigma
            e = _map(_above_trial, [(point.delta, point.rho, sigma, prior, N, seed, i, lam,
                                     point.sign_constrained, config.signal) for i in range(R)])
            m, se = _summarise(e)
            fmse = c.fmse * sigma ** 2
            rows.append({"gamma": g, "tau": tau, "mu": c.mu * sigma, "lambda": lam, "fmse": fmse,
                         "emse": m, "se": se, "z": (m - fmse) / se if se and se > 0 else math.nan})
    return rows


REPORT_COLUMNS = ["N", "R", "lambda", "tau", "fmse", "mean_emse", "se", "z", "n_failed", "amp_mean_emse"]


def report_row(rep: AggregateReport, R):
    return {"N": rep.N, "R": R, "lambda": rep.lambda_, "tau": rep.tau, "fmse": rep.fmse_prediction,
            "mean_emse": rep.mean_emse, "se": rep.standard_error, "z": rep.z_score,
            "n_failed": rep.n_failed, "amp_mean_emse": rep.amp_mean_emse}


TRIAL_COLUMNS = ["seed", "trial", "empirical_mse", "amp_mse", "amp_converged", "support_size",
                 "solver_iterations", "FAR", "DR", "MDR", "FDeR", "FDR", "error"]


def trial_rows(rep: AggregateReport):
    for t in rep.trials:
        row = {"seed": t.seed, "trial": t.trial, "empirical_mse": t.empirical_mse, "amp_mse": t.amp_mse,
               "amp_converged": t.amp_converged, "support_size": t.support_size,
               "solver_iterations": t.solver_iterations,
               "error": t.error}
        row.update({k: t.observables.get(k) for k in ("FAR", "DR", "MDR", "FDeR", "FDR")})
        yield row


def default_output(name):
    return Path.cwd() / f"{name}.csv"
