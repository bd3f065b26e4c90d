"""Noise sensitivity of l1-penalised least squares via minimax soft-threshold risk and AMP."""

from ._kernels import BACKEND as KERNEL_BACKEND
from .errors import (AbovePT, BracketFailure, Diverged, InadmissibleGamma, MaxIterExceeded,
                     NoSignChange, NoSolution, OversaturatedModel, UndefinedObservable)
from .numerics import Interval, Tolerance, find_root, minimize_unimodal, normal_cdf, normal_pdf
from .scalar_risk import (DiscretePrior, MinimaxScalarResult, least_favorable_mu, minimax_scalar,
                          scalar_mse, scalar_mse_worst_case, soft_threshold, soft_threshold_pos)
from .state_evolution import (EquilibriumReport, ObservableKind, SEFixedPoint, SEParams,
                              equilibrium_report, find_hfp, formal_observable, mse_map)
from .minimax import (AbovePTConstruction, PhasePoint, PhasePointReport, above_pt_construction,
                      calibrate_lambda_to_tau, calibrate_tau_to_lambda, maximin_lambda,
                      noise_sensitivity, phase_boundary, phase_boundary_parametric)

__version__ = "0.1.0"
