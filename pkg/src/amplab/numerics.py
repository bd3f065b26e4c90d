"""Special functions, bracketing root finder and unimodal minimiser.

All routines are thin, contract-checking wrappers over scipy: the normal CDF
uses ``scipy.special.ndtr`` (erfc based, accurate deep into the lower tail),
the root finder is Brent's bracketing method and the minimiser is bounded
Brent (golden section with parabolic steps).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy import optimize, special

from .errors import MaxIterExceeded, NoSignChange

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ValueError(f"interval endpoints must be finite, got [{self.lo}, {self.hi}]")
        if not self.lo < self.hi:
            raise ValueError(f"interval needs lo < hi, got [{self.lo}, {self.hi}]")


@dataclass(frozen=True)
class Tolerance:
    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    max_iter: int = 200

    def __post_init__(self):
        if self.abs_tol < 0 or self.rel_tol < 0:
            raise ValueError("tolerances must be non-negative")
        if self.abs_tol + self.rel_tol <= 0:
            raise ValueError("abs_tol + rel_tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be a positive integer")


DEFAULT_TOL = Tolerance()


def normal_pdf(z):
    """Standard normal density; accepts scalars or arrays."""
    z = np.asarray(z, dtype=float)
    out = _INV_SQRT_2PI * np.exp(-0.5 * z * z)
    return float(out) if out.ndim == 0 else out


def normal_cdf(z):
    """Standard normal distribution function; accepts scalars or arrays."""
    out = special.ndtr(np.asarray(z, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def find_root(f: Callable[[float], float], bracket: Interval, tol: Tolerance = DEFAULT_TOL) -> float:
    """Root of ``f`` inside ``bracket``; requires ``f(lo) * f(hi) <= 0``."""
    flo, fhi = f(bracket.lo), f(bracket.hi)
    if flo == 0.0:
        return bracket.lo
    if fhi == 0.0:
        return bracket.hi
    if not (np.isfinite(flo) and np.isfinite(fhi)) or flo * fhi > 0:
        raise NoSignChange(
            f"f has no sign change on [{bracket.lo}, {bracket.hi}]: f(lo)={flo}, f(hi)={fhi}"
        )
    rtol = max(tol.rel_tol, 4.0 * np.finfo(float).eps)
    x, info = optimize.brentq(
        f, bracket.lo, bracket.hi,
        xtol=max(tol.abs_tol, 1e-300), rtol=rtol, maxiter=tol.max_iter,
        full_output=True, disp=False,
    )
    if not info.converged:
        raise MaxIterExceeded(f"find_root: no convergence in {tol.max_iter} iterations", last=x)
    return float(x)


class Minimum(NamedTuple):
    x: float
    fx: float
    degenerate: bool = False


def minimize_unimodal(f: Callable[[float], float], bracket: Interval,
                      tol: Tolerance = DEFAULT_TOL) -> Minimum:
    """Minimise a unimodal ``f`` over ``bracket``.

    A function that is flat at both ends and the midpoint is reported with
    ``degenerate=True`` and the midpoint as minimiser.
    """
    lo, hi = bracket.lo, bracket.hi
    mid = 0.5 * (lo + hi)
    flo, fmid, fhi = f(lo), f(mid), f(hi)
    if flo == fmid == fhi:
        return Minimum(mid, fmid, True)
    res = optimize.minimize_scalar(
        f, bounds=(lo, hi), method="bounded",
        options={"xatol": max(tol.abs_tol, 1e-15), "maxiter": tol.max_iter},
    )
    if not res.success:
        raise MaxIterExceeded(f"minimize_unimodal: {res.message}", last=float(res.x))
    x, fx = float(res.x), float(res.fun)
    # bounded Brent never evaluates the endpoints; a monotone f has its minimum there
    if flo < fx:
        x, fx = lo, flo
    if fhi < fx:
        x, fx = hi, fhi
    return Minimum(x, fx, False)


def mills_ratio(z):
    """Phi(-z) / phi(z), stable for large positive z."""
    out = math.sqrt(math.pi / 2) * special.erfcx(np.asarray(z, dtype=float) / math.sqrt(2))
    return float(out) if np.ndim(out) == 0 else out
