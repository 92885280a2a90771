"""Population moments, conditional rates and the joint mass function."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.special import gammaln, xlogy

from . import kernels
from .data import ExpParams, LomaxParams, ParamVector
from .errors import OracleInfeasibleError, SeriesError
from .special import DEFAULT_SERIES, SeriesOptions

# brute-force grids larger than this are refused
_MAX_GRID_CELLS = 20_000_000


@dataclass(frozen=True)
class MomentSet:
    """Means, variances, covariance and correlation of (X1, X2)."""

    e1: float
    e2: float
    v1: float
    v2: float
    cov: float
    rho: float

    def as_dict(self) -> dict[str, float]:
        return {k: getattr(self, k) for k in ("e1", "e2", "v1", "v2", "cov", "rho")}


def exp_rate(x1, p: ExpParams):
    """delta + beta * (1 - exp(-gamma * x1)); exactly delta at x1 = 0."""
    return p.rate(x1)


def lomax_rate(x1, p: LomaxParams):
    """delta + beta * (1 - (gamma / (x1 + gamma))**eta)."""
    return p.rate(x1)


def conditional_rate(x1, p: ParamVector):
    return p.rate(x1)


def exp_moments(p: ExpParams) -> MomentSet:
    """Closed-form moments of the exponential-rate model.

    With ``t = nu - 1`` every power of ``mu`` is written as ``exp(alpha * ...)``
    so nothing overflows for large ``alpha``.
    """
    a, b, d = p.alpha, p.beta, p.delta
    t = math.expm1(-p.gamma)  # nu - 1, in (-1, 0)
    at = a * t
    e2 = d - b * math.expm1(at)
    # beta^2 * (mu^(nu^2 - 1) - mu^(2 nu - 2)) = beta^2 e^(2 a t) (e^(a t^2) - 1)
    v2 = e2 + b * b * math.exp(2.0 * at) * math.expm1(a * t * t)
    cov = -a * b * t * math.exp(at)
    return MomentSet(a, e2, a, v2, cov, cov / math.sqrt(a * v2))


def lomax_survival_stats(g: float, eta: float, a: float,
                         opts: SeriesOptions = DEFAULT_SERIES) -> tuple[float, float, float]:
    """Poisson(a) expectations of r(x) = (g / (g + x))**eta.

    Returns
    -------
    mean : float
        E r(X).
    drop : float
        E[r(X) - r(X + 1)], so that E[X r(X)] = a * (mean - drop).
    var : float
        Var r(X).
    """
    mean, drop, var, used = kernels.lomax_weight_stats(float(g), float(eta), float(a),
                                                       opts.rel_tol, opts.max_terms)
    if used < 0:
        raise SeriesError(f"Lomax moment series did not converge (g={g}, eta={eta}, a={a})")
    return mean, drop, var


def lomax_moments(p: LomaxParams, opts: SeriesOptions = DEFAULT_SERIES) -> MomentSet:
    """Moments of the Lomax-rate model, any real ``eta > 0``.

    The covariance and the variance excess are summed as series of
    non-negative terms rather than as differences of ratio-power series,
    which would cancel badly when ``gamma`` is large.
    """
    a, b, d = p.alpha, p.beta, p.delta
    m0, drop, var_r = lomax_survival_stats(p.gamma, p.eta, a, opts)
    e2 = d + b * (1.0 - m0)
    v2 = e2 + b * b * var_r
    cov = a * b * drop
    return MomentSet(a, e2, a, v2, cov, cov / math.sqrt(a * v2))


def model_moments(p: ParamVector, opts: SeriesOptions = DEFAULT_SERIES) -> MomentSet:
    if isinstance(p, ExpParams):
        return exp_moments(p)
    return lomax_moments(p, opts)


def model_rho(p: ParamVector) -> float:
    return model_moments(p).rho


# ---------------------------------------------------------------------------
# joint mass function


def log_pmf(x1, x2, p: ParamVector):
    """log P(X1 = x1, X2 = x2); -inf where the conditional rate is 0 and x2 > 0."""
    x1 = np.asarray(x1, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    lam = np.asarray(p.rate(x1), dtype=np.float64)
    out = (-p.alpha + xlogy(x1, p.alpha) - gammaln(x1 + 1.0)
           - lam + xlogy(x2, lam) - gammaln(x2 + 1.0))
    return float(out) if out.ndim == 0 else out


def pmf(x1, x2, p: ParamVector):
    return np.exp(log_pmf(x1, x2, p))


def pmf_grid(p: ParamVector, x1_max: int, x2_max: int) -> np.ndarray:
    """Matrix of P(X1 = i, X2 = j) for 0 <= i <= x1_max, 0 <= j <= x2_max."""
    i = np.arange(x1_max + 1, dtype=np.float64)[:, None]
    j = np.arange(x2_max + 1, dtype=np.float64)[None, :]
    return np.exp(log_pmf(i, j, p))


def _poisson_upper(rate: float, tol: float) -> int:
    """Smallest m with P(Poisson(rate) > m) < tol."""
    if rate <= 0:
        return 0
    m = int(stats.poisson.isf(tol, rate))
    while stats.poisson.sf(m, rate) >= tol:
        m += 1
    return m


def brute_force_moments(p: ParamVector, tail_mass_tol: float = 1e-14) -> MomentSet:
    """Moments by direct summation of the joint pmf over a truncated grid.

    Independent of the closed forms and meant only as a test oracle. The
    grid covers all but ``tail_mass_tol / 2`` of each Poisson tail, using
    ``delta + |beta|`` as the worst-case conditional rate.

    Raises
    ------
    OracleInfeasibleError
        If the grid would exceed the size cap.
    """
    if not 0.0 < tail_mass_tol <= 1e-6:
        raise ValueError("tail_mass_tol must lie in (0, 1e-6]")
    m1 = _poisson_upper(p.alpha, tail_mass_tol / 2.0)
    m2 = _poisson_upper(p.delta + abs(p.beta), tail_mass_tol / 2.0)
    if (m1 + 1) * (m2 + 1) > _MAX_GRID_CELLS:
        raise OracleInfeasibleError(f"grid {m1 + 1} x {m2 + 1} too large for tolerance {tail_mass_tol}")
    P = pmf_grid(p, m1, m2)
    total = P.sum()
    x1 = np.arange(m1 + 1, dtype=np.float64)
    x2 = np.arange(m2 + 1, dtype=np.float64)
    p1 = P.sum(axis=1) / total
    p2 = P.sum(axis=0) / total
    e1 = float(np.dot(p1, x1))
    e2 = float(np.dot(p2, x2))
    d1 = x1 - e1
    d2 = x2 - e2
    v1 = float(np.dot(p1, d1 * d1))
    v2 = float(np.dot(p2, d2 * d2))
    cov = float(d1 @ P @ d2 / total)
    return MomentSet(e1, e2, v1, v2, cov, cov / math.sqrt(v1 * v2))
