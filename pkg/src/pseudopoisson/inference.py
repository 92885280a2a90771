"""Likelihood-ratio tests between nested models and attainable correlation bounds."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ._solve import golden_section
from .data import BivariateSample, ExpParams, FitResult, LomaxParams, ModelSpec, ParamVector
from .errors import UsageError
from .moments import exp_moments, lomax_moments
from .special import chi_square_critical, chi_square_sf

# stat values this far below zero are treated as optimizer noise
_NEG_STAT_TOL = 1e-6


@dataclass(frozen=True)
class LrtResult:
    """Outcome of a likelihood-ratio test of ``sub`` against ``full``.

    ``stat`` is -2 log(Lambda), clamped at zero. ``closed_form_stat`` is the
    same quantity from the explicit log(Lambda) expansion when a sample
    was supplied.
    """

    full: ModelSpec
    sub: ModelSpec
    stat: float
    df: int
    level: float
    critical: float
    p_value: float
    reject: bool
    closed_form_stat: float | None = None
    note: str | None = None

    def as_dict(self) -> dict:
        def enc(v):
            return ("inf" if v > 0 else "-inf") if isinstance(v, float) and math.isinf(v) else v

        return {
            "full": str(self.full),
            "sub": str(self.sub),
            "stat": enc(self.stat),
            "df": self.df,
            "level": self.level,
            "critical": self.critical,
            "p_value": self.p_value,
            "reject": self.reject,
            "closed_form_stat": enc(self.closed_form_stat),
            "note": self.note,
        }


def _survival(p: ParamVector, x: np.ndarray) -> np.ndarray:
    if isinstance(p, ExpParams):
        return np.exp(-p.gamma * x)
    return np.exp(-p.eta * np.log1p(x / p.gamma))


def log_lambda(sub: ParamVector, full: ParamVector, sample: BivariateSample) -> float:
    """log(L(sub) / L(full)) from the explicit expansion.

    Both parameter sets share alpha (its estimate is the same closed form
    under every model), so only the beta, delta and survival terms remain::

        -n (b* + d* - b^ - d^) + b* sum S*(x1) - b^ sum S^(x1)
            + sum x2 log(rate*(x1) / rate^(x1))
    """
    x1 = sample.x1.astype(np.float64)
    x2 = sample.x2.astype(np.float64)
    n = sample.n
    s_sub, s_full = _survival(sub, x1), _survival(full, x1)
    r_sub = sub.delta + sub.beta * (1.0 - s_sub)
    r_full = full.delta + full.beta * (1.0 - s_full)
    pos = x2 > 0
    if np.any(r_full[pos] <= 0):
        return math.inf
    if np.any(r_sub[pos] <= 0):
        return -math.inf
    out = (-n * (sub.beta + sub.delta - full.beta - full.delta)
           + sub.beta * s_sub.sum() - full.beta * s_full.sum()
           + float(np.dot(x2[pos], np.log(r_sub[pos] / r_full[pos]))))
    if sub.alpha != full.alpha:
        s1 = x1.sum()
        out += -n * (sub.alpha - full.alpha) + s1 * math.log(sub.alpha / full.alpha)
    return out


def lrt(full: FitResult, sub: FitResult, level: float = 0.05,
        sample: BivariateSample | None = None) -> LrtResult:
    """-2 log(Lambda) test of ``sub`` nested in ``full``.

    The statistic is twice the log-likelihood difference; with ``sample``
    the explicit log(Lambda) expansion is evaluated as an independent check.
    Tests that fix delta = 0 put the null on the parameter boundary, where
    the chi-square reference is only approximate; such results carry a note.

    Raises
    ------
    UsageError
        If the models are not nested, or the fits come from different samples.
    """
    if not sub.spec.is_nested_in(full.spec):
        raise UsageError(f"{sub.spec} is not nested in {full.spec}")
    if full.sample_digest and sub.sample_digest and full.sample_digest != sub.sample_digest:
        raise UsageError("fits were computed on different samples")
    if sample is not None and full.sample_digest and sample.digest != full.sample_digest:
        raise UsageError("sample does not match the fits")
    if full.loglik is None or sub.loglik is None:
        raise UsageError("both fits need a log-likelihood (use MLE fits)")
    df = full.spec.k - sub.spec.k
    notes = []
    if sub.loglik == -math.inf:
        stat = math.inf
    else:
        stat = 2.0 * (full.loglik - sub.loglik)
        if stat < -_NEG_STAT_TOL:
            notes.append(f"negative statistic {stat:.3g} clamped to 0 (sub-model fit exceeds full)")
        stat = max(stat, 0.0)
    cf = None
    if sample is not None and sub.applicable:
        ps, pf = sub.params, full.params
        if ps is not None and pf is not None:
            cf = max(-2.0 * log_lambda(ps, pf, sample), 0.0)
    if "delta" in sub.spec.fixed and "delta" not in full.spec.fixed:
        notes.append("boundary test: delta = 0 lies on the edge of the parameter space")
    crit = chi_square_critical(df, level)
    p = 0.0 if math.isinf(stat) else chi_square_sf(stat, df)
    return LrtResult(full.spec, sub.spec, stat, df, level, crit, p, stat > crit, cf,
                     "; ".join(notes) or None)


# ---------------------------------------------------------------------------
# correlation bounds


@dataclass(frozen=True)
class CorrelationBounds:
    """Open interval of correlations a model can attain."""

    lower: float
    upper: float
    open_endpoints: bool = True
    attained_at: str = ""

    def contains(self, rho: float) -> bool:
        if self.open_endpoints:
            return self.lower < rho < self.upper
        return self.lower <= rho <= self.upper

    def as_dict(self) -> dict:
        return {"lower": self.lower, "upper": self.upper, "open_endpoints": self.open_endpoints,
                "attained_at": self.attained_at}


def _exp_c1_neg(alpha: float) -> float:
    # gamma -> inf, delta -> 1 with beta = -1
    return -math.sqrt(alpha / (2.0 * math.exp(alpha) - 1.0))


def _exp_c4_neg(alpha: float) -> float:
    return exp_moments(ExpParams(alpha, -1.0, 1.0, 1.0)).rho


def _lomax_c4_neg(alpha: float) -> float:
    return lomax_moments(LomaxParams(alpha, -1.0, 1.0, 1.0, 1.0)).rho


LIMIT_CURVES: dict[str, Callable[[float], float]] = {
    "exp:c1-": _exp_c1_neg,
    "exp:c4-": _exp_c4_neg,
    "lomax:c4-": _lomax_c4_neg,
}


def rho_bound_argmin(curve: str, lo: float = 1e-6, hi: float = 50.0,
                     tol: float = 1e-8) -> tuple[float, float]:
    """Minimize one of the non-monotone limiting correlation curves over alpha.

    Parameters
    ----------
    curve : {"exp:c1-", "exp:c4-", "lomax:c4-"}
        ``exp:c1-`` is the gamma -> inf, delta -> 1 limit with beta = -1;
        the Case IV curves fix beta = -1, gamma = 1 at delta = 1.

    Returns
    -------
    alpha_star, rho_min : float
    """
    try:
        f = LIMIT_CURVES[curve]
    except KeyError:
        raise UsageError(f"unknown curve {curve!r}; expected one of {sorted(LIMIT_CURVES)}") from None
    # the curves rise steeply to 0 at large alpha; a coarse scan keeps the
    # golden section inside the basin
    grid = np.geomspace(lo, hi, 200)
    vals = [f(a) for a in grid]
    i = int(np.argmin(vals))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    return golden_section(f, a, b, tol=tol)


_SQRT2_2 = math.sqrt(2.0) / 2.0
_EXP_C4_POS = math.sqrt((math.e - 1.0) / (2.0 * math.e - 1.0))
_LOMAX_C4_POS = math.sqrt(3.0) / 3.0


def rho_bounds(spec: ModelSpec) -> CorrelationBounds:
    """Correlation range attainable under ``spec``.

    Closed-form endpoints come from limits as alpha -> 0; the three
    non-monotone negative cases are minimized numerically over alpha.
    Lomax Case I shares the exponential Case I bounds (the families
    coincide as the Lomax scale goes to 0).
    """
    c, s = spec.case, spec.sign
    if c in ("full", "eta1", "c2", "c3", "c5"):
        note = "alpha -> 0 with |beta| -> inf"
        if c in ("c3", "c5"):
            note += "; delta = 0 forces beta > 0, so only the positive half is reachable"
        return CorrelationBounds(-1.0, 1.0, True, note)
    if c == "c1":
        scale = "gamma -> inf" if spec.family == "exp" else "gamma -> 0"
        if s > 0:
            return CorrelationBounds(0.0, _SQRT2_2, True, f"{scale}, delta -> 0, alpha -> 0")
        a, r = rho_bound_argmin("exp:c1-")
        return CorrelationBounds(r, 0.0, True, f"{scale}, delta -> 1, alpha = {a:.6f}")
    # c4
    if spec.family == "exp":
        if s > 0:
            return CorrelationBounds(0.0, _EXP_C4_POS, True, "delta -> 0, alpha -> 0")
        a, r = rho_bound_argmin("exp:c4-")
    else:
        if s > 0:
            return CorrelationBounds(0.0, _LOMAX_C4_POS, True, "delta -> 0, alpha -> 0")
        a, r = rho_bound_argmin("lomax:c4-")
    return CorrelationBounds(r, 0.0, True, f"delta -> 1, alpha = {a:.6f}")
