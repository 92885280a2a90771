"""Log-likelihoods, AIC and numerical maximum-likelihood fitting."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import minimize

from . import kernels
from .data import (
    BivariateSample,
    ExpParams,
    FitResult,
    LomaxParams,
    ModelSpec,
    ParamVector,
    aic,
    make_params,
    sample_moments,
)
from .errors import AdmissibilityError, NonConvergenceError, UsageError
from .mme import mme_fit
from .moments import model_moments

__all__ = [
    "MleOptions",
    "exp_loglik",
    "lomax_loglik",
    "loglik",
    "aic",
    "mle_fit",
    "fit_family",
    "standard_errors",
    "INAPPLICABLE_NOTE",
]

INAPPLICABLE_NOTE = "inapplicable (zero-likelihood observation)"

# clip ranges for log-transformed parameters; beyond them the likelihood is flat
_LOG_GAMMA = (-40.0, 40.0)
_LOG_ETA = (-25.0, 25.0)
_LOG_SLACK = (-60.0, 30.0)
_BOUNDARY_LOG = 25.0


@dataclass(frozen=True)
class MleOptions:
    """Controls for :func:`mle_fit`.

    Parameters
    ----------
    max_iters : int
        Simplex iterations per start.
    f_tol : float
        Absolute tolerance on the objective.
    restarts : int
        Number of starting points (MME seed first when available).
    starts : sequence of dict, optional
        Extra starting points, given as parameter dicts; tried before the
        automatic ones.
    seed : int
        Seed for the perturbed starts.
    """

    max_iters: int = 2000
    f_tol: float = 1e-10
    restarts: int = 5
    starts: tuple[Mapping[str, float], ...] = ()
    seed: int = 0
    compute_se: bool = False

    def __post_init__(self):
        if self.max_iters < 1 or not self.f_tol > 0 or self.restarts < 1:
            raise ValueError("max_iters, f_tol and restarts must be positive")


# ---------------------------------------------------------------------------
# log-likelihood


def _loglik_parts(p: ParamVector, sample: BivariateSample, core: float) -> float:
    if core == -math.inf:
        return -math.inf
    n = sample.n
    s1 = float(sample.x1.sum())
    return (-n * (p.alpha + p.beta + p.delta) + s1 * math.log(p.alpha) + core
            - sample.log_factorial_sum)


def exp_loglik(p: ExpParams, sample: BivariateSample) -> float:
    """Log-likelihood of the exponential-rate model, including the factorial terms.

    Returns ``-inf`` when some pair has x2 > 0 where the conditional rate is 0.
    """
    v, c, s = sample.grouped
    core = kernels.exp_loglik_core(v, c, s, p.beta, p.gamma, p.delta)
    return _loglik_parts(p, sample, core)


def lomax_loglik(p: LomaxParams, sample: BivariateSample) -> float:
    """Log-likelihood of the Lomax-rate model; see :func:`exp_loglik`."""
    v, c, s = sample.grouped
    core = kernels.lomax_loglik_core(v, c, s, p.beta, p.gamma, p.eta, p.delta)
    return _loglik_parts(p, sample, core)


def loglik(p: ParamVector, sample: BivariateSample) -> float:
    if isinstance(p, ExpParams):
        return exp_loglik(p, sample)
    return lomax_loglik(p, sample)


# ---------------------------------------------------------------------------
# reparameterization


class _Transform:
    """Map between unconstrained vectors and admissible parameter dicts.

    beta is kept as is (log beta when delta = 0 forces beta > 0); gamma and
    eta are log-transformed; delta = max(-beta, 0) + exp(slack).
    """

    def __init__(self, spec: ModelSpec, alpha: float):
        self.spec = spec
        self.alpha = alpha
        self.fixed = spec.fixed
        self.free = tuple(k for k in spec.free if k != "alpha")
        self.beta_positive = self.fixed.get("delta") == 0.0

    def natural(self, theta: Sequence[float]) -> dict[str, float]:
        d = {"alpha": self.alpha, **self.fixed}
        t = dict(zip(self.free, theta))
        if "beta" in t:
            d["beta"] = math.exp(min(t["beta"], 700.0)) if self.beta_positive else float(t["beta"])
        if "gamma" in t:
            d["gamma"] = math.exp(min(max(t["gamma"], _LOG_GAMMA[0]), _LOG_GAMMA[1]))
        if "eta" in t:
            d["eta"] = math.exp(min(max(t["eta"], _LOG_ETA[0]), _LOG_ETA[1]))
        if "delta" in t:
            floor = max(-d["beta"], 0.0)
            d["delta"] = floor + math.exp(min(max(t["delta"], _LOG_SLACK[0]), _LOG_SLACK[1]))
        return d

    def unconstrained(self, d: Mapping[str, float]) -> np.ndarray:
        beta = float(d.get("beta", self.fixed.get("beta", 1.0)))
        out = []
        for k in self.free:
            v = float(d[k])
            if k == "beta":
                out.append(math.log(max(abs(v), 1e-12)) if self.beta_positive else v)
            elif k in ("gamma", "eta"):
                lo, hi = _LOG_GAMMA if k == "gamma" else _LOG_ETA
                out.append(min(max(math.log(max(v, 1e-300)), lo), hi))
            else:  # delta
                slack = v - max(-beta, 0.0)
                out.append(max(math.log(max(slack, 1e-26)), _LOG_SLACK[0]))
        return np.array(out, dtype=np.float64)

    def at_boundary(self, theta: Sequence[float]) -> list[str]:
        flags = []
        for k, v in zip(self.free, theta):
            if k in ("gamma", "eta") and abs(v) >= _BOUNDARY_LOG:
                flags.append(f"{k}->{'inf' if v > 0 else '0'}")
            elif k == "delta" and v <= -_BOUNDARY_LOG:
                flags.append("delta->floor")
        return flags


def _repair(spec: ModelSpec, d: Mapping[str, float], alpha: float) -> dict[str, float] | None:
    """Turn a rough starting guess into an admissible dict, or None."""
    out = {"alpha": alpha, **{k: float(v) for k, v in d.items() if k != "alpha"}, **spec.fixed}
    for k in spec.names:
        if k not in out or not math.isfinite(out[k]):
            return None
    if out["beta"] == 0.0:
        out["beta"] = 1e-3
    if spec.fixed.get("delta") == 0.0:
        out["beta"] = abs(out["beta"])
    out["gamma"] = min(max(out["gamma"], 1e-8), 1e8)
    if "eta" in out:
        out["eta"] = min(max(out["eta"], 1e-3), 1e3)
    if "delta" not in spec.fixed:
        floor = max(-out["beta"], 0.0)
        out["delta"] = max(out["delta"], floor + 1e-3 * (1.0 + abs(out["beta"])))
    return out


def _heuristic_starts(spec: ModelSpec, sample: BivariateSample) -> list[dict[str, float]]:
    m = sample_moments(sample)
    sgn = 1.0 if m.S12 >= 0 else -1.0
    starts = []
    rep = mme_fit(spec, m)
    if rep.complete:
        starts.append(dict(rep.estimates))
    if spec.case != "c2":
        c2 = mme_fit(ModelSpec(spec.family, "c2"), m)
        if c2.complete:
            starts.append({**c2.estimates, "gamma": 1.0, "eta": 1.0})
    base = {"beta": sgn * max(abs(m.M2) / 2.0, 0.1), "gamma": 1.0, "eta": 1.0,
            "delta": max(m.M2 / 2.0, 0.1)}
    if sgn < 0:
        base["delta"] = m.M2 + abs(base["beta"])
    starts.append(base)
    starts.append({**base, "beta": -base["beta"], "delta": m.M2 + abs(base["beta"])})
    return starts


# ---------------------------------------------------------------------------
# fitting


def _inapplicable(spec: ModelSpec, sample: BivariateSample) -> FitResult:
    return FitResult(
        spec=spec, method="mle", estimates={"alpha": float(sample.x1.mean()), **spec.fixed},
        loglik=-math.inf, aic=math.inf, rho=None, n=sample.n, sample_digest=sample.digest,
        applicable=False, note=INAPPLICABLE_NOTE,
        diagnostics={"converged": False, "reason": "delta = 0 and some pair is (0, x2 > 0)"},
    )


def mle_fit(spec: ModelSpec, sample: BivariateSample, opts: MleOptions | None = None) -> FitResult:
    """Maximum-likelihood fit of one model.

    alpha is the sample mean of x1 (closed form); the remaining free
    parameters are found by Nelder-Mead on an unconstrained
    reparameterization, keeping the best of several starts.

    Models fixing delta = 0 cannot explain a pair (0, x2 > 0); for such
    samples an inapplicable result with ``loglik = -inf`` is returned.

    Raises
    ------
    NonConvergenceError
        If no start converged; ``err.best`` holds the best fit found.
    """
    opts = opts or MleOptions()
    if spec.requires_positive_rate_at_zero and sample.has_zero_x1_positive_x2:
        return _inapplicable(spec, sample)
    alpha = float(sample.x1.mean())
    if alpha <= 0:
        raise UsageError("x1 is identically zero; alpha must be positive")
    tr = _Transform(spec, alpha)
    v, c, s = sample.grouped
    n = sample.n
    const = float(sample.x1.sum()) * math.log(alpha) - n * alpha - sample.log_factorial_sum
    core = kernels.exp_loglik_core if spec.family == "exp" else kernels.lomax_loglik_core

    def negll(theta):
        d = tr.natural(theta)
        if spec.family == "exp":
            val = core(v, c, s, d["beta"], d["gamma"], d["delta"])
        else:
            val = core(v, c, s, d["beta"], d["gamma"], d["eta"], d["delta"])
        if val == -math.inf:
            return math.inf
        return n * (d["beta"] + d["delta"]) - val

    raw = list(opts.starts) + _heuristic_starts(spec, sample)
    starts: list[np.ndarray] = []
    for d in raw:
        r = _repair(spec, d, alpha)
        if r is not None:
            th = tr.unconstrained(r)
            if not any(np.array_equal(th, t) for t in starts):
                starts.append(th)
    rng = np.random.default_rng(opts.seed)
    n_auto = max(opts.restarts, len(opts.starts) + 1)
    while len(starts) < n_auto:
        starts.append(starts[len(starts) % max(len(starts), 1)] + rng.normal(0.0, 0.5, len(tr.free)))
    starts = starts[: max(n_auto, len(opts.starts))]

    best_theta, best_f, any_conv, total_it = None, math.inf, False, 0
    if not tr.free:
        best_theta, best_f, any_conv = np.zeros(0), negll(np.zeros(0)), True
    for th0 in starts:
        if not tr.free:
            break
        th, f, conv, it = _nelder_mead(negll, th0, opts)
        total_it += it
        any_conv = any_conv or conv
        if f < best_f or (f == best_f and best_theta is not None and tuple(th) < tuple(best_theta)):
            best_theta, best_f = th, f
    if best_theta is None:
        best_theta = starts[0]
        best_f = negll(best_theta)

    est = tr.natural(best_theta)
    ll = -best_f + const if math.isfinite(best_f) else -math.inf
    diag = {"converged": bool(any_conv), "iterations": total_it, "starts": len(starts),
            "boundary": tr.at_boundary(best_theta)}
    try:
        p = make_params(spec.family, est)
        rho = model_moments(p).rho
    except (AdmissibilityError, ArithmeticError):
        p, rho = None, None
    fit = FitResult(spec=spec, method="mle", estimates=est, loglik=ll, aic=aic(ll, spec.k), rho=rho,
                    n=n, sample_digest=sample.digest, applicable=True, diagnostics=diag)
    if opts.compute_se and p is not None:
        fit = replace(fit, se=standard_errors(spec, sample, est))
    if not any_conv:
        raise NonConvergenceError(f"no start converged for {spec}", best=fit)
    return fit


def _nelder_mead(fun, x0, opts: MleOptions):
    """Simplex search, restarted from its own optimum until it stops improving."""
    x, f = np.asarray(x0, dtype=np.float64), fun(x0)
    conv, iters = False, 0
    for _ in range(3):
        res = minimize(fun, x, method="Nelder-Mead",
                       options={"maxiter": opts.max_iters, "xatol": 1e-9, "fatol": opts.f_tol,
                                "adaptive": len(x) > 2})
        iters += int(res.nit)
        improved = f - res.fun
        if res.fun <= f:
            x, f = res.x, float(res.fun)
        conv = conv or bool(res.success)
        if not improved > opts.f_tol:
            break
    return x, f, conv, iters


# ---------------------------------------------------------------------------
# families


_ORDER = ("c4", "c5", "c1", "c2", "c3", "eta1", "full")


def fit_family(sample: BivariateSample, family: str, opts: MleOptions | None = None,
               specs: Sequence[ModelSpec] | None = None) -> dict[ModelSpec, FitResult]:
    """MLE fits of several models of one family, nested ones seeding larger ones.

    Each model is also started from the estimates of every model nested in
    it, so the fitted log-likelihoods respect the nesting order.
    Non-converged fits are kept (with ``converged = False``).
    """
    from .data import all_specs

    opts = opts or MleOptions()
    specs = list(specs) if specs is not None else all_specs(family)
    specs.sort(key=lambda s: (_ORDER.index(s.case), -(s.sign or 0)))
    out: dict[ModelSpec, FitResult] = {}
    for spec in specs:
        seeds = tuple(
            {k: v for k, v in f.estimates.items()}
            for sub, f in out.items()
            if f.applicable and sub.is_nested_in(spec) and f.loglik is not None and math.isfinite(f.loglik)
        )
        o = replace(opts, starts=tuple(opts.starts) + seeds)
        try:
            out[spec] = mle_fit(spec, sample, o)
        except NonConvergenceError as exc:
            out[spec] = exc.best
    return {s: out[s] for s in specs}


# ---------------------------------------------------------------------------
# standard errors


def standard_errors(spec: ModelSpec, sample: BivariateSample,
                    estimates: Mapping[str, float], rel_step: float = 1e-4) -> dict[str, float]:
    """Observed-information standard errors of the free parameters.

    Central finite differences of the log-likelihood in the natural
    parameters; alpha uses its exact value sqrt(alpha / n). Entries are nan
    when the Hessian is not negative definite (e.g. on a boundary).
    """
    names = [k for k in spec.free if k != "alpha"]
    out = {"alpha": math.sqrt(estimates["alpha"] / sample.n)}
    if not names:
        return out
    x0 = np.array([estimates[k] for k in names])
    h = rel_step * np.maximum(np.abs(x0), 1e-3)

    def f(x):
        d = dict(estimates)
        d.update(zip(names, x))
        try:
            return loglik(make_params(spec.family, d), sample)
        except AdmissibilityError:
            return -math.inf

    k = len(names)
    H = np.empty((k, k))
    f0 = f(x0)
    for i in range(k):
        for j in range(i, k):
            if i == j:
                e = np.zeros(k)
                e[i] = h[i]
                H[i, i] = (f(x0 + e) - 2 * f0 + f(x0 - e)) / h[i] ** 2
            else:
                ei = np.zeros(k)
                ej = np.zeros(k)
                ei[i], ej[j] = h[i], h[j]
                H[i, j] = H[j, i] = (f(x0 + ei + ej) - f(x0 + ei - ej) - f(x0 - ei + ej)
                                     + f(x0 - ei - ej)) / (4 * h[i] * h[j])
    with np.errstate(all="ignore"):
        try:
            cov = np.linalg.inv(-H)
            diag = np.diag(cov)
        except np.linalg.LinAlgError:
            diag = np.full(k, np.nan)
    for name, v in zip(names, diag):
        out[name] = math.sqrt(v) if np.isfinite(v) and v > 0 else math.nan
    return out
