"""Method-of-moments estimators for every sub-model of both families.

Each estimator returns an :class:`MmeReport` rather than raising, so that
callers fitting many models can record which estimators fail to exist.
``report.raise_for_status()`` re-raises the stored error.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from ._solve import bisect, golden_section
from .data import BivariateSample, FitResult, ModelSpec, SampleMoments, make_params, sample_moments
from .errors import (
    DegenerateDispersionError,
    EstimationError,
    ExistenceError,
    ExistenceUnknownError,
    SolverError,
    UsageError,
)
from .moments import lomax_survival_stats, model_moments
from .special import bernoulli_ratio, lambert_w0

# strict-inequality slack for the existence window
_BOUND_SLACK = 1e-12
_GAMMA_LO = 1e-8
_GAMMA_CAP = 1e8


@dataclass
class MmeReport:
    """Outcome of one moment estimator.

    Attributes
    ----------
    estimates : dict
        Parameter values that exist; ``alpha`` is always present, fixed
        parameters of the sub-model are included at their fixed values.
    bound_check : str
        ``"passed"``, ``"violated"`` or ``"n/a"`` for estimators without an
        analytic existence window.
    error : EstimationError or None
        Why the remaining estimates are absent.
    roots : list of float
        All roots found, for searches that may have several.
    """

    spec: ModelSpec
    estimates: dict[str, float]
    bound_check: str = "n/a"
    error: EstimationError | None = None
    solver_trace: dict[str, Any] = field(default_factory=dict)
    roots: list[float] = field(default_factory=list)
    note: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None

    @property
    def complete(self) -> bool:
        """All free parameters estimated (delta may be excluded for Case III)."""
        return self.ok and all(k in self.estimates for k in self.spec.names)

    @property
    def params(self):
        if not self.complete:
            return None
        try:
            return make_params(self.spec.family, self.estimates)
        except ValueError:
            return None

    @property
    def admissible(self) -> bool:
        return self.params is not None

    def raise_for_status(self) -> "MmeReport":
        if self.error is not None:
            raise self.error
        return self

    def to_fit(self, sample: BivariateSample | None = None) -> FitResult:
        p = self.params
        rho = None
        if p is not None:
            rho = model_moments(p).rho
        diag = {"bound_check": self.bound_check, "converged": self.ok, **self.solver_trace}
        if self.roots:
            diag["roots"] = list(self.roots)
        if self.error is not None:
            diag["error"] = str(self.error)
        elif p is None and self.complete:
            diag["admissible"] = False
        return FitResult(
            spec=self.spec,
            method="mme",
            estimates=dict(self.estimates),
            rho=rho,
            n=None if sample is None else sample.n,
            sample_digest=None if sample is None else sample.digest,
            applicable=True,
            note=self.note,
            diagnostics=diag,
        )


def _report(spec, m: SampleMoments, **kw) -> MmeReport:
    est = {"alpha": m.M1}
    est.update(spec.fixed)
    return MmeReport(spec=spec, estimates=est, **kw)


def _fail(report: MmeReport, err: EstimationError) -> MmeReport:
    report.error = err
    keep = {"alpha": report.estimates["alpha"]}
    keep.update(report.spec.fixed)
    report.estimates = keep
    return report


def existence_window(m: SampleMoments) -> tuple[float, float]:
    """(M1^2 / (e^M1 - 1), M1): the open interval S12^2 / (S22 - M2) must lie in."""
    return m.M1 * bernoulli_ratio(m.M1), m.M1


def _check_window(report: MmeReport, m: SampleMoments) -> float | None:
    """Validate the moment ratio; return it or record the failure."""
    if m.M1 <= 0:
        _fail(report, ExistenceError("requires M1 > 0", side="M1"))
        return None
    if m.S22 == m.M2:
        _fail(report, DegenerateDispersionError("S22 equals M2; moment ratio undefined"))
        return None
    r = m.moment_ratio
    lower, upper = existence_window(m)
    report.solver_trace["moment_ratio"] = r
    report.solver_trace["window"] = (lower, upper)
    if not r > lower * (1.0 + _BOUND_SLACK):
        report.bound_check = "violated"
        _fail(report, ExistenceError(
            f"S12^2/(S22-M2) = {r:.6g} does not exceed the lower bound M1^2/(e^M1-1) = {lower:.6g}",
            side="lower"))
        return None
    if not r < upper * (1.0 - _BOUND_SLACK):
        report.bound_check = "violated"
        _fail(report, ExistenceError(
            f"S12^2/(S22-M2) = {r:.6g} is not below the upper bound M1 = {upper:.6g}", side="upper"))
        return None
    report.bound_check = "passed"
    return r


# ---------------------------------------------------------------------------
# exponential family


def exp_implicit_lhs(nu: float, alpha: float) -> float:
    """alpha^2 (nu-1)^2 / (mu^((nu-1)^2) - 1), increasing in nu on (0, 1)."""
    t2 = (1.0 - nu) ** 2
    return alpha * bernoulli_ratio(alpha * t2, series_threshold=0.0) if t2 > 0 else alpha


def _solve_exp_u(alpha: float, r: float, method: str) -> tuple[float, dict]:
    """Return u = 1 - nu solving the implicit moment equation."""
    target = r / alpha
    if method == "bernoulli":
        # zeta / (e^zeta - 1) = r / alpha with zeta = alpha (nu - 1)^2
        res = bisect(lambda z: bernoulli_ratio(z) - target, 0.0, alpha, rtol=1e-16)
        u = math.sqrt(res.x / alpha)
    elif method == "bisect":
        # work in u so that nu close to 1 keeps full relative precision
        def g(u):
            return target - bernoulli_ratio(alpha * u * u, series_threshold=0.0) if u > 0 else target - 1.0
        res = bisect(g, 0.0, 1.0, rtol=1e-16)
        u = res.x
    else:
        raise UsageError(f"unknown method {method!r}")
    return u, {"iterations": res.iterations, "bracket": list(res.bracket), "residual": res.residual,
               "method": method}


def mme_exp_full(m: SampleMoments, method: str = "bisect", spec: ModelSpec | None = None) -> MmeReport:
    """Moment estimates of (alpha, beta, gamma, delta) for the full exponential model.

    nu solves ``alpha^2 (nu-1)^2 / (mu^((nu-1)^2) - 1) = S12^2 / (S22 - M2)``
    by bisection; the left side increases on (0, 1) so the root is unique
    whenever the ratio lies strictly inside :func:`existence_window`.

    Parameters
    ----------
    method : {"bisect", "bernoulli"}
        ``"bernoulli"`` solves for ``zeta = M1 (nu-1)^2`` through the
        Bernoulli generating function instead.
    """
    spec = spec or ModelSpec("exp")
    report = _report(spec, m)
    r = _check_window(report, m)
    if r is None:
        return report
    a = m.M1
    try:
        u, trace = _solve_exp_u(a, r, method)
    except SolverError as exc:
        return _fail(report, exc)
    report.solver_trace.update(trace)
    if not 0.0 < u < 1.0:
        return _fail(report, SolverError(f"root u={u} outside (0, 1)"))
    A = math.exp(-a * u)
    beta = m.S12 / (a * u * A)
    report.estimates.update(beta=beta, gamma=-math.log1p(-u))
    if "delta" not in spec.fixed:
        report.estimates["delta"] = m.M2 + beta * math.expm1(-a * u)
    return report


def mme_exp_case1(m: SampleMoments, sign: int) -> MmeReport:
    """Case I (beta = sign): nu = 1 + W0(-sign S12) / M1.

    Exists when ``0 < sign*S12 <= 1/e`` and the principal-branch root gives
    ``nu`` in (0, 1).
    """
    spec = ModelSpec("exp", "c1", sign)
    report = _report(spec, m)
    a, s = m.M1, spec.sign
    z = s * m.S12
    cond = "requires 0 < sign(beta)*S12 <= 1/e and W0(-sign(beta)*S12) > -M1"
    if a <= 0 or not z > 0:
        report.bound_check = "violated"
        return _fail(report, ExistenceError(f"sign(beta)*S12 = {z:.6g}; {cond}", side="sign"))
    if z > math.exp(-1.0):
        report.bound_check = "violated"
        return _fail(report, ExistenceError(f"sign(beta)*S12 = {z:.6g} exceeds 1/e; {cond}", side="upper"))
    w = lambert_w0(-z)
    if not w > -a:
        report.bound_check = "violated"
        return _fail(report, ExistenceError(f"W0(-sign(beta)*S12) = {w:.6g} <= -M1; {cond}", side="nu"))
    report.bound_check = "passed"
    u = -w / a
    report.estimates["gamma"] = -math.log1p(-u)
    report.estimates["delta"] = m.M2 + s * math.expm1(-a * u)
    report.solver_trace["lambert_w"] = w
    return report


_U1 = -math.expm1(-1.0)  # 1 - 1/e


def mme_exp_case2(m: SampleMoments) -> MmeReport:
    """Case II (gamma = 1): closed forms for beta and delta."""
    report = _report(ModelSpec("exp", "c2"), m)
    a = m.M1
    if a <= 0:
        return _fail(report, ExistenceError("requires M1 > 0", side="M1"))
    A = math.exp(-a * _U1)
    beta = m.S12 / (a * _U1 * A)
    if beta == 0:
        return _fail(report, ExistenceError("S12 = 0 gives beta = 0", side="S12"))
    report.bound_check = "passed"
    report.estimates.update(beta=beta, delta=m.M2 + beta * math.expm1(-a * _U1))
    return report


def mme_exp_case3(m: SampleMoments, method: str = "bisect") -> MmeReport:
    """Case III (delta = 0): the full-model nu and beta; delta is not estimated."""
    return mme_exp_full(m, method=method, spec=ModelSpec("exp", "c3"))


def mme_exp_case4(m: SampleMoments, sign: int) -> MmeReport:
    """Case IV (beta = sign, gamma = 1): delta = M2 - sign (1 - mu^(1/e - 1))."""
    spec = ModelSpec("exp", "c4", sign)
    report = _report(spec, m)
    if m.M1 <= 0:
        return _fail(report, ExistenceError("requires M1 > 0", side="M1"))
    report.bound_check = "passed"
    report.estimates["delta"] = m.M2 + spec.sign * math.expm1(-m.M1 * _U1)
    return report


def mme_exp_case5(m: SampleMoments) -> MmeReport:
    """Case V (delta = 0, gamma = 1): beta = M2 / (1 - mu^(1/e - 1))."""
    report = _report(ModelSpec("exp", "c5"), m)
    if m.M1 <= 0 or not m.M2 > 0:
        return _fail(report, ExistenceError("requires M1 > 0 and M2 > 0", side="M2"))
    report.bound_check = "passed"
    report.estimates["beta"] = m.M2 / -math.expm1(-m.M1 * _U1)
    return report


# ---------------------------------------------------------------------------
# Lomax family, eta = 1


def lomax_implicit_lhs(g: float, alpha: float) -> float:
    """alpha^2 (E[r(X) - r(X+1)])^2 / Var r(X) with r(x) = g / (g + x).

    Algebraically the hypergeometric left side of the implicit equation;
    increasing in g from alpha^2 / (e^alpha - 1) to alpha.
    """
    _, drop, var = lomax_survival_stats(g, 1.0, alpha)
    return alpha * alpha * drop * drop / var


def _solve_lomax_gamma(alpha: float, r: float) -> tuple[float, dict]:
    def f(lg):
        return lomax_implicit_lhs(math.exp(lg), alpha) - r

    lo = math.log(_GAMMA_LO)
    while f(lo) > 0:
        lo -= math.log(10.0)
        if lo < math.log(1e-30):
            raise SolverError("gamma bracket could not be extended below 1e-30")
    hi = lo + math.log(10.0)
    while f(hi) < 0:
        hi += math.log(10.0)
        if hi > math.log(_GAMMA_CAP) + 1e-9:
            raise SolverError(f"gamma bracket expansion exceeded {_GAMMA_CAP:g}")
    res = bisect(f, lo, hi, xtol=1e-15)
    return math.exp(res.x), {"iterations": res.iterations,
                             "bracket": [math.exp(res.bracket[0]), math.exp(res.bracket[1])],
                             "residual": res.residual}


def mme_lomax_eta1_full(m: SampleMoments, spec: ModelSpec | None = None) -> MmeReport:
    """Moment estimates for the Lomax model with eta = 1.

    gamma solves the implicit equation by bisection on log(gamma) over a
    bracket starting at 1e-8 and widened tenfold up to 1e8.
    """
    spec = spec or ModelSpec("lomax", "eta1")
    report = _report(spec, m)
    r = _check_window(report, m)
    if r is None:
        return report
    a = m.M1
    try:
        g, trace = _solve_lomax_gamma(a, r)
    except SolverError as exc:
        return _fail(report, exc)
    report.solver_trace.update(trace)
    m0, drop, _ = lomax_survival_stats(g, 1.0, a)
    beta = m.S12 / (a * drop)
    report.estimates.update(beta=beta, gamma=g)
    if "delta" not in spec.fixed:
        report.estimates["delta"] = m.M2 - beta * (1.0 - m0)
    return report


def _lomax_case1_roots(alpha: float, target: float, grid: int = 241) -> list[float]:
    def f(lg):
        _, drop, _ = lomax_survival_stats(math.exp(lg), 1.0, alpha)
        return alpha * drop - target

    xs = np.linspace(math.log(1e-6), math.log(1e6), grid)
    fs = [f(x) for x in xs]
    roots = []
    for i in range(grid - 1):
        if fs[i] == 0.0:
            roots.append(xs[i])
        elif (fs[i] > 0) != (fs[i + 1] > 0) and fs[i + 1] != 0.0:
            roots.append(bisect(f, xs[i], xs[i + 1], xtol=1e-15).x)
    if fs[-1] == 0.0:
        roots.append(xs[-1])
    # a root at a turning point of f has no sign change between grid
    # points: refine each local extremum that stays on one side
    tol = 1e-10 * max(abs(target), 1e-300)
    for i in range(1, grid - 1):
        if (fs[i] - fs[i - 1]) * (fs[i + 1] - fs[i]) >= 0:
            continue
        s = 1.0 if fs[i] > 0 else -1.0
        if (fs[i - 1] > 0) != (fs[i] > 0) or (fs[i + 1] > 0) != (fs[i] > 0):
            continue
        x, v = golden_section(lambda t: s * f(t), xs[i - 1], xs[i + 1], tol=1e-12)
        if v <= 0.0 and v < -tol:
            roots.append(bisect(f, xs[i - 1], x, xtol=1e-15).x)
            roots.append(bisect(f, x, xs[i + 1], xtol=1e-15).x)
        elif abs(v) <= tol:
            roots.append(x)
    return [math.exp(x) for x in sorted(roots)]


def mme_lomax_case1(m: SampleMoments, sign: int,
                    choose: Callable[[Sequence[dict]], int] | None = None) -> MmeReport:
    """Case I (beta = sign, eta = 1): solve sign * M1 * E[r(X) - r(X+1)] = S12 for gamma.

    No analytic existence window is known, so log-spaced gamma in
    [1e-6, 1e6] is scanned for sign changes and each is refined by
    bisection. Every root is kept in ``report.roots``; ``choose`` picks
    among the candidate estimate dicts (default: the first).
    """
    spec = ModelSpec("lomax", "c1", sign)
    report = _report(spec, m)
    a, s = m.M1, spec.sign
    if a <= 0:
        return _fail(report, ExistenceError("requires M1 > 0", side="M1"))
    roots = _lomax_case1_roots(a, s * m.S12)
    report.roots = roots
    if not roots:
        return _fail(report, ExistenceUnknownError(
            "no root of the covariance equation for gamma in [1e-6, 1e6]"))
    cands = []
    for g in roots:
        m0, _, _ = lomax_survival_stats(g, 1.0, a)
        cands.append({**report.estimates, "gamma": g, "delta": m.M2 - s * (1.0 - m0)})
    idx = 0 if choose is None or len(cands) == 1 else choose(cands)
    report.estimates = cands[idx]
    report.solver_trace["n_roots"] = len(roots)
    if len(roots) > 1:
        report.note = f"{len(roots)} roots found; root {idx + 1} selected"
    return report


def _lomax_case2_m0(a: float) -> float:
    """E[1 / (1 + X)] = (1 - e^-a) / a."""
    return -math.expm1(-a) / a


def _lomax_case2_drop(a: float) -> float:
    """E[1/(1+X) - 1/(2+X)] = (mu - 1 - alpha) / (alpha^2 mu)."""
    if a < 0.1:
        # e^a - 1 - a by its series, avoiding cancellation
        term, acc = a * a / 2.0, 0.0
        k = 2
        while term > 1e-18 * max(acc, 1e-300):
            acc += term
            k += 1
            term *= a / k
        num = acc
    else:
        num = math.expm1(a) - a
    return num * math.exp(-a) / (a * a)


def mme_lomax_case2(m: SampleMoments) -> MmeReport:
    """Case II (gamma = 1, eta = 1): beta = S12 alpha mu / (mu - alpha - 1)."""
    report = _report(ModelSpec("lomax", "c2"), m)
    a = m.M1
    if a <= 0:
        return _fail(report, ExistenceError("requires M1 > 0", side="M1"))
    beta = m.S12 / (a * _lomax_case2_drop(a))
    if beta == 0:
        return _fail(report, ExistenceError("S12 = 0 gives beta = 0", side="S12"))
    report.bound_check = "passed"
    report.estimates.update(beta=beta, delta=m.M2 - beta * (1.0 - _lomax_case2_m0(a)))
    return report


def mme_lomax_case3(m: SampleMoments) -> MmeReport:
    """Case III (delta = 0, eta = 1): the eta = 1 path without delta."""
    return mme_lomax_eta1_full(m, spec=ModelSpec("lomax", "c3"))


def mme_lomax_case4(m: SampleMoments, sign: int) -> MmeReport:
    """Case IV (beta = sign, gamma = 1, eta = 1): closed-form delta."""
    spec = ModelSpec("lomax", "c4", sign)
    report = _report(spec, m)
    if m.M1 <= 0:
        return _fail(report, ExistenceError("requires M1 > 0", side="M1"))
    report.bound_check = "passed"
    report.estimates["delta"] = m.M2 - spec.sign * (1.0 - _lomax_case2_m0(m.M1))
    return report


def mme_lomax_case5(m: SampleMoments) -> MmeReport:
    """Case V (delta = 0, gamma = 1, eta = 1): beta = M2 / (1 - (1 - 1/mu) / alpha)."""
    report = _report(ModelSpec("lomax", "c5"), m)
    if m.M1 <= 0 or not m.M2 > 0:
        return _fail(report, ExistenceError("requires M1 > 0 and M2 > 0", side="M2"))
    report.bound_check = "passed"
    report.estimates["beta"] = m.M2 / (1.0 - _lomax_case2_m0(m.M1))
    return report


# ---------------------------------------------------------------------------
# dispatch


def mme_fit(spec: ModelSpec, data: BivariateSample | SampleMoments, *,
            choose: Callable[[Sequence[dict]], int] | None = None) -> MmeReport:
    """Run the moment estimator matching ``spec``.

    ``data`` may be a sample or precomputed moments. The full Lomax model
    (free eta) has no moment estimator and yields a report carrying a
    :class:`UsageError`.
    """
    m = data if isinstance(data, SampleMoments) else sample_moments(data)
    fam, case = spec.family, spec.case
    if fam == "exp":
        if case == "full":
            return mme_exp_full(m)
        if case == "c1":
            return mme_exp_case1(m, spec.sign)
        if case == "c2":
            return mme_exp_case2(m)
        if case == "c3":
            return mme_exp_case3(m)
        if case == "c4":
            return mme_exp_case4(m, spec.sign)
        return mme_exp_case5(m)
    if case == "full":
        return _fail(_report(spec, m), UsageError(
            "no moment estimator for the Lomax model with free eta (too few independent moments)"))
    if case == "eta1":
        return mme_lomax_eta1_full(m)
    if case == "c1":
        return mme_lomax_case1(m, spec.sign, choose=choose)
    if case == "c2":
        return mme_lomax_case2(m)
    if case == "c3":
        return mme_lomax_case3(m)
    if case == "c4":
        return mme_lomax_case4(m, spec.sign)
    return mme_lomax_case5(m)
