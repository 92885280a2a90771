"""Two-step sampling from a fitted or hypothesised model, and replication studies."""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from statistics import NormalDist
from typing import Any, Mapping

import numpy as np

from . import kernels
from .data import BivariateSample, ModelSpec, ParamVector, make_params, pearson_correlation
from .errors import EstimationError, UndefinedStatisticError, UsageError
from .mle import MleOptions, mle_fit
from .mme import mme_fit

ESTIMATORS = ("mme", "mle")


def _generator(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(seed))


def replicate_generator(seed: int, rep: int) -> np.random.Generator:
    """Independent stream for replicate ``rep``, derived from (seed, rep) only."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(rep)])))


def _check_truth(spec: ModelSpec, truth: ParamVector) -> None:
    if truth.family != spec.family:
        raise UsageError(f"{spec} needs {spec.family} parameters, got {truth.family}")
    for k, v in spec.fixed.items():
        if getattr(truth, k) != v:
            raise UsageError(f"{spec} fixes {k} = {v:g}, got {getattr(truth, k):g}")


def sample_from(spec: ModelSpec, truth: ParamVector, n: int, seed=0) -> BivariateSample:
    """Draw ``n`` pairs: x1 ~ Poisson(alpha), then x2 ~ Poisson(rate(x1)).

    ``seed`` is an integer (Philox stream) or an existing ``Generator``.
    """
    _check_truth(spec, truth)
    if n < 2:
        raise UsageError("n must be at least 2")
    gen = _generator(seed)
    x1 = kernels.poisson_variates(gen, np.full(n, truth.alpha))
    rates = np.ascontiguousarray(truth.rate(x1.astype(np.float64)), dtype=np.float64)
    x2 = kernels.poisson_variates(gen, rates)
    return BivariateSample(x1, x2)


@dataclass(frozen=True)
class StudyConfig:
    """A Monte-Carlo study of estimator behaviour.

    Parameters
    ----------
    spec, truth
        Data-generating model.
    n, reps
        Sample size and number of replicates.
    seed
        Replicate ``r`` uses a stream derived from ``(seed, r)``.
    estimators
        Subset of ``("mme", "mle")``.
    ci_level
        Coverage of the normal intervals ``mean +- z * SE``.
    """

    spec: ModelSpec
    truth: ParamVector
    n: int
    reps: int
    seed: int = 0
    estimators: tuple[str, ...] = ESTIMATORS
    ci_level: float = 0.95
    mle_options: MleOptions = field(default_factory=MleOptions)

    def __post_init__(self):
        if self.n < 2 or self.reps < 1:
            raise UsageError("need n >= 2 and reps >= 1")
        bad = set(self.estimators) - set(ESTIMATORS)
        if bad:
            raise UsageError(f"unknown estimators {sorted(bad)}")
        if not 0 < self.ci_level < 1:
            raise UsageError("ci_level must lie in (0, 1)")
        _check_truth(self.spec, self.truth)

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "StudyConfig":
        spec = ModelSpec.parse(d["model"], d.get("sign"))
        truth = make_params(spec.family, {**spec.fixed, **d["params"]})
        opts = MleOptions(**d["mle_options"]) if "mle_options" in d else MleOptions()
        return cls(spec, truth, int(d["n"]), int(d["reps"]), int(d.get("seed", 0)),
                   tuple(d.get("estimators", ESTIMATORS)), float(d.get("ci_level", 0.95)), opts)

    def as_dict(self) -> dict[str, Any]:
        return {"model": self.spec.selector, "sign": self.spec.sign, "params": self.truth.as_dict(),
                "n": self.n, "reps": self.reps, "seed": self.seed,
                "estimators": list(self.estimators), "ci_level": self.ci_level}


@dataclass(frozen=True)
class ParamSummary:
    mean: float
    se: float
    ci_low: float
    ci_high: float
    count: int

    def as_dict(self) -> dict[str, float]:
        return {"mean": self.mean, "se": self.se, "ci_low": self.ci_low,
                "ci_high": self.ci_high, "count": self.count}


@dataclass(frozen=True)
class SimulationSummary:
    """Aggregated study output.

    ``estimates[est][param]`` summarizes the successful replicates of
    estimator ``est`` (mean and empirical standard deviation as SE).
    Estimators that never succeeded are absent from ``estimates`` and
    listed in ``unavailable``.
    """

    config: StudyConfig
    estimates: dict[str, dict[str, ParamSummary]]
    failures: dict[str, int]
    mean_rho: float
    rho_count: int
    unavailable: tuple[str, ...] = ()
    flags: tuple[str, ...] = ()

    def as_dict(self) -> dict[str, Any]:
        return {
            "config": self.config.as_dict(),
            "estimates": {e: {k: v.as_dict() for k, v in d.items()} for e, d in self.estimates.items()},
            "failures": dict(self.failures),
            "mean_rho": self.mean_rho,
            "rho_count": self.rho_count,
            "unavailable": list(self.unavailable),
            "flags": list(self.flags),
        }


def _one_replicate(cfg: StudyConfig, rep: int) -> dict[str, Any]:
    sample = sample_from(cfg.spec, cfg.truth, cfg.n, replicate_generator(cfg.seed, rep))
    out: dict[str, Any] = {}
    try:
        out["rho"] = pearson_correlation(sample)
    except UndefinedStatisticError:
        out["rho"] = None
    if "mme" in cfg.estimators:
        rep_ = mme_fit(cfg.spec, sample)
        out["mme"] = dict(rep_.estimates) if rep_.ok else None
    if "mle" in cfg.estimators:
        try:
            fit = mle_fit(cfg.spec, sample, cfg.mle_options)
            out["mle"] = dict(fit.estimates) if fit.applicable else None
        except EstimationError:
            out["mle"] = None
    return out


def _threads() -> int:
    env = os.environ.get("PSEUDOPOISSON_THREADS")
    cap = os.cpu_count() or 1
    if env:
        try:
            return max(1, min(int(env), cap))
        except ValueError:
            pass
    return cap


def run_study(cfg: StudyConfig, threads: int | None = None) -> SimulationSummary:
    """Simulate ``cfg.reps`` samples, estimate on each and aggregate.

    Failed estimations are counted and excluded from that estimator's
    aggregates. Results are identical for any thread count.
    """
    threads = threads or _threads()
    reps = range(cfg.reps)
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(lambda r: _one_replicate(cfg, r), reps))
    else:
        results = [_one_replicate(cfg, r) for r in reps]

    z = NormalDist().inv_cdf(0.5 + cfg.ci_level / 2.0)
    names = [k for k in cfg.spec.free]
    estimates: dict[str, dict[str, ParamSummary]] = {}
    failures: dict[str, int] = {}
    unavailable = []
    for est in cfg.estimators:
        rows = [r[est] for r in results if r[est] is not None]
        failures[est] = cfg.reps - len(rows)
        if not rows:
            unavailable.append(est)
            continue
        block = {}
        for k in names:
            vals = np.array([r[k] for r in rows if k in r], dtype=np.float64)
            if vals.size == 0:
                continue
            mean = float(vals.mean())
            se = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
            block[k] = ParamSummary(mean, se, mean - z * se, mean + z * se, int(vals.size))
        estimates[est] = block
    rhos = np.array([r["rho"] for r in results if r["rho"] is not None], dtype=np.float64)
    flags = []
    if cfg.reps == 1:
        flags.append("single replicate: SE set to 0 and intervals are degenerate")
    return SimulationSummary(cfg, estimates, failures,
                             float(rhos.mean()) if rhos.size else math.nan, int(rhos.size),
                             tuple(unavailable), tuple(flags))
