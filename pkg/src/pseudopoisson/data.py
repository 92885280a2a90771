"""Core domain types: samples, parameter records, model specifications and fits."""
from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    AdmissibilityError,
    DataError,
    InsufficientDataError,
    UndefinedStatisticError,
    UsageError,
)

# slack used when checking delta >= max(-beta, 0)
_ADMISSIBLE_SLACK = 1e-12


# ---------------------------------------------------------------------------
# samples


class BivariateSample:
    """Immutable sample of paired non-negative counts.

    Parameters
    ----------
    x1, x2 : array_like of int
        Equal-length sequences of non-negative integer counts.
    """

    __slots__ = ("_x1", "_x2", "__dict__")

    def __init__(self, x1: Iterable[int], x2: Iterable[int]):
        a = _as_counts(x1, "x1")
        b = _as_counts(x2, "x2")
        if a.shape != b.shape:
            raise DataError(f"x1 and x2 differ in length ({a.size} vs {b.size})")
        if a.size < 2:
            raise InsufficientDataError(f"need at least 2 pairs, got {a.size}")
        a.setflags(write=False)
        b.setflags(write=False)
        self._x1 = a
        self._x2 = b

    @classmethod
    def from_pairs(cls, pairs: Iterable[Sequence[int]]) -> "BivariateSample":
        pairs = list(pairs)
        if not pairs:
            raise InsufficientDataError("empty sample")
        try:
            x1, x2 = zip(*pairs)
        except ValueError as exc:
            raise DataError("every pair must have exactly two entries") from exc
        return cls(x1, x2)

    @classmethod
    def from_csv(cls, path, mirror: bool = False) -> "BivariateSample":
        """Load a two-column ``x1,x2`` CSV with an optional header row."""
        return read_csv(path, mirror=mirror)

    @property
    def x1(self) -> np.ndarray:
        return self._x1

    @property
    def x2(self) -> np.ndarray:
        return self._x2

    @property
    def n(self) -> int:
        return int(self._x1.size)

    @property
    def pairs(self) -> list[tuple[int, int]]:
        return list(zip(self._x1.tolist(), self._x2.tolist()))

    def mirrored(self) -> "BivariateSample":
        """Swap the roles of the two components."""
        return BivariateSample(self._x2, self._x1)

    def __len__(self) -> int:
        return self.n

    def __eq__(self, other) -> bool:
        if not isinstance(other, BivariateSample):
            return NotImplemented
        return np.array_equal(self._x1, other._x1) and np.array_equal(self._x2, other._x2)

    def __hash__(self):
        return hash(self.digest)

    def __repr__(self) -> str:
        return f"BivariateSample(n={self.n})"

    @cached_property
    def digest(self) -> str:
        """SHA-256 of the ordered pairs; identifies the sample in saved fits."""
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self._x1, dtype="<i8").tobytes())
        h.update(np.ascontiguousarray(self._x2, dtype="<i8").tobytes())
        return h.hexdigest()

    @cached_property
    def grouped(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Distinct x1 values with their counts and the x2 totals per value.

        Likelihoods only depend on the sample through these (plus constants),
        so evaluating over distinct values is much cheaper than per pair.
        """
        values, inverse, counts = np.unique(self._x1, return_inverse=True, return_counts=True)
        sums = np.bincount(inverse, weights=self._x2, minlength=values.size)
        out = (
            np.ascontiguousarray(values, dtype=np.float64),
            np.ascontiguousarray(counts, dtype=np.float64),
            np.ascontiguousarray(sums, dtype=np.float64),
        )
        for arr in out:
            arr.setflags(write=False)
        return out

    @cached_property
    def log_factorial_sum(self) -> float:
        """sum_i log(x1_i!) + log(x2_i!)."""
        from scipy.special import gammaln

        return float(np.sum(gammaln(self._x1 + 1.0)) + np.sum(gammaln(self._x2 + 1.0)))

    @cached_property
    def has_zero_x1_positive_x2(self) -> bool:
        """True when some pair is (0, x2 > 0), which has zero likelihood if delta = 0."""
        return bool(np.any((self._x1 == 0) & (self._x2 > 0)))


def _as_counts(values, name: str) -> np.ndarray:
    arr = np.asarray(values)
    if arr.ndim != 1:
        arr = arr.reshape(-1)
    if arr.dtype.kind == "f":
        if not np.all(np.isfinite(arr)) or np.any(arr != np.floor(arr)):
            raise DataError(f"{name} must contain finite integers")
    elif arr.dtype.kind not in "iub":
        raise DataError(f"{name} must be numeric counts")
    if np.any(arr < 0):
        raise DataError(f"{name} contains negative counts")
    return arr.astype(np.int64, copy=True)


def read_csv(path, mirror: bool = False) -> BivariateSample:
    """Read a two-integer-column CSV.

    A first row that does not parse as integers is treated as a header.
    Errors report the offending line number.
    """
    x1: list[int] = []
    x2: list[int] = []
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    with fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise DataError(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
            try:
                a, b = int(row[0].strip()), int(row[1].strip())
            except ValueError:
                if lineno == 1 and not x1:
                    continue  # header
                raise DataError(f"{path}:{lineno}: non-integer value {row!r}") from None
            if a < 0 or b < 0:
                raise DataError(f"{path}:{lineno}: negative count {row!r}")
            x1.append(a)
            x2.append(b)
    if len(x1) < 2:
        raise InsufficientDataError(f"{path}: need at least 2 data rows, got {len(x1)}")
    return BivariateSample(x2, x1) if mirror else BivariateSample(x1, x2)


def write_csv(sample: BivariateSample, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["x1", "x2"])
        w.writerows(sample.pairs)


# ---------------------------------------------------------------------------
# descriptive statistics


@dataclass(frozen=True)
class SampleMoments:
    """First and second sample moments (divisor n, not n - 1)."""

    M1: float
    M2: float
    S12: float
    S22: float

    @property
    def excess_dispersion(self) -> float:
        """S22 - M2."""
        return self.S22 - self.M2

    @property
    def moment_ratio(self) -> float:
        """S12**2 / (S22 - M2), the right side of the implicit MME equations."""
        return self.S12 * self.S12 / (self.S22 - self.M2)


def sample_moments(sample: BivariateSample) -> SampleMoments:
    """Compute M1, M2, S12 and S22 with the population divisor n.

    Raises
    ------
    InsufficientDataError
        If fewer than two pairs are present.
    """
    if sample.n < 2:
        raise InsufficientDataError("need at least 2 pairs")
    x1 = sample.x1.astype(np.float64)
    x2 = sample.x2.astype(np.float64)
    m1 = math.fsum(x1) / x1.size
    m2 = math.fsum(x2) / x2.size
    d1 = x1 - m1
    d2 = x2 - m2
    s12 = math.fsum(d1 * d2) / x1.size
    s22 = math.fsum(d2 * d2) / x2.size
    return SampleMoments(m1, m2, s12, s22)


def dispersion_index(values: Sequence[int]) -> float:
    """Population variance over mean of a count sequence."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise InsufficientDataError("empty sequence")
    mean = arr.mean()
    if mean <= 0:
        raise UndefinedStatisticError("dispersion index undefined for zero mean")
    return float(np.mean((arr - mean) ** 2) / mean)


def pearson_correlation(sample: BivariateSample) -> float:
    m = sample_moments(sample)
    x1 = sample.x1.astype(np.float64)
    s11 = math.fsum((x1 - m.M1) ** 2) / x1.size
    if s11 <= 0 or m.S22 <= 0:
        raise UndefinedStatisticError("correlation undefined: a marginal has zero variance")
    r = m.S12 / math.sqrt(s11 * m.S22)
    return max(-1.0, min(1.0, r))


# ---------------------------------------------------------------------------
# parameters


def _check_common(alpha, beta, gamma, delta):
    vals = {"alpha": alpha, "beta": beta, "gamma": gamma, "delta": delta}
    for k, v in vals.items():
        if not math.isfinite(v):
            raise AdmissibilityError(f"{k} must be finite, got {v}")
    if alpha <= 0:
        raise AdmissibilityError(f"alpha must be positive, got {alpha}")
    if beta == 0:
        raise AdmissibilityError("beta must be non-zero")
    if gamma <= 0:
        raise AdmissibilityError(f"gamma must be positive, got {gamma}")
    floor = max(-beta, 0.0)
    if delta < floor - _ADMISSIBLE_SLACK * (1.0 + abs(beta)):
        raise AdmissibilityError(f"delta={delta} violates delta >= max(-beta, 0) = {floor}")


@dataclass(frozen=True)
class ExpParams:
    """Exponential-rate model: X2 | X1 = x ~ Poisson(delta + beta * (1 - exp(-gamma x)))."""

    alpha: float
    beta: float
    gamma: float
    delta: float

    family = "exp"
    names = ("alpha", "beta", "gamma", "delta")

    def __post_init__(self):
        for k in self.names:
            object.__setattr__(self, k, float(getattr(self, k)))
        _check_common(self.alpha, self.beta, self.gamma, self.delta)
        if self.rate(1) <= 0:
            raise AdmissibilityError("conditional rate must be positive at x1 = 1")

    @property
    def mu(self) -> float:
        return math.exp(self.alpha) if self.alpha < 709 else math.inf

    @property
    def nu(self) -> float:
        return math.exp(-self.gamma)

    def cdf(self, x):
        """Distribution function 1 - nu**x, exact 0 at x = 0."""
        return -np.expm1(-self.gamma * np.asarray(x, dtype=np.float64))

    def rate(self, x):
        x = np.asarray(x, dtype=np.float64)
        out = self.delta + self.beta * self.cdf(x)
        return float(out) if out.ndim == 0 else out

    def as_dict(self) -> dict[str, float]:
        return {k: getattr(self, k) for k in self.names}

    def replace(self, **kw) -> "ExpParams":
        d = self.as_dict()
        d.update(kw)
        return ExpParams(**d)


@dataclass(frozen=True)
class LomaxParams:
    """Lomax-rate model: rate delta + beta * (1 - (gamma / (x + gamma)) ** eta)."""

    alpha: float
    beta: float
    gamma: float
    eta: float
    delta: float

    family = "lomax"
    names = ("alpha", "beta", "gamma", "eta", "delta")

    def __post_init__(self):
        for k in self.names:
            object.__setattr__(self, k, float(getattr(self, k)))
        _check_common(self.alpha, self.beta, self.gamma, self.delta)
        if not (math.isfinite(self.eta) and self.eta > 0):
            raise AdmissibilityError(f"eta must be positive, got {self.eta}")
        if self.rate(1) <= 0:
            raise AdmissibilityError("conditional rate must be positive at x1 = 1")

    @property
    def mu(self) -> float:
        return math.exp(self.alpha) if self.alpha < 709 else math.inf

    def survival(self, x):
        """(gamma / (x + gamma)) ** eta."""
        return np.exp(-self.eta * np.log1p(np.asarray(x, dtype=np.float64) / self.gamma))

    def cdf(self, x):
        return -np.expm1(-self.eta * np.log1p(np.asarray(x, dtype=np.float64) / self.gamma))

    def rate(self, x):
        x = np.asarray(x, dtype=np.float64)
        out = self.delta + self.beta * self.cdf(x)
        return float(out) if out.ndim == 0 else out

    def as_dict(self) -> dict[str, float]:
        return {k: getattr(self, k) for k in self.names}

    def replace(self, **kw) -> "LomaxParams":
        d = self.as_dict()
        d.update(kw)
        return LomaxParams(**d)


ParamVector = ExpParams | LomaxParams


def make_params(family: str, values: Mapping[str, float]) -> ParamVector:
    cls = ExpParams if family == "exp" else LomaxParams
    missing = [k for k in cls.names if k not in values]
    if missing:
        raise AdmissibilityError(f"missing parameters: {', '.join(missing)}")
    return cls(**{k: values[k] for k in cls.names})


# ---------------------------------------------------------------------------
# model specifications

FAMILIES = ("exp", "lomax")
CASES = ("full", "eta1", "c1", "c2", "c3", "c4", "c5")
_SIGNED = ("c1", "c4")

# free-parameter counts; every Lomax sub-model also fixes eta = 1
_K = {
    "exp": {"full": 4, "c1": 3, "c2": 3, "c3": 3, "c4": 2, "c5": 2},
    "lomax": {"full": 5, "eta1": 4, "c1": 3, "c2": 3, "c3": 3, "c4": 2, "c5": 2},
}

_CASE_LABEL = {
    "full": "Full",
    "eta1": "eta=1",
    "c1": "Case I",
    "c2": "Case II",
    "c3": "Case III",
    "c4": "Case IV",
    "c5": "Case V",
}


@dataclass(frozen=True)
class ModelSpec:
    """A family plus a sub-model constraint pattern.

    Parameters
    ----------
    family : {"exp", "lomax"}
    case : {"full", "eta1", "c1", "c2", "c3", "c4", "c5"}
        ``eta1`` exists for the Lomax family only.
    sign : {+1, -1, None}
        Sign of the fixed beta for cases ``c1`` and ``c4``; must be None otherwise.
    """

    family: str
    case: str = "full"
    sign: int | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise UsageError(f"unknown family {self.family!r}")
        if self.case not in _K[self.family]:
            raise UsageError(f"case {self.case!r} not available for family {self.family!r}")
        if self.case in _SIGNED:
            if self.sign not in (1, -1):
                raise UsageError(f"{self.case} requires sign +1 or -1")
            object.__setattr__(self, "sign", int(self.sign))
        elif self.sign is not None:
            raise UsageError(f"{self.case} does not take a sign")

    @classmethod
    def parse(cls, text: str, sign: str | int | None = None) -> "ModelSpec":
        """Parse ``"exp:c4"`` style selectors; ``sign`` may be ``"+"``/``"-"``."""
        try:
            family, case = text.lower().split(":")
        except ValueError:
            family, case = text.lower(), "full"
        family = {"exponential": "exp"}.get(family, family)
        if isinstance(sign, str):
            sign = {"+": 1, "-": -1, "+1": 1, "-1": -1}.get(sign.strip())
            if sign is None:
                raise UsageError("sign must be + or -")
        if case not in _SIGNED:
            sign = None
        return cls(family, case, sign)

    @property
    def names(self) -> tuple[str, ...]:
        return ExpParams.names if self.family == "exp" else LomaxParams.names

    @property
    def fixed(self) -> dict[str, float]:
        """Parameters held fixed by the constraint pattern."""
        c = self.case
        out: dict[str, float] = {}
        if self.family == "lomax" and c != "full":
            out["eta"] = 1.0
        if c in ("c1", "c4"):
            out["beta"] = float(self.sign)
        if c in ("c2", "c4", "c5"):
            out["gamma"] = 1.0
        if c in ("c3", "c5"):
            out["delta"] = 0.0
        return out

    @property
    def free(self) -> tuple[str, ...]:
        fixed = self.fixed
        return tuple(k for k in self.names if k not in fixed)

    @property
    def k(self) -> int:
        return _K[self.family][self.case]

    @property
    def requires_positive_rate_at_zero(self) -> bool:
        """Cases fixing delta = 0 give zero likelihood to any (0, x2 > 0) pair."""
        return "delta" in self.fixed

    def is_nested_in(self, other: "ModelSpec") -> bool:
        """True if ``self`` is a strict restriction of ``other``."""
        if self.family != other.family or self == other:
            return False
        mine, theirs = self.fixed, other.fixed
        return all(k in mine and mine[k] == v for k, v in theirs.items()) and len(mine) > len(theirs)

    @property
    def selector(self) -> str:
        return f"{self.family}:{self.case}"

    @property
    def label(self) -> str:
        fam = "Exponential" if self.family == "exp" else "Lomax"
        lab = _CASE_LABEL[self.case]
        if self.sign is not None:
            lab += " (beta=+1)" if self.sign > 0 else " (beta=-1)"
        return f"{fam} {lab}"

    def __str__(self) -> str:
        s = self.selector
        if self.sign is not None:
            s += "+" if self.sign > 0 else "-"
        return s

    def as_dict(self) -> dict[str, Any]:
        return {"family": self.family, "case": self.case, "sign": self.sign}


def all_specs(family: str | None = None) -> list[ModelSpec]:
    """Every model specification, both signs for signed cases."""
    out = []
    for fam in FAMILIES if family is None else (family,):
        for case in _K[fam]:
            if case in _SIGNED:
                out.extend(ModelSpec(fam, case, s) for s in (1, -1))
            else:
                out.append(ModelSpec(fam, case))
    return out


# ---------------------------------------------------------------------------
# fit results


def aic(loglik: float, k: int) -> float:
    """2k - 2 loglik; a -inf log-likelihood gives +inf."""
    if loglik == -math.inf:
        return math.inf
    if not math.isfinite(loglik):
        raise ValueError(f"loglik must be finite or -inf, got {loglik}")
    return 2.0 * k - 2.0 * loglik


@dataclass(frozen=True)
class FitResult:
    """Outcome of fitting one model to one sample.

    ``estimates`` maps parameter names to values; for moment estimators
    parameters that do not exist are absent. ``params`` rebuilds the
    typed record when all values are present and admissible.
    """

    spec: ModelSpec
    method: str
    estimates: dict[str, float]
    loglik: float | None = None
    aic: float | None = None
    rho: float | None = None
    n: int | None = None
    sample_digest: str | None = None
    applicable: bool = True
    note: str | None = None
    diagnostics: dict[str, Any] = field(default_factory=dict)
    se: dict[str, float] | None = None

    @property
    def params(self) -> ParamVector | None:
        try:
            return make_params(self.spec.family, self.estimates)
        except AdmissibilityError:
            return None

    @property
    def converged(self) -> bool:
        return bool(self.diagnostics.get("converged", self.applicable))

    def to_dict(self) -> dict[str, Any]:
        def enc(v):
            if isinstance(v, float) and not math.isfinite(v):
                return "inf" if v > 0 else ("-inf" if v < 0 else "nan")
            return v

        return {
            "spec": self.spec.as_dict(),
            "method": self.method,
            "estimates": {k: enc(v) for k, v in self.estimates.items()},
            "loglik": enc(self.loglik),
            "aic": enc(self.aic),
            "rho": enc(self.rho),
            "n": self.n,
            "sample_digest": self.sample_digest,
            "applicable": self.applicable,
            "note": self.note,
            "diagnostics": _jsonable(self.diagnostics),
            "se": None if self.se is None else {k: enc(v) for k, v in self.se.items()},
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "FitResult":
        def dec(v):
            if isinstance(v, str) and v in ("inf", "-inf", "nan"):
                return float(v)
            return v

        spec = ModelSpec(**d["spec"])
        return cls(
            spec=spec,
            method=d["method"],
            estimates={k: float(dec(v)) for k, v in d["estimates"].items()},
            loglik=dec(d.get("loglik")),
            aic=dec(d.get("aic")),
            rho=dec(d.get("rho")),
            n=d.get("n"),
            sample_digest=d.get("sample_digest"),
            applicable=d.get("applicable", True),
            note=d.get("note"),
            diagnostics=dict(d.get("diagnostics") or {}),
            se=None if d.get("se") is None else {k: float(dec(v)) for k, v in d["se"].items()},
        )


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if not math.isfinite(v):
            return "inf" if v > 0 else ("-inf" if v < 0 else "nan")
        return v
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj
