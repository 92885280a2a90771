"""Small bracketing solvers shared by the estimators and the bound computations."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from .errors import SolverError


@dataclass(frozen=True)
class BisectResult:
    x: float
    iterations: int
    bracket: tuple[float, float]
    residual: float


def bisect(f: Callable[[float], float], lo: float, hi: float, *, xtol: float = 0.0,
           rtol: float = 1e-15, maxiter: int = 400) -> BisectResult:
    """Root of ``f`` on ``[lo, hi]`` where ``f(lo)`` and ``f(hi)`` differ in sign."""
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return BisectResult(lo, 0, (lo, hi), 0.0)
    if fhi == 0.0:
        return BisectResult(hi, 0, (lo, hi), 0.0)
    if (flo > 0) == (fhi > 0):
        raise SolverError(f"no sign change on [{lo}, {hi}]")
    a, b = lo, hi
    it = 0
    for it in range(1, maxiter + 1):
        mid = 0.5 * (a + b)
        if mid == a or mid == b:
            break
        fm = f(mid)
        if fm == 0.0:
            a = b = mid
            break
        if (fm > 0) == (flo > 0):
            a, flo = mid, fm
        else:
            b = mid
        if b - a <= xtol + rtol * max(abs(a), abs(b)):
            break
    x = 0.5 * (a + b)
    return BisectResult(x, it, (lo, hi), f(x))


def golden_section(f: Callable[[float], float], lo: float, hi: float, *,
                   tol: float = 1e-10, maxiter: int = 500) -> tuple[float, float]:
    """Minimizer and minimum of a unimodal ``f`` on ``[lo, hi]``."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(maxiter):
        if abs(b - a) <= tol * (1.0 + abs(c) + abs(d)):
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    x = float(0.5 * (a + b))
    return x, float(f(x))
