"""Pure-Python twins of the routines in ``_kernels.pyx``.

Uniforms are drawn with ``Generator.random()``, which consumes the bit
generator exactly like the compiled path, so both produce identical
variates for a given seed.
"""
import math

import numpy as np

_INVERSION_LIMIT = 30.0
_LOG_WEIGHT_LIMIT = 700.0


def _poisson_inversion(uniform, lam):
    u = uniform()
    p = math.exp(-lam)
    s = p
    x = 0
    while u > s and x < 10000:
        x += 1
        p *= lam / x
        s += p
    return x


def _poisson_ptrs(uniform, lam):
    slam = math.sqrt(lam)
    loglam = math.log(lam)
    b = 0.931 + 2.53 * slam
    a = -0.059 + 0.02483 * b
    invalpha = 1.1239 + 1.1328 / (b - 3.4)
    vr = 0.9277 - 3.6224 / (b - 2.0)
    while True:
        U = uniform() - 0.5
        V = uniform()
        us = 0.5 - abs(U)
        k = math.floor((2.0 * a / us + b) * U + lam + 0.43)
        if us >= 0.07 and V <= vr:
            return k
        if k < 0 or (us < 0.013 and V > us):
            continue
        if (math.log(V) + math.log(invalpha) - math.log(a / (us * us) + b)) <= (
            -lam + k * loglam - math.lgamma(k + 1.0)
        ):
            return k


def poisson_variates(generator, rates):
    uniform = generator.random
    out = np.empty(len(rates), dtype=np.int64)
    for i, lam in enumerate(rates):
        lam = float(lam)
        if lam <= 0.0:
            out[i] = 0
        elif lam < _INVERSION_LIMIT:
            out[i] = _poisson_inversion(uniform, lam)
        else:
            out[i] = _poisson_ptrs(uniform, lam)
    return out


def _loglik_core(values, counts, sums, beta, delta, surv):
    rate = delta + beta * (1.0 - surv)
    active = sums > 0.0
    if np.any(rate[active] <= 0.0):
        return -math.inf
    return float(beta * np.dot(counts, surv) + np.dot(sums[active], np.log(rate[active])))


def exp_loglik_core(values, counts, sums, beta, gamma, delta):
    return _loglik_core(values, counts, sums, beta, delta, np.exp(-gamma * values))


def lomax_loglik_core(values, counts, sums, beta, gamma, eta, delta):
    surv = np.exp(-eta * np.log1p(values / gamma))
    return _loglik_core(values, counts, sums, beta, delta, surv)


def _weights(a, scaled):
    use_log = a > _LOG_WEIGHT_LIMIT
    log_a = math.log(a) if use_log else 0.0
    w = 0.0
    i = 0
    while True:
        if use_log:
            w = math.exp(i * log_a - math.lgamma(i + 1.0) - (a if scaled else 0.0))
        elif i == 0:
            w = math.exp(-a) if scaled else 1.0
        else:
            w = w * a / i
        yield i, w
        i += 1


def ratio_series(g, eta, a, shift, scaled, rel_tol, max_terms):
    total = 0.0
    small = 0
    for i, w in _weights(a, scaled):
        if i >= max_terms:
            return total, -1
        term = w * math.exp(-eta * math.log1p((shift + i) / g))
        total += term
        if i > a and abs(term) < rel_tol * abs(total):
            small += 1
            if small >= 3:
                return total, i + 1
        else:
            small = 0


def lomax_weight_stats(g, eta, a, rel_tol, max_terms):
    mean = drop = 0.0
    small = 0
    n_used = -1
    for i, w in _weights(a, True):
        if i >= max_terms:
            break
        r = math.exp(-eta * math.log1p(i / g))
        mean += w * r
        drop += w * r * (-math.expm1(-eta * math.log1p(1.0 / (g + i))))
        if i > a and w < rel_tol * 1e-6:
            small += 1
            if small >= 3:
                n_used = i + 1
                break
        else:
            small = 0
    var = 0.0
    if n_used > 0:
        for i, w in _weights(a, True):
            if i >= n_used:
                break
            dev = math.exp(-eta * math.log1p(i / g)) - mean
            var += w * dev * dev
    return mean, drop, var, n_used
