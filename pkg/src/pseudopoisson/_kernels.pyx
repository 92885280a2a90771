# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops.

Every function here has a twin in ``_fallback.py`` with identical
semantics; ``kernels.py`` picks one at import.
"""
from cpython.pycapsule cimport PyCapsule_GetPointer, PyCapsule_IsValid
from libc.math cimport exp, log, sqrt, floor, fabs, lgamma, log1p, expm1, INFINITY
from numpy.random cimport bitgen_t

import numpy as np
cimport numpy as cnp

cnp.import_array()

cdef const char* _CAPSULE_NAME = "BitGenerator"

# inversion below this rate, PTRS above
cdef double _INVERSION_LIMIT = 30.0
# log-weights are used above this rate to avoid exp(-a) underflow
cdef double _LOG_WEIGHT_LIMIT = 700.0


cdef inline double _uniform(bitgen_t* bg) noexcept nogil:
    return bg.next_double(bg.state)


cdef long _poisson_inversion(bitgen_t* bg, double lam) noexcept nogil:
    cdef double u = _uniform(bg)
    cdef double p = exp(-lam)
    cdef double s = p
    cdef long x = 0
    while u > s and x < 10000:
        x += 1
        p *= lam / x
        s += p
    return x


cdef long _poisson_ptrs(bitgen_t* bg, double lam) noexcept nogil:
    cdef double slam = sqrt(lam)
    cdef double loglam = log(lam)
    cdef double b = 0.931 + 2.53 * slam
    cdef double a = -0.059 + 0.02483 * b
    cdef double invalpha = 1.1239 + 1.1328 / (b - 3.4)
    cdef double vr = 0.9277 - 3.6224 / (b - 2.0)
    cdef double U, V, us
    cdef long k
    while True:
        U = _uniform(bg) - 0.5
        V = _uniform(bg)
        us = 0.5 - fabs(U)
        k = <long>floor((2.0 * a / us + b) * U + lam + 0.43)
        if us >= 0.07 and V <= vr:
            return k
        if k < 0 or (us < 0.013 and V > us):
            continue
        if (log(V) + log(invalpha) - log(a / (us * us) + b)) <= (
            -lam + k * loglam - lgamma(k + 1.0)
        ):
            return k


def poisson_variates(generator, const double[::1] rates):
    """Draw one Poisson variate per entry of ``rates`` from ``generator``."""
    bit_generator = generator.bit_generator
    capsule = bit_generator.capsule
    if not PyCapsule_IsValid(capsule, _CAPSULE_NAME):
        raise ValueError("invalid bit generator capsule")
    cdef bitgen_t* bg = <bitgen_t*>PyCapsule_GetPointer(capsule, _CAPSULE_NAME)
    cdef Py_ssize_t n = rates.shape[0]
    out = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] view = out
    cdef Py_ssize_t i
    cdef double lam
    with bit_generator.lock, nogil:
        for i in range(n):
            lam = rates[i]
            if lam <= 0.0:
                view[i] = 0
            elif lam < _INVERSION_LIMIT:
                view[i] = _poisson_inversion(bg, lam)
            else:
                view[i] = _poisson_ptrs(bg, lam)
    return out


def exp_loglik_core(const double[::1] values, const double[::1] counts,
                    const double[::1] sums, double beta, double gamma,
                    double delta):
    """beta * sum(c * nu**x) + sum(s * log(rate(x))) over grouped x1 values."""
    cdef Py_ssize_t k, m = values.shape[0]
    cdef double surv, rate, acc = 0.0
    with nogil:
        for k in range(m):
            surv = exp(-gamma * values[k])
            acc += beta * counts[k] * surv
            if sums[k] > 0.0:
                rate = delta + beta * (1.0 - surv)
                if rate <= 0.0:
                    acc = -INFINITY
                    break
                acc += sums[k] * log(rate)
    return acc


def lomax_loglik_core(const double[::1] values, const double[::1] counts,
                      const double[::1] sums, double beta, double gamma,
                      double eta, double delta):
    """Lomax analogue of :func:`exp_loglik_core`."""
    cdef Py_ssize_t k, m = values.shape[0]
    cdef double surv, rate, acc = 0.0
    with nogil:
        for k in range(m):
            surv = exp(-eta * log1p(values[k] / gamma))
            acc += beta * counts[k] * surv
            if sums[k] > 0.0:
                rate = delta + beta * (1.0 - surv)
                if rate <= 0.0:
                    acc = -INFINITY
                    break
                acc += sums[k] * log(rate)
    return acc


cdef inline double _weight(double a, long i, double prev, bint scaled,
                           bint use_log) noexcept nogil:
    if use_log:
        return exp(i * log(a) - lgamma(i + 1.0) - (a if scaled else 0.0))
    if i == 0:
        return exp(-a) if scaled else 1.0
    return prev * a / i


def ratio_series(double g, double eta, double a, double shift, bint scaled,
                 double rel_tol, long max_terms):
    """sum_i (g/(g+shift+i))**eta * w_i with w_i = a**i/i! (times e^-a if scaled).

    Returns ``(value, terms_used)``; ``terms_used`` is -1 on non-convergence.
    """
    cdef double total = 0.0, term, w = 0.0
    cdef long i, small = 0, n_used = -1
    cdef bint use_log = a > _LOG_WEIGHT_LIMIT
    with nogil:
        for i in range(max_terms):
            w = _weight(a, i, w, scaled, use_log)
            term = w * exp(-eta * log1p((shift + i) / g))
            total += term
            if i > a and fabs(term) < rel_tol * fabs(total):
                small += 1
                if small >= 3:
                    n_used = i + 1
                    break
            else:
                small = 0
    return total, n_used


def lomax_weight_stats(double g, double eta, double a, double rel_tol,
                       long max_terms):
    """Poisson(a) expectations of the Lomax survival factor r(x) = (g/(g+x))**eta.

    Returns ``(mean, drop, variance, terms_used)`` where
    ``mean = E r(X)``, ``drop = E[r(X) - r(X+1)]`` and
    ``variance = E (r(X) - mean)**2``, each summed without cancellation.
    """
    cdef double mean = 0.0, drop = 0.0, var = 0.0, w = 0.0, r, dev
    cdef long i, n_used = -1, small = 0
    cdef bint use_log = a > _LOG_WEIGHT_LIMIT
    with nogil:
        for i in range(max_terms):
            w = _weight(a, i, w, True, use_log)
            r = exp(-eta * log1p(i / g))
            mean += w * r
            drop += w * r * (-expm1(-eta * log1p(1.0 / (g + i))))
            if i > a and w < rel_tol * 1e-6:
                small += 1
                if small >= 3:
                    n_used = i + 1
                    break
            else:
                small = 0
        w = 0.0
        for i in range(n_used if n_used > 0 else 0):
            w = _weight(a, i, w, True, use_log)
            dev = exp(-eta * log1p(i / g)) - mean
            var += w * dev * dev
    return mean, drop, var, n_used
