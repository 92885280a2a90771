"""Backend selection for the numerical inner loops.

The compiled extension is used when it imports; set
``PSEUDOPOISSON_PURE=1`` to force the pure-Python fallback.
"""
import os

from . import _fallback

BACKEND = "python"

if not os.environ.get("PSEUDOPOISSON_PURE"):
    try:
        from . import _kernels as _impl
    except ImportError:  # extension not built
        _impl = _fallback
    else:
        BACKEND = "cython"
else:
    _impl = _fallback

poisson_variates = _impl.poisson_variates
exp_loglik_core = _impl.exp_loglik_core
lomax_loglik_core = _impl.lomax_loglik_core
ratio_series = _impl.ratio_series
lomax_weight_stats = _impl.lomax_weight_stats

__all__ = [
    "BACKEND",
    "poisson_variates",
    "exp_loglik_core",
    "lomax_loglik_core",
    "ratio_series",
    "lomax_weight_stats",
]
