import numpy as np
import pytest

from pseudopoisson.data import BivariateSample, ExpParams, LomaxParams


def simulate(p, n, seed):
    """Reference sampler built on numpy's own Poisson generator."""
    rng = np.random.default_rng(seed)
    x1 = rng.poisson(p.alpha, n)
    x2 = rng.poisson(p.rate(x1.astype(float)))
    return BivariateSample(x1, x2)


def random_exp_params(rng, alpha=(0.1, 8.0), beta=(-30.0, 30.0), gamma=(0.05, 5.0)):
    a = rng.uniform(*alpha)
    b = 0.0
    while abs(b) < 1e-3:
        b = rng.uniform(*beta)
    g = rng.uniform(*gamma)
    d = max(-b, 0.0) + rng.uniform(0.0, 5.0)
    return ExpParams(a, b, g, d)


def random_lomax_params(rng, alpha=(0.1, 8.0), beta=(-30.0, 30.0), gamma=(0.05, 5.0), eta=(0.3, 5.0)):
    e = random_exp_params(rng, alpha, beta, gamma)
    return LomaxParams(e.alpha, e.beta, e.gamma, rng.uniform(*eta), e.delta)


@pytest.fixture
def ref_exp_truth():
    return ExpParams(5.0, -20.0, 0.5, 25.0)

