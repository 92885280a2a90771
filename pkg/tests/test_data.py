import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pseudopoisson.data import (
    BivariateSample,
    ExpParams,
    FitResult,
    LomaxParams,
    ModelSpec,
    aic,
    all_specs,
    dispersion_index,
    pearson_correlation,
    read_csv,
    sample_moments,
    write_csv,
)
from pseudopoisson.errors import (
    AdmissibilityError,
    DataError,
    InsufficientDataError,
    UndefinedStatisticError,
    UsageError,
)

from conftest import simulate

pairs_strategy = st.lists(st.tuples(st.integers(0, 40), st.integers(0, 40)), min_size=2, max_size=60)


def test_sample_moments_two_points():
    m = sample_moments(BivariateSample.from_pairs([(0, 0), (2, 4)]))
    assert (m.M1, m.M2, m.S12, m.S22) == (1.0, 2.0, 2.0, 4.0)


def test_sample_moments_constant():
    m = sample_moments(BivariateSample.from_pairs([(3, 5)] * 4))
    assert m.S12 == 0.0 and m.S22 == 0.0


def test_sample_moments_requires_two_pairs():
    with pytest.raises(InsufficientDataError):
        BivariateSample.from_pairs([(1, 1)])


def test_simulated_correlation_matches_model(ref_exp_truth):
    s = simulate(ref_exp_truth, 10_000, seed=11)
    assert pearson_correlation(s) == pytest.approx(-0.598, abs=0.02)


def test_dispersion_index_examples():
    assert dispersion_index([3, 3, 3]) == 0.0
    assert dispersion_index([0, 2]) == 1.0
    x = np.random.default_rng(0).poisson(5.0, 50_000)
    assert dispersion_index(x) == pytest.approx(1.0, abs=0.05)
    with pytest.raises(UndefinedStatisticError):
        dispersion_index([0, 0])


def test_pearson_examples():
    assert pearson_correlation(BivariateSample.from_pairs([(0, 0), (1, 1), (2, 2)])) == pytest.approx(1.0)
    assert pearson_correlation(BivariateSample.from_pairs([(0, 2), (1, 1), (2, 0)])) == pytest.approx(-1.0)
    with pytest.raises(UndefinedStatisticError):
        pearson_correlation(BivariateSample.from_pairs([(1, 0), (1, 3)]))


@given(pairs_strategy, st.randoms())
def test_moments_permutation_invariant(pairs, rnd):
    shuffled = list(pairs)
    rnd.shuffle(shuffled)
    a = sample_moments(BivariateSample.from_pairs(pairs))
    b = sample_moments(BivariateSample.from_pairs(shuffled))
    for x, y in zip((a.M1, a.M2, a.S12, a.S22), (b.M1, b.M2, b.S12, b.S22)):
        assert x == pytest.approx(y, rel=1e-12, abs=1e-12)


@given(pairs_strategy)
def test_mirror_symmetry(pairs):
    s = BivariateSample.from_pairs(pairs)
    assert sample_moments(s).S12 == pytest.approx(sample_moments(s.mirrored()).S12, abs=1e-12)
    try:
        r = pearson_correlation(s)
    except UndefinedStatisticError:
        return
    assert r == pytest.approx(pearson_correlation(s.mirrored()), abs=1e-12)
    assert -1.0 <= r <= 1.0


@given(pairs_strategy)
def test_moments_recompute_exactly(pairs):
    s = BivariateSample.from_pairs(pairs)
    assert sample_moments(s) == sample_moments(BivariateSample.from_pairs(s.pairs))
    assert sample_moments(s).S22 >= 0


@settings(max_examples=200)
@given(st.floats(0.01, 20), st.floats(-30, 30).filter(lambda b: abs(b) > 1e-6), st.floats(0.01, 20),
       st.floats(0.0, 10), st.floats(0.1, 5))
def test_rate_at_zero_is_delta(alpha, beta, gamma, extra, eta):
    delta = max(-beta, 0.0) + extra
    if beta > 0 and delta == 0 and gamma < 1e-3:
        return
    assert ExpParams(alpha, beta, gamma, delta).rate(0) == delta
    assert LomaxParams(alpha, beta, gamma, eta, delta).rate(0) == delta


def test_admissibility():
    with pytest.raises(AdmissibilityError):
        ExpParams(1.0, -2.0, 1.0, 1.0)  # delta < -beta
    with pytest.raises(AdmissibilityError):
        ExpParams(1.0, 0.0, 1.0, 1.0)
    with pytest.raises(AdmissibilityError):
        LomaxParams(1.0, 1.0, 1.0, -1.0, 1.0)
    p = ExpParams(1.0, -2.0, 1.0, 2.0)  # boundary delta = -beta is allowed
    assert p.rate(10) > 0
    assert 0 < p.nu < 1


def test_spec_constraints_and_k():
    expect = {"exp": {"full": 4, "c1": 3, "c2": 3, "c3": 3, "c4": 2, "c5": 2},
              "lomax": {"full": 5, "eta1": 4, "c1": 3, "c2": 3, "c3": 3, "c4": 2, "c5": 2}}
    for s in all_specs():
        assert s.k == expect[s.family][s.case]
        assert s.k == len(s.free)
    assert ModelSpec("exp", "c4", -1).fixed == {"beta": -1.0, "gamma": 1.0}
    assert ModelSpec("exp", "c5").fixed == {"gamma": 1.0, "delta": 0.0}
    assert ModelSpec("lomax", "c3").fixed == {"eta": 1.0, "delta": 0.0}
    assert ModelSpec("lomax", "eta1").fixed == {"eta": 1.0}
    with pytest.raises(UsageError):
        ModelSpec("exp", "eta1")
    with pytest.raises(UsageError):
        ModelSpec("exp", "c1")


def test_nesting():
    full = ModelSpec("lomax")
    assert ModelSpec("lomax", "eta1").is_nested_in(full)
    assert ModelSpec("lomax", "c4", 1).is_nested_in(ModelSpec("lomax", "c1", 1))
    assert not ModelSpec("lomax", "c4", 1).is_nested_in(ModelSpec("lomax", "c1", -1))
    assert ModelSpec("exp", "c5").is_nested_in(ModelSpec("exp", "c3"))
    assert not ModelSpec("exp", "full").is_nested_in(ModelSpec("exp", "full"))
    assert not ModelSpec("exp", "c2").is_nested_in(ModelSpec("lomax"))


def test_parse():
    assert ModelSpec.parse("exp:c4", "-") == ModelSpec("exp", "c4", -1)
    assert ModelSpec.parse("lomax:eta1") == ModelSpec("lomax", "eta1")
    assert ModelSpec.parse("exp") == ModelSpec("exp", "full")


def test_aic():
    assert aic(0.0, 2) == 4.0
    assert aic(-10.0, 3) > aic(-5.0, 3)
    assert aic(-math.inf, 3) == math.inf
    assert 1867.268 - 1869.831 == pytest.approx(aic(-931.634, 2) - aic(-930.9155, 4), abs=1e-9)


def test_csv_roundtrip_and_mirror(tmp_path):
    s = BivariateSample.from_pairs([(0, 1), (2, 3), (4, 0)])
    path = tmp_path / "d.csv"
    write_csv(s, path)
    assert read_csv(path) == s
    assert read_csv(path, mirror=True) == s.mirrored()
    path.write_text("1,2\n3,4\n")
    assert read_csv(path).pairs == [(1, 2), (3, 4)]


def test_csv_errors(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("x1,x2\n1,2\n3,a\n")
    with pytest.raises(DataError, match=":3:"):
        read_csv(p)
    p.write_text("")
    with pytest.raises(DataError):
        read_csv(p)
    p.write_text("1,2,3\n")
    with pytest.raises(DataError, match=":1:"):
        read_csv(p)
    with pytest.raises(DataError):
        read_csv(tmp_path / "missing.csv")


def test_fitresult_roundtrip():
    f = FitResult(ModelSpec("exp", "c1", -1), "mle", {"alpha": 1.0, "beta": -1.0, "gamma": 0.5, "delta": 2.0},
                  loglik=-math.inf, aic=math.inf, rho=-0.1, n=10, sample_digest="abc",
                  diagnostics={"converged": True, "boundary": []})
    g = FitResult.from_dict(f.to_dict())
    assert g == f
    assert g.params == ExpParams(1.0, -1.0, 0.5, 2.0)


def test_sample_validation():
    with pytest.raises(DataError):
        BivariateSample([1, -1], [0, 0])
    with pytest.raises(DataError):
        BivariateSample([1.5, 1], [0, 0])
    with pytest.raises(DataError):
        BivariateSample([1, 2, 3], [0, 0])
    s = BivariateSample([1, 2], [0, 0])
    with pytest.raises(ValueError):
        s.x1[0] = 5
