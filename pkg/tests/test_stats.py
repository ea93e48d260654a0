import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from densitylab.errors import SupportMismatch
from densitylab.stats import compare_distributions, total_variation


def test_tv_identical():
    p = np.array([0.2, 0.3, 0.5])
    r = compare_distributions(p, p, "tv")
    assert r.statistic == 0.0 and r.passed


def test_tv_disjoint():
    assert total_variation([1, 0], [0, 1]) == 1.0
    assert not compare_distributions([1, 0], [0, 1], "tv").passed


def test_chi_square_uniform():
    gen = np.random.default_rng(77)
    r = compare_distributions(gen.integers(0, 8, 10_000), np.ones(8) / 8, "chi2")
    assert r.passed and r.sizes == (10_000, 8) and r.threshold == 0.01


def test_chi_square_rejects_wrong_weights():
    gen = np.random.default_rng(78)
    w = np.array([0.3] + [0.1] * 7)
    assert not compare_distributions(gen.integers(0, 8, 10_000), w, "chi2").passed


def test_ks_same_and_different():
    gen = np.random.default_rng(79)
    a, b = gen.normal(size=5000), gen.normal(size=5000)
    assert compare_distributions(a, b, "ks").passed
    assert not compare_distributions(a, b + 0.3, "ks").passed


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 20))
def test_symmetry(seed, n):
    gen = np.random.default_rng(seed)
    p, q = gen.dirichlet(np.ones(n)), gen.dirichlet(np.ones(n))
    assert compare_distributions(p, q, "tv").statistic == compare_distributions(q, p, "tv").statistic
    a, b = gen.normal(size=50), gen.normal(size=70)
    ab, ba = compare_distributions(a, b, "ks"), compare_distributions(b, a, "ks")
    assert ab.statistic == ba.statistic and ab.p_value == pytest.approx(ba.p_value)
    tv = compare_distributions(p, q, "tv").statistic
    assert 0 <= tv <= 1


def test_support_errors():
    with pytest.raises(SupportMismatch):
        total_variation([0.5, 0.5], [1.0])
    with pytest.raises(SupportMismatch):
        compare_distributions([], [1.0], "ks")
    with pytest.raises(SupportMismatch):
        compare_distributions(np.array([0, 9]), np.ones(8) / 8, "chi2")
    with pytest.raises(SupportMismatch):
        compare_distributions(np.array([0, 1]), np.array([1.0, 0.0]), "chi2")


def test_unknown_kind():
    with pytest.raises(ValueError):
        compare_distributions([1], [1], "anderson")


def test_report_serializes():
    d = compare_distributions([0.5, 0.5], [0.5, 0.5], "tv").to_dict()
    assert d["kind"] == "tv" and d["sizes"] == [2, 2]
