from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from symred.metrics import ScoreSummary, pearson_r2, summarize


def exact_r2(pred, actual):
    """Independent oracle: squared Pearson correlation in exact rationals."""
    p = [Fraction(x) for x in pred]
    a = [Fraction(x) for x in actual]
    n = len(p)
    mp = sum(p) / n
    ma = sum(a) / n
    cov = sum((x - mp) * (y - ma) for x, y in zip(p, a))
    var_p = sum((x - mp) ** 2 for x in p)
    var_a = sum((y - ma) ** 2 for y in a)
    return cov * cov / (var_p * var_a)


class TestPearsonR2:
    def test_identity_is_one(self):
        assert pearson_r2([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == 1.0

    def test_negation_is_one(self):
        y = np.array([1.0, 2.0, 5.0])
        assert pearson_r2(-y, y) == pytest.approx(1.0)

    def test_hand_example_against_exact_oracle(self):
        pred = [1, 2, 3, 4]
        actual = [1, 2, 2, 4]
        expected = exact_r2(pred, actual)
        assert expected == Fraction(81, 95)
        assert pearson_r2(pred, actual) == pytest.approx(float(expected), abs=1e-12)

    def test_constant_prediction_scores_zero(self):
        assert pearson_r2([4.0, 4.0, 4.0], [1.0, 2.0, 3.0]) == 0.0

    def test_constant_actual_scores_zero(self):
        assert pearson_r2([1.0, 2.0, 3.0], [5.0, 5.0, 5.0]) == 0.0

    def test_length_mismatch_raises(self):
        with pytest.raises(ValueError):
            pearson_r2([1.0, 2.0], [1.0, 2.0, 3.0])

    def test_too_short_raises(self):
        with pytest.raises(ValueError):
            pearson_r2([1.0], [1.0])

    def test_clamped_to_unit_interval(self, rng):
        for _ in range(200):
            p = rng.normal(size=10)
            a = rng.normal(size=10)
            r2 = pearson_r2(p, a)
            assert 0.0 <= r2 <= 1.0

    @given(
        alpha=st.floats(min_value=-1e3, max_value=1e3).filter(
            lambda a: abs(a) > 1e-3
        ),
        beta=st.floats(min_value=-1e3, max_value=1e3),
        seed=st.integers(min_value=0, max_value=2**31),
    )
    @settings(max_examples=200, deadline=None)
    def test_affine_invariance(self, alpha, beta, seed):
        gen = np.random.default_rng(seed)
        p = gen.normal(size=20)
        y = gen.normal(size=20)
        base = pearson_r2(p, y)
        assert pearson_r2(alpha * p + beta, y) == pytest.approx(base, abs=1e-9)


class TestSummarize:
    def test_three_scores(self):
        s = summarize([0.1, 0.2, 0.3])
        assert s.median == pytest.approx(0.2)
        assert s.n_runs == 3

    def test_equal_scores_have_zero_iqr(self):
        s = summarize([0.7] * 5)
        assert s.iqr == 0.0
        assert s.median == pytest.approx(0.7)

    def test_one_through_ten(self):
        # Linear-interpolation quartiles: Q1 at rank 2.25 -> 3.25,
        # Q3 at rank 6.75 -> 7.75, median = (5 + 6) / 2.
        s = summarize(np.arange(1.0, 11.0))
        assert s.median == pytest.approx(5.5)
        assert s.iqr == pytest.approx(4.5)

    def test_single_score(self):
        s = summarize([0.42])
        assert s == ScoreSummary(median=0.42, iqr=0.0, n_runs=1)

    def test_empty_raises(self):
        with pytest.raises(ValueError):
            summarize([])

    @given(seed=st.integers(min_value=0, max_value=2**31))
    @settings(max_examples=100, deadline=None)
    def test_permutation_invariance(self, seed):
        gen = np.random.default_rng(seed)
        scores = gen.normal(size=9)
        base = summarize(scores)
        shuffled = summarize(gen.permutation(scores))
        assert shuffled.median == pytest.approx(base.median, abs=1e-12)
        assert shuffled.iqr == pytest.approx(base.iqr, abs=1e-12)

    def test_median_within_range(self, rng):
        for _ in range(50):
            scores = rng.normal(size=rng.integers(1, 20))
            s = summarize(scores)
            assert scores.min() <= s.median <= scores.max()
            assert s.iqr >= 0.0
