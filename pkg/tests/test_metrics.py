import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from relsift.errors import DataError
from relsift.metrics import (
    ConfusionCounts,
    RatingsMatrix,
    cohen_kappa,
    format_metric_report,
    icc_absolute,
    percent_agreement,
    prf,
)


class TestPrf:
    def test_hand_fixture(self):
        # oracle: the definitions themselves, evaluated by hand
        counts = ConfusionCounts(tp=87, fp=13, fn=12, tn=88)
        expected_p = 87 / 100
        expected_r = 87 / 99
        expected_f1 = 2 * expected_p * expected_r / (expected_p + expected_r)
        result = prf(counts)
        assert result.precision == pytest.approx(expected_p, abs=1e-12)
        assert result.recall == pytest.approx(expected_r, abs=1e-12)
        assert result.f1 == pytest.approx(expected_f1, abs=1e-12)
        assert result.accuracy == pytest.approx(175 / 200, abs=1e-12)
        assert (round(result.precision, 3), round(result.recall, 3)) == (0.870, 0.879)
        assert (round(result.f1, 3), round(result.accuracy, 3)) == (0.874, 0.875)

    def test_perfect(self):
        result = prf(ConfusionCounts(tp=5, fp=0, fn=0, tn=3))
        assert (result.precision, result.recall, result.f1) == (1.0, 1.0, 1.0)
        assert result.flags == ()

    def test_zero_tp_with_fp(self):
        result = prf(ConfusionCounts(tp=0, fp=4, fn=2, tn=6))
        assert result.precision == 0.0

    def test_zero_denominator_convention(self):
        result = prf(ConfusionCounts(tp=0, fp=0, fn=3, tn=5))
        assert result.precision == 0.0
        assert "precision" in result.flags
        assert "f1" in result.flags

    def test_empty_evaluation(self):
        with pytest.raises(DataError, match="empty evaluation"):
            prf(ConfusionCounts(0, 0, 0, 0))

    def test_negative_counts_rejected(self):
        with pytest.raises(DataError):
            ConfusionCounts(tp=-1, fp=0, fn=0, tn=1)

    @given(st.tuples(*(st.integers(0, 50) for _ in range(4))))
    def test_f1_between_precision_and_recall(self, counts):
        tp, fp, fn, tn = counts
        if tp + fp + fn + tn == 0:
            return
        result = prf(ConfusionCounts(tp, fp, fn, tn))
        lo, hi = sorted((result.precision, result.recall))
        assert lo - 1e-12 <= result.f1 <= hi + 1e-12

    def test_from_pairs(self):
        pairs = [(1, 1), (1, -1), (-1, 1), (-1, -1)]
        assert ConfusionCounts.from_pairs(pairs) == ConfusionCounts(1, 1, 1, 1)


class TestAgreement:
    def test_identical_sequences(self):
        assert percent_agreement([1, 0, 1], [1, 0, 1]) == 1.0
        assert cohen_kappa([1, 0, 1], [1, 0, 1]) == 1.0

    def test_total_disagreement(self):
        assert percent_agreement([1, 0], [0, 1]) == 0.0

    def test_87_of_100(self):
        a = [1] * 100
        b = [1] * 87 + [0] * 13
        assert percent_agreement(a, b) == pytest.approx(0.87, abs=1e-12)

    def test_kappa_hand_fixture(self):
        # po = 4/6, marginals 0.5 each side -> pe = 1/2, kappa = 1/3
        a = [1, 1, 0, 0, 1, 0]
        b = [1, 1, 0, 0, 0, 1]
        assert cohen_kappa(a, b) == pytest.approx(1 / 3, abs=1e-12)

    def test_kappa_chance_level(self):
        # po = 0.5 equals pe = 0.5 exactly
        a = [1, 1, 0, 0]
        b = [1, 0, 1, 0]
        assert cohen_kappa(a, b) == pytest.approx(0.0, abs=1e-12)

    def test_kappa_degenerate_constant(self):
        assert cohen_kappa([1, 1, 1], [1, 1, 1]) == 1.0
        assert cohen_kappa([1, 1], [0, 0]) == 0.0

    def test_errors(self):
        with pytest.raises(DataError):
            cohen_kappa([1], [1, 0])
        with pytest.raises(DataError):
            cohen_kappa([], [])
        with pytest.raises(DataError):
            percent_agreement([], [])

    @given(
        st.lists(st.sampled_from([0, 1, 2]), min_size=1, max_size=40),
        st.randoms(use_true_random=False),
    )
    def test_kappa_at_most_agreement_and_symmetric(self, a, rnd):
        b = [rnd.choice([0, 1, 2]) for _ in a]
        kappa = cohen_kappa(a, b)
        assert kappa <= percent_agreement(a, b) + 1e-12
        assert kappa == pytest.approx(cohen_kappa(b, a), abs=1e-12)
        assert (kappa == 1.0) == (a == b)

    def test_kappa_relabeling_invariance(self):
        a = [0, 1, 2, 1, 0, 2, 2]
        b = [0, 2, 2, 1, 1, 2, 0]
        relabel = {0: "x", 1: "y", 2: "z"}
        assert cohen_kappa(a, b) == pytest.approx(
            cohen_kappa([relabel[v] for v in a], [relabel[v] for v in b]), abs=1e-12
        )


class TestIcc:
    def test_identical_columns(self):
        matrix = RatingsMatrix(np.array([[1.0, 1.0], [2.0, 2.0], [5.0, 5.0]]))
        assert icc_absolute(matrix) == pytest.approx(1.0, abs=1e-12)

    def test_hand_anova_fixture(self):
        # rater B = rater A + 1: MSR=2, MSC=1.5, MSE=0 -> ICC = 2 / (2 + 1) = 2/3
        values = np.array([[1.0, 2.0], [2.0, 3.0], [3.0, 4.0]])
        n, k = values.shape
        grand = values.mean()
        msr = k * ((values.mean(axis=1) - grand) ** 2).sum() / (n - 1)
        msc = n * ((values.mean(axis=0) - grand) ** 2).sum() / (k - 1)
        resid = values - values.mean(axis=1)[:, None] - values.mean(axis=0)[None, :] + grand
        mse = (resid**2).sum() / ((n - 1) * (k - 1))
        assert (msr, msc, mse) == pytest.approx((2.0, 1.5, 0.0), abs=1e-12)
        expected = (msr - mse) / (msr + (k - 1) * mse + (k / n) * (msc - mse))
        got = icc_absolute(RatingsMatrix(values))
        assert got == pytest.approx(expected, abs=1e-12)
        assert got == pytest.approx(2 / 3, abs=1e-10)

    def test_column_swap_invariance(self):
        values = np.array([[1.0, 2.0], [2.0, 3.0], [4.0, 3.5]])
        assert icc_absolute(RatingsMatrix(values)) == pytest.approx(
            icc_absolute(RatingsMatrix(values[:, ::-1])), abs=1e-12
        )

    def test_whole_matrix_shift_invariance(self):
        rng = np.random.default_rng(7)
        values = rng.normal(size=(8, 3)) + np.arange(8)[:, None]
        base = icc_absolute(RatingsMatrix(values))
        assert icc_absolute(RatingsMatrix(values + 3.7)) == pytest.approx(base, abs=1e-10)

    def test_single_column_shift_strictly_decreases(self):
        # start from equal column means so any one-rater shift adds rater variance
        rng = np.random.default_rng(11)
        values = rng.normal(size=(10, 3)) + np.arange(10)[:, None]
        values = values - values.mean(axis=0, keepdims=True)
        base = icc_absolute(RatingsMatrix(values))
        shifted = values.copy()
        shifted[:, 1] += 2.0
        assert icc_absolute(RatingsMatrix(shifted)) < base - 1e-6

    def test_zero_between_item_variance(self):
        with pytest.raises(DataError, match="undefined ICC"):
            icc_absolute(RatingsMatrix(np.array([[2.0, 2.0], [2.0, 2.0]])))

    def test_shape_validation(self):
        with pytest.raises(DataError):
            RatingsMatrix(np.array([[1.0, 2.0]]))  # one item
        with pytest.raises(DataError):
            RatingsMatrix(np.array([[1.0], [2.0]]))  # one rater
        with pytest.raises(DataError):
            RatingsMatrix(np.array([[1.0, np.nan], [2.0, 1.0]]))


def test_metric_report_format():
    text = format_metric_report({"precision": 0.5, "icc_absolute": 0.9}, title="demo")
    assert "precision\t0.500000" in text
    assert "ICC = (MSR - MSE)" in text
