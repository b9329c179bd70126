import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from feverscreen.errors import DimensionError, UndefinedCorrelationError, UndefinedRateError
from feverscreen.metrics import (ConfusionMatrix, accuracy, confusion_matrix, fpr,
                                 regression_r, specificity, split_result, tpr)

# Reference ROC table: (multiset, false positive rate, true positive rate)
ROC_TABLE = [("Training", 0.033, 0.967), ("Testing", 0.010, 0.990),
             ("Validation", 0.038, 0.962), ("Overall training performance", 0.030, 0.970)]
# counts per 1000 implied by those rates: (tp, fn) for TPR, (fp, tn) for FPR
IMPLIED = [(967, 33), (990, 10), (962, 38), (970, 30)]


def naive_counts(pred, lab):
    tp = tn = fp = fn = 0
    for p, y in zip(pred, lab):
        if p and y:
            tp += 1
        elif not p and not y:
            tn += 1
        elif p:
            fp += 1
        else:
            fn += 1
    return tp, tn, fp, fn


def pearson_two_pass(a, b):
    n = len(a)
    ma, mb = math.fsum(a) / n, math.fsum(b) / n
    cov = math.fsum((x - ma) * (y - mb) for x, y in zip(a, b))
    va = math.fsum((x - ma) ** 2 for x in a)
    vb = math.fsum((y - mb) ** 2 for y in b)
    return cov / math.sqrt(va * vb)


def test_confusion_examples():
    assert confusion_matrix([1, 1, 0], [1, 1, 0]) == ConfusionMatrix(2, 1, 0, 0)
    cm = confusion_matrix([0, 0, 1], [1, 1, 0])
    assert cm.tp == cm.tn == 0 and cm.total == 3


def test_confusion_errors():
    with pytest.raises(DimensionError):
        confusion_matrix([], [])
    with pytest.raises(DimensionError):
        confusion_matrix([1, 0], [1])


def test_confusion_matches_counting_oracle(rng):
    for _ in range(500):
        n = int(rng.integers(1, 300))
        p, y = rng.integers(0, 2, n), rng.integers(0, 2, n)
        cm = confusion_matrix(p, y)
        assert (cm.tp, cm.tn, cm.fp, cm.fn) == naive_counts(p, y)


def test_rate_examples():
    assert accuracy(ConfusionMatrix(50, 47, 2, 1)) == 0.97
    assert accuracy(ConfusionMatrix(3, 4, 0, 0)) == 1.0
    assert accuracy(ConfusionMatrix(0, 0, 3, 4)) == 0.0
    assert tpr(ConfusionMatrix(tp=5)) == 1.0
    assert specificity(ConfusionMatrix(tn=970, fp=30)) == 0.970
    assert specificity(ConfusionMatrix(tn=4)) == 1.0
    assert specificity(ConfusionMatrix(fp=4)) == 0.0


@pytest.mark.parametrize("fn", [accuracy, tpr, specificity, fpr])
def test_undefined_rates(fn):
    with pytest.raises(UndefinedRateError):
        fn(ConfusionMatrix())


def test_tpr_undefined_without_positives():
    with pytest.raises(UndefinedRateError):
        tpr(ConfusionMatrix(tn=3, fp=1))


@pytest.mark.parametrize("row,counts", list(zip(ROC_TABLE, IMPLIED)))
def test_reference_roc_table_rows(row, counts):
    _, want_fpr, want_tpr = row
    hit, miss = counts
    assert tpr(ConfusionMatrix(tp=hit, fn=miss)) == want_tpr
    assert fpr(ConfusionMatrix(fp=miss, tn=hit)) == want_fpr
    assert specificity(ConfusionMatrix(fp=miss, tn=hit)) == want_tpr


def random_matrices(rng, k=1000):
    for _ in range(k):
        yield ConfusionMatrix(*(int(v) for v in rng.integers(0, 500, 4) + 1))


def test_rates_match_counting_oracle(rng):
    for cm in random_matrices(rng):
        assert accuracy(cm) == float(Fraction(cm.tp + cm.tn, cm.tp + cm.tn + cm.fp + cm.fn))
        assert tpr(cm) == float(Fraction(cm.tp, cm.tp + cm.fn))
        assert fpr(cm) == float(Fraction(cm.fp, cm.fp + cm.tn))
        assert specificity(cm) == float(Fraction(cm.tn, cm.tn + cm.fp))


def test_fpr_plus_specificity_is_one(rng):
    for cm in random_matrices(rng):
        assert fpr(cm) + specificity(cm) == pytest.approx(1.0, abs=1e-15)


@given(st.tuples(*[st.integers(0, 10**6)] * 4).filter(lambda t: min(t[0] + t[3], t[1] + t[2]) > 0),
       st.integers(1, 1000))
def test_rates_scale_invariant(counts, k):
    a = ConfusionMatrix(*counts)
    b = ConfusionMatrix(*(c * k for c in counts))
    for fn in (accuracy, tpr, fpr, specificity):
        assert fn(a) == fn(b)


def test_regression_examples():
    t = np.array([0.0, 1.0, 1.0, 0.0, 0.5])
    assert regression_r(t, t) == 1.0
    assert regression_r(-t, t) == -1.0
    with pytest.raises(UndefinedCorrelationError):
        regression_r([1.0, 1.0, 1.0], [0.0, 1.0, 0.0])
    with pytest.raises(UndefinedCorrelationError):
        regression_r([1.0], [1.0])
    with pytest.raises(DimensionError):
        regression_r([1.0, 2.0], [1.0, 2.0, 3.0])


def test_regression_matches_two_pass_oracle(rng):
    for _ in range(100):
        n = int(rng.integers(2, 500))
        a, b = rng.normal(size=n), rng.normal(size=n) + rng.normal() * rng.normal(size=n)
        assert regression_r(a, b) == pytest.approx(pearson_two_pass(list(a), list(b)), abs=1e-12)


def test_regression_affine_invariance(rng):
    a, b = rng.normal(size=50), rng.normal(size=50)
    r = regression_r(a, b)
    assert regression_r(3 * a + 7, b) == pytest.approx(r, abs=1e-12)
    assert regression_r(-2 * a, b) == pytest.approx(-r, abs=1e-12)


def test_split_result_marks_undefined_rates():
    res = split_result([0.9, 0.8, 0.7], [1, 1, 1], 0.5)
    assert res.accuracy == 1.0 and res.tpr == 1.0
    assert res.fpr is None and res.specificity is None and res.regression_r is None


def test_split_result_threshold_inclusive():
    res = split_result([0.5, 0.49], [1, 0], 0.5)
    assert res.confusion == ConfusionMatrix(tp=1, tn=1)
