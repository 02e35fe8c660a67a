import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lcintent.errors import EmptyInput, LengthMismatch
from lcintent.metrics import compute_metrics, confusion_matrix, macro_f1, per_class_f1, report_from_confusion


def brute_f1(cm):
    """Per-class F1 from precision and recall, one class at a time."""
    out = []
    for c in range(len(cm)):
        tp = cm[c][c]
        pred = sum(cm[r][c] for r in range(len(cm)))
        true = sum(cm[c])
        p = tp / pred if pred else 0.0
        r = tp / true if true else 0.0
        out.append(2 * p * r / (p + r) if p + r else 0.0)
    return out


def expand(cm):
    """Label and prediction vectors that produce confusion matrix ``cm``."""
    y, p = [], []
    for t in range(3):
        for q in range(3):
            y += [t] * int(cm[t][q])
            p += [q] * int(cm[t][q])
    return np.array(p), np.array(y)


def test_all_predicted_no_change():
    y = np.repeat([0, 1, 2], 10)
    r = compute_metrics(np.zeros(30, dtype=int), y)
    np.testing.assert_allclose(r.f1, [0.5, 0.0, 0.0])
    assert r.macro_f1 == pytest.approx(1 / 6)
    assert r.accuracy == pytest.approx(1 / 3)


def test_symmetric_confusion():
    cm = np.array([[8, 1, 1], [1, 8, 1], [1, 1, 8]])
    r = compute_metrics(*expand(cm))
    assert np.array_equal(r.confusion, cm)
    assert r.accuracy == pytest.approx(0.8)
    np.testing.assert_allclose(r.precision, 0.8)
    np.testing.assert_allclose(r.recall, 0.8)
    assert r.macro_f1 == pytest.approx(0.8)


def test_perfect_predictions():
    y = np.array([0, 1, 2, 2, 0])
    r = compute_metrics(y, y)
    assert r.accuracy == 1.0 and r.macro_f1 == 1.0 and r.n == 5


def test_absent_class_scores_zero():
    y = np.array([0, 0, 1, 1])
    np.testing.assert_allclose(compute_metrics(y, y).f1, [1.0, 1.0, 0.0])


def test_confusion_orientation():
    cm = confusion_matrix([1], [0])
    assert cm[0, 1] == 1 and cm.sum() == 1


def test_errors():
    with pytest.raises(LengthMismatch):
        compute_metrics([0, 1], [0])
    with pytest.raises(EmptyInput):
        compute_metrics([], [])


def test_report_dict_keys():
    d = compute_metrics([0, 1, 2], [0, 1, 1]).to_dict()
    assert set(d) == {"accuracy", "macro_f1", "f1", "precision", "recall", "confusion"}


@pytest.mark.parametrize("seed", range(10))
def test_macro_f1_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    for _ in range(100):
        cm = rng.integers(0, 20, size=(3, 3)) * (rng.random((3, 3)) < 0.8)
        if cm.sum() == 0:
            continue
        want = brute_f1(cm.tolist())
        np.testing.assert_allclose(report_from_confusion(cm).f1, want, rtol=1e-12, atol=0)
        assert macro_f1(*expand(cm)) == pytest.approx(sum(want) / 3, rel=1e-12)


def test_stacked_confusions():
    rng = np.random.default_rng(0)
    cms = rng.integers(0, 9, size=(4, 5, 3, 3))
    out = per_class_f1(cms)
    assert out.shape == (4, 5, 3)
    np.testing.assert_allclose(out[2, 3], brute_f1(cms[2, 3].tolist()), rtol=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 2), st.integers(0, 2)), min_size=1, max_size=60))
def test_metric_ranges(pairs):
    p, y = map(np.array, zip(*pairs))
    r = compute_metrics(p, y)
    assert 0 <= r.macro_f1 <= 1 and 0 <= r.accuracy <= 1
    assert r.n == len(pairs)
    assert r.macro_f1 == pytest.approx(r.f1.mean())
