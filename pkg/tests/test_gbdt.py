import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lcintent.errors import EmptyMatrix, InvalidFractions, SingleClass, ValidationError
from lcintent.gbdt import (
    GBDTConfig,
    GBDTModel,
    best_split,
    build_histogram,
    fit_bins,
    goss_select,
    grow_tree,
    predict_proba,
    softmax,
    softmax_objective,
    split_gain,
    train,
)
from oracles import brute_best_split, eq2_gain, fd_softmax_grads, random_split_instance, rel_err

# ------------------------------------------------------------------- binning


def test_bins_one_per_distinct_value():
    m = fit_bins(np.array([[1.0], [2.0], [3.0], [2.0]]))
    assert m.n_bins.tolist() == [3]
    assert m.transform(np.array([[1.0], [2.0], [3.0]])).ravel().tolist() == [0, 1, 2]


def test_constant_feature_has_one_bin():
    m = fit_bins(np.full((50, 1), 4.2))
    assert m.n_bins.tolist() == [1]
    assert set(m.transform(np.full((5, 1), 4.2)).ravel()) == {0}


def test_uniform_values_fill_quantile_bins_evenly():
    x = np.random.default_rng(0).uniform(size=(10_000, 1))
    m = fit_bins(x, max_bins=10)
    counts = np.bincount(m.transform(x).ravel(), minlength=10)
    assert len(counts) == 10
    assert np.all(np.abs(counts - 1000) <= 50)


def test_missing_values_use_missing_bin():
    x = np.array([[1.0], [np.nan], [2.0]])
    m = fit_bins(x, max_bins=16)
    assert m.transform(x).ravel().tolist() == [0, 16, 1]


def test_all_missing_column_has_one_finite_bin():
    m = fit_bins(np.full((4, 1), np.nan))
    assert m.n_bins.tolist() == [1]


@pytest.mark.parametrize("bad", [np.empty((0, 2)), np.empty(3)])
def test_fit_bins_empty(bad):
    with pytest.raises(EmptyMatrix):
        fit_bins(bad)


@pytest.mark.parametrize("max_bins", [1, 256])
def test_fit_bins_rejects_bin_count(max_bins):
    with pytest.raises(ValidationError):
        fit_bins(np.ones((3, 1)), max_bins=max_bins)


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=1, max_size=300),
    st.integers(2, 40),
)
def test_bin_boundaries_increase_and_cover(values, max_bins):
    x = np.array(values)[:, None]
    m = fit_bins(x, max_bins=max_bins)
    b = m.boundaries[0]
    assert np.all(np.diff(b) > 0)
    assert m.n_bins[0] <= max_bins
    codes = m.transform(x).ravel()
    assert codes.max() < m.n_bins[0]
    # bins are ordered like the values they hold
    order = np.argsort(x.ravel(), kind="stable")
    assert np.all(np.diff(codes[order].astype(int)) >= 0)


# ---------------------------------------------------------------- histograms


def test_histogram_sums_gradients_in_bin():
    Xb = np.zeros((3, 1), dtype=np.uint8)
    hist = build_histogram([0, 1, 2], Xb, [1.0, 2.0, 3.0], [1.0, 1.0, 1.0], missing_bin=4)
    assert hist.grad[0, 0] == 6.0
    assert hist.hess[0, 0] == 3.0
    assert hist.count[0, 0] == 3
    assert hist.grad[0, 1] == hist.hess[0, 1] == hist.count[0, 1] == 0


def test_histogram_folds_sample_weights():
    Xb = np.array([[0], [1], [1]], dtype=np.uint8)
    hist = build_histogram([0, 1, 2], Xb, [1.0, 2.0, 3.0], [1.0, 1.0, 1.0], 4, sample_weights=[2.0, 0.5, 1.0])
    assert hist.grad[0, :2].tolist() == [2.0, 4.0]
    assert hist.hess[0, :2].tolist() == [2.0, 1.5]


@pytest.mark.parametrize("seed", range(5))
def test_histogram_subtraction(seed):
    rng = np.random.default_rng(seed)
    n = 300
    Xb = rng.integers(0, 9, size=(n, 3)).astype(np.uint8)
    g, h = rng.normal(size=n), rng.uniform(0.1, 1, size=n)
    mask = rng.random(n) < 0.4
    parent = build_histogram(np.arange(n), Xb, g, h, 8)
    left = build_histogram(np.flatnonzero(mask), Xb, g, h, 8)
    right = build_histogram(np.flatnonzero(~mask), Xb, g, h, 8)
    np.testing.assert_allclose((left + right).grad, parent.grad, rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose((parent - left).hess, right.hess, rtol=1e-9, atol=1e-12)
    assert np.array_equal(left.count + right.count, parent.count)
    # each feature's row sums to the node totals
    np.testing.assert_allclose(parent.grad.sum(axis=1), g.sum(), rtol=1e-9, atol=1e-12)


# -------------------------------------------------------------------- gain


@pytest.mark.parametrize(
    "args,expected",
    [
        ((0.0, 1.0, 0.0, 1.0, 1.0, 0.0), 0.0),
        ((0.0, 1.0, 0.0, 2.0, 1.0, 0.3), -0.3),
        ((2.0, 1.0, -2.0, 1.0, 0.0, 0.0), 4.0),
        ((1.0, 1.0, 1.0, 1.0, 1.0, 0.0), -1.0 / 6.0),
    ],
)
def test_split_gain_examples(args, expected):
    assert split_gain(*args) == pytest.approx(expected, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(
    st.floats(-50, 50),
    st.floats(0, 50),
    st.floats(-50, 50),
    st.floats(0, 50),
    st.floats(0.1, 5),
    st.floats(0, 2),
)
def test_split_gain_is_symmetric(gl, hl, gr, hr, lam, gamma):
    assert split_gain(gl, hl, gr, hr, lam, gamma) == pytest.approx(split_gain(gr, hr, gl, hl, lam, gamma), rel=1e-12, abs=1e-12)
    assert split_gain(gl, hl, gr, hr, lam, gamma) == pytest.approx(eq2_gain(gl, hl, gr, hr, lam, gamma), rel=1e-9, abs=1e-9)


# ---------------------------------------------------------------- best split


def _split_for(Xb, g, h, n_bins, missing_bin, lam=1.0, gamma=0.0, min_leaf=1):
    hist = build_histogram(np.arange(len(g)), Xb, g, h, missing_bin)
    return best_split(hist, n_bins, missing_bin, lam, gamma, min_leaf)


def test_pure_single_bin_node_has_no_split():
    Xb = np.zeros((10, 1), dtype=np.uint8)
    assert _split_for(Xb, np.ones(10), np.ones(10), [1], 8) is None


def test_separating_feature_is_chosen():
    rng = np.random.default_rng(1)
    n = 100
    noise = rng.integers(0, 8, size=n)
    signal = np.where(np.arange(n) < 50, rng.integers(0, 3, size=n), rng.integers(3, 8, size=n))
    Xb = np.column_stack([noise, signal]).astype(np.uint8)
    g = np.where(np.arange(n) < 50, -1.0, 1.0)
    s = _split_for(Xb, g, np.ones(n), [8, 8], 8)
    assert (s.feature, s.bin) == (1, 2)
    assert s.gain > 0


def test_missing_rows_follow_their_gradient():
    # missing rows carry negative gradients like bin 0, so they should go left
    Xb = np.array([[0]] * 5 + [[1]] * 5 + [[8]] * 5, dtype=np.uint8)
    g = np.array([-1.0] * 5 + [1.0] * 5 + [-1.0] * 5)
    s = _split_for(Xb, g, np.ones(15), [2], 8)
    assert (s.feature, s.bin, s.missing_left) == (0, 0, True)


def test_ties_go_to_lowest_feature():
    Xb = np.tile(np.array([[0], [1]], dtype=np.uint8), (5, 2))
    g = np.tile([-1.0, 1.0], 5)
    s = _split_for(Xb, g, np.ones(10), [2, 2], 8)
    assert (s.feature, s.bin) == (0, 0)


def test_min_samples_leaf_blocks_small_children():
    Xb = np.array([[0]] + [[1]] * 9, dtype=np.uint8)
    g = np.array([-5.0] + [1.0] * 9)
    assert _split_for(Xb, g, np.ones(10), [2], 8, min_leaf=2) is None
    assert _split_for(Xb, g, np.ones(10), [2], 8, min_leaf=1) is not None


@pytest.mark.parametrize("seed", range(40))
def test_best_split_matches_exhaustive_enumeration(seed):
    Xb, g, h, n_bins, mb, lam, min_leaf = random_split_instance(np.random.default_rng(seed))
    got = _split_for(Xb, g, h, n_bins, mb, lam, 0.0, min_leaf)
    want = brute_best_split(Xb, g, h, n_bins, mb, lam, 0.0, min_leaf)
    if want is None:
        assert got is None
    else:
        assert (got.feature, got.bin, got.missing_left) == want[:3]
        assert abs(got.gain - want[3]) <= 1e-9


# ------------------------------------------------------------------- trees


def _objective(tree, Xb, g, h, lam, missing_bin=8):
    """Second-order loss of the tree's leaf values on the training rows."""
    v = tree.predict_binned(Xb, missing_bin)
    leaves = [tree.value[i] for i in tree.leaf_ids()]
    return float(np.sum(g * v + 0.5 * h * v**2) + 0.5 * lam * np.sum(np.square(leaves)))


def test_single_leaf_tree_value():
    rng = np.random.default_rng(2)
    g, h = rng.normal(size=40), rng.uniform(0.1, 1, size=40)
    Xb = rng.integers(0, 5, size=(40, 2)).astype(np.uint8)
    t = grow_tree(Xb, g, h, [5, 5], 8, max_leaves=1, lam=1.0)
    assert t.n_leaves == 1
    assert t.value[0] == pytest.approx(-g.sum() / (h.sum() + 1.0), rel=1e-12)


@pytest.mark.parametrize("seed", range(4))
def test_tree_respects_limits_and_positive_gains(seed):
    rng = np.random.default_rng(seed)
    n = 500
    Xb = rng.integers(0, 16, size=(n, 4)).astype(np.uint8)
    g = rng.normal(size=n) + (Xb[:, 0] > 7)
    h = rng.uniform(0.2, 1, size=n)
    t = grow_tree(Xb, g, h, [16] * 4, 16, max_leaves=12, max_depth=3, min_samples_leaf=15)
    assert t.n_leaves <= 12
    assert t.max_depth <= 3
    assert all(t.n_samples[i] >= 15 for i in t.leaf_ids())
    assert all(v > 0 for v in t.split_gains)
    assert len(t.split_gains) == t.n_leaves - 1


def test_leaf_wise_beats_a_single_stump():
    # the middle bin differs from both ends, so one split cannot isolate it
    x = np.repeat([0, 1, 2], 20).astype(np.uint8)[:, None]
    g = np.where(x.ravel() == 1, 1.0, -1.0)
    h = np.ones(60)
    stump = grow_tree(x, g, h, [3], 8, max_leaves=2, min_samples_leaf=1)
    leafwise = grow_tree(x, g, h, [3], 8, max_leaves=3, min_samples_leaf=1)
    assert leafwise.n_leaves == 3
    # depth-1 oracle: best objective over every single cut, by enumeration
    best_stump = min(
        -0.5 * sum(g[m].sum() ** 2 / (h[m].sum() + 1.0) for m in (x.ravel() <= c, x.ravel() > c)) for c in (0, 1)
    )
    assert _objective(stump, x, g, h, 1.0) == pytest.approx(best_stump, rel=1e-12)
    assert _objective(leafwise, x, g, h, 1.0) < best_stump


def test_grow_on_index_subset_ignores_other_rows():
    rng = np.random.default_rng(5)
    Xb = rng.integers(0, 4, size=(50, 1)).astype(np.uint8)
    g, h = rng.normal(size=50), np.ones(50)
    idx = np.arange(0, 50, 2)
    t = grow_tree(Xb, g, h, [4], 8, max_leaves=1, indices=idx)
    assert t.value[0] == pytest.approx(-g[idx].sum() / (len(idx) + 1.0))


# -------------------------------------------------------------------- GOSS


def test_goss_full_fraction_keeps_all():
    idx, amp = goss_select(np.arange(7.0), 1.0, 0.0)
    assert idx.tolist() == list(range(7))
    assert np.all(amp == 1.0)


def test_goss_ten_rows():
    g = np.array([0.1, 5.0, 0.2, 0.3, 9.0, 0.4, 0.5, 0.6, 0.7, 0.8])
    idx, amp = goss_select(g, 0.2, 0.1, seed=3)
    assert len(idx) == 3
    top = {1, 4}
    assert top <= set(idx.tolist())
    assert [a for i, a in zip(idx, amp) if i not in top] == [pytest.approx(8.0)]
    assert [a for i, a in zip(idx, amp) if i in top] == [1.0, 1.0]


def test_goss_without_sampling_keeps_top_only():
    idx, amp = goss_select(np.arange(10.0), 0.3, 0.0)
    assert sorted(idx.tolist()) == [7, 8, 9]
    assert np.all(amp == 1.0)


def test_goss_is_seeded():
    g = np.random.default_rng(0).random(100)
    a = goss_select(g, 0.2, 0.1, seed=4)
    b = goss_select(g, 0.2, 0.1, seed=4)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


@pytest.mark.parametrize("a,b", [(0.0, 0.1), (-0.1, 0.5), (0.5, -0.1), (0.8, 0.3), (1.2, 0.0)])
def test_goss_invalid_fractions(a, b):
    with pytest.raises(InvalidFractions):
        goss_select(np.ones(5), a, b)
    with pytest.raises(InvalidFractions):
        GBDTConfig(goss_a=a, goss_b=b)


# ----------------------------------------------------------------- softmax


def test_uniform_logits_give_log_three():
    loss, g, h = softmax_objective(np.zeros((4, 3)), np.array([0, 1, 2, 0]))
    assert loss == pytest.approx(math.log(3), rel=1e-12)
    np.testing.assert_allclose(h, 2.0 / 9.0)


def test_confident_correct_logit_has_vanishing_loss():
    z = np.array([[60.0, 0.0, 0.0]])
    loss, g, _ = softmax_objective(z, np.array([0]))
    assert loss < 1e-20
    assert np.max(np.abs(g)) < 1e-20


def test_softmax_is_stable_for_large_logits():
    p = softmax(np.array([[1000.0, 999.0, -1000.0]]))
    assert np.all(np.isfinite(p))
    assert p.sum() == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_softmax_gradients_match_finite_differences(seed):
    rng = np.random.default_rng(seed)
    z = rng.normal(0, 2, size=(5, 3))
    y = rng.integers(0, 3, size=5)
    w = rng.uniform(0.5, 2.0, size=5)
    _, g, h = softmax_objective(z, y, w)
    fg, fh = fd_softmax_grads(z, y, w)
    assert rel_err(g, fg) < 1e-5
    assert rel_err(h, fh) < 1e-5


# ------------------------------------------------------------------ training


def _separable(n=300, seed=0):
    rng = np.random.default_rng(seed)
    y = np.repeat([0, 1, 2], n // 3)
    centers = np.array([[0.0, 0.0], [5.0, 0.0], [0.0, 5.0]])
    return centers[y] + rng.normal(0, 0.7, size=(n, 2)), y


def test_zero_rounds_predicts_priors():
    X, y = _separable()
    y = y.copy()
    y[:50] = 1  # priors 50/300, 150/300, 100/300
    m = train(X, y, config=GBDTConfig(n_rounds=0))
    p = predict_proba(m, X[:3])
    np.testing.assert_allclose(p, np.tile([50 / 300, 150 / 300, 100 / 300], (3, 1)), rtol=1e-12)


def test_separable_toy_is_learned():
    X, y = _separable()
    m = train(X, y, config=GBDTConfig(n_rounds=50))
    assert np.mean(predict_proba(m, X).argmax(axis=1) == y) >= 0.99
    assert len(m.trees) == 50 and all(len(r) == 3 for r in m.trees)


def test_goss_off_equals_full_fraction():
    X, y = _separable(seed=1)
    off = train(X, y, config=GBDTConfig(n_rounds=8, goss=False))
    full = train(X, y, config=GBDTConfig(n_rounds=8, goss=True, goss_a=1.0, goss_b=0.0))
    assert [[t.to_dict() for t in r] for r in off.trees] == [[t.to_dict() for t in r] for r in full.trees]
    assert np.array_equal(predict_proba(off, X), predict_proba(full, X))


@pytest.mark.parametrize("lr", [0.05, 0.1, 0.3])
@pytest.mark.parametrize("seed", range(3))
def test_loss_non_increasing_without_goss(lr, seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(400, 4))
    X[rng.random(X.shape) < 0.05] = np.nan
    y = (np.nan_to_num(X[:, 0]) + rng.normal(0, 0.5, 400) > 0).astype(int) + (np.nan_to_num(X[:, 1]) > 1)
    w = rng.uniform(0.5, 2.0, size=400)
    m = train(X, y, w, GBDTConfig(n_rounds=20, goss=False, learning_rate=lr))
    assert np.all(np.diff(m.train_loss) <= 1e-12)


def test_probabilities_are_normalised():
    X, y = _separable(seed=2)
    m = train(X, y, config=GBDTConfig(n_rounds=10))
    p = predict_proba(m, np.vstack([X, np.full((2, 2), np.nan)]))
    assert np.all((p >= 0) & (p <= 1))
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-9)


def test_missing_values_carry_signal():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(300, 1))
    y = rng.integers(0, 2, size=300)
    X[y == 1, 0] = np.nan
    m = train(X, y, config=GBDTConfig(n_rounds=10, goss=False), n_classes=2)
    assert np.mean(predict_proba(m, X).argmax(axis=1) == y) == 1.0


def test_model_round_trip(tmp_path):
    X, y = _separable(seed=4)
    m = train(X, y, config=GBDTConfig(n_rounds=5, max_bins=32), class_weights=(1.0, 2.0, 3.0))
    m.save(tmp_path / "m.json")
    back = GBDTModel.load(tmp_path / "m.json")
    assert np.array_equal(predict_proba(back, X), predict_proba(m, X))
    assert back.to_json() == m.to_json()
    assert back.class_weights == (1.0, 2.0, 3.0)


def test_training_is_deterministic():
    X, y = _separable(seed=5)
    a = train(X, y, config=GBDTConfig(n_rounds=5, seed=9))
    b = train(X, y, config=GBDTConfig(n_rounds=5, seed=9))
    assert a.to_json() == b.to_json()


def test_single_class_rejected():
    with pytest.raises(SingleClass):
        train(np.ones((5, 2)), np.zeros(5, dtype=int))


@pytest.mark.parametrize(
    "kwargs",
    [dict(max_leaves=0), dict(lam=-1.0), dict(gamma=-0.1), dict(learning_rate=0.0), dict(n_rounds=-1)],
)
def test_config_validation(kwargs):
    with pytest.raises(ValidationError):
        GBDTConfig(**kwargs)
