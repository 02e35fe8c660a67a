import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lcintent.bilstm import (
    BiLSTMEncoder,
    LSTMParams,
    TrainConfig,
    bilstm_forward,
    bilstm_layer,
    embed_batch,
    encode,
    lstm_cell,
    pool,
    train_encoder,
)
from lcintent.errors import EmptySequence, NonFiniteLoss, SchemaMismatch, ShapeMismatch, SingleClass, ValidationError
from oracles import fd_param_grads, group_rel_err, straight_line_cell


def _params(d, H, seed=0, scale=0.5):
    rng = np.random.default_rng(seed)
    return LSTMParams(
        rng.normal(0, scale, (d, 4 * H)), rng.normal(0, scale, (H, 4 * H)), rng.normal(0, scale, 4 * H)
    )


def _zero(d, H):
    return LSTMParams(np.zeros((d, 4 * H)), np.zeros((H, 4 * H)), np.zeros(4 * H))


# -------------------------------------------------------------------- cell


def test_zero_cell_stays_at_rest():
    h, c = lstm_cell(np.ones(3), np.zeros(2), np.zeros(2), _zero(3, 2))
    assert np.array_equal(h, np.zeros(2)) and np.array_equal(c, np.zeros(2))


def test_saturated_forget_gate_keeps_memory():
    p = _zero(2, 3)
    p.b[:3] = 50.0  # forget gate fully open
    c_prev = np.array([0.4, -1.2, 2.0])
    _, c = lstm_cell(np.zeros(2), np.zeros(3), c_prev, p)
    np.testing.assert_allclose(c, c_prev, rtol=1e-15)


@pytest.mark.parametrize("seed", range(5))
def test_cell_matches_straight_line_version(seed):
    rng = np.random.default_rng(seed)
    d, H = 3, 4
    p = _params(d, H, seed)
    x, h0, c0 = rng.normal(size=d), rng.uniform(-1, 1, H), rng.normal(size=H)
    h, c = lstm_cell(x, h0, c0, p)
    rh, rc = straight_line_cell(x, h0, c0, p.W, p.U, p.b, H)
    assert np.max(np.abs(h - rh)) <= 1e-12
    assert np.max(np.abs(c - rc)) <= 1e-12


def test_cell_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        lstm_cell(np.ones(4), np.zeros(2), np.zeros(2), _zero(3, 2))
    with pytest.raises(ShapeMismatch):
        LSTMParams(np.zeros((3, 8)), np.zeros((2, 6)), np.zeros(8))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.1, 5.0))
def test_gates_and_states_stay_in_range(seed, scale):
    rng = np.random.default_rng(seed)
    p = _params(3, 4, seed, scale)
    X = rng.normal(0, scale, (2, 6, 3))
    hs, cache = bilstm_forward(X, p, p)
    f, i, g, o, _, tc, _ = (cache[2][:, k] for k in range(7))
    for gate in (f, i, o):
        assert np.all((gate >= 0) & (gate <= 1))
    assert np.all(np.abs(g) <= 1) and np.all(np.abs(tc) <= 1)
    assert np.all(np.abs(hs) <= 1)


# -------------------------------------------------------------------- layer


def test_single_step_layer_is_two_cell_calls():
    fwd, bwd = _params(3, 2, 1), _params(3, 2, 2)
    x = np.array([[0.3, -0.2, 0.5]])
    out = bilstm_layer(x, fwd, bwd)
    hf, _ = lstm_cell(x[0], np.zeros(2), np.zeros(2), fwd)
    hb, _ = lstm_cell(x[0], np.zeros(2), np.zeros(2), bwd)
    np.testing.assert_allclose(out[0], np.concatenate([hf, hb]), rtol=1e-14, atol=1e-15)


def test_layer_matches_unrolled_cells():
    fwd, bwd = _params(2, 3, 3), _params(2, 3, 4)
    X = np.random.default_rng(0).normal(size=(5, 2))
    out = bilstm_layer(X, fwd, bwd)
    h = c = np.zeros(3)
    for t in range(5):
        h, c = straight_line_cell(X[t], h, c, fwd.W, fwd.U, fwd.b, 3)
        np.testing.assert_allclose(out[t, :3], h, atol=1e-12)
    h = c = np.zeros(3)
    for t in reversed(range(5)):
        h, c = straight_line_cell(X[t], h, c, bwd.W, bwd.U, bwd.b, 3)
        np.testing.assert_allclose(out[t, 3:], h, atol=1e-12)


def test_palindrome_with_shared_params_is_mirror_symmetric():
    p = _params(2, 3, 5)
    half = np.random.default_rng(1).normal(size=(3, 2))
    X = np.vstack([half, half[::-1]])
    out = bilstm_layer(X, p, p)
    mirrored = out[::-1][:, np.r_[3:6, 0:3]]
    np.testing.assert_allclose(out, mirrored, atol=1e-14)


def test_reversal_swaps_directions():
    fwd, bwd = _params(2, 3, 6), _params(2, 3, 7)
    X = np.random.default_rng(2).normal(size=(7, 2))
    out = bilstm_layer(X, fwd, bwd)
    rev = bilstm_layer(X[::-1], bwd, fwd)
    np.testing.assert_allclose(rev, out[::-1][:, np.r_[3:6, 0:3]], atol=1e-14)


def test_zero_weights_give_zero_output():
    assert np.array_equal(bilstm_layer(np.ones((4, 3)), _zero(3, 2), _zero(3, 2)), np.zeros((4, 4)))


@pytest.mark.parametrize("bad", [np.empty((0, 3)), np.ones(3)])
def test_empty_sequence(bad):
    with pytest.raises(EmptySequence):
        bilstm_layer(bad, _zero(3, 2), _zero(3, 2))


# ------------------------------------------------------------------ encoder


def test_pooling_identities():
    Y = np.tile(np.array([1.0, -2.0, 3.0]), (1, 4, 1))
    np.testing.assert_array_equal(pool(Y, "mean")[0], [1.0, -2.0, 3.0])
    Z = np.random.default_rng(0).normal(size=(2, 5, 3))
    assert not np.allclose(pool(Z, "mean"), pool(Z, "max"))
    np.testing.assert_array_equal(pool(Z, "last"), Z[:, -1])
    with pytest.raises(ValidationError):
        pool(Z, "median")


@pytest.mark.parametrize("mode", ["mean", "max", "last"])
def test_encode_pools_second_layer(mode):
    enc = BiLSTMEncoder.init(3, 4, mode, seed=1)
    X = np.random.default_rng(3).normal(size=(6, 3))
    Y = enc.layer_outputs(X[None])[0]
    assert Y.shape == (6, 8)
    e = encode(X, enc)
    assert e.shape == (enc.embedding_dim,) == (8,)
    np.testing.assert_array_equal(e, pool(Y[None], mode)[0])
    if mode == "last":
        np.testing.assert_array_equal(e, Y[-1])


def test_encode_is_deterministic():
    enc = BiLSTMEncoder.init(3, 4, seed=2)
    X = np.random.default_rng(4).normal(size=(5, 3))
    assert encode(X, enc).tobytes() == encode(X.copy(), enc).tobytes()


def test_missing_inputs_take_training_mean():
    enc = BiLSTMEncoder.init(2, 3, seed=3)
    enc.mean = np.array([1.0, 2.0])
    X = np.array([[np.nan, 0.5], [1.0, np.nan]])
    filled = np.array([[1.0, 0.5], [1.0, 2.0]])
    np.testing.assert_array_equal(encode(X, enc), encode(filled, enc))


def test_embed_batch_edge_cases():
    enc = BiLSTMEncoder.init(3, 4, seed=4)
    assert embed_batch(np.empty((0, 5, 3)), enc).shape == (0, 8)
    X = np.random.default_rng(5).normal(size=(7, 5, 3))
    X[3] = X[1]
    E = embed_batch(X, enc, batch_size=3)
    np.testing.assert_array_equal(E[3], E[1])
    loop = np.vstack([encode(x, enc) for x in X])
    np.testing.assert_allclose(E, loop, rtol=0, atol=1e-14)


def test_encoder_shape_checks():
    enc = BiLSTMEncoder.init(3, 4, seed=0)
    with pytest.raises(ShapeMismatch):
        enc.embed(np.zeros((2, 5, 4)))
    with pytest.raises(EmptySequence):
        encode(np.empty((0, 3)), enc)
    with pytest.raises(ValidationError):
        BiLSTMEncoder.init(3, 4, "median")


def test_encoder_round_trip(tmp_path):
    enc = BiLSTMEncoder.init(3, 4, "max", seed=6)
    enc.mean = np.array([0.5, 1.0, -2.0])
    enc.save(tmp_path / "enc.json")
    back = BiLSTMEncoder.load(tmp_path / "enc.json")
    X = np.random.default_rng(7).normal(size=(4, 5, 3))
    assert back.to_json() == enc.to_json()
    np.testing.assert_array_equal(back.embed(X), enc.embed(X))
    with pytest.raises(SchemaMismatch):
        BiLSTMEncoder.from_dict({**enc.to_dict(), "version": 99})


# ----------------------------------------------------------------- gradients


@pytest.mark.parametrize("mode", ["mean", "max", "last"])
def test_bptt_matches_finite_differences(mode):
    rng = np.random.default_rng(8)
    enc = BiLSTMEncoder.init(3, 4, mode, seed=9)
    for p in enc.parameters():
        p += rng.normal(0, 0.3, p.shape)
    Z = rng.normal(size=(3, 5, 3))
    y = np.array([0, 1, 2])
    w = np.array([1.0, 2.0, 0.5])
    _, grads = enc.loss_and_grads(Z, y, w)
    fd = fd_param_grads(lambda: enc.loss_and_grads(Z, y, w)[0], enc.parameters())
    errs = [group_rel_err(a, b) for a, b in zip(grads, fd)]
    assert len(errs) == 14
    assert max(errs) < 1e-4, errs


# ------------------------------------------------------------------ training


def _separable_sequences(n=200, T=10, seed=0):
    rng = np.random.default_rng(seed)
    y = np.arange(n) % 3
    t = np.linspace(0, 1, T)
    X = rng.normal(0, 0.2, (n, T, 2))
    # class 1 drifts up, class 2 drifts down in the first channel
    X[:, :, 0] += np.where(y == 1, 1.0, np.where(y == 2, -1.0, 0.0))[:, None] * t
    return X, y


def test_zero_epochs_returns_seeded_init():
    X, y = _separable_sequences(30)
    enc = train_encoder(X, y, TrainConfig(hidden=4, epochs=0, seed=3))
    init = BiLSTMEncoder.init(2, 4, seed=3)
    for a, b in zip(enc.parameters(), init.parameters()):
        assert np.array_equal(a, b)


def test_separable_sequences_are_learned():
    X, y = _separable_sequences()
    enc = train_encoder(X, y, TrainConfig(hidden=8, epochs=200, batch_size=32, patience=20, seed=1))
    assert np.mean(enc.predict_proba(X).argmax(axis=1) == y) >= 0.95


def test_training_is_deterministic():
    X, y = _separable_sequences(60)
    cfg = TrainConfig(hidden=4, epochs=3, batch_size=16, seed=5)
    assert train_encoder(X, y, cfg).to_json() == train_encoder(X, y, cfg).to_json()


def test_class_weights_change_training():
    X, y = _separable_sequences(60)
    cfg = TrainConfig(hidden=4, epochs=3, batch_size=16, seed=5)
    plain = train_encoder(X, y, cfg)
    weighted = train_encoder(X, y, TrainConfig(hidden=4, epochs=3, batch_size=16, seed=5, class_weights=(1.0, 5.0, 5.0)))
    assert plain.to_json() != weighted.to_json()


def test_training_errors():
    X, y = _separable_sequences(30)
    with pytest.raises(SingleClass):
        train_encoder(X, np.zeros(30, dtype=int), TrainConfig(hidden=4, epochs=1))
    with pytest.raises(ShapeMismatch):
        train_encoder(X, y[:10], TrainConfig(hidden=4, epochs=1))


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_non_finite_loss_is_reported():
    X, y = _separable_sequences(30)
    with pytest.raises(NonFiniteLoss):
        train_encoder(X, y, TrainConfig(hidden=4, epochs=1), sample_weights=np.full(30, np.inf))


@pytest.mark.parametrize(
    "kwargs", [dict(hidden=0), dict(epochs=-1), dict(learning_rate=0.0), dict(momentum=1.0), dict(clip_norm=0.0)]
)
def test_train_config_validation(kwargs):
    with pytest.raises(ValidationError):
        TrainConfig(**kwargs)
