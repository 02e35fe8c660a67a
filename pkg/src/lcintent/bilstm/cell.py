"""LSTM cell and bidirectional layer with hand-written backpropagation.

Gate pre-activations are stacked along the last axis in the order
forget, input, candidate, output, so ``W`` has shape ``(d_in, 4H)``,
``U`` has shape ``(H, 4H)`` and ``b`` has shape ``(4H,)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import EmptySequence, ShapeMismatch

GATES = ("f", "i", "c", "o")


def sigmoid(z: np.ndarray) -> np.ndarray:
    # tanh form is overflow-free and a single ufunc pass
    return 0.5 * (1.0 + np.tanh(0.5 * z))


@dataclass(eq=False)
class LSTMParams:
    """One direction of one layer."""

    W: np.ndarray
    U: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        H = self.U.shape[0]
        if self.U.shape != (H, 4 * H) or self.W.ndim != 2 or self.W.shape[1] != 4 * H or self.b.shape != (4 * H,):
            raise ShapeMismatch(f"inconsistent LSTM shapes W{self.W.shape} U{self.U.shape} b{self.b.shape}")

    @property
    def hidden(self) -> int:
        return self.U.shape[0]

    @property
    def d_in(self) -> int:
        return self.W.shape[0]

    def gate(self, name: str) -> tuple:
        """``(W_g, U_g, b_g)`` for gate ``name`` in f, i, c, o."""
        H = self.hidden
        k = GATES.index(name)
        sl = slice(k * H, (k + 1) * H)
        return self.W[:, sl], self.U[:, sl], self.b[sl]

    @classmethod
    def init(cls, d_in: int, hidden: int, rng: np.random.Generator) -> "LSTMParams":
        W = rng.uniform(-1, 1, (d_in, 4 * hidden)) / np.sqrt(d_in)
        U = rng.uniform(-1, 1, (hidden, 4 * hidden)) / np.sqrt(hidden)
        b = np.zeros(4 * hidden)
        b[:hidden] = 1.0
        return cls(W, U, b)

    def copy(self) -> "LSTMParams":
        return LSTMParams(self.W.copy(), self.U.copy(), self.b.copy())


def lstm_cell(x_t, h_prev, c_prev, p: LSTMParams):
    """One step; works on a single vector or a batch (leading axis)."""
    x_t = np.asarray(x_t, dtype=float)
    if x_t.shape[-1] != p.d_in or np.shape(h_prev)[-1] != p.hidden or np.shape(c_prev)[-1] != p.hidden:
        raise ShapeMismatch("input or state width does not match the parameters")
    H = p.hidden
    z = x_t @ p.W + h_prev @ p.U + p.b
    f = sigmoid(z[..., :H])
    i = sigmoid(z[..., H : 2 * H])
    g = np.tanh(z[..., 2 * H : 3 * H])
    o = sigmoid(z[..., 3 * H :])
    c = f * c_prev + i * g
    return o * np.tanh(c), c


def _run_direction(X: np.ndarray, p: LSTMParams):
    """Forward through time on ``X`` (B, T, d); returns outputs and the cache."""
    B, T, _ = X.shape
    H = p.hidden
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    xw = X @ p.W + p.b
    hs = np.empty((B, T, H))
    cache = np.empty((T, 7, B, H))
    # sigmoid(z) = (1 + tanh(z / 2)) / 2 lets one tanh cover all four gates
    scale = np.full(4 * H, 0.5)
    scale[2 * H : 3 * H] = 1.0
    shift = np.full(4 * H, 0.5)
    shift[2 * H : 3 * H] = 0.0
    for t in range(T):
        z = xw[:, t] + h @ p.U
        z *= scale
        a = np.tanh(z)
        a *= scale
        a += shift
        f, i, g, o = a[:, :H], a[:, H : 2 * H], a[:, 2 * H : 3 * H], a[:, 3 * H :]
        c_prev = c
        c = f * c_prev + i * g
        tc = np.tanh(c)
        h_prev = h
        h = o * tc
        cache[t] = (f, i, g, o, c_prev, tc, h_prev)
        hs[:, t] = h
    return hs, cache


def _back_direction(X: np.ndarray, dHs: np.ndarray, cache: np.ndarray, p: LSTMParams):
    """Backpropagation through time for one direction."""
    B, T, _ = X.shape
    H = p.hidden
    dU = np.zeros_like(p.U)
    dz_all = np.empty((B, T, 4 * H))
    dh_next = np.zeros((B, H))
    dc_next = np.zeros((B, H))
    UT = p.U.T
    for t in range(T - 1, -1, -1):
        f, i, g, o, c_prev, tc, h_prev = cache[t]
        dh = dHs[:, t] + dh_next
        dc = dc_next + dh * o * (1.0 - tc * tc)
        dz = dz_all[:, t]
        dz[:, :H] = dc * c_prev * f * (1.0 - f)
        dz[:, H : 2 * H] = dc * g * i * (1.0 - i)
        dz[:, 2 * H : 3 * H] = dc * i * (1.0 - g * g)
        dz[:, 3 * H :] = dh * tc * o * (1.0 - o)
        dU += h_prev.T @ dz
        dh_next = dz @ UT
        dc_next = dc * f
    flat_dz = dz_all.reshape(B * T, 4 * H)
    dW = X.reshape(B * T, -1).T @ flat_dz
    db = flat_dz.sum(axis=0)
    dX = dz_all @ p.W.T
    return dX, (dW, dU, db)


def bilstm_forward(X: np.ndarray, fwd: LSTMParams, bwd: LSTMParams):
    """Batched bidirectional layer: ``X`` (B, T, d) -> (B, T, 2H) plus a cache."""
    if X.shape[1] < 1:
        raise EmptySequence("sequence has no time steps")
    hf, cf = _run_direction(X, fwd)
    Xr = X[:, ::-1]
    hb, cb = _run_direction(Xr, bwd)
    return np.concatenate([hf, hb[:, ::-1]], axis=2), (X, Xr, cf, cb)


def bilstm_backward(dY: np.ndarray, cache, fwd: LSTMParams, bwd: LSTMParams):
    """Gradients w.r.t. the layer input and both directions' (W, U, b)."""
    X, Xr, cf, cb = cache
    H = fwd.hidden
    dXf, gf = _back_direction(X, dY[:, :, :H], cf, fwd)
    dXb, gb = _back_direction(Xr, dY[:, ::-1, H:], cb, bwd)
    return dXf + dXb[:, ::-1], gf, gb


def bilstm_layer(sequence, fwd: LSTMParams, bwd: LSTMParams) -> np.ndarray:
    """Single sequence (T, d_in) -> (T, 2H): forward states then backward states per step."""
    seq = np.asarray(sequence, dtype=float)
    if seq.ndim != 2 or seq.shape[0] < 1:
        raise EmptySequence("sequence must be a nonempty T x d matrix")
    return bilstm_forward(seq[None], fwd, bwd)[0][0]
