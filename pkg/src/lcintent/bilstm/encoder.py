"""Two-layer bidirectional LSTM encoder with a pooled embedding and a softmax head."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import EmptySequence, IoFailure, SchemaMismatch, ShapeMismatch, ValidationError
from .cell import LSTMParams, bilstm_backward, bilstm_forward

FORMAT = "lcintent-bilstm"
FORMAT_VERSION = 1
POOLINGS = ("mean", "max", "last")
N_CLASSES = 3


def pool(Y: np.ndarray, mode: str) -> np.ndarray:
    """Collapse the time axis of ``Y`` (B, T, k)."""
    if mode == "mean":
        return Y.mean(axis=1)
    if mode == "max":
        return Y.max(axis=1)
    if mode == "last":
        return Y[:, -1].copy()
    raise ValidationError(f"unknown pooling {mode!r}")


def unpool(de: np.ndarray, Y: np.ndarray, mode: str) -> np.ndarray:
    B, T, k = Y.shape
    if mode == "mean":
        return np.broadcast_to(de[:, None, :] / T, Y.shape).copy()
    dY = np.zeros_like(Y)
    if mode == "max":
        arg = Y.argmax(axis=1)
        bi, ki = np.meshgrid(np.arange(B), np.arange(k), indexing="ij")
        dY[bi, arg, ki] = de
    else:
        dY[:, -1] = de
    return dY


@dataclass(eq=False)
class BiLSTMEncoder:
    layers: list
    head_W: np.ndarray
    head_b: np.ndarray
    pooling: str
    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        if self.pooling not in POOLINGS:
            raise ValidationError(f"unknown pooling {self.pooling!r}")
        if len(self.layers) != 2:
            raise ShapeMismatch("the encoder has exactly two bidirectional layers")
        if self.head_W.shape != (self.embedding_dim, N_CLASSES):
            raise ShapeMismatch("head width must equal the embedding size")

    @property
    def input_dim(self) -> int:
        return self.layers[0][0].d_in

    @property
    def hidden(self) -> int:
        return self.layers[1][0].hidden

    @property
    def embedding_dim(self) -> int:
        return 2 * self.layers[1][0].hidden

    @classmethod
    def init(cls, d: int, hidden: int, pooling: str = "mean", seed=0) -> "BiLSTMEncoder":
        rng = np.random.default_rng(seed)
        layers = [
            (LSTMParams.init(d, hidden, rng), LSTMParams.init(d, hidden, rng)),
            (LSTMParams.init(2 * hidden, hidden, rng), LSTMParams.init(2 * hidden, hidden, rng)),
        ]
        head_W = rng.uniform(-1, 1, (2 * hidden, N_CLASSES)) / np.sqrt(2 * hidden)
        return cls(layers, head_W, np.zeros(N_CLASSES), pooling, np.zeros(d), np.ones(d))

    def parameters(self) -> list:
        """Every trainable array, in a fixed order shared with the gradients."""
        out = []
        for fwd, bwd in self.layers:
            out += [fwd.W, fwd.U, fwd.b, bwd.W, bwd.U, bwd.b]
        return out + [self.head_W, self.head_b]

    def standardize(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 3 or X.shape[2] != self.input_dim:
            raise ShapeMismatch(f"expected (N, T, {self.input_dim}) sequences, got {X.shape}")
        if X.shape[1] < 1:
            raise EmptySequence("sequences have no time steps")
        Z = (X - self.mean) / self.std
        # missing inputs take the training mean
        return np.where(np.isnan(Z), 0.0, Z)

    def _forward(self, Z: np.ndarray):
        caches = []
        h = Z
        for fwd, bwd in self.layers:
            h, cache = bilstm_forward(h, fwd, bwd)
            caches.append(cache)
        return h, caches

    def layer_outputs(self, X) -> np.ndarray:
        """Second-layer outputs (N, T, 2H) for raw sequences."""
        return self._forward(self.standardize(X))[0]

    def embed(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if len(X) == 0:
            return np.empty((0, self.embedding_dim))
        return pool(self.layer_outputs(X), self.pooling)

    def logits(self, X) -> np.ndarray:
        return self.embed(X) @ self.head_W + self.head_b

    def predict_proba(self, X) -> np.ndarray:
        z = self.logits(X)
        z = z - z.max(axis=1, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=1, keepdims=True)

    def loss_and_grads(self, Z: np.ndarray, y, w=None):
        """Weighted cross-entropy ``sum_i w_i CE_i / N`` on standardized inputs and its gradients."""
        y = np.asarray(y, dtype=np.int64)
        n = len(y)
        w = np.ones(n) if w is None else np.asarray(w, dtype=float)
        Y2, caches = self._forward(Z)
        e = pool(Y2, self.pooling)
        z = e @ self.head_W + self.head_b
        z = z - z.max(axis=1, keepdims=True)
        log_p = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
        loss = float(-(w * log_p[np.arange(n), y]).sum() / n)
        dz = np.exp(log_p)
        dz[np.arange(n), y] -= 1.0
        dz *= (w / n)[:, None]
        g_head_W = e.T @ dz
        g_head_b = dz.sum(axis=0)
        dY = unpool(dz @ self.head_W.T, Y2, self.pooling)
        grads_layers = []
        for (fwd, bwd), cache in zip(reversed(self.layers), reversed(caches)):
            dY, gf, gb = bilstm_backward(dY, cache, fwd, bwd)
            grads_layers.append(list(gf) + list(gb))
        grads = []
        for g in reversed(grads_layers):
            grads += g
        return loss, grads + [g_head_W, g_head_b]

    def to_dict(self) -> dict:
        def lp(p: LSTMParams) -> dict:
            return {"W": p.W.tolist(), "U": p.U.tolist(), "b": p.b.tolist()}

        return {
            "format": FORMAT,
            "version": FORMAT_VERSION,
            "pooling": self.pooling,
            "input_dim": self.input_dim,
            "hidden": self.hidden,
            "mean": self.mean.tolist(),
            "std": self.std.tolist(),
            "layers": [{"forward": lp(f), "backward": lp(b)} for f, b in self.layers],
            "head": {"W": self.head_W.tolist(), "b": self.head_b.tolist()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BiLSTMEncoder":
        if d.get("format") != FORMAT or d.get("version") != FORMAT_VERSION:
            raise SchemaMismatch(f"not a {FORMAT} v{FORMAT_VERSION} artifact")

        def lp(x: dict) -> LSTMParams:
            return LSTMParams(np.asarray(x["W"], float), np.asarray(x["U"], float), np.asarray(x["b"], float))

        return cls(
            layers=[(lp(l["forward"]), lp(l["backward"])) for l in d["layers"]],
            head_W=np.asarray(d["head"]["W"], float),
            head_b=np.asarray(d["head"]["b"], float),
            pooling=d["pooling"],
            mean=np.asarray(d["mean"], float),
            std=np.asarray(d["std"], float),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "BiLSTMEncoder":
        return cls.from_dict(json.loads(text))

    def save(self, path) -> None:
        try:
            Path(path).write_text(self.to_json(), encoding="utf-8")
        except OSError as exc:
            raise IoFailure(str(exc)) from exc

    @classmethod
    def load(cls, path) -> "BiLSTMEncoder":
        try:
            return cls.from_json(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise IoFailure(str(exc)) from exc


def encode(sequence, encoder: BiLSTMEncoder) -> np.ndarray:
    """Embedding of one raw (T, d) sequence."""
    seq = np.asarray(sequence, dtype=float)
    if seq.ndim != 2 or seq.shape[0] < 1:
        raise EmptySequence("sequence must be a nonempty T x d matrix")
    return encoder.embed(seq[None])[0]


def embed_batch(sequences, encoder: BiLSTMEncoder, batch_size: int = 1024) -> np.ndarray:
    X = np.asarray(sequences, dtype=float)
    if len(X) == 0:
        return np.empty((0, encoder.embedding_dim))
    return np.vstack([encoder.embed(X[s : s + batch_size]) for s in range(0, len(X), batch_size)])
