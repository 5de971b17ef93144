"""Importance scoring of feature maps via a small differentiable head.

The head is spatial-mean pooling followed by a linear layer and softmax.
Per-map importance is the pooled, rectified gradient of the class logit
with respect to the map activations; scores are rescaled to live on the
probability scale (they sum to the head's confidence in the class), so
the downstream budgeted selection can subtract them from a probability.

Training is full-batch gradient descent with a fixed learning rate:
determinism and reproducibility outrank speed at this scale.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import FormatError, ParameterError
from .featuremaps import FeatureMapSet

_MAGIC = b"SEMH"
_VERSION = 1

DEFAULT_EPOCHS = 200
DEFAULT_LR = 0.1


@dataclass
class HeadParams:
    """Linear head over pooled maps: logit_c = weights[c] . gap + bias_c."""

    weights: np.ndarray  # (C, N) float64
    bias: np.ndarray     # (C,)  float64

    def __post_init__(self):
        self.weights = np.ascontiguousarray(self.weights, dtype=np.float64)
        self.bias = np.ascontiguousarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 2 or self.bias.ndim != 1:
            raise ParameterError("weights must be (C, N) and bias (C,)")
        if self.weights.shape[0] != self.bias.shape[0]:
            raise ParameterError("weights and bias disagree on C")
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.bias))):
            raise ParameterError("head parameters must be finite")

    @property
    def n_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def n_maps(self) -> int:
        return self.weights.shape[1]


@dataclass
class ImportanceVector:
    """Nonnegative per-map scores summing to the class confidence."""

    scores: np.ndarray      # (N,) float64, >= 0, sums to `confidence`
    confidence: float       # P(class | item) under the head
    class_index: int


def gap(item: FeatureMapSet) -> np.ndarray:
    """Spatial mean of each map, in float64."""
    return item.maps.mean(axis=(1, 2), dtype=np.float64)


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def head_forward(head: HeadParams, item: FeatureMapSet):
    """Return (logits, probs) for one item."""
    if item.n_maps != head.n_maps:
        raise ParameterError(
            f"head expects {head.n_maps} maps, item has {item.n_maps}")
    logits = head.weights @ gap(item) + head.bias
    return logits, _softmax(logits)


def predict(head: HeadParams, item: FeatureMapSet) -> int:
    """Argmax class under the head."""
    _, probs = head_forward(head, item)
    return int(np.argmax(probs))


def train_head(dataset, epochs: int = DEFAULT_EPOCHS, lr: float = DEFAULT_LR,
               seed: int = 0, return_history: bool = False):
    """Fit the head by full-batch gradient descent on cross-entropy.

    Deterministic given `seed` (which only drives the initialization).
    With `return_history=True` also returns the per-epoch mean
    cross-entropy (epochs+1 values, index 0 = loss at initialization).
    """
    items = list(dataset)
    if not items:
        raise ParameterError("dataset is empty")
    if lr <= 0:
        raise ParameterError("lr must be positive")
    if epochs < 0:
        raise ParameterError("epochs must be >= 0")

    feats = np.stack([gap(it) for it in items])          # (n, N)
    labels = np.array([it.label for it in items])
    n, n_maps = feats.shape
    n_classes = int(labels.max()) + 1

    rng = np.random.default_rng(seed)
    weights = rng.normal(0.0, 0.01, size=(n_classes, n_maps))
    bias = np.zeros(n_classes)
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), labels] = 1.0

    history = []
    for _ in range(epochs + 1):
        probs = _softmax(feats @ weights.T + bias)
        history.append(float(-np.log(probs[np.arange(n), labels] + 1e-300).mean()))
        if len(history) > epochs:
            break
        grad = (probs - onehot) / n
        weights -= lr * (grad.T @ feats)
        bias -= lr * grad.sum(axis=0)

    head = HeadParams(weights=weights, bias=bias)
    if return_history:
        return head, np.array(history)
    return head


def accuracy(head: HeadParams, dataset) -> float:
    """Fraction of items whose argmax class equals the label."""
    items = list(dataset)
    if not items:
        raise ParameterError("dataset is empty")
    hits = sum(predict(head, it) == it.label for it in items)
    return hits / len(items)


def importance(head: HeadParams, item: FeatureMapSet, class_index=None) -> ImportanceVector:
    """Gradient-pooled importance of each map for one class.

    raw_i = sum_{m,n} alpha * relu(d logit_c / d F[i,m,n]) with the
    uniform pooling weight alpha = 1/(H'*W'). For this head the
    per-activation gradient is weights[c, i]/(H'*W') everywhere, so
    raw_i = relu(weights[c, i]) / (H'*W'); the constant factor cancels
    in the normalization below. Scores are raw magnitudes rescaled to
    sum to the head's confidence P(class | item); if every raw value is
    zero the confidence is split uniformly.
    """
    _, probs = head_forward(head, item)
    if class_index is None:
        class_index = int(np.argmax(probs))
    if not 0 <= class_index < head.n_classes:
        raise ParameterError(f"class {class_index} out of range [0, {head.n_classes})")
    h, w = item.map_shape
    raw = np.maximum(head.weights[class_index] / (h * w), 0.0)
    conf = float(probs[class_index])
    total = raw.sum()
    if total > 0.0:
        scores = np.abs(raw) * (conf / total)
    else:
        scores = np.full(head.n_maps, conf / head.n_maps)
    return ImportanceVector(scores=scores, confidence=conf, class_index=class_index)


def importance_fd_oracle(head: HeadParams, item: FeatureMapSet, class_index: int,
                         step: float = 1e-3) -> np.ndarray:
    """Finite-difference reference for the raw importance values.

    Central differences of the class logit w.r.t. every activation,
    rectified and pooled with the same alpha sum as `importance`. Used
    by tests and calibration only; it never takes the analytic shortcut.
    """
    if step <= 0:
        raise ParameterError("step must be positive")
    if not 0 <= class_index < head.n_classes:
        raise ParameterError(f"class {class_index} out of range [0, {head.n_classes})")
    base = item.maps.astype(np.float64)
    n, h, w = base.shape
    alpha = 1.0 / (h * w)

    def logit(maps64: np.ndarray) -> float:
        feats = maps64.mean(axis=(1, 2))
        return float(head.weights[class_index] @ feats + head.bias[class_index])

    raw = np.zeros(n)
    for i in range(n):
        acc = 0.0
        for m in range(h):
            for c in range(w):
                bumped = base.copy()
                bumped[i, m, c] += step
                z_plus = logit(bumped)
                bumped[i, m, c] -= 2.0 * step
                z_minus = logit(bumped)
                g = (z_plus - z_minus) / (2.0 * step)
                acc += alpha * max(g, 0.0)
        raw[i] = acc
    return raw


def save_head(head: HeadParams, path) -> None:
    """Write the SEMH format: magic, version u16, C u16, N u16, then
    C*N weights and C biases as little-endian float64."""
    c, n = head.weights.shape
    if max(c, n) > 0xFFFF:
        raise ParameterError("head dimensions exceed the u16 file format")
    with open(path, "wb") as fh:
        fh.write(_MAGIC + struct.pack("<HHH", _VERSION, c, n))
        fh.write(head.weights.astype("<f8").tobytes())
        fh.write(head.bias.astype("<f8").tobytes())


def load_head(path) -> HeadParams:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 10 or blob[:4] != _MAGIC:
        raise FormatError("not a SEMH head file")
    version, c, n = struct.unpack("<HHH", blob[4:10])
    if version != _VERSION:
        raise FormatError(f"unsupported SEMH version {version}")
    expect = 10 + 8 * (c * n + c)
    if len(blob) != expect:
        raise FormatError("SEMH payload size mismatch")
    weights = np.frombuffer(blob, dtype="<f8", offset=10, count=c * n).reshape(c, n)
    bias = np.frombuffer(blob, dtype="<f8", offset=10 + 8 * c * n, count=c)
    return HeadParams(weights=weights.copy(), bias=bias.copy())
