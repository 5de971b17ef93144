import numpy as np
import pytest

from semlink.errors import ParameterError
from semlink.featuremaps import FeatureMapSet, synth_dataset
from semlink.importance import (HeadParams, accuracy, head_forward, importance,
                                importance_fd_oracle, load_head, predict,
                                save_head, train_head)


def _item(maps, label=0):
    return FeatureMapSet(maps=np.asarray(maps, dtype=np.float32), label=label)


# --- forward pass


def test_zero_maps_give_uniform_probs():
    head = HeadParams(weights=np.random.default_rng(0).normal(size=(3, 2)),
                      bias=np.zeros(3))
    item = _item(np.zeros((2, 2, 2)))
    _, probs = head_forward(head, item)
    assert np.allclose(probs, 1 / 3, atol=1e-12)


def test_identity_head_hand_softmax():
    head = HeadParams(weights=np.eye(2), bias=np.zeros(2))
    item = _item([np.full((1, 1), 2.0), np.zeros((1, 1))])
    logits, probs = head_forward(head, item)
    assert np.allclose(logits, [2.0, 0.0], atol=1e-12)
    e2 = np.exp(2.0)
    assert np.allclose(probs, [e2 / (e2 + 1), 1 / (e2 + 1)], atol=1e-12)


def test_softmax_simplex_property():
    rng = np.random.default_rng(4)
    for _ in range(50):
        c, n = int(rng.integers(2, 6)), int(rng.integers(1, 7))
        head = HeadParams(weights=rng.normal(size=(c, n)) * 10, bias=rng.normal(size=c))
        item = _item(rng.normal(size=(n, 2, 3)) * 5)
        _, probs = head_forward(head, item)
        assert np.all(probs >= 0)
        assert abs(probs.sum() - 1.0) <= 1e-12


def test_dimension_mismatch():
    head = HeadParams(weights=np.zeros((2, 3)), bias=np.zeros(2))
    with pytest.raises(ParameterError):
        head_forward(head, _item(np.zeros((2, 1, 1))))


# --- training


def test_zero_epochs_returns_seeded_init():
    ds = synth_dataset(8, 4, (2, 2), 2, 0.5, seed=3)
    h0 = train_head(ds, epochs=0, lr=0.1, seed=5)
    h0b = train_head(ds, epochs=0, lr=0.1, seed=5)
    assert np.array_equal(h0.weights, h0b.weights)
    assert np.array_equal(h0.bias, np.zeros(2))
    rng = np.random.default_rng(5)
    assert np.array_equal(h0.weights, rng.normal(0.0, 0.01, size=(2, 4)))


def test_training_reaches_high_accuracy(dataset7, head7):
    assert accuracy(head7, dataset7) >= 0.9


def test_training_determinism(dataset7):
    a = train_head(dataset7[:50], epochs=40, lr=0.1, seed=9)
    b = train_head(dataset7[:50], epochs=40, lr=0.1, seed=9)
    assert np.array_equal(a.weights, b.weights)
    assert np.array_equal(a.bias, b.bias)


def test_loss_non_increasing_at_default_lr(dataset7):
    _, hist = train_head(dataset7, epochs=200, lr=0.1, seed=7, return_history=True)
    assert np.all(np.diff(hist) <= 1e-12)


def test_empty_dataset_rejected():
    with pytest.raises(ParameterError):
        train_head([], epochs=1, lr=0.1, seed=0)


# --- importance


def test_relu_kills_negative_weight():
    head = HeadParams(weights=np.array([[1.0, -1.0]]), bias=np.zeros(1))
    item = _item(np.random.default_rng(0).normal(size=(2, 3, 3)))
    iv = importance(head, item, 0)
    assert iv.scores[1] == 0.0
    assert np.isclose(iv.scores[0], iv.confidence, atol=1e-12)


def test_equal_weights_split_confidence():
    head = HeadParams(weights=np.full((2, 5), 0.7), bias=np.zeros(2))
    item = _item(np.random.default_rng(1).normal(size=(5, 2, 2)))
    iv = importance(head, item, 0)
    assert np.allclose(iv.scores, iv.confidence / 5, atol=1e-12)


def test_all_nonpositive_weights_fall_back_to_uniform():
    head = HeadParams(weights=np.array([[-1.0, -2.0], [0.5, 0.5]]), bias=np.zeros(2))
    item = _item(np.zeros((2, 2, 2)))
    iv = importance(head, item, 0)
    assert np.allclose(iv.scores, iv.confidence / 2, atol=1e-12)
    assert abs(iv.scores.sum() - iv.confidence) <= 1e-9


def test_importance_normalization_invariant():
    rng = np.random.default_rng(8)
    for _ in range(100):
        c, n = int(rng.integers(2, 5)), int(rng.integers(2, 8))
        head = HeadParams(weights=rng.normal(size=(c, n)), bias=rng.normal(size=c))
        item = _item(rng.normal(size=(n, 3, 2)))
        iv = importance(head, item, int(rng.integers(0, c)))
        assert np.all(iv.scores >= 0)
        assert abs(iv.scores.sum() - iv.confidence) <= 1e-9


def test_rank_stable_under_positive_map_scaling():
    rng = np.random.default_rng(12)
    head = HeadParams(weights=rng.normal(size=(3, 6)), bias=rng.normal(size=3))
    maps = rng.normal(size=(6, 4, 4))
    iv1 = importance(head, _item(maps), 1)
    iv2 = importance(head, _item(maps * 3.7), 1)
    assert np.array_equal(np.argsort(iv1.scores), np.argsort(iv2.scores))


def test_class_out_of_range():
    head = HeadParams(weights=np.zeros((2, 2)), bias=np.zeros(2))
    with pytest.raises(ParameterError):
        importance(head, _item(np.zeros((2, 1, 1))), 2)


def test_default_class_is_argmax():
    head = HeadParams(weights=np.eye(3), bias=np.zeros(3))
    item = _item([np.zeros((1, 1)), np.full((1, 1), 4.0), np.zeros((1, 1))])
    iv = importance(head, item)
    assert iv.class_index == predict(head, item) == 1


# --- finite-difference oracle


def test_fd_oracle_matches_analytic_linear_head():
    rng = np.random.default_rng(2)
    head = HeadParams(weights=rng.normal(size=(3, 4)), bias=rng.normal(size=3))
    item = _item(rng.normal(size=(4, 3, 3)))
    h, w = item.map_shape
    for c in range(3):
        analytic = np.maximum(head.weights[c] / (h * w), 0.0)
        fd = importance_fd_oracle(head, item, c, step=1e-3)
        denom = np.maximum(np.maximum(np.abs(analytic), np.abs(fd)), 1e-12)
        assert np.max(np.abs(analytic - fd) / denom) <= 1e-4


def test_fd_oracle_zero_weights():
    head = HeadParams(weights=np.zeros((2, 3)), bias=np.zeros(2))
    item = _item(np.random.default_rng(3).normal(size=(3, 2, 2)))
    assert np.array_equal(importance_fd_oracle(head, item, 0), np.zeros(3))


def test_fd_oracle_step_validation():
    head = HeadParams(weights=np.zeros((1, 1)), bias=np.zeros(1))
    with pytest.raises(ParameterError):
        importance_fd_oracle(head, _item(np.zeros((1, 1, 1))), 0, step=0.0)


# --- serialization


def test_head_round_trip(tmp_path):
    rng = np.random.default_rng(6)
    head = HeadParams(weights=rng.normal(size=(4, 7)), bias=rng.normal(size=4))
    path = tmp_path / "head.semh"
    save_head(head, path)
    loaded = load_head(path)
    assert np.array_equal(loaded.weights, head.weights)
    assert np.array_equal(loaded.bias, head.bias)
