"""Budgeted selection of feature maps under an entropy-style constraint.

A selection keeps the highest-scoring maps until the unexplained
confidence mass drops strictly below the budget epsilon. Because the
scores are nonnegative, the descending-score prefix is an exact
minimum-cardinality solution (verified against brute force in tests).

Convention: epsilon = 0 means "selection disabled" and returns all
maps, since a residual of zero can never be strictly negative.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .importance import HeadParams, ImportanceVector, importance

__all__ = ["Selection", "select_maps", "semantic_entropy_estimate"]


@dataclass
class Selection:
    """Maps chosen for transmission, in descending-score order."""

    indices: np.ndarray   # selected map indices, score-descending, ties by index
    lam: int              # number of selected maps
    residual: float       # confidence minus the selected score mass
    epsilon: float        # budget that produced this selection


def _score_order(scores: np.ndarray) -> np.ndarray:
    # lexsort: primary key last -> descending score, ties ascending index
    return np.lexsort((np.arange(scores.size), -scores))


def select_maps(iv: ImportanceVector, epsilon: float) -> Selection:
    """Greedy descending-score prefix meeting `residual < epsilon`.

    epsilon > confidence selects nothing; epsilon = 0 selects all maps;
    if the strict constraint is unreachable the full set is returned.
    """
    if epsilon < 0:
        raise ParameterError("epsilon must be >= 0")
    scores = np.asarray(iv.scores, dtype=np.float64)
    order = _score_order(scores)
    n = scores.size

    if epsilon == 0.0:
        residual = float(iv.confidence - scores.sum())
        return Selection(indices=order, lam=n, residual=residual, epsilon=0.0)

    residual = float(iv.confidence)
    if residual < epsilon:
        return Selection(indices=order[:0], lam=0, residual=residual, epsilon=epsilon)
    for count, idx in enumerate(order, start=1):
        residual -= float(scores[idx])
        if residual < epsilon:
            return Selection(indices=order[:count], lam=count,
                             residual=residual, epsilon=epsilon)
    # Budget unreachable: everything is selected.
    return Selection(indices=order, lam=n, residual=residual, epsilon=epsilon)


def semantic_entropy_estimate(dataset, head: HeadParams, epsilon: float) -> float:
    """Mean selected-map count over a dataset, each item scored at its
    predicted class. Equals N when epsilon = 0."""
    items = list(dataset)
    if not items:
        raise ParameterError("dataset is empty")
    lams = [select_maps(importance(head, it), epsilon).lam for it in items]
    return float(np.mean(lams))
