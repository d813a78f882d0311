"""Decoding soft response matrices into labels, and error metrics."""
import itertools
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import linear_sum_assignment

__all__ = [
    "Prediction",
    "predict_multiclass",
    "predict_multilabel",
    "error_rate",
    "serendipitous_errors",
]


@dataclass
class Prediction:
    """Decoded labels.

    For ``kind="multiclass"`` ``labels`` is an int array of 1-based class ids
    and ``ties`` counts rows whose maximum was shared. For
    ``kind="multilabel"`` ``labels`` is a list of sets of 1-based ids.
    """

    kind: str
    labels: object
    threshold: Optional[float] = None
    ties: int = 0


def predict_multiclass(H):
    """Row-wise argmax; ties go to the smallest class index."""
    H = np.atleast_2d(np.asarray(H, dtype=float))
    if H.shape[1] < 2:
        raise ValueError("multi-class decoding needs at least two columns")
    best = H.argmax(axis=1)
    ties = int(np.sum(np.sum(H == H.max(axis=1, keepdims=True), axis=1) > 1))
    return Prediction("multiclass", best + 1, ties=ties)


def predict_multilabel(H, threshold):
    """Per-row label sets ``{j : H[i, j] >= threshold}``; empty sets allowed."""
    H = np.atleast_2d(np.asarray(H, dtype=float))
    hits = H >= threshold
    sets = [set((np.flatnonzero(row) + 1).tolist()) for row in hits]
    return Prediction("multilabel", sets, threshold=float(threshold))


def error_rate(pred, truth, eval_mask):
    """Fraction of points selected by ``eval_mask`` with ``pred != truth``."""
    pred = np.asarray(getattr(pred, "labels", pred))
    truth = np.asarray(truth)
    mask = np.asarray(eval_mask, dtype=bool)
    if not (pred.shape == truth.shape == mask.shape):
        raise ValueError(
            f"length mismatch: pred {pred.shape}, truth {truth.shape}, mask {mask.shape}"
        )
    if not mask.any():
        raise ValueError("evaluation mask selects no points")
    return float(np.mean(pred[mask] != truth[mask]))


def _best_matching(agree):
    """Maximum-agreement assignment of rows (truth) to columns (pred)."""
    k, m = agree.shape
    if k <= 6 and m <= 8:
        best, best_perm = -1, None
        for perm in itertools.permutations(range(m), k):
            score = sum(agree[r, perm[r]] for r in range(k))
            if score > best:
                best, best_perm = score, perm
        return best_perm
    rows, cols = linear_sum_assignment(-agree)
    perm = [None] * k
    for r, c in zip(rows, cols):
        perm[r] = c
    return perm


def serendipitous_errors(pred, truth, eval_mask, hidden_classes):
    """Error rates when some classes had no labeled data.

    Points of visible classes are scored directly. Points of hidden classes
    are a clustering sub-problem: predicted ids outside the visible set are
    matched one-to-one to the hidden ids, choosing the matching with the most
    agreement (exhaustive search for up to 6 hidden classes, Hungarian
    assignment beyond).

    Returns
    -------
    dict with ``known``, ``hidden`` and ``overall`` error rates (``nan`` when
    the corresponding subset is empty) and the chosen ``mapping``
    {predicted id: hidden id}.
    """
    pred = np.asarray(getattr(pred, "labels", pred))
    truth = np.asarray(truth)
    mask = np.asarray(eval_mask, dtype=bool)
    hidden = sorted(set(int(h) for h in hidden_classes))
    if not hidden:
        raise ValueError("hidden_classes must be nonempty")
    if not mask.any():
        raise ValueError("evaluation mask selects no points")

    is_hidden = np.isin(truth, hidden)
    known = mask & ~is_hidden
    unknown = mask & is_hidden
    known_wrong = pred[known] != truth[known]

    mapping = {}
    if unknown.any():
        visible = set(np.unique(truth).tolist()) - set(hidden)
        candidates = sorted(set(np.unique(pred[unknown]).tolist()) - visible)
        candidates = candidates + [c for c in hidden if c not in candidates]
        agree = np.array(
            [[np.sum((truth[unknown] == h) & (pred[unknown] == p)) for p in candidates] for h in hidden],
            dtype=float,
        )
        perm = _best_matching(agree)
        mapping = {int(candidates[perm[r]]): h for r, h in enumerate(hidden)}
        mapped = np.array([mapping.get(int(p), -1) for p in pred[unknown]])
        hidden_wrong = mapped != truth[unknown]
    else:
        hidden_wrong = np.zeros(0, dtype=bool)

    def rate(wrong):
        return float(np.mean(wrong)) if wrong.size else float("nan")

    return {
        "known": rate(known_wrong),
        "hidden": rate(hidden_wrong),
        "overall": rate(np.concatenate([known_wrong, hidden_wrong])),
        "mapping": mapping,
    }
