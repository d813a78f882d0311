"""Synthetic datasets, class-relation presets and transductive splits.

Randomness comes from numpy's counter-based Philox4x64 bit generator seeded
with a 64-bit integer. Uniform doubles are ``Generator.random()``; normal
deviates use the Box-Muller transform on consecutive uniform pairs
``(u1, u2)``, emitting ``sqrt(-2 ln(1 - u1)) * cos(2 pi u2)`` then the
matching ``sin`` term.
"""
from dataclasses import dataclass, field
from typing import FrozenSet

import numpy as np

from .graph import Dataset
from .linalg import sym_eig
from .solver import LabelMatrix

__all__ = [
    "P_PRESETS",
    "preset",
    "make_rng",
    "box_muller",
    "generate_3circles",
    "generate_blobs",
    "SplitSpec",
    "sample_split",
]

_h = 0.5
P_PRESETS = {
    "P1": [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 3, 1], [0, 0, 1, 1]],
    "P2": [[1, 0, 0, 0], [0, 3, 0, 1], [0, 0, 1, 0], [0, 1, 0, 1]],
    "P3": [[1, 0, 0, 0], [0, 1, 0, 1], [0, 0, 1, 1], [0, 1, 1, 3]],
    "P4": [[1, _h, _h, _h], [_h, 2, 0, _h], [_h, 0, 2, _h], [_h, _h, _h, 3]],
    "P5": [[1, _h, _h], [_h, 1, 0], [_h, 0, 1]],
    "P6": [[1, _h, _h, _h], [_h, 1, 0, 0], [_h, 0, 1, 0], [_h, 0, 0, 1]],
}


def preset(name):
    """Class-relation matrix ``P1`` .. ``P6`` as a fresh float array.

    Each preset is checked to be symmetric positive definite.
    """
    key = str(name).upper()
    if key not in P_PRESETS:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(P_PRESETS)}")
    P = np.array(P_PRESETS[key], dtype=float)
    if not np.array_equal(P, P.T) or sym_eig(P).values[0] <= 0:
        raise ValueError(f"preset {key} is not symmetric positive definite")
    return P


def make_rng(seed):
    return np.random.Generator(np.random.Philox(int(seed) & 0xFFFFFFFFFFFFFFFF))


def box_muller(rng, size):
    """``size`` standard normal deviates by the Box-Muller transform."""
    m = (size + 1) // 2
    u = rng.random(2 * m).reshape(m, 2)
    r = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
    theta = 2.0 * np.pi * u[:, 1]
    return np.column_stack([r * np.cos(theta), r * np.sin(theta)]).ravel()[:size]


def _class_counts(n, ratios):
    counts = [int(np.floor(n * r + 0.5)) for r in ratios[:-1]]
    counts.append(n - sum(counts))
    return counts


def generate_3circles(n=300, sigma_eps=0.5, seed=0):
    """Three concentric noisy ellipses.

    Class ``y`` in {1, 2, 3} has share 1/6, 1/3, 1/2 and points
    ``(6 y cos a + e1, 5 y sin a + e2)`` with ``a ~ U(0, 2 pi)`` and
    ``e ~ N(0, sigma_eps^2)``. Points are listed class by class.
    """
    if n < 6:
        raise ValueError("3circles needs n >= 6")
    counts = _class_counts(n, (1 / 6, 1 / 3, 1 / 2))
    y = np.repeat(np.arange(1, 4), counts)
    rng = make_rng(seed)
    a = 2.0 * np.pi * rng.random(n)
    eps = sigma_eps * box_muller(rng, 2 * n).reshape(n, 2)
    X = np.column_stack([6.0 * y * np.cos(a), 5.0 * y * np.sin(a)]) + eps
    return Dataset(X, y)


def generate_blobs(centers, counts, sigma=1.0, seed=0):
    """Isotropic Gaussian clusters; cluster ``k`` gets class id ``k + 1``."""
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    counts = [int(c) for c in counts]
    if len(counts) != centers.shape[0]:
        raise ValueError("one count per center is required")
    if any(c < 1 for c in counts):
        raise ValueError("counts must be positive")
    y = np.repeat(np.arange(1, len(counts) + 1), counts)
    noise = box_muller(make_rng(seed), y.size * centers.shape[1]).reshape(y.size, -1)
    return Dataset(centers[y - 1] + sigma * noise, y)


@dataclass(frozen=True)
class SplitSpec:
    """How to pick the labeled subset.

    ``policy`` is ``uniform`` (l points uniformly without replacement),
    ``stratified`` (one point per class, the rest uniform) or
    ``serendipitous`` (stratified over the visible classes only; points of
    ``hidden_classes`` are never labeled). ``negatives=True`` writes -1 for
    the other classes of each labeled row.
    """

    l: int
    policy: str = "uniform"
    hidden_classes: FrozenSet[int] = field(default_factory=frozenset)
    seed: int = 0
    negatives: bool = False

    def __post_init__(self):
        object.__setattr__(self, "hidden_classes", frozenset(int(h) for h in self.hidden_classes))
        if self.policy not in ("uniform", "stratified", "serendipitous"):
            raise ValueError(f"unknown split policy {self.policy!r}")
        if self.l < 1:
            raise ValueError("need at least one labeled point")
        if self.policy == "serendipitous" and not self.hidden_classes:
            raise ValueError("serendipitous splits need at least one hidden class")


def _stratified(rng, labels, classes, l, pool):
    if l < len(classes):
        raise ValueError(f"stratified split needs l >= {len(classes)} (one per class), got l={l}")
    chosen = []
    for k in classes:
        members = np.flatnonzero(labels == k)
        if members.size == 0:
            raise ValueError(f"class {k} has no points; stratified split is infeasible")
        chosen.append(int(members[rng.integers(members.size)]))
    rest = np.setdiff1d(pool, chosen)
    extra = rng.permutation(rest)[: l - len(chosen)]
    return np.concatenate([np.array(chosen, dtype=np.intp), extra.astype(np.intp)])


def sample_split(data, spec, n_classes=None):
    """Draw the labeled subset and build the label matrix.

    Returns
    -------
    labeled : ndarray of int
        Sorted indices of labeled points.
    Y : LabelMatrix
        ``n x c`` with ``Y[i, y_i - 1] = 1`` on labeled rows.
    """
    if data.labels is None:
        raise ValueError("dataset has no labels to reveal")
    n = data.n
    c = int(n_classes or data.n_classes)
    if spec.l > n:
        raise ValueError(f"l={spec.l} exceeds n={n}")
    labels = data.labels
    rng = make_rng(spec.seed)
    classes = list(range(1, c + 1))

    if spec.policy == "uniform":
        known = np.flatnonzero(labels > 0)
        if known.size < spec.l:
            raise ValueError(f"only {known.size} points carry labels; cannot label {spec.l}")
        idx = rng.permutation(known)[: spec.l]
    elif spec.policy == "stratified":
        idx = _stratified(rng, labels, classes, spec.l, np.flatnonzero(labels > 0))
    else:
        visible = [k for k in classes if k not in spec.hidden_classes]
        if not visible:
            raise ValueError("every class is hidden")
        pool = np.flatnonzero(np.isin(labels, visible))
        if pool.size < spec.l:
            raise ValueError("not enough points in the visible classes")
        if spec.l >= len(visible):
            idx = _stratified(rng, labels, visible, spec.l, pool)
        else:
            idx = rng.permutation(pool)[: spec.l]

    idx = np.sort(idx.astype(np.intp))
    Y = LabelMatrix.from_classes(n, c, idx, labels[idx], negatives=spec.negatives)
    return idx, Y
