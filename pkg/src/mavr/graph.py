"""Similarity graphs, graph Laplacians, and point-cloud datasets.

Similarity matrices always have a zero diagonal. Kernels:

* ``gaussian``: ``exp(-|xi - xj|^2 / (2 sigma^2))``
* ``local_scaling``: ``exp(-|xi - xj|^2 / (2 s_i s_j))`` where ``s_i`` is the
  distance from ``x_i`` to its k-th nearest neighbour (itself excluded)
* ``cosine_knn``: cosine similarity kept only between mutual k-nearest
  neighbours (neighbours ranked by cosine similarity)
"""
import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .linalg import as_symmetric

__all__ = [
    "Dataset",
    "KernelSpec",
    "build_similarity",
    "build_laplacian",
    "median_distance",
    "read_csv",
    "write_csv",
]

KERNELS = ("gaussian", "local_scaling", "cosine_knn")
LAPLACIANS = ("normalized", "unnormalized")
JITTER = 1e-10


@dataclass
class Dataset:
    """Points in R^d with optional class ids.

    ``labels`` holds class ids in ``1..c``; 0 marks a point whose label is
    unknown (an empty field in CSV).
    """

    points: np.ndarray
    labels: Optional[np.ndarray] = None

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        if not np.all(np.isfinite(self.points)):
            raise ValueError("dataset contains non-finite coordinates")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (self.n,):
                raise ValueError(f"expected {self.n} labels, got shape {self.labels.shape}")
            if np.any(self.labels < 0):
                raise ValueError("class ids must be positive (0 = unknown)")

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def d(self):
        return self.points.shape[1]

    @property
    def n_classes(self):
        if self.labels is None or self.labels.size == 0:
            return 0
        return int(self.labels.max())


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "gaussian"
    sigma: Optional[float] = None
    k: Optional[int] = None

    def __post_init__(self):
        if self.kind not in KERNELS:
            raise ValueError(f"unknown kernel {self.kind!r}; choose from {KERNELS}")
        if self.kind == "gaussian":
            if self.sigma is None or not self.sigma > 0:
                raise ValueError("gaussian kernel needs sigma > 0")
        elif self.k is None or int(self.k) < 1:
            raise ValueError(f"{self.kind} kernel needs a positive integer k")


def _sq_distances(X):
    return squareform(pdist(X, "sqeuclidean"))


def _knn_order(scores, largest):
    """Per-row neighbour ranking excluding self; ties go to the lower index."""
    n = scores.shape[0]
    key = -scores if largest else scores.copy()
    np.fill_diagonal(key, np.inf)
    return np.argsort(key, axis=1, kind="stable")[:, : n - 1]


def build_similarity(data, spec):
    """Dense symmetric similarity matrix ``W`` with zero diagonal."""
    X = data.points if isinstance(data, Dataset) else np.asarray(data, dtype=float)
    n = X.shape[0]
    if n < 2:
        raise ValueError("need at least two points to build a graph")
    if spec.kind != "gaussian" and not spec.k < n:
        raise ValueError(f"k={spec.k} must be smaller than n={n}")

    if spec.kind == "gaussian":
        W = np.exp(-_sq_distances(X) / (2.0 * spec.sigma**2))
    elif spec.kind == "local_scaling":
        D2 = _sq_distances(X)
        kth = _knn_order(D2, largest=False)[:, spec.k - 1]
        scale = np.sqrt(D2[np.arange(n), kth])
        if np.any(scale == 0):
            i = int(np.flatnonzero(scale == 0)[0])
            raise ValueError(
                f"local scale of point {i} is zero: it has at least k={spec.k} duplicates"
            )
        W = np.exp(-D2 / (2.0 * np.outer(scale, scale)))
    else:
        norms = np.linalg.norm(X, axis=1)
        if np.any(norms == 0):
            i = int(np.flatnonzero(norms == 0)[0])
            raise ValueError(f"point {i} is the zero vector; cosine similarity is undefined")
        U = X / norms[:, None]
        S = np.clip(U @ U.T, -1.0, 1.0)
        S = 0.5 * (S + S.T)
        nbrs = _knn_order(S, largest=True)[:, : spec.k]
        A = np.zeros((n, n), dtype=bool)
        A[np.repeat(np.arange(n), spec.k), nbrs.ravel()] = True
        W = np.where(A & A.T, S, 0.0)

    np.fill_diagonal(W, 0.0)
    return W


def build_laplacian(W, kind="normalized", jitter=False):
    """Graph Laplacian of a similarity matrix.

    ``normalized`` gives ``I - D^-1/2 W D^-1/2``, ``unnormalized`` gives
    ``D - W``. With ``jitter=True`` a ridge of ``1e-10 * I`` is added.
    """
    if kind not in LAPLACIANS:
        raise ValueError(f"unknown Laplacian {kind!r}; choose from {LAPLACIANS}")
    W = as_symmetric(W, "W")
    deg = W.sum(axis=1)
    if np.any(deg < 0):
        raise ValueError(f"vertex {int(np.argmin(deg))} has negative degree")
    if kind == "normalized":
        if np.any(deg == 0):
            i = int(np.flatnonzero(deg == 0)[0])
            raise ValueError(
                f"vertex {i} is isolated (degree 0); the normalized Laplacian is undefined. "
                "Use the unnormalized Laplacian or a larger k."
            )
        r = 1.0 / np.sqrt(deg)
        L = np.eye(W.shape[0]) - r[:, None] * W * r[None, :]
    else:
        L = np.diag(deg) - W
    L = 0.5 * (L + L.T)
    if jitter:
        L = L + JITTER * np.eye(L.shape[0])
    return L


def median_distance(data):
    """Median pairwise Euclidean distance, the base of the relative sigma grid."""
    X = data.points if isinstance(data, Dataset) else np.asarray(data, dtype=float)
    return float(np.median(pdist(X)))


def _is_number(s):
    try:
        float(s)
    except ValueError:
        return False
    return True


def read_csv(path, labels="auto"):
    """Read a dataset: feature columns, then an optional integer label column.

    ``labels`` is ``True``, ``False`` or ``"auto"``. In auto mode the last
    column is a label column when the header names it ``label``; without a
    header, a last column whose fields are all integers or empty is taken as
    labels only if some field is empty.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = None
    if not all(_is_number(f) for f in rows[0] if f != ""):
        header, rows = rows[0], rows[1:]

    if labels == "auto":
        if header is not None:
            labels = header[-1].strip().lower() in ("label", "labels", "y", "class")
        else:
            last = [r[-1] for r in rows]
            labels = any(f == "" for f in last) and all(f == "" or f.lstrip("-").isdigit() for f in last)

    width = len(rows[0])
    for lineno, r in enumerate(rows, start=2 if header else 1):
        if len(r) != width:
            raise ValueError(f"{path}:{lineno}: expected {width} fields, got {len(r)}")
    if labels:
        X = np.array([[float(f) for f in r[:-1]] for r in rows], dtype=float)
        y = np.array([int(r[-1]) if r[-1] != "" else 0 for r in rows], dtype=np.int64)
        return Dataset(X.reshape(len(rows), width - 1), y)
    X = np.array([[float(f) for f in r] for r in rows], dtype=float)
    return Dataset(X.reshape(len(rows), width))


def write_csv(data, path):
    """Write a dataset with a header row; unknown labels become empty fields."""
    names = [f"x{j + 1}" for j in range(data.d)]
    if data.labels is not None:
        names.append("label")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for i in range(data.n):
            row = [format(v, ".17g") for v in data.points[i]]
            if data.labels is not None:
                row.append(str(data.labels[i]) if data.labels[i] > 0 else "")
            w.writerow(row)
