"""Visual-similarity clusters within one class from precomputed embeddings.

A k-nearest-neighbour graph with Gaussian weights is built over the
embeddings, power iteration smooths a uniform vector over the symmetrised
graph, and every node points at the neighbour that most increases that vector.
Clusters are the weakly connected components of those pointers, so their
number is not fixed in advance.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Optional

import numpy as np

from .patterns import InputError

DEFAULT_K = 10
DEFAULT_BANDWIDTH = 0.5
DEFAULT_ALPHA = 1e-3
DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITERS = 1000


@dataclass(frozen=True)
class EmbeddingSet:
    ids: tuple
    vectors: np.ndarray
    class_name: str = ""

    def __post_init__(self):
        vectors = np.atleast_2d(np.asarray(self.vectors, dtype=float))
        ids = tuple(self.ids)
        if vectors.shape[0] != len(ids):
            raise InputError("number of ids and vectors differ")
        if vectors.shape[1] < 1:
            raise InputError("embedding dimension must be >= 1")
        if len(set(ids)) != len(ids):
            raise InputError("duplicate image ids")
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "vectors", vectors)

    def __len__(self):
        return len(self.ids)


@dataclass(frozen=True)
class NeighborGraph:
    weights: np.ndarray  # dense n x n, zero diagonal
    k: int


@dataclass(frozen=True)
class ClusterAssignment:
    labels: np.ndarray
    n_clusters: int
    ids: tuple = ()
    class_name: str = ""

    def members(self, cluster: int) -> list:
        return [self.ids[i] for i in np.flatnonzero(self.labels == cluster)]

    def label_of(self, image_id) -> int:
        try:
            return int(self.labels[self.ids.index(image_id)])
        except ValueError:
            raise InputError(f"image {image_id!r} not in assignment for {self.class_name!r}") from None


def build_knn_graph(emb: EmbeddingSet, k: int = DEFAULT_K,
                    sigma: float = DEFAULT_BANDWIDTH) -> NeighborGraph:
    """Directed k-NN graph, weight ``exp(-d^2 / sigma^2)`` on each neighbour edge."""
    n = len(emb)
    if n < 2:
        raise InputError("degenerate class")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    k_eff = min(k, n - 1)
    x = emb.vectors
    sq = np.sum(x * x, axis=1)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * x @ x.T, 0.0)
    np.fill_diagonal(d2, np.inf)
    # stable sort: equidistant neighbours resolve to the lowest index
    nbrs = np.argsort(d2, axis=1, kind="stable")[:, :k_eff]
    rows = np.repeat(np.arange(n), k_eff)
    cols = nbrs.ravel()
    weights = np.zeros((n, n))
    weights[rows, cols] = np.exp(-d2[rows, cols] / sigma**2)
    return NeighborGraph(weights, k_eff)


def power_iterate(affinity: np.ndarray, alpha: float = DEFAULT_ALPHA,
                  max_iters: int = DEFAULT_MAX_ITERS, tol: float = DEFAULT_TOL,
                  history: Optional[list] = None) -> np.ndarray:
    """Iterate ``s <- L1(alpha * A s + (1 - alpha) s)`` from the uniform vector.

    Appends ``||s||_1`` after each iteration to ``history`` if given.
    """
    n = affinity.shape[0]
    s = np.full(n, 1.0 / n)
    for _ in range(max_iters):
        nxt = alpha * (affinity @ s) + (1.0 - alpha) * s
        nxt /= np.abs(nxt).sum()
        if history is not None:
            history.append(float(np.abs(nxt).sum()))
        delta = np.max(np.abs(nxt - s))
        s = nxt
        if delta < tol:
            break
    return s


def _weak_components(parent: np.ndarray) -> np.ndarray:
    """Component id per node of a graph where each node has <= 1 out-edge (-1 = none)."""
    n = len(parent)
    root = np.arange(n)

    def find(i):
        while root[i] != i:
            root[i] = root[root[i]]
            i = root[i]
        return i

    for i, j in enumerate(parent):
        if j >= 0:
            ri, rj = find(i), find(j)
            if ri != rj:
                root[max(ri, rj)] = min(ri, rj)
    return np.array([find(i) for i in range(n)])


def _relabel_by_size(components: np.ndarray) -> np.ndarray:
    """Cluster 0 is the largest; equal sizes are ordered by lowest member index."""
    keys, first, counts = np.unique(components, return_index=True, return_counts=True)
    order = sorted(range(len(keys)), key=lambda c: (-counts[c], first[c]))
    mapping = {keys[c]: rank for rank, c in enumerate(order)}
    return np.array([mapping[c] for c in components], dtype=np.int64)


def pic_cluster(graph: NeighborGraph, alpha: float = DEFAULT_ALPHA,
                max_iters: int = DEFAULT_MAX_ITERS, tol: float = DEFAULT_TOL,
                history: Optional[list] = None) -> ClusterAssignment:
    n = graph.weights.shape[0]
    if n == 1:
        return ClusterAssignment(np.zeros(1, dtype=np.int64), 1)
    affinity = graph.weights + graph.weights.T
    s = power_iterate(affinity, alpha, max_iters, tol, history)

    gain = affinity * (s[None, :] - s[:, None])
    best = np.argmax(gain, axis=1)  # lowest index on ties
    parent = np.where(gain[np.arange(n), best] > 0, best, -1)
    labels = _relabel_by_size(_weak_components(parent))
    return ClusterAssignment(labels, int(labels.max()) + 1)


def cluster_class(class_name: str, image_ids: Iterable, embeddings: Mapping,
                  k: int = DEFAULT_K, sigma: float = DEFAULT_BANDWIDTH,
                  alpha: float = DEFAULT_ALPHA) -> ClusterAssignment:
    """Cluster the images of one class.

    ``embeddings`` maps image id (or ``"<class>/<id>"``) to a vector.
    """
    ids = tuple(image_ids)
    if not ids:
        raise InputError(f"class {class_name!r} has no images")
    vectors, missing = [], []
    for image_id in ids:
        vec = embeddings.get(f"{class_name}/{image_id}")
        if vec is None:
            vec = embeddings.get(image_id)
        if vec is None:
            missing.append(image_id)
        else:
            vectors.append(vec)
    if missing:
        raise InputError(f"missing embeddings for class {class_name!r}: {', '.join(map(str, missing))}")

    if len(ids) == 1:
        labels, n_clusters = np.zeros(1, dtype=np.int64), 1
    else:
        emb = EmbeddingSet(ids, np.vstack(vectors), class_name)
        result = pic_cluster(build_knn_graph(emb, k, sigma), alpha)
        labels, n_clusters = result.labels, result.n_clusters
    return ClusterAssignment(labels, n_clusters, ids, class_name)


def read_embeddings(path) -> dict:
    """Load ``{image_id: vector}`` from a text table or a ``.npz`` archive.

    Text format: header ``id dim <d>``, then ``<image_id> f1 ... fd`` per line.
    ``.npz`` archives hold ``ids`` and ``vectors`` arrays.
    """
    path = Path(path)
    if path.suffix == ".npz":
        with np.load(path, allow_pickle=False) as data:
            ids = [str(i) for i in data["ids"]]
            vectors = np.asarray(data["vectors"], dtype=float)
        if vectors.ndim != 2 or len(ids) != vectors.shape[0]:
            raise InputError(f"{path}: ids and vectors do not line up")
        return dict(zip(ids, vectors))

    out: dict = {}
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 3 or header[:2] != ["id", "dim"]:
            raise InputError(f"{path}: expected header 'id dim <d>'")
        try:
            dim = int(header[2])
        except ValueError:
            raise InputError(f"{path}: bad dimension {header[2]!r}") from None
        for lineno, line in enumerate(fh, start=2):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != dim + 1:
                raise InputError(f"{path}:{lineno}: expected {dim} values")
            if parts[0] in out:
                raise InputError(f"{path}:{lineno}: duplicate id {parts[0]!r}")
            try:
                out[parts[0]] = np.array([float(v) for v in parts[1:]])
            except ValueError as exc:
                raise InputError(f"{path}:{lineno}: {exc}") from None
    return out


def write_embeddings(path, embeddings: Mapping) -> None:
    items = list(embeddings.items())
    dim = len(items[0][1]) if items else 0
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"id dim {dim}\n")
        for image_id, vec in items:
            fh.write(image_id + " " + " ".join(repr(float(v)) for v in vec) + "\n")


def write_assignments(path_or_file, assignments: Iterable[ClusterAssignment]) -> None:
    def _write(fh):
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["image_id", "class", "cluster"])
        for a in assignments:
            for image_id, label in zip(a.ids, a.labels):
                writer.writerow([image_id, a.class_name, int(label)])

    if hasattr(path_or_file, "write"):
        _write(path_or_file)
    else:
        with open(path_or_file, "w", encoding="utf-8", newline="") as fh:
            _write(fh)


def read_assignments(path) -> dict:
    """``{class_name: ClusterAssignment}`` from an ``image_id,class,cluster`` CSV."""
    grouped: dict = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"image_id", "class", "cluster"} <= set(reader.fieldnames):
            raise InputError(f"{path}: expected columns image_id,class,cluster")
        for row in reader:
            try:
                label = int(row["cluster"])
            except ValueError:
                raise InputError(f"{path}: bad cluster value {row['cluster']!r}") from None
            grouped.setdefault(row["class"], []).append((row["image_id"], label))
    out = {}
    for name, rows in grouped.items():
        labels = np.array([r[1] for r in rows], dtype=np.int64)
        n_clusters = int(labels.max()) + 1
        if labels.min() < 0 or len(np.unique(labels)) != n_clusters:
            raise InputError(f"{path}: clusters of {name!r} are not 0..n-1")
        out[name] = ClusterAssignment(labels, n_clusters, tuple(r[0] for r in rows), name)
    return out
