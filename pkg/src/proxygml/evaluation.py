"""Retrieval and clustering metrics on test embeddings."""
import json
from dataclasses import dataclass

import numpy as np

from .core_math import l2_normalize_rows
from .errors import ParameterError
from .model import make_rng


@dataclass
class EvalReport:
    recall_at: dict
    nmi: float
    n_queries: int

    def to_dict(self):
        return {"recall": {str(n): v for n, v in sorted(self.recall_at.items())},
                "nmi": self.nmi, "n_queries": self.n_queries}

    def to_json(self):
        return json.dumps(self.to_dict())


def _sq_dists(a, b):
    # explicit differences: exact zero for duplicate points, unlike the |a|^2+|b|^2-2ab shortcut
    return np.sum((a[:, None, :] - b[None, :, :]) ** 2, axis=2)


def neighbor_order(x, max_n, chunk=512):
    """For each row, indices of its ``max_n`` nearest other rows (ties -> smaller index)."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty((len(x), max_n), dtype=np.int64)
    for lo in range(0, len(x), chunk):
        d = _sq_dists(x[lo : lo + chunk], x)
        d[np.arange(len(d)), np.arange(lo, lo + len(d))] = np.inf
        out[lo : lo + chunk] = np.argsort(d, axis=1, kind="stable")[:, :max_n]
    return out


def recall_at_n(embeddings, labels, ns):
    embeddings = np.asarray(embeddings, dtype=np.float64)
    labels = np.asarray(labels)
    n_items = len(embeddings)
    if n_items < 2:
        raise ParameterError("recall needs at least two items")
    ns = sorted({int(n) for n in ns})
    if ns[0] < 1 or ns[-1] > n_items - 1:
        raise ParameterError(f"n must lie in [1, {n_items - 1}], got {ns}")
    hits = labels[neighbor_order(embeddings, ns[-1])] == labels[:, None]
    first_hit = np.where(hits.any(axis=1), hits.argmax(axis=1), ns[-1])
    return {n: float(np.mean(first_hit < n)) for n in ns}


def _kmeans_pp(x, k, rng):
    centers = [x[rng.integers(len(x))]]
    closest = np.sum((x - centers[0]) ** 2, axis=1)
    for _ in range(1, k):
        total = closest.sum()
        if total > 0:
            idx = rng.choice(len(x), p=closest / total)
        else:
            idx = rng.integers(len(x))
        centers.append(x[idx])
        closest = np.minimum(closest, np.sum((x - x[idx]) ** 2, axis=1))
    return np.array(centers)


def kmeans(embeddings, k_clusters, seed=0, max_iters=300, n_init=10):
    """Lloyd iterations from k-means++ starts; returns the assignments of the lowest-inertia run."""
    x = np.asarray(embeddings, dtype=np.float64)
    if not 1 <= k_clusters <= len(x):
        raise ParameterError(f"k_clusters={k_clusters} must lie in [1, {len(x)}]")
    rng = make_rng(seed)
    best, best_inertia = None, np.inf
    for _ in range(n_init):
        assign, inertia = _lloyd(x, _kmeans_pp(x, k_clusters, rng), max_iters)
        if inertia < best_inertia:
            best, best_inertia = assign, inertia
    return best


def _lloyd(x, centers, max_iters):
    k_clusters = len(centers)
    assign = None
    for _ in range(max_iters):
        d = _sq_dists(x, centers)
        new = np.argmin(d, axis=1)
        for c in range(k_clusters):
            if not np.any(new == c):
                # hand the empty cluster the point farthest from its own center
                far = int(np.argmax(d[np.arange(len(x)), new]))
                new[far] = c
                d[far, :] = 0.0
        if assign is not None and np.array_equal(new, assign):
            break
        assign = new
        centers = np.array([x[assign == c].mean(axis=0) for c in range(k_clusters)])
    inertia = float(np.sum((x - centers[assign]) ** 2))
    return assign, inertia


def nmi(assignments, true_labels):
    a = np.asarray(assignments)
    b = np.asarray(true_labels)
    if a.shape != b.shape:
        raise ParameterError(f"length mismatch: {a.shape} vs {b.shape}")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1))
    np.add.at(table, (ai, bi), 1.0)
    p = table / table.sum()
    pa, pb = p.sum(axis=1), p.sum(axis=0)
    h_a = -np.sum(pa * np.log(pa))
    h_b = -np.sum(pb * np.log(pb))
    if h_a * h_b == 0:
        return 0.0
    nonzero = table > 0
    if np.all(nonzero.sum(axis=0) == 1) and np.all(nonzero.sum(axis=1) == 1):
        return 1.0  # identical partitions up to relabeling
    nz = p > 0
    mi = np.sum(p[nz] * np.log(p[nz] / np.outer(pa, pb)[nz]))
    return float(min(1.0, max(0.0, mi / np.sqrt(h_a * h_b))))


def evaluate_embeddings(embeddings, labels, ns=(1, 2, 4, 8), kmeans_seed=0):
    """Unit-normalize, then Recall@n over ``ns`` and NMI of k-means with K = #classes."""
    x, _ = l2_normalize_rows(embeddings)
    labels = np.asarray(labels)
    recalls = recall_at_n(x, labels, ns)
    assign = kmeans(x, len(np.unique(labels)), seed=kmeans_seed)
    return EvalReport(recall_at=recalls, nmi=nmi(assign, labels), n_queries=len(x))
