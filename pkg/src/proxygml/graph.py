"""Sample-to-proxy similarity graph, positive mask and k-NN subgraphs."""
import math
from dataclasses import dataclass

import numpy as np

from .core_math import matmul, top_k_rows
from .errors import ParameterError, ShapeError


@dataclass(frozen=True)
class SimilarityGraph:
    s: np.ndarray
    sample_labels: np.ndarray
    proxy_labels: np.ndarray


@dataclass(frozen=True)
class SubgraphMatrix:
    w: np.ndarray
    selected: np.ndarray  # (M, k) column indices, ascending per row
    k: int

    def selection_mask(self):
        mask = np.zeros(self.w.shape, dtype=bool)
        np.put_along_axis(mask, self.selected, True, axis=1)
        return mask


def cosine_similarity_graph(x_s, x_p, sample_labels=None, proxy_labels=None):
    x_s = np.asarray(x_s, dtype=np.float64)
    x_p = np.asarray(x_p, dtype=np.float64)
    if x_s.ndim != 2 or x_p.ndim != 2 or x_s.shape[1] != x_p.shape[1]:
        raise ShapeError(f"embedding dims disagree: samples {x_s.shape}, proxies {x_p.shape}")
    s = np.clip(matmul(x_s, x_p.T), -1.0, 1.0)
    sl = np.asarray(sample_labels if sample_labels is not None else np.zeros(len(x_s)), dtype=np.int64)
    pl = np.asarray(proxy_labels if proxy_labels is not None else np.zeros(len(x_p)), dtype=np.int64)
    return SimilarityGraph(s=s, sample_labels=sl, proxy_labels=pl)


def positive_mask(sample_labels, proxy_labels, num_classes=None):
    ys = np.asarray(sample_labels, dtype=np.int64)
    yp = np.asarray(proxy_labels, dtype=np.int64)
    if num_classes is None:
        num_classes = int(yp.max()) + 1 if yp.size else 0
    for name, y in (("sample", ys), ("proxy", yp)):
        if y.size and (y.min() < 0 or y.max() >= num_classes):
            raise ParameterError(f"{name} label outside [0, {num_classes})")
    return (ys[:, None] == yp[None, :]).astype(np.float64)


def compute_k(r, c, n):
    if not 0.0 < r <= 1.0:
        raise ParameterError(f"ratio r={r} outside (0, 1]")
    if c < 1 or n < 1:
        raise ParameterError("class count and proxies per class must be >= 1")
    total = c * n
    # float products such as 0.07*100 = 7.000000000000001 must not round up to 8
    prod = r * total
    k = math.ceil(prod)
    if k - prod > 1 - 1e-9:
        k -= 1
    return max(1, min(k, total))


def build_subgraphs(g, pos, k):
    """Keep the k largest entries of ``s + pos`` per row; W stores the raw ``s`` there."""
    s = g.s
    pos = np.zeros_like(s) if pos is None else np.asarray(pos, dtype=np.float64)
    if pos.shape != s.shape:
        raise ShapeError(f"mask shape {pos.shape} != similarity shape {s.shape}")
    selected = top_k_rows(s + pos, k)
    w = np.zeros_like(s)
    rows = np.arange(s.shape[0])[:, None]
    w[rows, selected] = s[rows, selected]
    return SubgraphMatrix(w=w, selected=selected, k=k)


def proxy_graph(x_p):
    x_p = np.asarray(x_p, dtype=np.float64)
    if x_p.ndim != 2:
        raise ShapeError("proxy matrix must be 2-D")
    # a_ik*a_jk == a_jk*a_ik and the accumulation order is fixed, so this is exactly symmetric
    return np.clip(matmul(x_p, x_p.T), -1.0, 1.0)
