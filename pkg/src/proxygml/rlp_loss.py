"""Reverse label propagation objective with hand-derived gradients.

Forward path for a batch of raw sample embeddings ``e`` and raw proxies ``q``::

    x_s = e/|e|, x_p = q/|q|
    S   = x_s x_p^T                  sample-proxy cosine graph
    I   = top-k of S (+ positive mask) per row
    W   = S on I, 0 elsewhere
    Z   = W Y                         per-class cumulative similarity
    P   = mask-softmax(Z)
    L_s = mean_i -log P[i, y_i]
    L_p = mean_j -log softmax(x_p x_p^T Y)[j, y_j]
    L   = L_s + lambda * L_p

The top-k selection is treated as constant in the backward pass.
"""
from dataclasses import dataclass

import numpy as np

from .core_math import l2_normalize_backward, l2_normalize_rows, matmul
from .errors import DegenerateInputError, ParameterError, ShapeError, UsageError
from .graph import build_subgraphs, compute_k, cosine_similarity_graph, positive_mask, proxy_graph

ZERO_TOL = 1e-15
PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class LossOptions:
    ratio: float = 0.05
    lam: float = 0.3
    use_pos_mask: bool = True
    use_mask_softmax: bool = True
    use_proxy_reg: bool = True

    @property
    def effective_lambda(self):
        return self.lam if self.use_proxy_reg else 0.0


@dataclass
class PredictionBundle:
    z: np.ndarray
    m: np.ndarray
    p: np.ndarray


@dataclass
class LossBundle:
    l_s: float
    l_p: float
    l_total: float
    grad_x_s_raw: np.ndarray
    grad_x_p_raw: np.ndarray
    lam: float
    clamp_events: int = 0


def _check_one_hot(y_p):
    y_p = np.asarray(y_p, dtype=np.float64)
    if y_p.ndim != 2 or not np.all((y_p == 0) | (y_p == 1)) or not np.all(y_p.sum(axis=1) == 1):
        raise ParameterError("proxy label matrix must be one-hot per row")
    return y_p


def one_hot(labels, num_classes):
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise ParameterError(f"label outside [0, {num_classes})")
    out = np.zeros((labels.size, num_classes))
    out[np.arange(labels.size), labels] = 1.0
    return out


def reverse_label_propagation(w, y_p):
    w = getattr(w, "w", w)
    y_p = _check_one_hot(y_p)
    if w.shape[1] != y_p.shape[0]:
        raise ShapeError(f"subgraph has {w.shape[1]} proxy columns, labels cover {y_p.shape[0]}")
    return matmul(w, y_p)


def mask_softmax(z):
    z = np.asarray(z, dtype=np.float64)
    m = (np.abs(z) >= ZERO_TOL).astype(np.float64)
    empty = np.flatnonzero(m.sum(axis=1) == 0)
    if empty.size:
        raise DegenerateInputError(f"row {int(empty[0])} of Z is all zero; mask softmax undefined")
    row_max = np.max(np.where(m > 0, z, -np.inf), axis=1, keepdims=True)
    e = np.where(m > 0, np.exp(np.where(m > 0, z - row_max, 0.0)), 0.0)
    return PredictionBundle(z=z, m=m, p=e / e.sum(axis=1, keepdims=True))


def plain_softmax(z):
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return PredictionBundle(z=z, m=np.ones_like(z), p=e / e.sum(axis=1, keepdims=True))


def sample_loss(bundle, y_s, return_clamps=False):
    p = bundle.p if isinstance(bundle, PredictionBundle) else np.asarray(bundle, dtype=np.float64)
    y_s = np.asarray(y_s, dtype=np.int64)
    if y_s.size and (y_s.min() < 0 or y_s.max() >= p.shape[1]):
        raise ParameterError(f"sample label outside [0, {p.shape[1]})")
    true_p = p[np.arange(len(y_s)), y_s]
    clamps = int(np.sum(true_p < PROB_FLOOR))
    loss = float(-np.mean(np.log(np.maximum(true_p, PROB_FLOOR))))
    return (loss, clamps) if return_clamps else loss


def proxy_loss(s_p, y_p, proxy_labels):
    y_p = _check_one_hot(y_p)
    z_p = matmul(np.asarray(s_p, dtype=np.float64), y_p)
    scores = plain_softmax(z_p).p
    labels = np.asarray(proxy_labels, dtype=np.int64)
    return float(-np.mean(np.log(scores[np.arange(len(labels)), labels])))


def total_loss(l_s, l_p, lam):
    if lam < 0:
        raise ParameterError(f"lambda must be non-negative, got {lam}")
    return l_s + lam * l_p


@dataclass
class ForwardCache:
    e_raw: np.ndarray
    q_raw: np.ndarray
    e_norms: np.ndarray
    q_norms: np.ndarray
    x_s: np.ndarray
    x_p: np.ndarray
    labels: np.ndarray
    proxy_labels: np.ndarray
    y_p: np.ndarray
    sub: object
    pred: PredictionBundle
    s_p: np.ndarray
    q_scores: np.ndarray
    options: LossOptions
    l_s: float
    l_p: float
    l_total: float
    clamp_events: int


def forward(e_raw, q_raw, labels, proxy_labels, num_classes, options=LossOptions()):
    """Run the full objective and keep every intermediate needed by ``backward``."""
    labels = np.asarray(labels, dtype=np.int64)
    proxy_labels = np.asarray(proxy_labels, dtype=np.int64)
    x_s, e_norms = l2_normalize_rows(e_raw)
    x_p, q_norms = l2_normalize_rows(q_raw)
    if len(labels) != len(x_s) or len(proxy_labels) != len(x_p):
        raise ShapeError("label vectors do not match embedding rows")
    y_p = one_hot(proxy_labels, num_classes)
    per_class = len(proxy_labels) // num_classes

    g = cosine_similarity_graph(x_s, x_p, labels, proxy_labels)
    k = compute_k(options.ratio, num_classes, per_class)
    pos = positive_mask(labels, proxy_labels, num_classes) if options.use_pos_mask else None
    sub = build_subgraphs(g, pos, k)
    z = reverse_label_propagation(sub, y_p)
    pred = mask_softmax(z) if options.use_mask_softmax else plain_softmax(z)
    l_s, clamps = sample_loss(pred, labels, return_clamps=True)

    s_p = proxy_graph(x_p)
    q_scores = plain_softmax(matmul(s_p, y_p)).p
    l_p = float(-np.mean(np.log(q_scores[np.arange(len(proxy_labels)), proxy_labels])))
    lam = options.effective_lambda
    return ForwardCache(
        e_raw=np.asarray(e_raw, dtype=np.float64), q_raw=np.asarray(q_raw, dtype=np.float64),
        e_norms=e_norms, q_norms=q_norms, x_s=x_s, x_p=x_p, labels=labels,
        proxy_labels=proxy_labels, y_p=y_p, sub=sub, pred=pred, s_p=s_p, q_scores=q_scores,
        options=options, l_s=l_s, l_p=l_p, l_total=total_loss(l_s, l_p, lam), clamp_events=clamps,
    )


def sample_logit_grad(cache):
    """dL_s/dZ. Masked classes and clamped rows get exactly zero."""
    p, m = cache.pred.p, cache.pred.m
    n = len(cache.labels)
    rows = np.arange(n)
    target = np.zeros_like(p)
    target[rows, cache.labels] = 1.0
    dz = (p - target) * m / n
    # a clamped row has a constant loss
    dz[p[rows, cache.labels] < PROB_FLOOR] = 0.0
    return dz


def similarity_grad(cache):
    """dL_s/dS; nonzero only on selected slots."""
    return matmul(sample_logit_grad(cache), cache.y_p.T) * cache.sub.selection_mask()


def backward(cache):
    """Gradients of ``l_total`` w.r.t. the raw (unnormalized) samples and proxies."""
    if cache is None or cache.pred is None or cache.sub is None or cache.s_p is None:
        raise UsageError("backward called without a completed forward pass")
    ds = similarity_grad(cache)
    dx_s = matmul(ds, cache.x_p)
    dx_p = matmul(ds.T, cache.x_s)

    lam = cache.options.effective_lambda
    if lam > 0:
        n_p = len(cache.proxy_labels)
        dzp = lam * (cache.q_scores - cache.y_p) / n_p
        dsp = matmul(dzp, cache.y_p.T)
        dx_p = dx_p + matmul(dsp + dsp.T, cache.x_p)

    return (
        l2_normalize_backward(cache.e_raw, dx_s, cache.e_norms),
        l2_normalize_backward(cache.q_raw, dx_p, cache.q_norms),
    )


def loss_and_grads(e_raw, q_raw, labels, proxy_labels, num_classes, options=LossOptions()):
    cache = forward(e_raw, q_raw, labels, proxy_labels, num_classes, options)
    g_s, g_p = backward(cache)
    return LossBundle(
        l_s=cache.l_s, l_p=cache.l_p, l_total=cache.l_total, grad_x_s_raw=g_s,
        grad_x_p_raw=g_p, lam=cache.options.effective_lambda, clamp_events=cache.clamp_events,
    )
