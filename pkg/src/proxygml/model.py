"""Trainable parameters: the proxy set and the embedding head standing in for a backbone."""
from dataclasses import dataclass, field

import numpy as np

from .core_math import matmul
from .errors import ParameterError, ShapeError


def make_rng(seed):
    """All randomness goes through PCG64 so a seed means the same stream everywhere."""
    return np.random.Generator(np.random.PCG64(seed))


@dataclass
class ProxySet:
    raw: np.ndarray
    proxy_labels: np.ndarray
    num_classes: int
    per_class: int

    @property
    def y_p(self):
        out = np.zeros((len(self.proxy_labels), self.num_classes))
        out[np.arange(len(self.proxy_labels)), self.proxy_labels] = 1.0
        return out


def proxy_labels_for(c, n):
    return np.repeat(np.arange(c, dtype=np.int64), n)


def init_proxies(c, n, d, seed):
    if min(c, n, d) < 1:
        raise ParameterError("c, n and d must all be >= 1")
    raw = make_rng(seed).standard_normal((c * n, d))
    return ProxySet(raw=raw, proxy_labels=proxy_labels_for(c, n), num_classes=c, per_class=n)


@dataclass
class EmbeddingHead:
    kind: str
    d_in: int
    d_out: int
    weight: np.ndarray | None = field(default=None)

    def __post_init__(self):
        if self.kind == "identity":
            if self.d_in != self.d_out:
                raise ParameterError(f"identity head needs d_in == d_out, got {self.d_in} != {self.d_out}")
            self.weight = None
        elif self.kind == "linear":
            if self.weight is None:
                # rectangular identity: starts out as a pass-through of the precomputed features
                self.weight = np.eye(self.d_in, self.d_out)
            self.weight = np.asarray(self.weight, dtype=np.float64)
            if self.weight.shape != (self.d_in, self.d_out):
                raise ShapeError(f"head weight {self.weight.shape} != ({self.d_in}, {self.d_out})")
            if not np.all(np.isfinite(self.weight)):
                raise ParameterError("head weight has non-finite entries")
        else:
            raise ParameterError(f"unknown head kind {self.kind!r}")


def head_forward(head, features):
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != head.d_in:
        raise ShapeError(f"features {features.shape} do not match head input dim {head.d_in}")
    if head.kind == "identity":
        return features
    return matmul(features, head.weight)


def head_backward(head, features, upstream):
    """Returns ``(grad_weight, grad_features)``; ``grad_weight`` is None for the identity head."""
    features = np.asarray(features, dtype=np.float64)
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != (features.shape[0], head.d_out):
        raise ShapeError(f"upstream {upstream.shape} does not match output ({features.shape[0]}, {head.d_out})")
    if head.kind == "identity":
        return None, upstream
    return matmul(features.T, upstream), matmul(upstream, head.weight.T)
