"""Dense float64 kernels shared by the graph, loss and evaluation code."""
import numpy as np

from .errors import DegenerateInputError, ParameterError, ShapeError

NORM_EPS = 1e-12


def as_matrix(x, name="matrix"):
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ParameterError(f"{name} contains NaN or Inf")
    return a


def matmul(a, b):
    """Matrix product with a fixed summation order.

    Entry (i, j) is accumulated as ``((0 + a[i,0]*b[0,j]) + a[i,1]*b[1,j]) + ...``
    which is exactly what a naive triple loop produces, so results are
    reproducible bit-for-bit regardless of the BLAS in use.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul needs 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul dimension mismatch: {a.shape} x {b.shape}")
    out = np.zeros((a.shape[0], b.shape[1]), dtype=np.float64)
    for k in range(a.shape[1]):
        out += a[:, k : k + 1] * b[k : k + 1, :]
    return out


def l2_normalize_rows(x):
    """Return ``(unit_rows, norms)``; zero rows are rejected, not patched."""
    x = as_matrix(x, "x")
    norms = np.sqrt(np.sum(x * x, axis=1))
    bad = np.flatnonzero(norms < NORM_EPS)
    if bad.size:
        raise DegenerateInputError(f"row {int(bad[0])} has norm < {NORM_EPS}: zero feature vector")
    return x / norms[:, None], norms


def l2_normalize_backward(x_raw, upstream, norms=None):
    """Gradient through ``x / ||x||`` per row: ``(u - (u.xh) xh) / ||x||``."""
    x_raw = np.asarray(x_raw, dtype=np.float64)
    upstream = np.asarray(upstream, dtype=np.float64)
    if x_raw.shape != upstream.shape or x_raw.ndim != 2:
        raise ShapeError(f"shape mismatch: x {x_raw.shape} vs upstream {upstream.shape}")
    if norms is None:
        _, norms = l2_normalize_rows(x_raw)
    unit = x_raw / norms[:, None]
    radial = np.sum(upstream * unit, axis=1, keepdims=True)
    return (upstream - radial * unit) / norms[:, None]


def top_k_indices(values, k):
    """Indices of the k largest entries, smaller index winning ties, sorted ascending."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1:
        raise ShapeError("top_k_indices expects a vector")
    if not 1 <= k <= values.size:
        raise ParameterError(f"k={k} outside [1, {values.size}]")
    order = np.argsort(-values, kind="stable")
    return np.sort(order[:k])


def top_k_rows(values, k):
    """Row-wise ``top_k_indices`` for a 2-D array, returned as an (rows, k) int array."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2:
        raise ShapeError("top_k_rows expects a matrix")
    if not 1 <= k <= values.shape[1]:
        raise ParameterError(f"k={k} outside [1, {values.shape[1]}]")
    order = np.argsort(-values, axis=1, kind="stable")
    return np.sort(order[:, :k], axis=1)
