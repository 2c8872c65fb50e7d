"""Finite-difference verification of the analytic gradient of the full objective."""
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .model import EmbeddingHead, head_backward, head_forward, make_rng
from .rlp_loss import LossOptions, forward, loss_and_grads

REL_FLOOR = 1e-6


@dataclass
class GradcheckReport:
    max_rel_err: float
    n_params: int
    passed: bool
    options: LossOptions

    def line(self):
        o = self.options
        flags = f"pos={int(o.use_pos_mask)} mask={int(o.use_mask_softmax)} reg={int(o.use_proxy_reg)}"
        return f"{'PASS' if self.passed else 'FAIL'} {flags} params={self.n_params} max_rel_err={self.max_rel_err:.3e}"


def make_problem(batch=8, classes=5, per_class=3, d_in=16, d_embed=16, seed=0):
    if d_in > 32 or d_embed > 32 or batch > 16:
        raise ParameterError("gradcheck is limited to d <= 32 and batch <= 16")
    rng = make_rng(seed)
    feats = rng.standard_normal((batch, d_in))
    weight = np.eye(d_in, d_embed) + 0.3 * rng.standard_normal((d_in, d_embed))
    proxies = rng.standard_normal((classes * per_class, d_embed))
    labels = rng.integers(0, classes, size=batch)
    return feats, weight, proxies, labels, np.repeat(np.arange(classes), per_class), classes


def rel_err(analytic, numeric):
    return np.abs(analytic - numeric) / np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), REL_FLOOR)


def gradcheck(options, batch=8, classes=5, per_class=3, d_in=16, d_embed=16, seed=0,
              step=1e-5, tol=1e-4, corrupt=None):
    """Central differences over every head weight and proxy coordinate.

    ``corrupt`` is a test hook: a callable applied to the analytic gradients
    ``(g_weight, g_proxies)`` before comparison.
    """
    feats, weight, proxies, labels, proxy_labels, c = make_problem(batch, classes, per_class, d_in, d_embed, seed)
    head = EmbeddingHead("linear", d_in, d_embed, weight)

    def loss(w, q):
        e = head_forward(EmbeddingHead("linear", d_in, d_embed, w), feats)
        return forward(e, q, labels, proxy_labels, c, options).l_total

    bundle = loss_and_grads(head_forward(head, feats), proxies, labels, proxy_labels, c, options)
    g_w, _ = head_backward(head, feats, bundle.grad_x_s_raw)
    g_q = bundle.grad_x_p_raw
    if corrupt is not None:
        g_w, g_q = corrupt(g_w.copy(), g_q.copy())

    worst = 0.0
    for param, grad in ((weight, g_w), (proxies, g_q)):
        numeric = np.zeros_like(param)
        for idx in np.ndindex(param.shape):
            old = param[idx]
            param[idx] = old + step
            up = loss(weight, proxies)
            param[idx] = old - step
            down = loss(weight, proxies)
            param[idx] = old
            numeric[idx] = (up - down) / (2 * step)
        worst = max(worst, float(rel_err(grad, numeric).max()))
    return GradcheckReport(worst, weight.size + proxies.size, worst < tol, options)
