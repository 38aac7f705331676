"""Cross-entropy losses with analytic gradients with respect to raw logits.

All losses reduce by the batch mean and compute in float64.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .taxonomy import Taxonomy, TaxonomyError, reachability
from .targets import TargetMatrix

LOG_FLOOR = 1e-30


@dataclass
class LossResult:
    loss: float
    grad: np.ndarray
    aggregated: np.ndarray | None = None
    # entries that hit LOG_FLOOR; nonzero means the loss value is a lower bound
    clamped: int = 0


def _as_batch(z) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if z.ndim == 1:
        z = z[None, :]
    if not np.all(np.isfinite(z)):
        raise ValueError("logits must be finite")
    return z


def _check_labels(labels, n: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if labels.size and (labels.min() < 0 or labels.max() >= n):
        raise ValueError(f"labels must lie in [0, {n})")
    return labels


def softmax(z) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(z) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    shifted = z - z.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def aggregate(r: np.ndarray, q_hat: np.ndarray) -> np.ndarray:
    """Subtree mass of every indexed node. The (virtual) root would be 1."""
    q_hat = np.asarray(q_hat, dtype=np.float64)
    if q_hat.shape[-1] != r.shape[0]:
        raise ValueError(f"expected {r.shape[0]} probabilities, got {q_hat.shape[-1]}")
    return q_hat @ r.T.astype(np.float64)


def _softmax_backward(q_hat: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Pull dL/dq_hat back through the softmax."""
    u = q_hat * g
    return u - q_hat * u.sum(axis=1, keepdims=True)


def hace_loss(z, labels, tm: TargetMatrix, r: np.ndarray) -> LossResult:
    """Cross-entropy between ancestral targets and aggregated predictions.

    The root term is dropped: its aggregated prediction is identically 1.
    """
    z = _as_batch(z)
    labels = _check_labels(labels, tm.n)
    if z.shape[1] != r.shape[0] or tm.t.shape[1] != r.shape[0]:
        raise ValueError(f"logit width {z.shape[1]} does not match {r.shape[0]} nodes")
    B = z.shape[0]
    p = tm.gather(labels)
    q_hat = softmax(z)
    q_star = aggregate(r, q_hat)

    active = p > 0
    low = active & (q_star < LOG_FLOOR)
    safe = np.where(active, np.maximum(q_star, LOG_FLOOR), 1.0)
    loss = -(p * np.log(safe)).sum() / B
    g = np.where(active, -p / safe, 0.0)
    grad = _softmax_backward(q_hat, g @ r.astype(np.float64)) / B
    return LossResult(float(loss), grad, q_star, int(low.sum()))


def sce_loss(z, targets) -> LossResult:
    """Flat softmax cross-entropy; ``targets`` are leaf labels or B x n distributions."""
    z = _as_batch(z)
    targets = np.asarray(targets)
    if targets.ndim == 1 and np.issubdtype(targets.dtype, np.integer):
        labels = _check_labels(targets, z.shape[1])
        targets = np.zeros_like(z)
        targets[np.arange(len(labels)), labels] = 1.0
    targets = np.asarray(targets, dtype=np.float64).reshape(z.shape[0], -1)
    if targets.shape != z.shape:
        raise ValueError(f"targets shape {targets.shape} does not match logits {z.shape}")
    B = z.shape[0]
    logq = log_softmax(z)
    loss = -(targets * logq).sum() / B
    grad = (np.exp(logq) - targets) / B
    return LossResult(float(loss), grad)


class HXE:
    """Hierarchical cross-entropy over a leaf softmax.

    For the true leaf's path b_0..b_k the loss is
    -sum_j exp(-alpha j) log(S(b_j) / S(b_{j+1})) where S(v) is the leaf
    mass under v and S(root) = 1. This telescopes into per-node
    coefficients, stored once as an n x N matrix.
    """

    def __init__(self, t: Taxonomy, alpha: float, r: np.ndarray):
        if not t.is_tree:
            raise TaxonomyError("HXE needs a tree hierarchy")
        if alpha < 0:
            raise ValueError(f"alpha must be non-negative, got {alpha}")
        self.alpha = alpha
        self.n = t.n
        # column v: indicator of leaves under v
        self.leaf_cover = r[:, : t.n].T.astype(np.float64)
        coef = np.zeros((t.n, t.N))
        for i, leaf in enumerate(t.leaves):
            v, j, prev = leaf, 0, 0.0
            while v != t.root:
                w = np.exp(-alpha * j)
                coef[i, t.index[v]] = w - prev
                prev = w
                v = t.parents[v][0]
                j += 1
        self.coef = coef

    def __call__(self, z, labels) -> LossResult:
        z = _as_batch(z)
        labels = _check_labels(labels, self.n)
        if z.shape[1] != self.n:
            raise ValueError(f"HXE expects {self.n} leaf logits, got {z.shape[1]}")
        B = z.shape[0]
        q_hat = softmax(z)
        s = q_hat @ self.leaf_cover
        c = self.coef[labels]
        active = c != 0
        low = active & (s < LOG_FLOOR)
        safe = np.where(active, np.maximum(s, LOG_FLOOR), 1.0)
        loss = -(c * np.log(safe)).sum() / B
        g_q = (np.where(active, -c / safe, 0.0)) @ self.leaf_cover.T
        grad = _softmax_backward(q_hat, g_q) / B
        return LossResult(float(loss), grad, s, int(low.sum()))


def hxe_loss(z, labels, t: Taxonomy, alpha: float, r: np.ndarray | None = None) -> LossResult:
    return HXE(t, alpha, reachability(t) if r is None else r)(z, labels)
