"""Softmax outputs and the legitimate / eavesdropper training objectives.

Both losses are averaged over the batch. ``loss_r`` is cross-entropy in
bits; ``loss_e`` is the negative entropy in nats, so it is bounded by
``-ln M <= loss_e <= 0`` and reaches its minimum at the uniform output.
"""
from __future__ import annotations

import numpy as np

PROB_FLOOR = 1e-12
LN2 = np.log(2.0)


def softmax(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def hard_decision(probs) -> np.ndarray:
    """argmax with exact ties resolved to the lowest index."""
    return np.argmax(np.asarray(probs), axis=-1)


def _rows(probs):
    p = np.asarray(probs, dtype=np.float64)
    return p[None, :] if p.ndim == 1 else p


def loss_r(probs, labels) -> float:
    p = _rows(probs)
    labels = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    picked = p[np.arange(len(p)), labels]
    return float(np.mean(-np.log2(np.maximum(picked, PROB_FLOOR))))


def loss_e(probs) -> float:
    p = _rows(probs)
    return float(np.mean(np.sum(p * np.log(np.maximum(p, PROB_FLOOR)), axis=-1)))


def loss_total(lr_val: float, le_val: float, alpha: float) -> float:
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    return alpha * lr_val + (1.0 - alpha) * le_val


def loss_r_grad_logits(probs, labels) -> np.ndarray:
    """d loss_r / d logits for the batch-mean loss."""
    p = _rows(probs)
    labels = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    rows = np.arange(len(p))
    g = p.copy()
    g[rows, labels] -= 1.0
    # clamped samples contribute a constant, hence no gradient
    g[p[rows, labels] <= PROB_FLOOR] = 0.0
    return g / (LN2 * len(p))


def loss_e_grad_logits(probs) -> np.ndarray:
    """d loss_e / d logits: p_k (f'(p_k) - sum_i p_i f'(p_i)) with
    f(p) = p ln max(p, floor)."""
    p = _rows(probs)
    fprime = np.where(p > PROB_FLOOR, np.log(np.maximum(p, PROB_FLOOR)) + 1.0, np.log(PROB_FLOOR))
    mean_f = np.sum(p * fprime, axis=-1, keepdims=True)
    return p * (fprime - mean_f) / len(p)
