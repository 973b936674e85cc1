"""Training objectives: next-token cross-entropy and the preference loss."""

from __future__ import annotations

import math

import numpy as np

from vibrodiag.errors import EmptyBatch
from vibrodiag.net.model import Ctx, ModelParams, full_fwd, full_bwd


def log_softmax_f64(logits: np.ndarray) -> np.ndarray:
    x = logits.astype(np.float64)
    x = x - np.max(x, axis=-1, keepdims=True)
    return x - np.log(np.sum(np.exp(x), axis=-1, keepdims=True))


def ce_from_logits(logits: np.ndarray, tokens: np.ndarray, mask: np.ndarray) -> float:
    """Sum over examples of the per-example token-sum of -log p(y_t | y_<t).

    `mask[b, t]` marks target positions; the prediction for position t comes
    from the logits at t-1, so position 0 can never be a target.
    """
    b_idx, t_idx = np.nonzero(mask)
    if np.any(t_idx == 0):
        raise ValueError("position 0 cannot be a target; nothing precedes it")
    rows = log_softmax_f64(logits[b_idx, t_idx - 1])
    return float(-np.sum(rows[np.arange(len(b_idx)), tokens[b_idx, t_idx]]))


def ce_grad_logits(logits: np.ndarray, tokens: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """d(loss_sum)/d(logits): softmax minus one-hot at predicting positions."""
    dlogits = np.zeros_like(logits)
    b_idx, t_idx = np.nonzero(mask)
    rows = logits[b_idx, t_idx - 1].astype(np.float64)
    rows = rows - np.max(rows, axis=-1, keepdims=True)
    e = np.exp(rows)
    sm = e / np.sum(e, axis=-1, keepdims=True)
    sm[np.arange(len(b_idx)), tokens[b_idx, t_idx]] -= 1.0
    dlogits[b_idx, t_idx - 1] += sm.astype(logits.dtype)
    return dlogits


def ce_loss(
    params: ModelParams,
    tokens: np.ndarray,
    mels: np.ndarray,
    mask: np.ndarray,
    collect_grads: bool = False,
    dtype=np.float32,
):
    """Mean over examples of the token-sum cross-entropy.

    Returns (loss, grads) where grads maps adapter names to float64 arrays
    (None when collect_grads is False).
    """
    if tokens.shape[0] == 0:
        raise EmptyBatch("no examples in batch")
    if not mask.any():
        raise EmptyBatch("batch has no target positions")
    ctx = Ctx(params, dtype, collect_grads=collect_grads)
    logits, caches = full_fwd(ctx, tokens, mels.astype(dtype, copy=False))
    loss_sum = ce_from_logits(logits, tokens, mask)
    n = tokens.shape[0]
    if collect_grads:
        dlogits = ce_grad_logits(logits, tokens, mask)
        full_bwd(ctx, dlogits, caches)
        # gradients of the per-example SUM; divide by example count at update time
        return loss_sum / n, ctx.grads
    return loss_sum / n, None


def dpo_loss(
    policy_logp_w: float,
    policy_logp_l: float,
    ref_logp_w: float,
    ref_logp_l: float,
    beta_dpo: float,
) -> float:
    """-log sigmoid(beta * ((logp_w - ref_w) - (logp_l - ref_l))).

    Pure function over sequence log-probabilities; at zero margin the value
    is ln 2 for every beta.
    """
    margin = (policy_logp_w - ref_logp_w) - (policy_logp_l - ref_logp_l)
    z = beta_dpo * margin
    # -log(sigmoid(z)) = softplus(-z), computed stably
    return float(np.logaddexp(0.0, -z))
