"""Finite-difference verification of the analytic adapter gradients."""

from __future__ import annotations

import numpy as np

from vibrodiag._threads import single_thread_blas
from vibrodiag.net.model import ModelParams
from vibrodiag.optim.losses import ce_loss


def _to_f64(params: ModelParams) -> ModelParams:
    out = ModelParams(config=params.config)
    out.base = {k: v.astype(np.float64) for k, v in params.base.items()}
    out.adapters = {k: v.astype(np.float64) for k, v in params.adapters.items()}
    return out


def grad_check(
    params: ModelParams,
    tokens: np.ndarray,
    mels: np.ndarray,
    mask: np.ndarray,
    sample_size: int = 1,
    eps: float = 1e-3,
    seed: int = 0,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    Runs the float64 path so the finite differences are not drowned by
    float32 forward rounding; `sample_size` coordinates are drawn per
    adapter tensor. Relative error uses max(|analytic|, |numeric|, 1e-8)
    in the denominator.
    """
    if sample_size < 1:
        raise ValueError("sample_size must be >= 1")
    with single_thread_blas():
        return _grad_check(params, tokens, mels, mask, sample_size, eps, seed)


def _grad_check(params, tokens, mels, mask, sample_size, eps, seed):
    p64 = _to_f64(params)
    _, grads = ce_loss(p64, tokens, mels, mask, collect_grads=True, dtype=np.float64)
    n = tokens.shape[0]
    rng = np.random.default_rng(np.random.SeedSequence(entropy=[seed]))
    worst = 0.0
    for key in sorted(p64.adapters):
        arr = p64.adapters[key]
        for _ in range(sample_size):
            idx = tuple(int(rng.integers(0, s)) for s in arr.shape)
            old = arr[idx]
            arr[idx] = old + eps
            up, _ = ce_loss(p64, tokens, mels, mask, dtype=np.float64)
            arr[idx] = old - eps
            dn, _ = ce_loss(p64, tokens, mels, mask, dtype=np.float64)
            arr[idx] = old
            numeric = (up - dn) * n / (2.0 * eps)  # ce_loss reports the mean
            analytic = float(grads[key][idx])
            rel = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8)
            worst = max(worst, rel)
    return worst
