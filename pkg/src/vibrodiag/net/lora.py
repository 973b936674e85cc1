"""Low-rank adapted linear layers: frozen base weight plus trainable B·A update."""

from __future__ import annotations

import numpy as np

from vibrodiag.errors import ShapeMismatch


def init_adapter(d: int, k: int, rank: int, rng: np.random.Generator):
    """A is Gaussian (std 0.02), B is zero so the update starts at exactly zero."""
    a = (rng.standard_normal((rank, k)) * 0.02).astype(np.float32)
    b = np.zeros((d, rank), dtype=np.float32)
    return a, b


def lora_scale(rank: int, alpha: float) -> float:
    return alpha / rank


def lora_linear(x, w0, a, b, rank: int, alpha: float):
    """h = W0 x + (alpha/rank) B (A x) for a single input vector."""
    x = np.asarray(x, dtype=np.float64)
    w0 = np.asarray(w0, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if w0.shape[1] != x.shape[0] or a.shape[1] != x.shape[0] or b.shape[0] != w0.shape[0]:
        raise ShapeMismatch(
            f"W0 {w0.shape}, A {a.shape}, B {b.shape} incompatible with x {x.shape}"
        )
    if a.shape[0] != rank or b.shape[1] != rank:
        raise ShapeMismatch(f"adapter shapes {a.shape}/{b.shape} do not match rank {rank}")
    return w0 @ x + lora_scale(rank, alpha) * (b @ (a @ x))


def lora_layer_counts(d: int, k: int, rank: int) -> tuple[int, int]:
    """(trainable, frozen) parameter counts for one adapted d-by-k layer."""
    return rank * (d + k), d * k


def linear_fwd(x, w, bias, a, b, scale: float):
    """Batched adapted linear on (..., k) inputs. Returns (y, cache).

    Leading dims are flattened so every product runs as one large GEMM.
    """
    lead = x.shape[:-1]
    x2 = x.reshape(-1, x.shape[-1])
    xa = x2 @ a.T
    y = x2 @ w.T
    y += scale * (xa @ b.T)
    if bias is not None:
        y += bias
    return y.reshape(lead + (w.shape[0],)), (x2, xa)


def linear_bwd(dy, cache, w, a, b, scale: float):
    """Returns (dx, dA, dB); the frozen base receives no gradient."""
    x2, xa = cache
    lead = dy.shape[:-1]
    dy2 = dy.reshape(-1, dy.shape[-1])
    dyb = dy2 @ b  # (n, r)
    dx = dy2 @ w
    dx += scale * (dyb @ a)
    da = scale * (dyb.T @ x2)
    db = scale * (dy2.T @ xa)
    return dx.reshape(lead + (w.shape[1],)), da, db
