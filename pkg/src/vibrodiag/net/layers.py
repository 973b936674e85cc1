"""Transformer building blocks with explicit forward/backward passes.

Everything operates on plain numpy arrays and returns caches for manual
backpropagation. The dtype follows the inputs, so the same code serves the
float32 training path and the float64 gradient-check path.
"""

from __future__ import annotations

import math

import numpy as np

NEG_INF = -1e9

_pe_cache: dict = {}
_mask_cache: dict = {}


def sinusoidal_positions(n: int, d: int, dtype=np.float32) -> np.ndarray:
    key = (n, d, np.dtype(dtype).str)
    pe = _pe_cache.get(key)
    if pe is None:
        pos = np.arange(n, dtype=np.float64)[:, None]
        i = np.arange(d // 2, dtype=np.float64)[None, :]
        angles = pos / np.power(10000.0, 2.0 * i / d)
        pe = np.zeros((n, d), dtype=np.float64)
        pe[:, 0::2] = np.sin(angles)
        pe[:, 1::2] = np.cos(angles)
        pe = pe.astype(dtype)
        pe.setflags(write=False)
        _pe_cache[key] = pe
    return pe


def causal_mask(lq: int, lk: int) -> np.ndarray:
    mask = _mask_cache.get((lq, lk))
    if mask is None:
        mask = np.triu(np.ones((lq, lk), dtype=bool), k=1)
        mask.setflags(write=False)
        _mask_cache[(lq, lk)] = mask
    return mask


def softmax_rows(x: np.ndarray) -> np.ndarray:
    e = x - np.max(x, axis=-1, keepdims=True)
    np.exp(e, out=e)
    e /= np.sum(e, axis=-1, keepdims=True)
    return e


def layernorm_fwd(x, g, b, eps=1e-5):
    mu = np.mean(x, axis=-1, keepdims=True)
    xc = x - mu
    var = np.mean(xc * xc, axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    return g * xhat + b, (xhat, inv, g)


def layernorm_bwd(dy, cache):
    xhat, inv, g = cache
    dxhat = dy * g
    m1 = np.mean(dxhat, axis=-1, keepdims=True)
    m2 = np.mean(dxhat * xhat, axis=-1, keepdims=True)
    return inv * (dxhat - m1 - xhat * m2)


_GELU_C = math.sqrt(2.0 / math.pi)


def gelu_fwd(x):
    u = x * x
    u *= 0.044715 * _GELU_C
    u += _GELU_C
    u *= x  # u = c*(x + 0.044715 x^3)
    t = np.tanh(u, out=u)
    return 0.5 * x * (1.0 + t), (x, t)


def gelu_bwd(dy, cache):
    # d/dx [0.5 x (1 + tanh(u))] = 0.5 (1 + t + x (1 - t^2) du/dx)
    x, t = cache
    g = x * x
    g *= 3.0 * 0.044715 * _GELU_C
    g += _GELU_C
    g *= x  # x * du/dx
    t2 = t * t
    np.subtract(1.0, t2, out=t2)
    g *= t2
    g += t
    g += 1.0
    g *= 0.5
    g *= dy
    return g


def attn_core_fwd(q, k, v, causal: bool):
    """Scaled dot-product attention on (B, H, L, d) tensors.

    Returns (context, cache); the cache keeps the row-stochastic weights.
    """
    dk = q.shape[-1]
    scores = q @ np.swapaxes(k, -1, -2)
    scores *= 1.0 / math.sqrt(dk)
    if causal:
        lq, lk = scores.shape[-2], scores.shape[-1]
        scores[..., causal_mask(lq, lk)] = NEG_INF
    attn = softmax_rows(scores)
    ctx = attn @ v
    return ctx, (q, k, v, attn)


def attn_core_bwd(dctx, cache):
    q, k, v, attn = cache
    dk_dim = q.shape[-1]
    dattn = dctx @ np.swapaxes(v, -1, -2)
    dv = np.swapaxes(attn, -1, -2) @ dctx
    # softmax backward, rowwise, reusing dattn as scratch
    m = np.einsum("...ij,...ij->...i", dattn, attn)[..., None]
    dattn -= m
    dattn *= attn
    dattn *= 1.0 / math.sqrt(dk_dim)
    dq = dattn @ k
    dk = np.swapaxes(dattn, -1, -2) @ q
    return dq, dk, dv


def split_heads(x, n_heads: int):
    """(B, L, d) -> (B, H, L, d/H)"""
    b, l, d = x.shape
    return x.reshape(b, l, n_heads, d // n_heads).transpose(0, 2, 1, 3)


def merge_heads(x):
    """(B, H, L, dh) -> (B, L, H*dh)"""
    b, h, l, dh = x.shape
    return x.transpose(0, 2, 1, 3).reshape(b, l, h * dh)
