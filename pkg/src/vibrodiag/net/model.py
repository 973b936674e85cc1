"""The diagnosis model: LoRA-adapted audio encoder and autoregressive decoder.

The encoder turns log-mel frames into a short sequence of audio tokens;
the decoder consumes text tokens whose AUDIO slots are overwritten by those
rows, attends back to the audio sequence through cross-attention, and emits
next-token distributions. Forward and backward passes are written by hand
on numpy arrays; every linear layer carries a low-rank adapter and only the
adapters ever receive gradients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from vibrodiag.errors import ShapeMismatch, SlotMismatch
from vibrodiag.net.config import ModelConfig
from vibrodiag.net.layers import (
    attn_core_bwd,
    attn_core_fwd,
    gelu_bwd,
    gelu_fwd,
    layernorm_bwd,
    layernorm_fwd,
    merge_heads,
    sinusoidal_positions,
    softmax_rows,
    split_heads,
)
from vibrodiag.net.lora import init_adapter, linear_bwd, linear_fwd
from vibrodiag.net.mel import mel_frontend
from vibrodiag.sigproc import WavClip
from vibrodiag.textcodec import AUDIO


@dataclass
class ModelParams:
    """Frozen base weights plus one adapter pair per linear layer."""

    config: ModelConfig
    base: dict = field(default_factory=dict)
    adapters: dict = field(default_factory=dict)

    def adapted_layers(self) -> list[str]:
        return sorted(k[:-2] for k in self.adapters if k.endswith(".A"))

    def clone(self) -> "ModelParams":
        return ModelParams(
            config=self.config,
            base={k: v.copy() for k, v in self.base.items()},
            adapters={k: v.copy() for k, v in self.adapters.items()},
        )


def _add_linear(params: ModelParams, name: str, d: int, k: int, rng: np.random.Generator):
    params.base[name + ".W"] = (rng.standard_normal((d, k)) * 0.02).astype(np.float32)
    params.base[name + ".b"] = np.zeros(d, dtype=np.float32)
    a, b = init_adapter(d, k, params.config.lora_rank, rng)
    params.adapters[name + ".A"] = a
    params.adapters[name + ".B"] = b


def _add_layernorm(params: ModelParams, name: str, d: int):
    params.base[name + ".g"] = np.ones(d, dtype=np.float32)
    params.base[name + ".b"] = np.zeros(d, dtype=np.float32)


def init_params(cfg: ModelConfig = ModelConfig(), seed: int = 0) -> ModelParams:
    """Random frozen base, Gaussian A, zero B: the model starts exactly at base."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=[seed]))
    p = ModelParams(config=cfg)
    d, ff, dk = cfg.d_model, cfg.ff_dim, cfg.head_dim

    p.base["tok_emb"] = (rng.standard_normal((cfg.vocab_size, d)) * 0.02).astype(np.float32)

    _add_linear(p, "enc.in_proj", d, cfg.mel_bins, rng)
    for i in range(cfg.encoder_layers):
        _add_layernorm(p, f"enc.{i}.ln1", d)
        for w in ("wq", "wk", "wv", "wo"):
            _add_linear(p, f"enc.{i}.attn.{w}", d, d, rng)
        _add_layernorm(p, f"enc.{i}.ln2", d)
        _add_linear(p, f"enc.{i}.ff.w1", ff, d, rng)
        _add_linear(p, f"enc.{i}.ff.w2", d, ff, rng)
    _add_layernorm(p, "enc.lnf", d)

    for i in range(cfg.decoder_layers):
        _add_layernorm(p, f"dec.{i}.ln1", d)
        for w in ("wq", "wk", "wv", "wo"):
            _add_linear(p, f"dec.{i}.self.{w}", d, d, rng)
        _add_layernorm(p, f"dec.{i}.ln2", d)
        _add_linear(p, f"dec.{i}.cross.wq", dk, d, rng)
        _add_linear(p, f"dec.{i}.cross.wk", dk, d, rng)
        _add_linear(p, f"dec.{i}.cross.wv", d, d, rng)
        _add_linear(p, f"dec.{i}.cross.wo", d, d, rng)
        _add_layernorm(p, f"dec.{i}.ln3", d)
        _add_linear(p, f"dec.{i}.ff.w1", ff, d, rng)
        _add_linear(p, f"dec.{i}.ff.w2", d, ff, rng)
    _add_layernorm(p, "dec.lnf", d)

    _add_linear(p, "lm_head", cfg.vocab_size, d, rng)
    return p


def trainable_param_count(params: ModelParams) -> tuple[int, int]:
    """(trainable, frozen) totals; adapters train, everything else is frozen."""
    trainable = sum(v.size for v in params.adapters.values())
    frozen = sum(v.size for v in params.base.values())
    return trainable, frozen


class Ctx:
    """One forward/backward context: dtype selection and gradient collection."""

    def __init__(self, params: ModelParams, dtype=np.float32, collect_grads: bool = False):
        self.params = params
        self.dtype = dtype
        self.grads: dict | None = {} if collect_grads else None
        cfg = params.config
        self.scale = cfg.lora_alpha / cfg.lora_rank

    def w(self, key: str) -> np.ndarray:
        arr = self.params.base[key]
        return arr if arr.dtype == self.dtype else arr.astype(self.dtype)

    def a(self, key: str) -> np.ndarray:
        arr = self.params.adapters[key]
        return arr if arr.dtype == self.dtype else arr.astype(self.dtype)

    def add_grad(self, key: str, g: np.ndarray):
        if self.grads is None:
            return
        g64 = g.astype(np.float64, copy=False)
        if key in self.grads:
            self.grads[key] += g64
        else:
            self.grads[key] = g64.copy()


def _lin_fwd(ctx: Ctx, name: str, x):
    y, cache = linear_fwd(x, ctx.w(name + ".W"), ctx.w(name + ".b"),
                          ctx.a(name + ".A"), ctx.a(name + ".B"), ctx.scale)
    return y, (name, cache)

def _lin_bwd(ctx: Ctx, dy, lincache):
    name, cache = lincache
    dx, da, db = linear_bwd(dy, cache, ctx.w(name + ".W"),
                            ctx.a(name + ".A"), ctx.a(name + ".B"), ctx.scale)
    ctx.add_grad(name + ".A", da)
    ctx.add_grad(name + ".B", db)
    return dx


def _ln_fwd(ctx: Ctx, name: str, x):
    y, cache = layernorm_fwd(x, ctx.w(name + ".g"), ctx.w(name + ".b"))
    return y, cache


def _self_attn_fwd(ctx: Ctx, prefix: str, x, causal: bool):
    h = ctx.params.config.n_heads
    q, cq = _lin_fwd(ctx, f"{prefix}.wq", x)
    k, ck = _lin_fwd(ctx, f"{prefix}.wk", x)
    v, cv = _lin_fwd(ctx, f"{prefix}.wv", x)
    ctx_h, cattn = attn_core_fwd(split_heads(q, h), split_heads(k, h), split_heads(v, h), causal)
    merged = merge_heads(ctx_h)
    out, co = _lin_fwd(ctx, f"{prefix}.wo", merged)
    return out, (cq, ck, cv, cattn, co, h)


def _self_attn_bwd(ctx: Ctx, dout, cache):
    cq, ck, cv, cattn, co, h = cache
    dmerged = _lin_bwd(ctx, dout, co)
    dq_h, dk_h, dv_h = attn_core_bwd(split_heads(dmerged, h), cattn)
    dx = _lin_bwd(ctx, merge_heads(dq_h), cq)
    dx += _lin_bwd(ctx, merge_heads(dk_h), ck)
    dx += _lin_bwd(ctx, merge_heads(dv_h), cv)
    return dx


def _cross_attn_fwd(ctx: Ctx, prefix: str, x, audio):
    """Single-head text-queries-attend-to-audio attention (keys/queries in d_k)."""
    q, cq = _lin_fwd(ctx, f"{prefix}.wq", x)        # (B, Lt, dk)
    k, ck = _lin_fwd(ctx, f"{prefix}.wk", audio)    # (B, La, dk)
    v, cv = _lin_fwd(ctx, f"{prefix}.wv", audio)    # (B, La, d)
    ctx_h, cattn = attn_core_fwd(q[:, None], k[:, None], v[:, None], causal=False)
    merged = ctx_h[:, 0]
    out, co = _lin_fwd(ctx, f"{prefix}.wo", merged)
    return out, (cq, ck, cv, cattn, co)


def _cross_attn_bwd(ctx: Ctx, dout, cache):
    cq, ck, cv, cattn, co = cache
    dmerged = _lin_bwd(ctx, dout, co)
    dq_h, dk_h, dv_h = attn_core_bwd(dmerged[:, None], cattn)
    dx = _lin_bwd(ctx, dq_h[:, 0], cq)
    daudio = _lin_bwd(ctx, dk_h[:, 0], ck)
    daudio += _lin_bwd(ctx, dv_h[:, 0], cv)
    return dx, daudio


def _ffn_fwd(ctx: Ctx, prefix: str, x):
    f1, c1 = _lin_fwd(ctx, f"{prefix}.w1", x)
    g, cg = gelu_fwd(f1)
    f2, c2 = _lin_fwd(ctx, f"{prefix}.w2", g)
    return f2, (c1, cg, c2)


def _ffn_bwd(ctx: Ctx, dout, cache):
    c1, cg, c2 = cache
    dg = _lin_bwd(ctx, dout, c2)
    df1 = gelu_bwd(dg, cg)
    return _lin_bwd(ctx, df1, c1)


def _pool_fwd(x, group: int):
    """Temporal mean-pool over non-overlapping groups; the tail may be shorter."""
    b, f, d = x.shape
    la = -(-f // group)
    out = np.empty((b, la, d), dtype=x.dtype)
    sizes = []
    for j in range(la):
        lo, hi = j * group, min((j + 1) * group, f)
        out[:, j] = x[:, lo:hi].mean(axis=1)
        sizes.append(hi - lo)
    return out, (f, group, sizes)


def _pool_bwd(dz, cache):
    f, group, sizes = cache
    b, la, d = dz.shape
    dx = np.empty((b, f, d), dtype=dz.dtype)
    for j, size in enumerate(sizes):
        lo = j * group
        dx[:, lo : lo + size] = dz[:, j : j + 1] / size
    return dx


def standardize_mel(mel: np.ndarray) -> np.ndarray:
    """Per-clip zero-mean/unit-std conditioning of the encoder input.

    A fixed function of the data (no trainable statistics), so it is
    deterministic per clip and batch-composition independent.
    """
    mu = mel.mean(axis=(-2, -1), keepdims=True)
    sd = mel.std(axis=(-2, -1), keepdims=True)
    return (mel - mu) / (sd + np.asarray(1e-5, dtype=mel.dtype))


def encode_audio_fwd(ctx: Ctx, mel: np.ndarray):
    """mel (B, F, mel_bins) -> audio tokens (B, La, d_model)."""
    cfg = ctx.params.config
    mel = standardize_mel(mel.astype(ctx.dtype, copy=False))
    x, c_proj = _lin_fwd(ctx, "enc.in_proj", mel)
    x = x + sinusoidal_positions(x.shape[1], cfg.d_model, ctx.dtype)[None]
    layer_caches = []
    for i in range(cfg.encoder_layers):
        h, c_ln1 = _ln_fwd(ctx, f"enc.{i}.ln1", x)
        attn, c_attn = _self_attn_fwd(ctx, f"enc.{i}.attn", h, causal=False)
        x = x + attn
        h2, c_ln2 = _ln_fwd(ctx, f"enc.{i}.ln2", x)
        ff, c_ff = _ffn_fwd(ctx, f"enc.{i}.ff", h2)
        x = x + ff
        layer_caches.append((c_ln1, c_attn, c_ln2, c_ff))
    xf, c_lnf = _ln_fwd(ctx, "enc.lnf", x)
    z, c_pool = _pool_fwd(xf, cfg.audio_downsample)
    return z, (c_proj, layer_caches, c_lnf, c_pool)


def encode_audio_bwd(ctx: Ctx, dz: np.ndarray, cache):
    cfg = ctx.params.config
    c_proj, layer_caches, c_lnf, c_pool = cache
    dx = layernorm_bwd(_pool_bwd(dz, c_pool), c_lnf)
    for i in reversed(range(cfg.encoder_layers)):
        c_ln1, c_attn, c_ln2, c_ff = layer_caches[i]
        dff = _ffn_bwd(ctx, dx, c_ff)
        dx = dx + layernorm_bwd(dff, c_ln2)
        dattn = _self_attn_bwd(ctx, dx, c_attn)
        dx = dx + layernorm_bwd(dattn, c_ln1)
    _lin_bwd(ctx, dx, c_proj)


def _audio_slots(tokens: np.ndarray) -> np.ndarray:
    """Per-row AUDIO slot positions; every row must have the same count."""
    counts = (tokens == AUDIO).sum(axis=1)
    if counts.size and not np.all(counts == counts[0]):
        raise SlotMismatch("rows in a batch must carry equal AUDIO slot counts")
    return counts


def decoder_fwd(ctx: Ctx, tokens: np.ndarray, audio: np.ndarray, last_only: bool = False):
    """tokens (B, L) int, audio (B, La, d) -> logits (B, L, vocab).

    With last_only the head runs on the final position alone (generation).
    """
    cfg = ctx.params.config
    b, l = tokens.shape
    if l > cfg.max_seq:
        raise ValueError(f"sequence length {l} exceeds max_seq {cfg.max_seq}")
    counts = _audio_slots(tokens)
    la = audio.shape[1]
    if counts.size and counts[0] != la:
        raise SlotMismatch(f"{counts[0]} AUDIO slots but {la} audio tokens")

    emb = ctx.w("tok_emb")[tokens]
    slot_mask = tokens == AUDIO
    emb[slot_mask] = audio.astype(ctx.dtype, copy=False).reshape(-1, cfg.d_model)
    x = emb + sinusoidal_positions(l, cfg.d_model, ctx.dtype)[None]

    layer_caches = []
    for i in range(cfg.decoder_layers):
        h, c_ln1 = _ln_fwd(ctx, f"dec.{i}.ln1", x)
        attn, c_attn = _self_attn_fwd(ctx, f"dec.{i}.self", h, causal=True)
        x = x + attn
        h2, c_ln2 = _ln_fwd(ctx, f"dec.{i}.ln2", x)
        cross, c_cross = _cross_attn_fwd(ctx, f"dec.{i}.cross", h2, audio.astype(ctx.dtype, copy=False))
        x = x + cross
        h3, c_ln3 = _ln_fwd(ctx, f"dec.{i}.ln3", x)
        ff, c_ff = _ffn_fwd(ctx, f"dec.{i}.ff", h3)
        x = x + ff
        layer_caches.append((c_ln1, c_attn, c_ln2, c_cross, c_ln3, c_ff))
    xf, c_lnf = _ln_fwd(ctx, "dec.lnf", x if not last_only else x[:, -1:])
    logits, c_head = _lin_fwd(ctx, "lm_head", xf)
    return logits, (slot_mask, layer_caches, c_lnf, c_head, audio.shape)


def decoder_bwd(ctx: Ctx, dlogits: np.ndarray, cache):
    """Returns the gradient w.r.t. the audio token sequence (B, La, d)."""
    cfg = ctx.params.config
    slot_mask, layer_caches, c_lnf, c_head, audio_shape = cache
    dx = layernorm_bwd(_lin_bwd(ctx, dlogits, c_head), c_lnf)
    daudio = np.zeros(audio_shape, dtype=dx.dtype)
    for i in reversed(range(cfg.decoder_layers)):
        c_ln1, c_attn, c_ln2, c_cross, c_ln3, c_ff = layer_caches[i]
        dff = _ffn_bwd(ctx, dx, c_ff)
        dx = dx + layernorm_bwd(dff, c_ln3)
        dcross, da = _cross_attn_bwd(ctx, dx, c_cross)
        daudio += da
        dx = dx + layernorm_bwd(dcross, c_ln2)
        dattn = _self_attn_bwd(ctx, dx, c_attn)
        dx = dx + layernorm_bwd(dattn, c_ln1)
    # token embeddings are frozen; only the audio rows propagate further
    daudio += dx[slot_mask].reshape(daudio.shape)
    return daudio


def full_fwd(ctx: Ctx, tokens: np.ndarray, mel: np.ndarray):
    z, enc_cache = encode_audio_fwd(ctx, mel)
    logits, dec_cache = decoder_fwd(ctx, tokens, z)
    return logits, (enc_cache, dec_cache)


def full_bwd(ctx: Ctx, dlogits: np.ndarray, caches):
    enc_cache, dec_cache = caches
    daudio = decoder_bwd(ctx, dlogits, dec_cache)
    encode_audio_bwd(ctx, daudio, enc_cache)


# --- single-clip inference helpers ---

def encode_audio(clip: WavClip, params: ModelParams) -> np.ndarray:
    """Audio token sequence (La, d_model) for one clip, float32, no gradients."""
    mel = mel_frontend(clip, params.config)
    ctx = Ctx(params, np.float32)
    z, _ = encode_audio_fwd(ctx, mel[None].astype(np.float32))
    return z[0]


def forward_logits(params: ModelParams, tokens, audio: np.ndarray) -> np.ndarray:
    """Logits (L, vocab) for one sequence with its audio tokens."""
    tok = np.asarray(tokens, dtype=np.int64)[None]
    ctx = Ctx(params, np.float32)
    logits, _ = decoder_fwd(ctx, tok, audio[None].astype(np.float32))
    return logits[0]


def forward_next_token(params: ModelParams, tokens, audio: np.ndarray) -> np.ndarray:
    """Next-token distribution after the last position; sums to 1."""
    tok = np.asarray(tokens, dtype=np.int64)
    n_slots = int((tok == AUDIO).sum())
    if n_slots != audio.shape[0]:
        raise SlotMismatch(f"{n_slots} AUDIO slots but {audio.shape[0]} audio tokens")
    ctx = Ctx(params, np.float32)
    logits, _ = decoder_fwd(ctx, tok[None], audio[None].astype(np.float32), last_only=True)
    return softmax_rows(logits[0, -1].astype(np.float64))


def cross_attention(z_text: np.ndarray, z_audio: np.ndarray,
                    w_q: np.ndarray, w_k: np.ndarray, w_v: np.ndarray):
    """The fusion primitive: softmax(z_text Wq (z_audio Wk)^T / sqrt(dk)) (z_audio Wv).

    Returns (weights (Lt, La), context (Lt, d_v)).
    """
    if z_text.shape[-1] != w_q.shape[1] or z_audio.shape[-1] != w_k.shape[1]:
        raise ShapeMismatch(
            f"projections {w_q.shape}/{w_k.shape} do not accept "
            f"{z_text.shape}/{z_audio.shape}"
        )
    if w_q.shape[0] != w_k.shape[0]:
        raise ShapeMismatch("query and key projections must share d_k")
    dk = w_q.shape[0]
    q = z_text @ w_q.T
    k = z_audio @ w_k.T
    weights = softmax_rows(q @ k.T / math.sqrt(dk))
    context = weights @ (z_audio @ w_v.T)
    return weights, context
