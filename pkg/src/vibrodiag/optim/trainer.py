"""Adapter-only Adam training with gradient accumulation.

The frozen base never receives gradients or updates. Gradients of the
per-example loss sums are accumulated in float64 across micro-batches and
divided by the total example count at update time, so k accumulated
micro-batches behave exactly like one k-fold batch.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from vibrodiag._threads import single_thread_blas
from vibrodiag.errors import EmptyBatch, NonFiniteLoss
from vibrodiag.net.model import ModelParams
from vibrodiag.optim.losses import ce_loss
from vibrodiag.optim.schedule import lr_at
from vibrodiag.textcodec import PAD

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

# the toy default; the reference configuration for full-scale runs uses 1e-5
DEFAULT_TOY_LR = 3e-3


@dataclass
class TrainConfig:
    lr: float = DEFAULT_TOY_LR
    warmup_frac: float = 0.05
    batch: int = 32
    grad_accum: int = 16
    epochs: int = 10
    seed: int = 0
    stage: str = "gfc"  # "vsa" | "gfc"

    def __post_init__(self):
        if not 0 <= self.warmup_frac < 1:
            raise ValueError("warmup_frac must be in [0, 1)")
        if self.batch < 1 or self.grad_accum < 1:
            raise ValueError("batch and grad_accum must be >= 1")
        if self.stage not in ("vsa", "gfc"):
            raise ValueError(f"unknown stage {self.stage!r}")


@dataclass(frozen=True)
class TrainExample:
    """One (audio, token sequence, target mask) training unit."""

    mel: np.ndarray       # (frames, mel_bins)
    tokens: np.ndarray    # (L,) int64
    mask: np.ndarray      # (L,) bool, True on target positions


@dataclass
class CurvePoint:
    step: int
    lr: float
    loss: float


def collate(examples: list[TrainExample]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pad token rows with PAD to the batch maximum; mels must share a shape."""
    if not examples:
        raise EmptyBatch("cannot collate an empty batch")
    mel_shape = examples[0].mel.shape
    for ex in examples:
        if ex.mel.shape != mel_shape:
            raise ValueError("all mels in a batch must share one shape")
    max_len = max(len(ex.tokens) for ex in examples)
    b = len(examples)
    tokens = np.full((b, max_len), PAD, dtype=np.int64)
    mask = np.zeros((b, max_len), dtype=bool)
    mels = np.empty((b,) + mel_shape, dtype=np.float32)
    for i, ex in enumerate(examples):
        tokens[i, : len(ex.tokens)] = ex.tokens
        mask[i, : len(ex.mask)] = ex.mask
        mels[i] = ex.mel
    return tokens, mels, mask


class AdamState:
    def __init__(self):
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.t = 0

    def update(self, params: ModelParams, grads: dict, lr: float):
        self.t += 1
        b1c = 1.0 - ADAM_BETA1**self.t
        b2c = 1.0 - ADAM_BETA2**self.t
        for key in sorted(grads):
            g = grads[key]
            m = self.m.get(key)
            if m is None:
                m = np.zeros_like(g)
                self.v[key] = np.zeros_like(g)
            v = self.v[key]
            m = ADAM_BETA1 * m + (1.0 - ADAM_BETA1) * g
            v = ADAM_BETA2 * v + (1.0 - ADAM_BETA2) * (g * g)
            self.m[key], self.v[key] = m, v
            step = lr * (m / b1c) / (np.sqrt(v / b2c) + ADAM_EPS)
            p64 = params.adapters[key].astype(np.float64) - step
            params.adapters[key] = p64.astype(np.float32)


def train_stage(
    params: ModelParams,
    dataset: list[TrainExample],
    cfg: TrainConfig,
) -> tuple[ModelParams, list[CurvePoint]]:
    """Run one stage; mutates the adapters in place and returns the loss curve."""
    if not dataset:
        raise EmptyBatch("dataset is empty")
    with single_thread_blas():
        return _train_stage(params, dataset, cfg)


def _train_stage(params, dataset, cfg):
    rng = np.random.default_rng(np.random.SeedSequence(entropy=[cfg.seed]))
    n = len(dataset)
    micro_per_epoch = -(-n // cfg.batch)
    updates_per_epoch = -(-micro_per_epoch // cfg.grad_accum)
    total_updates = cfg.epochs * updates_per_epoch

    adam = AdamState()
    curve: list[CurvePoint] = []
    update_idx = 0
    block = cfg.batch * cfg.grad_accum
    for _epoch in range(cfg.epochs):
        order = rng.permutation(n)
        # sorting by length inside one accumulation block leaves the summed
        # gradient unchanged and keeps micro-batches length-homogeneous
        order = np.concatenate(
            [
                sorted(order[s : s + block], key=lambda i: len(dataset[i].tokens))
                for s in range(0, n, block)
            ]
        ).astype(np.int64)
        acc_grads: dict[str, np.ndarray] = {}
        acc_loss = 0.0
        acc_examples = 0
        micro_in_step = 0
        for start in range(0, n, cfg.batch):
            batch = [dataset[i] for i in order[start : start + cfg.batch]]
            tokens, mels, mask = collate(batch)
            loss, grads = ce_loss(params, tokens, mels, mask, collect_grads=True)
            if not np.isfinite(loss):
                raise NonFiniteLoss(
                    f"loss {loss} at update {update_idx}, epoch {_epoch}, offset {start}"
                )
            for k, g in grads.items():
                if k in acc_grads:
                    acc_grads[k] += g
                else:
                    acc_grads[k] = g
            acc_loss += loss * len(batch)
            acc_examples += len(batch)
            micro_in_step += 1
            is_last = start + cfg.batch >= n
            if micro_in_step == cfg.grad_accum or is_last:
                update_idx += 1
                lr = lr_at(update_idx, total_updates, cfg.lr, cfg.warmup_frac)
                mean_grads = {k: g / acc_examples for k, g in acc_grads.items()}
                adam.update(params, mean_grads, lr)
                curve.append(CurvePoint(update_idx, lr, acc_loss / acc_examples))
                acc_grads, acc_loss, acc_examples, micro_in_step = {}, 0.0, 0, 0
    return params, curve


def write_curve_csv(curve: list[CurvePoint], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "lr", "loss"])
        for pt in curve:
            writer.writerow([pt.step, repr(pt.lr), repr(pt.loss)])
