"""Linear warmup learning-rate schedule."""

from __future__ import annotations


def lr_at(step: int, total_steps: int, lr: float, warmup_frac: float = 0.05) -> float:
    """Linear ramp from 0 to `lr` over floor(warmup_frac * total), then constant."""
    if not 0 <= step <= total_steps:
        raise ValueError(f"step {step} outside [0, {total_steps}]")
    warmup = int(warmup_frac * total_steps)
    if warmup <= 0 or step >= warmup:
        return lr
    return lr * step / warmup
