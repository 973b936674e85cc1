"""Model hyperparameters (toy stand-in scale, every mechanism intact)."""

from __future__ import annotations

from dataclasses import dataclass, asdict

from vibrodiag.textcodec import VOCAB_SIZE


@dataclass(frozen=True)
class ModelConfig:
    d_model: int = 64
    n_heads: int = 4
    encoder_layers: int = 2
    decoder_layers: int = 2
    ff_dim: int = 128
    mel_bins: int = 40
    frame_ms: int = 25
    hop_ms: int = 10
    audio_downsample: int = 4
    vocab_size: int = VOCAB_SIZE
    max_seq: int = 512
    sample_rate_hz: int = 16000
    lora_rank: int = 16
    lora_alpha: float = 32.0

    def __post_init__(self):
        if self.d_model % self.n_heads != 0:
            raise ValueError("d_model must be divisible by n_heads")
        if self.audio_downsample < 1:
            raise ValueError("audio_downsample must be >= 1")

    @property
    def head_dim(self) -> int:
        return self.d_model // self.n_heads

    @property
    def win_samples(self) -> int:
        return self.sample_rate_hz * self.frame_ms // 1000

    @property
    def hop_samples(self) -> int:
        return self.sample_rate_hz * self.hop_ms // 1000

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)
