from vibrodiag.net.config import ModelConfig
from vibrodiag.net.mel import mel_frontend, n_audio_tokens, n_frames
from vibrodiag.net.model import (
    Ctx,
    ModelParams,
    cross_attention,
    encode_audio,
    forward_logits,
    forward_next_token,
    init_params,
    trainable_param_count,
)
from vibrodiag.net.lora import lora_layer_counts, lora_linear

__all__ = [
    "ModelConfig",
    "ModelParams",
    "Ctx",
    "mel_frontend",
    "n_frames",
    "n_audio_tokens",
    "encode_audio",
    "forward_logits",
    "forward_next_token",
    "cross_attention",
    "init_params",
    "trainable_param_count",
    "lora_layer_counts",
    "lora_linear",
]
