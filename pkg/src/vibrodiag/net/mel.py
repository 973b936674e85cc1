"""Log-mel spectrogram front end for 16 kHz mono clips."""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from vibrodiag.errors import TooShort
from vibrodiag.net.config import ModelConfig
from vibrodiag.sigproc import WavClip, dequantize_pcm16

LOG_FLOOR = 1e-6


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(n_mels: int, n_fft: int, fs_hz: int) -> np.ndarray:
    """Triangular unit-peak filters on the mel scale, 0 Hz to Nyquist.

    Returns (n_mels, n_fft//2 + 1) weights.
    """
    fmax = fs_hz / 2.0
    mel_pts = np.linspace(0.0, float(hz_to_mel(fmax)), n_mels + 2)
    hz_pts = mel_to_hz(mel_pts)
    bin_freqs = np.fft.rfftfreq(n_fft, d=1.0 / fs_hz)
    weights = np.zeros((n_mels, bin_freqs.size))
    for i in range(n_mels):
        left, center, right = hz_pts[i], hz_pts[i + 1], hz_pts[i + 2]
        up = (bin_freqs - left) / max(center - left, 1e-12)
        down = (right - bin_freqs) / max(right - center, 1e-12)
        weights[i] = np.clip(np.minimum(up, down), 0.0, 1.0)
    return weights


def mel_band_edges(n_mels: int, fs_hz: int) -> np.ndarray:
    """(n_mels, 2) array of each filter's support in Hz."""
    fmax = fs_hz / 2.0
    mel_pts = np.linspace(0.0, float(hz_to_mel(fmax)), n_mels + 2)
    hz_pts = mel_to_hz(mel_pts)
    return np.stack([hz_pts[:-2], hz_pts[2:]], axis=1)


def mel_frontend(clip: WavClip, cfg: ModelConfig = ModelConfig()) -> np.ndarray:
    """Hann-windowed STFT power through the mel filterbank, log-compressed.

    Returns a (frames, mel_bins) float64 matrix with
    frames = 1 + (N - win) // hop.
    """
    if clip.sample_rate_hz != cfg.sample_rate_hz:
        raise ValueError(
            f"clip at {clip.sample_rate_hz} Hz; front end expects {cfg.sample_rate_hz}"
        )
    x = dequantize_pcm16(clip).samples
    win = cfg.win_samples
    hop = cfg.hop_samples
    if x.size < win:
        raise TooShort(f"{x.size} samples < one {win}-sample analysis window")
    frames = sliding_window_view(x, win)[::hop]
    window = np.hanning(win)
    spec = np.fft.rfft(frames * window, axis=1)
    power = np.abs(spec) ** 2
    fb = mel_filterbank(cfg.mel_bins, win, cfg.sample_rate_hz)
    return np.log(power @ fb.T + LOG_FLOOR)


def n_frames(n_samples: int, cfg: ModelConfig = ModelConfig()) -> int:
    return 1 + (n_samples - cfg.win_samples) // cfg.hop_samples


def n_audio_tokens(n_samples: int, cfg: ModelConfig = ModelConfig()) -> int:
    frames = n_frames(n_samples, cfg)
    return -(-frames // cfg.audio_downsample)
