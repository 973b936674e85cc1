"""Vibration-signal conditioning: resampling, normalization, PCM16, WAV I/O.

Converts raw vibration segments into the normalized, 16 kHz, PCM16 mono
clips the encoder consumes, and back. All functions are pure; nothing here
mutates its input.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from vibrodiag import _kernels
from vibrodiag.errors import (
    DegenerateSignal,
    IoFailure,
    MalformedWav,
    NonPositiveRate,
)

PCM_FULL_SCALE = 32767  # symmetric: +/-1.0 maps to +/-32767, never -32768

RESAMPLE_TAPS_PER_PHASE = 64
RESAMPLE_KAISER_BETA = 8.6


@dataclass(frozen=True)
class Signal:
    """Real-valued waveform with a sample rate and optional condition metadata."""

    samples: np.ndarray
    sample_rate_hz: int
    meta: Optional[object] = None

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.float64)
        if arr.ndim != 1 or arr.size < 1:
            raise ValueError("signal must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(arr)):
            raise ValueError("signal contains non-finite samples")
        if int(self.sample_rate_hz) <= 0:
            raise NonPositiveRate(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "sample_rate_hz", int(self.sample_rate_hz))

    def __len__(self):
        return self.samples.size


@dataclass(frozen=True)
class WavClip:
    """PCM16 mono clip; the standard input format of the audio encoder."""

    pcm: np.ndarray
    sample_rate_hz: int
    channels: int = 1

    def __post_init__(self):
        arr = np.asarray(self.pcm, dtype=np.int16)
        if arr.ndim != 1:
            raise ValueError("pcm must be 1-D")
        if self.channels != 1:
            raise MalformedWav("only mono clips are supported")
        if arr.size and int(arr.min()) < -PCM_FULL_SCALE:
            raise ValueError("pcm value below -32767 violates the symmetric scheme")
        object.__setattr__(self, "pcm", arr)
        object.__setattr__(self, "sample_rate_hz", int(self.sample_rate_hz))

    def __len__(self):
        return self.pcm.size


def _design_polyphase(up: int, down: int):
    """Windowed-sinc lowpass split into `up` phases of 64 taps each.

    Cutoff sits at the narrower of the input/output Nyquist frequencies,
    expressed in cycles per sample at the up-sampled rate.
    """
    taps = RESAMPLE_TAPS_PER_PHASE
    n_total = taps * up
    fc = 0.5 / max(up, down)
    n = np.arange(n_total, dtype=np.float64)
    center = (n_total - 1) / 2.0
    h = 2.0 * fc * np.sinc(2.0 * fc * (n - center)) * np.kaiser(n_total, RESAMPLE_KAISER_BETA)
    h *= up  # compensate zero-insertion gain
    phases = h.reshape(taps, up).T  # phases[p, k] = h[p + k*up]
    phases_rev = np.ascontiguousarray(phases[:, ::-1])
    return phases_rev, int(center)  # integer delay; residual half-sample shift is negligible


def resample(sig: Signal, target_hz: int) -> Signal:
    """Band-limited rate conversion via a polyphase Kaiser-windowed sinc filter."""
    if int(target_hz) <= 0:
        raise NonPositiveRate(f"target_hz must be positive, got {target_hz}")
    target_hz = int(target_hz)
    src_hz = sig.sample_rate_hz
    if target_hz == src_hz:
        return replace(sig, samples=sig.samples.copy())

    g = math.gcd(target_hz, src_hz)
    up, down = target_hz // g, src_hz // g
    n_in = len(sig)
    n_out = (2 * n_in * target_hz + src_hz) // (2 * src_hz)  # round(n*target/src), half up

    phases_rev, center = _design_polyphase(up, down)
    taps = phases_rev.shape[1]
    front_pad = taps
    # last window reaches index ((n_out-1)*down + center)//up; pad the tail past it
    q_max = ((n_out - 1) * down + center) // up if n_out > 0 else 0
    back_pad = max(q_max - n_in + 1, 0) + taps
    xp = np.concatenate(
        [np.zeros(front_pad), sig.samples, np.zeros(back_pad)]
    )
    y = _kernels.polyphase_apply(xp, phases_rev, up, down, n_out, center, front_pad)
    return replace(sig, samples=y, sample_rate_hz=target_hz)


def normalize_stat(sig: Signal, alpha: float, beta: float) -> Signal:
    """Map the signal to mean `alpha` and population std `beta`."""
    x = sig.samples
    mu = float(np.mean(x))
    sigma = float(np.std(x))  # population (divide by N): normalization, not estimation
    if sigma == 0.0:
        raise DegenerateSignal("constant signal has zero standard deviation")
    return replace(sig, samples=beta * (x - mu) / sigma + alpha)


def normalize_peak(sig: Signal) -> Signal:
    """Linearly scale so max |sample| is exactly 1.0."""
    peak = float(np.max(np.abs(sig.samples)))
    if peak == 0.0:
        raise DegenerateSignal("all-zero signal has no peak to normalize")
    return replace(sig, samples=sig.samples / peak)


def quantize_pcm16(sig: Signal) -> WavClip:
    """Symmetric 16-bit quantization; values outside [-1, 1] are clamped."""
    x = np.clip(sig.samples, -1.0, 1.0)
    pcm = np.round(x * PCM_FULL_SCALE).astype(np.int16)
    return WavClip(pcm=pcm, sample_rate_hz=sig.sample_rate_hz)


def dequantize_pcm16(clip: WavClip) -> Signal:
    return Signal(
        samples=clip.pcm.astype(np.float64) / PCM_FULL_SCALE,
        sample_rate_hz=clip.sample_rate_hz,
    )


def wav_file_bytes(clip: WavClip) -> bytes:
    """Canonical 44-byte-header RIFF/WAVE PCM16 mono image of the clip."""
    data = np.ascontiguousarray(clip.pcm, dtype="<i2").tobytes()
    rate = clip.sample_rate_hz
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF",
        36 + len(data),
        b"WAVE",
        b"fmt ",
        16,
        1,  # PCM
        1,  # mono
        rate,
        rate * 2,  # byte rate
        2,  # block align
        16,  # bits per sample
        b"data",
        len(data),
    )
    return header + data


def write_wav(clip: WavClip, path) -> None:
    try:
        with open(path, "wb") as fh:
            fh.write(wav_file_bytes(clip))
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def read_wav(path) -> WavClip:
    """Read a RIFF/WAVE PCM16 mono file; anything else raises MalformedWav."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    return parse_wav_bytes(raw)


def parse_wav_bytes(raw: bytes) -> WavClip:
    if len(raw) < 12 or raw[0:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise MalformedWav("not a RIFF/WAVE file")
    pos = 12
    fmt = None
    data = None
    while pos + 8 <= len(raw):
        chunk_id = raw[pos : pos + 4]
        (size,) = struct.unpack_from("<I", raw, pos + 4)
        body = raw[pos + 8 : pos + 8 + size]
        if chunk_id == b"fmt " and fmt is None:
            if len(body) < 16:
                raise MalformedWav("fmt chunk too short")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif chunk_id == b"data" and data is None:
            if len(body) < size:
                raise MalformedWav("data chunk truncated")
            data = body
        pos += 8 + size + (size & 1)  # chunks are word-aligned
    if fmt is None or data is None:
        raise MalformedWav("missing fmt or data chunk")
    audio_format, channels, rate, _byte_rate, _block_align, bits = fmt
    if audio_format != 1:
        raise MalformedWav(f"audio format {audio_format} is not PCM")
    if bits != 16:
        raise MalformedWav(f"{bits}-bit samples are not PCM16")
    if channels != 1:
        raise MalformedWav(f"{channels}-channel audio; mono required")
    pcm = np.frombuffer(data, dtype="<i2").astype(np.int16)
    return WavClip(pcm=pcm, sample_rate_hz=rate)


def add_noise_snr(sig: Signal, snr_db: float, seed: int) -> Signal:
    """Add zero-mean Gaussian noise at the requested SNR; +inf means no noise."""
    if math.isinf(snr_db) and snr_db > 0:
        return replace(sig, samples=sig.samples.copy())
    p_signal = float(np.mean(sig.samples**2))
    if p_signal == 0.0:
        raise DegenerateSignal("zero-power signal has no defined SNR")
    p_noise = p_signal / (10.0 ** (snr_db / 10.0))
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(len(sig)) * math.sqrt(p_noise)
    return replace(sig, samples=sig.samples + noise)


def segment(sig: Signal, length: int, hop: int) -> list[Signal]:
    """Fixed-length windows at the given hop; partial tails are dropped."""
    if length < 1 or hop < 1:
        raise ValueError("length and hop must be >= 1")
    n = len(sig)
    if n < length:
        return []
    count = 1 + (n - length) // hop
    return [
        replace(sig, samples=sig.samples[i * hop : i * hop + length].copy())
        for i in range(count)
    ]


@dataclass(frozen=True)
class PipelineConfig:
    """Model-input conditioning: resample, normalize, quantize.

    `normalization` selects peak scaling (default) or the statistical
    transform with calibration constants alpha/beta; the latter is clamped
    to [-1, 1] before quantization so +/-4 std stays inside the PCM range.
    """

    target_hz: int = 16000
    normalization: str = "peak"  # "peak" | "zstat"
    alpha: float = 0.0
    beta: float = 0.25


def prepare_clip(sig: Signal, cfg: PipelineConfig = PipelineConfig()) -> WavClip:
    """Full conditioning pipeline from raw signal to encoder-ready clip."""
    out = resample(sig, cfg.target_hz)
    if cfg.normalization == "peak":
        out = normalize_peak(out)
    elif cfg.normalization == "zstat":
        out = normalize_stat(out, cfg.alpha, cfg.beta)
    else:
        raise ValueError(f"unknown normalization mode {cfg.normalization!r}")
    return quantize_pcm16(out)
