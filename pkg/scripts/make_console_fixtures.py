"""Generate the browser-console test fixtures.

Writes into frontend/fixtures/:
  clip.wav            a short synthetic faulty clip (PCM16 mono, 16 kHz)
  spectrogram.json    {width, height} of the reference render
  spectrogram.rgba    reference RGBA pixels from the same STFT + colormap
                      the TypeScript renderer implements
  tiny.ck             a small checkpoint for the live-gateway integration test

Run: python scripts/make_console_fixtures.py
"""

import json
import os

import numpy as np

from vibrodiag.net import ModelConfig, init_params
from vibrodiag.optim import save_checkpoint
from vibrodiag.sigproc import Signal, normalize_peak, quantize_pcm16, write_wav
from vibrodiag.synthbench import FaultCondition, FaultType, synth_signal

OUT = os.path.join(os.path.dirname(__file__), "..", "frontend", "fixtures")

WIN = 400
HOP = 160
DB_RANGE = 80.0

# shared colormap anchors (value, rgb); the TS renderer carries the same table
ANCHORS = [
    (0.00, (0, 0, 4)),
    (0.33, (101, 21, 110)),
    (0.66, (229, 89, 52)),
    (1.00, (252, 255, 164)),
]


def colormap(t: float) -> tuple[int, int, int]:
    for (v0, c0), (v1, c1) in zip(ANCHORS, ANCHORS[1:]):
        if t <= v1:
            u = (t - v0) / (v1 - v0)
            return tuple(round(c0[i] + u * (c1[i] - c0[i])) for i in range(3))
    return ANCHORS[-1][1]


def spectrogram_pixels(samples: np.ndarray) -> tuple[np.ndarray, int, int]:
    """Log-power STFT (win 400 / hop 160, Hann) mapped through the colormap.

    Column-per-frame, low frequencies at the bottom. Returns (rgba, w, h).
    """
    n_frames = 1 + (len(samples) - WIN) // HOP
    window = 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(WIN) / (WIN - 1))
    power = np.empty((n_frames, WIN // 2 + 1))
    for f in range(n_frames):
        seg = samples[f * HOP : f * HOP + WIN] * window
        power[f] = np.abs(np.fft.rfft(seg)) ** 2
    db = 10.0 * np.log10(power + 1e-12)
    vmax = float(db.max())
    t = np.clip((db - (vmax - DB_RANGE)) / DB_RANGE, 0.0, 1.0)
    h, w = t.shape[1], t.shape[0]
    rgba = np.zeros((h, w, 4), dtype=np.uint8)
    for x in range(w):
        for y in range(h):
            r, g, b = colormap(float(t[x, y]))
            rgba[h - 1 - y, x] = (r, g, b, 255)
    return rgba, w, h


def main():
    os.makedirs(OUT, exist_ok=True)
    sig = synth_signal(FaultCondition(FaultType.INNER_RACE, 250, 6000, 900), 0.5, 16000, 77)
    clip = quantize_pcm16(normalize_peak(sig))
    write_wav(clip, os.path.join(OUT, "clip.wav"))

    samples = clip.pcm.astype(np.float64) / 32767.0
    rgba, w, h = spectrogram_pixels(samples)
    with open(os.path.join(OUT, "spectrogram.rgba"), "wb") as fh:
        fh.write(rgba.tobytes())
    with open(os.path.join(OUT, "spectrogram.json"), "w") as fh:
        json.dump({"width": w, "height": h, "db_range": DB_RANGE}, fh)
        fh.write("\n")

    params = init_params(ModelConfig(), seed=123)
    save_checkpoint(params, os.path.join(OUT, "tiny.ck"),
                    extra={"stage": "init", "label_set": "toy4"})
    print(f"fixtures written to {OUT}: clip.wav, spectrogram.rgba ({w}x{h}), tiny.ck")


if __name__ == "__main__":
    main()
