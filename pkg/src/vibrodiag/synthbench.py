"""Deterministic synthetic bearing-vibration generator.

Stands in for rig-acquired data: oracle-labeled clips with separable
fault signatures. Faulty classes add an impulse train at a fixed multiple
of shaft rate, each impulse convolved with a 3 kHz decaying resonance.
Not a kinematics model; the multipliers are artifact constants chosen so
classes stay spectrally distinct.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from vibrodiag.errors import InvalidSpec
from vibrodiag.sigproc import Signal


class FaultType(str, Enum):
    HEALTHY = "healthy"
    INNER_RACE = "inner_race"
    OUTER_RACE = "outer_race"
    ROLLER = "roller"


ALLOWED_SEVERITIES_UM = (0, 150, 250, 450)

DEFECT_MULTIPLIER = {
    FaultType.HEALTHY: 0.0,
    FaultType.INNER_RACE: 5.4,
    FaultType.OUTER_RACE: 3.6,
    FaultType.ROLLER: 2.3,
}

RESONANCE_HZ = 3000.0
RESONANCE_DECAY_S = 0.002

_SEVERITY_AMP = {150: 0.6, 250: 1.0, 450: 1.6}


@dataclass(frozen=True)
class FaultCondition:
    fault_type: FaultType
    severity_um: int
    speed_rpm: float
    load_n: float

    def __post_init__(self):
        object.__setattr__(self, "fault_type", FaultType(self.fault_type))
        if self.severity_um not in ALLOWED_SEVERITIES_UM:
            raise InvalidSpec(f"severity {self.severity_um} um not in {ALLOWED_SEVERITIES_UM}")
        healthy = self.fault_type is FaultType.HEALTHY
        if healthy != (self.severity_um == 0):
            raise InvalidSpec("healthy condition iff severity is 0 um")
        if not (1000.0 <= self.speed_rpm <= 30000.0):
            raise InvalidSpec(f"speed {self.speed_rpm} rpm outside [1000, 30000]")
        if not (0.0 <= self.load_n <= 1800.0):
            raise InvalidSpec(f"load {self.load_n} N outside [0, 1800]")


@dataclass(frozen=True)
class DatasetSpec:
    classes: tuple[FaultCondition, ...]
    clips_per_class: int
    duration_s: float = 1.0
    fs_hz: int = 16000
    split_ratio: tuple[float, float] = (0.8, 0.2)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(self.classes))
        if self.clips_per_class < 1:
            raise InvalidSpec("clips_per_class must be >= 1")
        if abs(sum(self.split_ratio) - 1.0) > 1e-9:
            raise InvalidSpec("split fractions must sum to 1")


def defect_frequency(cond: FaultCondition) -> float:
    """Impulse repetition rate in Hz; zero for a healthy bearing."""
    shaft_hz = cond.speed_rpm / 60.0
    return shaft_hz * DEFECT_MULTIPLIER[cond.fault_type]


def _load_scale(load_n: float) -> float:
    # linear 0.5x at 0 N up to 1.5x at 1800 N
    return 0.5 + load_n / 1800.0


def _pink_noise(n: int, rng: np.random.Generator) -> np.ndarray:
    """1/sqrt(f)-shaped background noise, unit-ish RMS."""
    white = rng.standard_normal(n)
    spec = np.fft.rfft(white)
    f = np.fft.rfftfreq(n)
    shape = 1.0 / np.sqrt(np.maximum(f, 1.0 / n))
    out = np.fft.irfft(spec * shape, n)
    return out / np.std(out)


def synth_signal(cond: FaultCondition, duration_s: float, fs_hz: int, seed: int) -> Signal:
    """Generate one labeled clip; byte-for-byte reproducible per (cond, seed)."""
    if duration_s <= 0:
        raise InvalidSpec("duration must be positive")
    if fs_hz < 8000:
        raise InvalidSpec("fs_hz must be at least 8000")
    n = int(round(duration_s * fs_hz))
    rng = np.random.default_rng(seed)
    t = np.arange(n) / fs_hz

    shaft_hz = cond.speed_rpm / 60.0
    phase = rng.uniform(0.0, 2.0 * math.pi)
    x = 0.4 * np.sin(2.0 * math.pi * shaft_hz * t + phase)
    x += 0.12 * np.sin(2.0 * math.pi * 2.0 * shaft_hz * t + 1.7 * phase)
    x += 0.08 * _pink_noise(n, rng)

    if cond.fault_type is not FaultType.HEALTHY:
        f_defect = defect_frequency(cond)
        amp = _SEVERITY_AMP[cond.severity_um] * _load_scale(cond.load_n)
        # impulse instants on the exact defect-rate grid, amplitude jittered
        n_impulses = int(math.floor(duration_s * f_defect)) + 1
        k = np.arange(n_impulses)
        idx = np.round(k * fs_hz / f_defect).astype(np.int64)
        idx = idx[idx < n]
        train = np.zeros(n)
        train[idx] = amp * (1.0 + 0.1 * rng.standard_normal(len(idx)))
        # decaying resonance, truncated at 6 time constants
        m = np.arange(int(6 * RESONANCE_DECAY_S * fs_hz))
        kernel = np.exp(-m / (RESONANCE_DECAY_S * fs_hz)) * np.sin(
            2.0 * math.pi * RESONANCE_HZ * m / fs_hz
        )
        x += np.convolve(train, kernel)[:n]

    return Signal(samples=x, sample_rate_hz=fs_hz, meta=cond)


def clip_seed(spec_seed: int, class_index: int, clip_index: int) -> int:
    """Stable per-clip seed derivation."""
    ss = np.random.SeedSequence(entropy=[spec_seed, class_index, clip_index])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def make_dataset(spec: DatasetSpec) -> tuple[list[Signal], list[Signal]]:
    """Stratified train/test clips; the first fraction of each class trains."""
    n_test = round(spec.clips_per_class * spec.split_ratio[1])
    n_train = spec.clips_per_class - n_test
    if n_test < 1 or n_train < 1:
        raise InvalidSpec(
            f"split {spec.split_ratio} leaves a class with an empty side "
            f"({n_train} train / {n_test} test)"
        )
    train: list[Signal] = []
    test: list[Signal] = []
    for ci, cond in enumerate(spec.classes):
        for j in range(spec.clips_per_class):
            sig = synth_signal(cond, spec.duration_s, spec.fs_hz, clip_seed(spec.seed, ci, j))
            (train if j < n_train else test).append(sig)
    return train, test
