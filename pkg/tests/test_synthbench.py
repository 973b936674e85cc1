import numpy as np
import pytest
from scipy.signal import hilbert, welch

from vibrodiag.errors import InvalidSpec
from vibrodiag.synthbench import (
    DatasetSpec,
    FaultCondition,
    FaultType,
    defect_frequency,
    make_dataset,
    synth_signal,
)

FS = 16000


def cond(ft, sev=250, rpm=6000.0, load=900.0):
    return FaultCondition(ft, sev, rpm, load)


class TestDefectFrequency:
    def test_healthy_zero(self):
        assert defect_frequency(cond(FaultType.HEALTHY, 0)) == 0.0

    def test_inner_multiplier(self):
        assert defect_frequency(cond(FaultType.INNER_RACE, 150, rpm=6000)) == pytest.approx(540.0)

    def test_outer_multiplier(self):
        assert defect_frequency(cond(FaultType.OUTER_RACE, 150, rpm=12000)) == pytest.approx(720.0)


def band_peak_over_floor_db(samples, lo, hi):
    """Welch power in [lo, hi] against the local median floor."""
    f, p = welch(samples, fs=FS, nperseg=4096)
    band = (f >= lo) & (f <= hi)
    ref = (f >= lo - 150) & (f <= hi + 150) & ~band
    return 10 * np.log10(p[band].max() / np.median(p[ref]))


def envelope_peak_hz(samples):
    env = np.abs(hilbert(samples))
    env = env - env.mean()
    spec = np.abs(np.fft.rfft(env))
    freqs = np.fft.rfftfreq(len(env), 1 / FS)
    lo = np.searchsorted(freqs, 100.0)
    return freqs[lo + int(np.argmax(spec[lo : lo + 2000]))]


class TestSynthSignal:
    def test_healthy_has_no_defect_band_line(self):
        sig = synth_signal(cond(FaultType.HEALTHY, 0), 1.0, FS, seed=2)
        assert band_peak_over_floor_db(sig.samples, 510, 570) < 6.0

    def test_faulty_has_defect_band_line(self):
        sig = synth_signal(cond(FaultType.INNER_RACE, 150, load=0.0), 1.0, FS, seed=2)
        assert band_peak_over_floor_db(sig.samples, 510, 570) > 6.0

    @pytest.mark.parametrize("ft", [FaultType.INNER_RACE, FaultType.OUTER_RACE, FaultType.ROLLER])
    def test_envelope_line_at_defect_rate(self, ft):
        c = cond(ft)
        sig = synth_signal(c, 1.0, FS, seed=4)
        bin_hz = FS / len(sig)
        assert abs(envelope_peak_hz(sig.samples) - defect_frequency(c)) <= 2 * bin_hz

    def test_severity_monotonic_rms(self):
        rms = []
        for sev in (150, 250, 450):
            sig = synth_signal(cond(FaultType.ROLLER, sev), 1.0, FS, seed=11)
            rms.append(float(np.sqrt(np.mean(sig.samples**2))))
        assert rms[0] < rms[1] < rms[2]

    def test_determinism(self):
        a = synth_signal(cond(FaultType.INNER_RACE), 1.0, FS, seed=3).samples
        b = synth_signal(cond(FaultType.INNER_RACE), 1.0, FS, seed=3).samples
        assert np.array_equal(a, b)

    def test_invalid_duration(self):
        with pytest.raises(InvalidSpec):
            synth_signal(cond(FaultType.HEALTHY, 0), -1.0, FS, seed=0)

    def test_condition_invariants(self):
        with pytest.raises(InvalidSpec):
            FaultCondition(FaultType.HEALTHY, 150, 6000, 0)  # healthy iff sev 0
        with pytest.raises(InvalidSpec):
            FaultCondition(FaultType.ROLLER, 0, 6000, 0)
        with pytest.raises(InvalidSpec):
            FaultCondition(FaultType.ROLLER, 250, 500, 0)  # speed below range


class TestMakeDataset:
    def classes(self):
        return (
            cond(FaultType.HEALTHY, 0),
            cond(FaultType.INNER_RACE),
            cond(FaultType.OUTER_RACE),
            cond(FaultType.ROLLER),
        )

    def test_stratified_counts(self):
        spec = DatasetSpec(self.classes(), clips_per_class=10, duration_s=0.05, seed=1)
        train, test = make_dataset(spec)
        assert len(train) == 32 and len(test) == 8
        for ft in FaultType:
            assert sum(1 for s in train if s.meta.fault_type is ft) == 8
            assert sum(1 for s in test if s.meta.fault_type is ft) == 2

    def test_no_overlap_and_determinism(self):
        spec = DatasetSpec(self.classes(), clips_per_class=5, duration_s=0.05, seed=2)
        tr1, te1 = make_dataset(spec)
        tr2, te2 = make_dataset(spec)
        assert all(np.array_equal(a.samples, b.samples) for a, b in zip(tr1, tr2))
        assert all(np.array_equal(a.samples, b.samples) for a, b in zip(te1, te2))
        train_keys = {a.samples.tobytes() for a in tr1}
        assert all(t.samples.tobytes() not in train_keys for t in te1)

    def test_empty_test_split_rejected(self):
        spec = DatasetSpec(self.classes(), clips_per_class=10, duration_s=0.05,
                           split_ratio=(1.0, 0.0), seed=0)
        with pytest.raises(InvalidSpec):
            make_dataset(spec)
