import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vibrodiag import _kernels
from vibrodiag.errors import DegenerateSignal, MalformedWav, NonPositiveRate
from vibrodiag.sigproc import (
    PipelineConfig,
    Signal,
    WavClip,
    add_noise_snr,
    dequantize_pcm16,
    normalize_peak,
    normalize_stat,
    parse_wav_bytes,
    prepare_clip,
    quantize_pcm16,
    read_wav,
    resample,
    segment,
    write_wav,
)


def tone(freq, fs, n, amp=1.0):
    t = np.arange(n) / fs
    return Signal(amp * np.sin(2 * np.pi * freq * t), fs)


class TestResample:
    def test_identity_rate_returns_identical_samples(self):
        sig = tone(440, 16000, 1600)
        out = resample(sig, 16000)
        assert out.sample_rate_hz == 16000
        assert np.array_equal(out.samples, sig.samples)

    def test_length_scales_with_rate(self):
        sig = tone(500, 8000, 8000)
        assert len(resample(sig, 16000)) == 16000
        assert len(resample(sig, 4000)) == 4000
        assert len(resample(tone(500, 8000, 1000), 12345)) == round(1000 * 12345 / 8000)

    @pytest.mark.parametrize("src_hz", [8000, 51200, 25000])
    def test_tone_keeps_its_spectral_bin(self, src_hz):
        sig = tone(1000, src_hz, src_hz)  # 1 s
        out = resample(sig, 16000)
        mid = out.samples[4000 : 4000 + 8192]
        peak = int(np.argmax(np.abs(np.fft.rfft(mid))))
        expected = round(1000 * 8192 / 16000)
        assert abs(peak - expected) <= 1

    def test_nonpositive_rate_rejected(self):
        with pytest.raises(NonPositiveRate):
            resample(tone(10, 8000, 100), 0)

    def test_kernel_backends_agree(self):
        from vibrodiag._kernels import numpy_ref
        from vibrodiag.sigproc import _design_polyphase

        sig = tone(250, 8000, 5000)
        up, down = 2, 1
        phases, center = _design_polyphase(up, down)
        taps = phases.shape[1]
        xp = np.concatenate([np.zeros(taps), sig.samples, np.zeros(taps * 2)])
        args = (xp, phases, up, down, 10000, center, taps)
        y_ref = numpy_ref.polyphase_apply(*args)
        y_sel = _kernels.polyphase_apply(*args)
        np.testing.assert_allclose(y_sel, y_ref, atol=1e-12)


class TestNormalize:
    def test_stat_hand_oracle(self):
        # mu = 2, population sigma = sqrt(2/3)
        out = normalize_stat(Signal(np.array([1.0, 2.0, 3.0]), 100), alpha=0.0, beta=1.0)
        np.testing.assert_allclose(out.samples, [-1.224745, 0.0, 1.224745], atol=1e-6)

    def test_stat_constant_input_degenerate(self):
        with pytest.raises(DegenerateSignal):
            normalize_stat(Signal(np.array([5.0, 5.0, 5.0]), 100), 0.0, 1.0)

    def test_stat_beta_zero_collapses_to_alpha(self):
        out = normalize_stat(Signal(np.array([1.0, 7.0, -2.0]), 100), alpha=0.5, beta=0.0)
        np.testing.assert_array_equal(out.samples, [0.5, 0.5, 0.5])

    @given(
        st.lists(st.floats(-100, 100), min_size=3, max_size=200),
        st.floats(-2, 2),
        st.floats(0.01, 2),
    )
    @settings(max_examples=60, deadline=None)
    def test_stat_moments_property(self, values, alpha, beta):
        arr = np.asarray(values)
        if np.std(arr) < 1e-6:
            return
        out = normalize_stat(Signal(arr, 100), alpha, beta).samples
        assert abs(out.mean() - alpha) <= 1e-6 * max(1.0, abs(alpha))
        assert abs(out.std() - beta) <= 1e-4

    def test_peak_scaling(self):
        out = normalize_peak(Signal(np.array([2.0, -4.0]), 100))
        np.testing.assert_array_equal(out.samples, [0.5, -1.0])

    def test_peak_already_unit(self):
        sig = Signal(np.array([0.5, -1.0, 0.25]), 100)
        np.testing.assert_array_equal(normalize_peak(sig).samples, sig.samples)

    def test_peak_exactly_one(self):
        rng = np.random.default_rng(0)
        out = normalize_peak(Signal(rng.standard_normal(1000), 100))
        assert np.max(np.abs(out.samples)) == 1.0

    def test_peak_zero_signal_degenerate(self):
        with pytest.raises(DegenerateSignal):
            normalize_peak(Signal(np.zeros(10), 100))


class TestPcm16:
    def test_endpoints_symmetric(self):
        clip = quantize_pcm16(Signal(np.array([1.0, -1.0, 0.0]), 16000))
        assert clip.pcm.tolist() == [32767, -32767, 0]

    def test_clamps_overshoot(self):
        clip = quantize_pcm16(Signal(np.array([1.5, -2.0]), 16000))
        assert clip.pcm.tolist() == [32767, -32767]

    def test_round_trip_error_bound(self):
        rng = np.random.default_rng(7)
        x = rng.uniform(-1, 1, 10000)
        back = dequantize_pcm16(quantize_pcm16(Signal(x, 16000))).samples
        assert np.max(np.abs(x - back)) <= 1.0 / 32767

    @given(st.lists(st.floats(-1, 1), min_size=1, max_size=100))
    @settings(max_examples=60, deadline=None)
    def test_round_trip_property(self, values):
        x = np.asarray(values)
        back = dequantize_pcm16(quantize_pcm16(Signal(x, 16000))).samples
        assert np.max(np.abs(x - back)) <= 1.0 / 32767


class TestWav:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(3)
        clip = WavClip(rng.integers(-32767, 32768, 5000).astype(np.int16), 16000)
        path = tmp_path / "clip.wav"
        write_wav(clip, path)
        back = read_wav(path)
        assert back.sample_rate_hz == 16000
        assert np.array_equal(back.pcm, clip.pcm)

    def test_rewrite_is_byte_identical(self, tmp_path):
        clip = WavClip(np.arange(-100, 100, dtype=np.int16), 8000)
        p1, p2 = tmp_path / "a.wav", tmp_path / "b.wav"
        write_wav(clip, p1)
        write_wav(read_wav(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_header_is_canonical_44_bytes(self, tmp_path):
        clip = WavClip(np.zeros(10, dtype=np.int16), 16000)
        path = tmp_path / "c.wav"
        write_wav(clip, path)
        raw = path.read_bytes()
        assert len(raw) == 44 + 20
        assert raw[:4] == b"RIFF" and raw[8:12] == b"WAVE"
        assert raw[12:16] == b"fmt " and raw[36:40] == b"data"

    def test_rifx_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.wav"
        write_wav(WavClip(np.zeros(4, dtype=np.int16), 16000), path)
        raw = bytearray(path.read_bytes())
        raw[:4] = b"RIFX"
        path.write_bytes(bytes(raw))
        with pytest.raises(MalformedWav):
            read_wav(path)

    def test_stereo_rejected(self):
        import struct

        data = struct.pack("<4sI4s4sIHHIIHH4sI", b"RIFF", 36 + 8, b"WAVE", b"fmt ", 16,
                           1, 2, 16000, 64000, 4, 16, b"data", 8) + b"\x00" * 8
        with pytest.raises(MalformedWav):
            parse_wav_bytes(data)

    def test_float_format_rejected(self):
        import struct

        data = struct.pack("<4sI4s4sIHHIIHH4sI", b"RIFF", 36 + 8, b"WAVE", b"fmt ", 16,
                           3, 1, 16000, 64000, 4, 32, b"data", 8) + b"\x00" * 8
        with pytest.raises(MalformedWav):
            parse_wav_bytes(data)


class TestNoise:
    def test_infinite_snr_is_identity(self):
        sig = tone(100, 16000, 1000)
        out = add_noise_snr(sig, math.inf, seed=1)
        assert np.array_equal(out.samples, sig.samples)

    def test_empirical_snr_close_to_requested(self):
        sig = tone(100, 16000, 160000, amp=0.7)
        out = add_noise_snr(sig, 4.0, seed=5)
        noise = out.samples - sig.samples
        snr = 10 * np.log10(np.mean(sig.samples**2) / np.mean(noise**2))
        assert abs(snr - 4.0) <= 0.3

    def test_seed_determinism(self):
        sig = tone(100, 16000, 4000)
        a = add_noise_snr(sig, 4.0, seed=9).samples
        b = add_noise_snr(sig, 4.0, seed=9).samples
        assert np.array_equal(a, b)
        c = add_noise_snr(sig, 4.0, seed=10).samples
        assert not np.array_equal(a, c)

    def test_zero_power_degenerate(self):
        with pytest.raises(DegenerateSignal):
            add_noise_snr(Signal(np.zeros(100), 100), 4.0, seed=0)


class TestSegment:
    def test_exact_single_segment(self):
        sig = Signal(np.arange(20480, dtype=float), 16000)
        segs = segment(sig, 20480, 20480)
        assert len(segs) == 1
        assert np.array_equal(segs[0].samples, sig.samples)

    def test_offsets(self):
        sig = Signal(np.arange(100, dtype=float), 100)
        segs = segment(sig, 40, 30)
        assert len(segs) == 3
        assert [int(s.samples[0]) for s in segs] == [0, 30, 60]

    def test_too_short_gives_empty(self):
        assert segment(Signal(np.arange(10, dtype=float), 100), 40, 30) == []

    def test_metadata_preserved(self):
        sig = Signal(np.arange(100, dtype=float), 100, meta={"k": 1})
        assert all(s.meta == {"k": 1} for s in segment(sig, 50, 25))


class TestPipeline:
    def test_peak_mode_output_in_range(self):
        sig = tone(900, 8000, 8000, amp=3.0)
        clip = prepare_clip(sig, PipelineConfig())
        assert clip.sample_rate_hz == 16000
        assert np.abs(clip.pcm).max() == 32767

    def test_zstat_mode_clamped(self):
        rng = np.random.default_rng(0)
        sig = Signal(rng.standard_normal(16000) * 40, 16000)
        clip = prepare_clip(sig, PipelineConfig(normalization="zstat"))
        x = dequantize_pcm16(clip).samples
        assert abs(float(np.std(x)) - 0.25) < 0.02
        assert np.abs(x).max() <= 1.0
