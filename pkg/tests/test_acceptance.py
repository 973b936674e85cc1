"""Acceptance suite: one test per criterion, each printing a PASS line.

The end-to-end experiment (criteria 9-11) trains once per configuration in
session-scoped fixtures; expect the full suite to take roughly half an hour
on an 8-core machine. Run with `pytest tests/test_acceptance.py -v -s`.
"""

import json
import math
import os
import subprocess
import sys
import time

import numpy as np
import pytest

from tests.conftest import make_batch
from vibrodiag.corpusgen import DIRG7, TOY4, build_corpus, corpus_to_jsonl, parse_fields
from vibrodiag.diagnose import Diagnosis
from vibrodiag.evalkit import evaluate
from vibrodiag.experiment import ExperimentConfig, prepare_dataset, run_experiment
from vibrodiag.net import ModelConfig, init_params, lora_layer_counts
from vibrodiag.net.model import Ctx, decoder_fwd, encode_audio_fwd
from vibrodiag.optim import ce_loss, dpo_loss, grad_check
from vibrodiag.optim.losses import ce_from_logits

CFG = ModelConfig()

EXPERIMENT = ExperimentConfig()  # the criterion-9 configuration


def ok(n, message):
    print(f"\nACCEPTANCE {n} PASS: {message}")


# --- session fixtures for the heavy runs ---


@pytest.fixture(scope="session")
def data_dir(tmp_path_factory):
    path = str(tmp_path_factory.mktemp("acceptance-data"))
    prepare_dataset(path, EXPERIMENT)
    return path


@pytest.fixture(scope="session")
def full_run(data_dir, tmp_path_factory):
    ckpt = str(tmp_path_factory.mktemp("ckpt") / "full.ck")
    return run_experiment(data_dir, EXPERIMENT, ckpt_path=ckpt)


@pytest.fixture(scope="session")
def full_run_repeat(data_dir):
    return run_experiment(data_dir, EXPERIMENT)


@pytest.fixture(scope="session")
def gfc_only_run(data_dir):
    cfg = ExperimentConfig(include_vsa=False)
    return run_experiment(data_dir, cfg)


class TestCriterion1:
    def test_lora_zero_init_equivalence(self, toy_params):
        t0 = time.time()
        rng = np.random.default_rng(0)
        mel = rng.standard_normal((2, 98, CFG.mel_bins)).astype(np.float32)
        from vibrodiag.textcodec import build_prompt

        tokens = np.tile(np.asarray(build_prompt("healthy", 25, "what fault?"),
                                    dtype=np.int64), (2, 1))
        stripped = toy_params.clone()
        for key in stripped.adapters:
            stripped.adapters[key][:] = 0.0

        def run(params):
            ctx = Ctx(params, np.float32)
            z, _ = encode_audio_fwd(ctx, mel)
            logits, _ = decoder_fwd(ctx, tokens, z)
            return z, logits

        za, la = run(toy_params)
        zb, lb = run(stripped)
        for a, b in ((za, zb), (la, lb)):
            rel = np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-3))
            assert rel <= 1e-6
        elapsed = time.time() - t0
        assert elapsed < 5.0
        ok(1, f"fresh adapters match the adapter-free model exactly ({elapsed:.2f}s)")


class TestCriterion2:
    def test_parameter_reduction_formula(self, toy_params):
        t0 = time.time()
        trainable, frozen = lora_layer_counts(4096, 4096, 16)
        assert trainable == 131_072
        assert frozen == 16_777_216
        assert trainable / frozen < 0.01
        for name in toy_params.adapted_layers():
            d, k = toy_params.base[name + ".W"].shape
            got = toy_params.adapters[name + ".A"].size + toy_params.adapters[name + ".B"].size
            assert got == 16 * (d + k), name
        elapsed = time.time() - t0
        assert elapsed < 1.0
        ok(2, f"131072 vs 16777216 per 4096x4096 layer; toy adapters all r*(d+k) ({elapsed:.2f}s)")


class TestCriterion3:
    def test_gradient_check_full_model(self, toy_params):
        t0 = time.time()
        tokens, mels, mask = make_batch(CFG, ["healthy", "roller fault"], seed=2)
        worst = grad_check(toy_params, tokens, mels, mask, sample_size=1, seed=0)
        n_coords = 2 * len(toy_params.adapted_layers())
        assert n_coords >= 64
        assert worst < 1e-3
        elapsed = time.time() - t0
        assert elapsed < 120.0
        ok(3, f"max rel error {worst:.2e} over {n_coords} coords ({elapsed:.1f}s)")


class TestCriterion4:
    def test_signal_path_exactness(self, tmp_path):
        from vibrodiag.sigproc import (
            Signal,
            dequantize_pcm16,
            normalize_peak,
            normalize_stat,
            quantize_pcm16,
            read_wav,
            resample,
            write_wav,
        )

        t0 = time.time()
        rng = np.random.default_rng(1)
        # PCM16 round trip
        x = rng.uniform(-1, 1, 20000)
        back = dequantize_pcm16(quantize_pcm16(Signal(x, 16000))).samples
        assert np.max(np.abs(x - back)) <= 1.0 / 32767
        # WAV bitwise round trip
        clip = quantize_pcm16(Signal(x, 16000))
        p1, p2 = tmp_path / "a.wav", tmp_path / "b.wav"
        write_wav(clip, p1)
        write_wav(read_wav(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()
        # resampled 1 kHz tone peak
        t = np.arange(8000) / 8000
        out = resample(Signal(np.sin(2 * np.pi * 1000 * t), 8000), 16000)
        peak = int(np.argmax(np.abs(np.fft.rfft(out.samples[4000:4000 + 8192]))))
        assert abs(peak - round(1000 * 8192 / 16000)) <= 1
        # peak normalization
        assert np.max(np.abs(normalize_peak(Signal(x * 3, 100)).samples)) == 1.0
        # statistical normalization moments
        alpha, beta = 0.1, 0.25
        z = normalize_stat(Signal(rng.standard_normal(50000), 100), alpha, beta).samples
        assert abs(z.mean() - alpha) <= 1e-6 * max(1.0, alpha)
        assert abs(z.std() - beta) <= 1e-4
        elapsed = time.time() - t0
        assert elapsed < 30.0
        ok(4, f"pcm/wav/resample/norm contracts all exact ({elapsed:.2f}s)")


class TestCriterion5:
    def test_attention_softmax_causality(self, toy_params):
        from vibrodiag.net import cross_attention, forward_logits

        t0 = time.time()
        rng = np.random.default_rng(3)
        for _ in range(20):
            lt, la, d, dk = rng.integers(1, 6), rng.integers(1, 6), 8, 4
            zt = rng.standard_normal((lt, d))
            za = rng.standard_normal((la, d))
            wq, wk = rng.standard_normal((dk, d)), rng.standard_normal((dk, d))
            wv = rng.standard_normal((d, d))
            weights, context = cross_attention(zt, za, wq, wk, wv)
            assert np.max(np.abs(weights.sum(axis=1) - 1.0)) <= 1e-6
            # naive rowwise oracle
            q, k, v = zt @ wq.T, za @ wk.T, za @ wv.T
            for i in range(lt):
                scores = q[i] @ k.T / math.sqrt(dk)
                e = np.exp(scores - scores.max())
                w_row = e / e.sum()
                assert np.max(np.abs(weights[i] - w_row)) <= 1e-9
                assert np.max(np.abs(context[i] - w_row @ v)) <= 1e-9
        # decoder causality under future-position perturbation
        audio = rng.standard_normal((4, 64)).astype(np.float32)
        base = [257] + [259] * 4 + [260] + list(b"what fault?") + [261] + list(b"abcdef")
        t_pos = len(base) - 7
        permuted = base[: t_pos + 1] + list(reversed(base[t_pos + 1:]))
        la_ = forward_logits(toy_params, base, audio)
        lb_ = forward_logits(toy_params, permuted, audio)
        assert np.array_equal(la_[: t_pos + 1], lb_[: t_pos + 1])
        elapsed = time.time() - t0
        assert elapsed < 30.0
        ok(5, f"attention oracle and causality hold ({elapsed:.2f}s)")


class TestCriterion6:
    def test_loss_oracles(self, toy_params):
        t0 = time.time()
        # ce vs naive
        tokens, mels, mask = make_batch(CFG, ["healthy", "inner ring fault"], seed=4)
        loss, _ = ce_loss(toy_params, tokens, mels, mask)
        from vibrodiag.net.model import full_fwd

        logits, _ = full_fwd(Ctx(toy_params, np.float32), tokens, mels)
        naive = 0.0
        for b in range(tokens.shape[0]):
            for t in range(tokens.shape[1]):
                if mask[b, t]:
                    row = logits[b, t - 1].astype(np.float64)
                    p = np.exp(row) / np.exp(row).sum()
                    naive += -math.log(p[tokens[b, t]])
        assert abs(loss - naive / tokens.shape[0]) <= 1e-9
        # uniform single-token loss
        tk = np.array([[257, 104, 258]])
        mk = np.array([[False, True, False]])
        lg = np.zeros((1, 3, 262), dtype=np.float32)
        assert abs(ce_from_logits(lg, tk, mk) - math.log(262)) <= 1e-9
        # dpo zero margin
        for beta in (0.05, 0.5, 5.0):
            assert abs(dpo_loss(-1.0, -2.0, -1.0, -2.0, beta) - math.log(2)) <= 1e-12
        # accumulation linearity (mean gradients, tensor-scale relative)
        data_tokens, data_mels, data_mask = make_batch(
            CFG, ["healthy", "roller fault", "outer ring fault", "inner ring fault"], seed=5
        )
        acc = {}
        for sl in (slice(0, 2), slice(2, 4)):
            _, g = ce_loss(toy_params, data_tokens[sl], data_mels[sl], data_mask[sl],
                           collect_grads=True)
            for key, val in g.items():
                acc[key] = acc.get(key, 0) + val
        _, combined = ce_loss(toy_params, data_tokens, data_mels, data_mask,
                              collect_grads=True)
        for key in acc:
            a, b = acc[key] / 4, combined[key] / 4
            scale = max(np.abs(a).max(), np.abs(b).max(), 1e-8)
            assert float(np.abs(a - b).max() / scale) <= 1e-6, key
        elapsed = time.time() - t0
        assert elapsed < 30.0
        ok(6, f"ce/dpo/accumulation oracles within tolerance ({elapsed:.2f}s)")


class TestCriterion7:
    def test_corpus_faithfulness_3000_pairs(self):
        t0 = time.time()
        manifest = []
        classes = [("healthy", 0), ("inner_race", 250), ("outer_race", 250), ("roller", 250)]
        for ci, (ft, sev) in enumerate(classes):
            for j in range(250):
                manifest.append(
                    {"path": f"clips/{ci}_{j}.wav", "fault_type": ft, "severity_um": sev,
                     "speed_rpm": 6000.0, "load_n": 900.0, "split": "train"}
                )
        corpus = build_corpus(manifest, 3, seed=21, label_set=TOY4)
        assert len(corpus) == 3000
        sev_of = dict(classes)
        for rec in corpus:
            parsed = parse_fields(rec["text"])
            assert parsed.fault_type.value == rec["fields"]["fault_type"]
            assert parsed.severity_um == sev_of[rec["fields"]["fault_type"]]
        assert corpus_to_jsonl(corpus) == corpus_to_jsonl(
            build_corpus(manifest, 3, seed=21, label_set=TOY4)
        )
        elapsed = time.time() - t0
        assert elapsed < 60.0
        ok(7, f"3000/3000 pairs parse back to truth; bytes deterministic ({elapsed:.1f}s)")


class TestCriterion8:
    def test_metrics_brute_force_oracle(self):
        t0 = time.time()
        rng = np.random.default_rng(42)
        labels = list(DIRG7.labels)
        n = 200
        truths = [labels[i] for i in rng.integers(0, 7, n)]
        preds = []
        for _ in range(n):
            if rng.random() < 0.15:
                preds.append(Diagnosis("???", None, None))
            else:
                lab = labels[int(rng.integers(0, 7))]
                preds.append(Diagnosis(lab, lab, "exact"))
        report = evaluate(preds, truths, DIRG7)

        def resolve(p):
            return p.parsed_label if p.match_mode == "exact" else None

        correct = sum(1 for p, t in zip(preds, truths) if resolve(p) == t)
        assert report.accuracy == correct / n
        precs, f1s = [], []
        for lab in labels:
            tp = sum(1 for p, t in zip(preds, truths) if t == lab and resolve(p) == lab)
            fp = sum(1 for p, t in zip(preds, truths) if t != lab and resolve(p) == lab)
            fn = sum(1 for p, t in zip(preds, truths) if t == lab and resolve(p) != lab)
            if tp + fn == 0:
                continue
            prec = tp / (tp + fp) if tp + fp else 0.0
            rec = tp / (tp + fn)
            f1s.append(2 * prec * rec / (prec + rec) if prec + rec else 0.0)
            precs.append(prec)
        assert report.macro_precision == np.mean(precs)
        assert report.macro_f1 == np.mean(f1s)
        assert report.n_unparseable == sum(1 for p in preds if resolve(p) is None)
        elapsed = time.time() - t0
        assert elapsed < 5.0
        ok(8, f"evaluate() equals brute force on 200 random 7-class preds ({elapsed:.2f}s)")


class TestCriterion9:
    def test_end_to_end_experiment(self, full_run, gfc_only_run):
        acc = full_run.report.accuracy
        total = full_run.seconds + gfc_only_run.seconds
        assert acc >= 0.95, f"full-pipeline accuracy {acc:.2%}"
        assert total <= 30 * 60, f"runtime {total:.0f}s over budget"
        ok(
            9,
            f"VSA+GFC accuracy {acc:.2%} (n={full_run.report.n_samples}); "
            f"GFC-only ablation {gfc_only_run.report.accuracy:.2%} (non-gating); "
            f"runtime {total/60:.1f} min",
        )


class TestCriterion10:
    def test_exact_reproducibility(self, full_run, full_run_repeat):
        curve_a = [(c.step, c.lr, c.loss) for c in full_run.vsa_curve + full_run.gfc_curve]
        curve_b = [(c.step, c.lr, c.loss) for c in full_run_repeat.vsa_curve + full_run_repeat.gfc_curve]
        assert curve_a == curve_b
        assert full_run.report.to_dict() == full_run_repeat.report.to_dict()
        assert full_run.decoded == full_run_repeat.decoded
        ok(10, f"loss curve ({len(curve_a)} pts), metrics, and {len(full_run.decoded)} "
               "decodes reproduce exactly")


class TestCriterion11:
    def test_cli_api_parity_and_error_codes(self, full_run, data_dir):
        from fastapi.testclient import TestClient

        from vibrodiag.gateway import create_app
        from vibrodiag.pipeline import load_manifest

        ckpt = full_run.ckpt_path
        manifest, label_set = load_manifest(data_dir)
        test_clips = [r["path"] for r in manifest if r["split"] == "test"][:3]

        app = create_app(ckpt_path=ckpt)
        client = TestClient(app)
        assert client.get("/api/v1/health").status_code == 200

        env = {**os.environ, "OMP_NUM_THREADS": "1", "OPENBLAS_NUM_THREADS": "1"}
        for rel in test_clips:
            wav_path = os.path.join(data_dir, rel)
            proc = subprocess.run(
                [sys.executable, "-m", "vibrodiag.cli", "diagnose",
                 "--ckpt", ckpt, "--wav", wav_path],
                capture_output=True, text=True, env=env,
            )
            assert proc.returncode == 0, proc.stderr
            cli_raw = proc.stdout.splitlines()[0][len("raw: "):]
            with open(wav_path, "rb") as fh:
                resp = client.post("/api/v1/diagnose",
                                   files={"file": ("c.wav", fh.read(), "audio/wav")})
            assert resp.status_code == 200
            api_raw = resp.json()["raw_text"].encode("unicode_escape").decode("ascii")
            assert cli_raw == api_raw

        # ask parity on the first clip
        wav_path = os.path.join(data_dir, test_clips[0])
        question = "how severe is the fault?"
        proc = subprocess.run(
            [sys.executable, "-m", "vibrodiag.cli", "ask", "--ckpt", ckpt,
             "--wav", wav_path],
            input=question + "\n", capture_output=True, text=True, env=env,
        )
        assert proc.returncode == 0, proc.stderr
        cli_answer = next(
            line[2:] for line in proc.stdout.splitlines() if line.startswith("> ") and line != "> "
        )
        with open(wav_path, "rb") as fh:
            sid = client.post(
                "/api/v1/diagnose", files={"file": ("c.wav", fh.read(), "audio/wav")}
            ).json()["session_id"]
        resp = client.post(f"/api/v1/sessions/{sid}/ask", json={"question": question})
        assert resp.status_code == 200
        assert resp.json()["turn_index"] == 1
        assert cli_answer == resp.json()["answer"]

        # error-code contract
        assert client.post(
            "/api/v1/diagnose", files={"file": ("x.wav", b"not a wav", "audio/wav")}
        ).status_code == 400
        assert client.post(
            "/api/v1/sessions/doesnotexist/ask", json={"question": "q"}
        ).status_code == 404
        app503 = create_app(ckpt_path="/nonexistent.ck")
        assert TestClient(app503).get("/api/v1/health").status_code == 503
        ok(11, "CLI and gateway generate identical text; 400/404/503 contract holds")
