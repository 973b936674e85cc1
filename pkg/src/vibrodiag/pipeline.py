"""Dataset assembly: synthetic corpora on disk and training-example builders.

Disk layout for a dataset directory:
    clips/*.wav          conditioned PCM16 mono clips
    manifest.jsonl       one record per clip: path, condition fields, split
    dataset_meta.json    label-set name and generation parameters
    corpus.jsonl         vibration-text pairs (written by the corpus step)
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from vibrodiag.corpusgen import (
    LABEL_SETS,
    LabelSet,
    canonical_label,
    read_jsonl,
)
from vibrodiag.diagnose import DIAGNOSIS_QUESTION, Diagnosis, diagnose
from vibrodiag.errors import InvalidSpec
from vibrodiag.net.config import ModelConfig
from vibrodiag.net.mel import mel_frontend
from vibrodiag.net.model import ModelParams
from vibrodiag.optim.trainer import TrainExample
from vibrodiag.sigproc import (
    PipelineConfig,
    add_noise_snr,
    prepare_clip,
    read_wav,
    write_wav,
)
from vibrodiag.synthbench import (
    DatasetSpec,
    FaultCondition,
    FaultType,
    clip_seed,
    synth_signal,
)
from vibrodiag.textcodec import build_dialogue_prompt, build_prompt, target_mask

VSA_QUESTION = "describe the vibration signal."

QA_KINDS = ("severity", "location", "recommendation")

QA_QUESTIONS = {
    "severity": "how severe is the fault?",
    "location": "where is the fault?",
    "recommendation": "what maintenance is needed?",
}

_SEVERITY_WORD = {150: "mild", 250: "moderate", 450: "severe"}


def qa_answer(kind: str, cond: FaultCondition) -> str:
    healthy = cond.fault_type is FaultType.HEALTHY
    location = {
        FaultType.INNER_RACE: "inner race",
        FaultType.OUTER_RACE: "outer race",
        FaultType.ROLLER: "roller",
    }.get(cond.fault_type, "")
    if kind == "severity":
        if healthy:
            return "no fault is present"
        return f"{cond.severity_um} um indentation, {_SEVERITY_WORD[cond.severity_um]} severity"
    if kind == "location":
        if healthy:
            return "no damage located, the bearing is healthy"
        return f"on the {location}"
    if kind == "recommendation":
        if healthy:
            return "continue normal operation"
        return f"inspect the {location} and schedule replacement"
    raise ValueError(f"unknown question kind {kind!r}")


def toy_classes(label_set: LabelSet) -> tuple[FaultCondition, ...]:
    """One condition template per label, at a fixed operating point."""
    speed, load = 6000.0, 900.0
    conds = []
    for entry in label_set.entries:
        sev = entry.severity_um
        if sev is None:
            sev = 250
        conds.append(FaultCondition(entry.fault_type, sev, speed, load))
    return tuple(conds)


def synth_dataset_to_dir(
    spec: DatasetSpec,
    label_set: LabelSet,
    out_dir: str,
    snr_db: float = math.inf,
    pipeline: PipelineConfig = PipelineConfig(),
) -> list[dict]:
    """Generate, condition, and write all clips plus manifest and meta."""
    clips_dir = os.path.join(out_dir, "clips")
    os.makedirs(clips_dir, exist_ok=True)
    n_test = round(spec.clips_per_class * spec.split_ratio[1])
    n_train = spec.clips_per_class - n_test
    if n_test < 1 or n_train < 1:
        raise InvalidSpec("split leaves a class with an empty side")
    manifest = []
    for ci, cond in enumerate(spec.classes):
        for j in range(spec.clips_per_class):
            seed = clip_seed(spec.seed, ci, j)
            sig = synth_signal(cond, spec.duration_s, spec.fs_hz, seed)
            if not math.isinf(snr_db):
                sig = add_noise_snr(sig, snr_db, seed ^ 0x5EED)
            clip = prepare_clip(sig, pipeline)
            rel = f"clips/{label_set.name}_{ci}_{j:05d}.wav"
            write_wav(clip, os.path.join(out_dir, rel))
            manifest.append(
                {
                    "path": rel,
                    "fault_type": cond.fault_type.value,
                    "severity_um": cond.severity_um,
                    "speed_rpm": cond.speed_rpm,
                    "load_n": cond.load_n,
                    "split": "train" if j < n_train else "test",
                }
            )
    with open(os.path.join(out_dir, "manifest.jsonl"), "w", encoding="utf-8", newline="\n") as fh:
        for rec in manifest:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
    meta = {
        "label_set": label_set.name,
        "clips_per_class": spec.clips_per_class,
        "duration_s": spec.duration_s,
        "fs_hz": spec.fs_hz,
        "split_ratio": list(spec.split_ratio),
        "seed": spec.seed,
        "snr_db": None if math.isinf(snr_db) else snr_db,
    }
    with open(os.path.join(out_dir, "dataset_meta.json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")
    return manifest


def load_manifest(data_dir: str) -> tuple[list[dict], LabelSet]:
    manifest = read_jsonl(os.path.join(data_dir, "manifest.jsonl"))
    with open(os.path.join(data_dir, "dataset_meta.json"), "r", encoding="utf-8") as fh:
        meta = json.load(fh)
    return manifest, LABEL_SETS[meta["label_set"]]


def record_condition(rec: dict) -> FaultCondition:
    return FaultCondition(
        fault_type=FaultType(rec["fault_type"]),
        severity_um=int(rec["severity_um"]),
        speed_rpm=float(rec["speed_rpm"]),
        load_n=float(rec["load_n"]),
    )


class MelCache:
    """Per-clip log-mel features, computed once per path."""

    def __init__(self, data_dir: str, cfg: ModelConfig):
        self.data_dir = data_dir
        self.cfg = cfg
        self._cache: dict[str, np.ndarray] = {}

    def get(self, rel_path: str) -> np.ndarray:
        mel = self._cache.get(rel_path)
        if mel is None:
            clip = read_wav(os.path.join(self.data_dir, rel_path))
            mel = mel_frontend(clip, self.cfg).astype(np.float32)
            self._cache[rel_path] = mel
        return mel


def _n_audio_tokens(mel: np.ndarray, cfg: ModelConfig) -> int:
    return -(-mel.shape[0] // cfg.audio_downsample)


def build_vsa_examples(
    data_dir: str,
    corpus_records: list[dict],
    cfg: ModelConfig,
    cache: MelCache | None = None,
) -> list[TrainExample]:
    """Description-target examples from the train split of the corpus."""
    cache = cache or MelCache(data_dir, cfg)
    out = []
    for rec in corpus_records:
        if rec["split"] != "train":
            continue
        mel = cache.get(rec["clip"])
        ids = build_prompt(rec["text"], _n_audio_tokens(mel, cfg), VSA_QUESTION)
        tokens = np.asarray(ids, dtype=np.int64)
        mask = np.asarray(target_mask(ids), dtype=bool)
        out.append(TrainExample(mel=mel, tokens=tokens, mask=mask))
    return out


def build_gfc_examples(
    data_dir: str,
    manifest: list[dict],
    label_set: LabelSet,
    cfg: ModelConfig,
    include_qa: bool = True,
    cache: MelCache | None = None,
) -> list[TrainExample]:
    """Canonical-label targets plus one follow-up Q/A example per clip."""
    cache = cache or MelCache(data_dir, cfg)
    out = []
    for i, rec in enumerate(manifest):
        if rec["split"] != "train":
            continue
        cond = record_condition(rec)
        label = canonical_label(cond, label_set)
        mel = cache.get(rec["path"])
        la = _n_audio_tokens(mel, cfg)

        ids = build_prompt(label, la, DIAGNOSIS_QUESTION)
        out.append(
            TrainExample(
                mel=mel,
                tokens=np.asarray(ids, dtype=np.int64),
                mask=np.asarray(target_mask(ids), dtype=bool),
            )
        )
        if include_qa:
            kind = QA_KINDS[i % len(QA_KINDS)]
            ids = build_dialogue_prompt(
                la,
                DIAGNOSIS_QUESTION,
                label,
                [],
                QA_QUESTIONS[kind],
                qa_answer(kind, cond),
            )
            out.append(
                TrainExample(
                    mel=mel,
                    tokens=np.asarray(ids, dtype=np.int64),
                    mask=np.asarray(target_mask(ids), dtype=bool),
                )
            )
    return out


def predict_split(
    params: ModelParams,
    data_dir: str,
    manifest: list[dict],
    label_set: LabelSet,
    split: str = "test",
) -> tuple[list[Diagnosis], list[str]]:
    """Greedy diagnosis over every clip in a split, with ground-truth labels."""
    preds: list[Diagnosis] = []
    truths: list[str] = []
    for rec in manifest:
        if rec["split"] != split:
            continue
        clip = read_wav(os.path.join(data_dir, rec["path"]))
        preds.append(diagnose(params, clip, label_set))
        truths.append(canonical_label(record_condition(rec), label_set))
    return preds, truths
