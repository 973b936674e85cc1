"""End-to-end desk-scale experiment: synth data, two-stage training, eval.

This is the scripted counterpart of running the CLI steps synth -> corpus ->
train --stage vsa -> train --stage gfc -> eval, kept in-process so the
whole run is a single deterministic function of its seeds.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field

from vibrodiag.corpusgen import TOY4, LabelSet, build_corpus, write_corpus
from vibrodiag.evalkit import MetricsReport, evaluate
from vibrodiag.net import ModelConfig, init_params
from vibrodiag.net.model import ModelParams
from vibrodiag.optim import TrainConfig, save_checkpoint, train_stage
from vibrodiag.optim.trainer import CurvePoint
from vibrodiag.pipeline import (
    MelCache,
    build_gfc_examples,
    build_vsa_examples,
    load_manifest,
    predict_split,
    synth_dataset_to_dir,
    toy_classes,
)
from vibrodiag.synthbench import DatasetSpec


@dataclass
class ExperimentConfig:
    clips_per_class: int = 250
    duration_s: float = 1.0
    fs_hz: int = 16000
    data_seed: int = 11
    train_seed: int = 0
    model_seed: int = 3
    corpus_variants: int = 2
    corpus_seed: int = 5
    lr: float = 3e-3
    batch: int = 32
    grad_accum: int = 16
    warmup_frac: float = 0.05
    vsa_epochs: int = 15
    gfc_epochs: int = 150
    include_vsa: bool = True
    include_qa: bool = True
    label_set: LabelSet = TOY4


@dataclass
class ExperimentResult:
    params: ModelParams
    report: MetricsReport
    vsa_curve: list[CurvePoint] = field(default_factory=list)
    gfc_curve: list[CurvePoint] = field(default_factory=list)
    decoded: list[str] = field(default_factory=list)
    ckpt_path: str = ""
    seconds: float = 0.0


def prepare_dataset(data_dir: str, cfg: ExperimentConfig) -> None:
    """Synth clips plus corpus on disk (skipped if the manifest exists)."""
    if os.path.exists(os.path.join(data_dir, "manifest.jsonl")):
        return
    spec = DatasetSpec(
        classes=toy_classes(cfg.label_set),
        clips_per_class=cfg.clips_per_class,
        duration_s=cfg.duration_s,
        fs_hz=cfg.fs_hz,
        split_ratio=(0.8, 0.2),
        seed=cfg.data_seed,
    )
    manifest = synth_dataset_to_dir(spec, cfg.label_set, data_dir)
    corpus = build_corpus(manifest, cfg.corpus_variants, cfg.corpus_seed, cfg.label_set)
    write_corpus(corpus, os.path.join(data_dir, "corpus.jsonl"))


def run_experiment(data_dir: str, cfg: ExperimentConfig, ckpt_path: str | None = None) -> ExperimentResult:
    """Train (optionally VSA, then GFC) and evaluate on the held-out split."""
    t0 = time.time()
    prepare_dataset(data_dir, cfg)
    manifest, label_set = load_manifest(data_dir)
    model_cfg = ModelConfig()
    cache = MelCache(data_dir, model_cfg)
    params = init_params(model_cfg, seed=cfg.model_seed)

    vsa_curve: list[CurvePoint] = []
    if cfg.include_vsa:
        from vibrodiag.corpusgen import read_jsonl

        corpus = read_jsonl(os.path.join(data_dir, "corpus.jsonl"))
        vsa_data = build_vsa_examples(data_dir, corpus, model_cfg, cache)
        vsa_cfg = TrainConfig(
            lr=cfg.lr, warmup_frac=cfg.warmup_frac, batch=cfg.batch,
            grad_accum=cfg.grad_accum, epochs=cfg.vsa_epochs,
            seed=cfg.train_seed, stage="vsa",
        )
        params, vsa_curve = train_stage(params, vsa_data, vsa_cfg)

    gfc_data = build_gfc_examples(
        data_dir, manifest, label_set, model_cfg, include_qa=cfg.include_qa, cache=cache
    )
    gfc_cfg = TrainConfig(
        lr=cfg.lr, warmup_frac=cfg.warmup_frac, batch=cfg.batch,
        grad_accum=cfg.grad_accum, epochs=cfg.gfc_epochs,
        seed=cfg.train_seed, stage="gfc",
    )
    params, gfc_curve = train_stage(params, gfc_data, gfc_cfg)

    if ckpt_path:
        save_checkpoint(params, ckpt_path, extra={"stage": "gfc", "label_set": label_set.name})

    preds, truths = predict_split(params, data_dir, manifest, label_set, "test")
    report = evaluate(preds, truths, label_set)
    return ExperimentResult(
        params=params,
        report=report,
        vsa_curve=vsa_curve,
        gfc_curve=gfc_curve,
        decoded=[p.raw_text for p in preds],
        ckpt_path=ckpt_path or "",
        seconds=time.time() - t0,
    )
