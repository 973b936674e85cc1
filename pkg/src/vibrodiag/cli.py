"""Command-line entry point.

Subcommands: synth, corpus, train, diagnose, ask, eval, gradcheck, serve.
Exit codes: 0 success, 1 usage error, 2 runtime failure. Verbosity via the
VIBRODIAG_LOG environment variable (DEBUG/INFO/WARNING/ERROR).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys

log = logging.getLogger("vibrodiag")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2

CLASSES_TO_LABEL_SET = {3: "hit3", 4: "toy4", 7: "dirg7"}


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the contract here is exit 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        sys.exit(EXIT_USAGE)


def _load_config_defaults(argv: list[str]) -> dict:
    """Pre-scan for --config; its keys become defaults, flags override."""
    for i, arg in enumerate(argv):
        if arg == "--config" and i + 1 < len(argv):
            with open(argv[i + 1], "r", encoding="utf-8") as fh:
                cfg = json.load(fh)
            if not isinstance(cfg, dict):
                raise ValueError("config file must hold a JSON object")
            return {k.replace("-", "_"): v for k, v in cfg.items()}
        if arg.startswith("--config="):
            with open(arg.split("=", 1)[1], "r", encoding="utf-8") as fh:
                cfg = json.load(fh)
            return {k.replace("-", "_"): v for k, v in cfg.items()}
    return {}


def build_parser(config_defaults: dict | None = None) -> _Parser:
    parser = _Parser(prog="vibrodiag", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", help="JSON file with default flag values")
        p.add_argument("--seed", type=int, default=0)
        if config_defaults:
            known = {a.dest for a in p._actions}
            p.set_defaults(**{k: v for k, v in config_defaults.items() if k in known})
        return p

    p = sub.add_parser("synth", help="generate a synthetic labeled dataset")
    p.add_argument("--config", help="JSON file with default flag values")
    p.add_argument("--classes", type=int, choices=sorted(CLASSES_TO_LABEL_SET), default=4)
    p.add_argument("--per-class", type=int, default=250)
    p.add_argument("--duration", type=float, default=1.0)
    p.add_argument("--fs", type=int, default=16000)
    p.add_argument("--split", type=float, default=0.8, help="train fraction")
    p.add_argument("--snr-db", type=float, default=None, help="optional Gaussian noise SNR")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    if config_defaults:
        known = {a.dest for a in p._actions}
        p.set_defaults(**{k: v for k, v in config_defaults.items() if k in known})

    p = add("corpus", "build the vibration-text corpus for a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--variants", type=int, default=2)

    p = add("train", "run a training stage on a dataset")
    p.add_argument("--stage", choices=["vsa", "gfc"], required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--ckpt", required=True, help="output checkpoint path")
    p.add_argument("--init-ckpt", help="checkpoint to continue from")
    p.add_argument("--epochs", type=int, default=40)
    p.add_argument("--lr", type=float, default=None, help="default: toy 3e-3")
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--accum", type=int, default=16)
    p.add_argument("--no-qa", action="store_true", help="gfc: skip follow-up Q/A examples")

    p = add("eval", "evaluate a checkpoint on a dataset split")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", choices=["train", "test"], default="test")
    p.add_argument("--format", choices=["json", "text-table"], default="json")

    p = add("diagnose", "diagnose a single WAV clip")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--wav", required=True)
    p.add_argument("--label-set", choices=sorted(CLASSES_TO_LABEL_SET.values()), default="toy4")

    p = add("ask", "interactive follow-up session over a clip")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--wav", required=True)
    p.add_argument("--label-set", choices=sorted(CLASSES_TO_LABEL_SET.values()), default="toy4")

    p = add("gradcheck", "finite-difference check of the adapter gradients")
    p.add_argument("--samples", type=int, default=1, help="coordinates per adapter tensor")

    p = add("serve", "HTTP gateway for diagnosis sessions")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--label-set", choices=sorted(CLASSES_TO_LABEL_SET.values()), default="toy4")
    p.add_argument("--static-dir", help="directory of console assets to serve at /")

    return parser


def _write_resolved_config(args: argparse.Namespace, path: str):
    resolved = {k: v for k, v in vars(args).items() if k not in ("command",)}
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(resolved, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def cmd_synth(args) -> int:
    from vibrodiag.corpusgen import LABEL_SETS
    from vibrodiag.pipeline import synth_dataset_to_dir, toy_classes
    from vibrodiag.synthbench import DatasetSpec

    label_set = LABEL_SETS[CLASSES_TO_LABEL_SET[args.classes]]
    spec = DatasetSpec(
        classes=toy_classes(label_set),
        clips_per_class=args.per_class,
        duration_s=args.duration,
        fs_hz=args.fs,
        split_ratio=(args.split, round(1.0 - args.split, 9)),
        seed=args.seed,
    )
    snr = args.snr_db if args.snr_db is not None else math.inf
    manifest = synth_dataset_to_dir(spec, label_set, args.out, snr_db=snr)
    _write_resolved_config(args, os.path.join(args.out, "resolved_config.json"))
    print(f"wrote {len(manifest)} clips to {args.out}")
    return EXIT_OK


def cmd_corpus(args) -> int:
    from vibrodiag.corpusgen import build_corpus, write_corpus
    from vibrodiag.pipeline import load_manifest

    manifest, label_set = load_manifest(args.data)
    records = build_corpus(manifest, args.variants, args.seed, label_set)
    out_path = os.path.join(args.data, "corpus.jsonl")
    write_corpus(records, out_path)
    _write_resolved_config(args, os.path.join(args.data, "resolved_config.corpus.json"))
    print(f"wrote {len(records)} pairs to {out_path}")
    return EXIT_OK


def cmd_train(args) -> int:
    from vibrodiag.corpusgen import read_jsonl
    from vibrodiag.net import ModelConfig, init_params
    from vibrodiag.optim import TrainConfig, load_checkpoint, save_checkpoint, train_stage
    from vibrodiag.optim.trainer import DEFAULT_TOY_LR, write_curve_csv
    from vibrodiag.pipeline import (
        MelCache,
        build_gfc_examples,
        build_vsa_examples,
        load_manifest,
    )

    manifest, label_set = load_manifest(args.data)
    if args.init_ckpt:
        params, _ = load_checkpoint(args.init_ckpt)
    else:
        params = init_params(ModelConfig(), seed=args.seed)
    cache = MelCache(args.data, params.config)
    if args.stage == "vsa":
        corpus = read_jsonl(os.path.join(args.data, "corpus.jsonl"))
        dataset = build_vsa_examples(args.data, corpus, params.config, cache)
    else:
        dataset = build_gfc_examples(
            args.data, manifest, label_set, params.config,
            include_qa=not args.no_qa, cache=cache,
        )
    cfg = TrainConfig(
        lr=args.lr if args.lr is not None else DEFAULT_TOY_LR,
        batch=args.batch,
        grad_accum=args.accum,
        epochs=args.epochs,
        seed=args.seed,
        stage=args.stage,
    )
    log.info("training %s on %d examples", args.stage, len(dataset))
    params, curve = train_stage(params, dataset, cfg)
    save_checkpoint(params, args.ckpt, extra={"stage": args.stage, "label_set": label_set.name})
    write_curve_csv(curve, args.ckpt + ".curve.csv")
    _write_resolved_config(args, args.ckpt + ".config.json")
    print(f"trained {args.stage}: {len(curve)} updates, "
          f"loss {curve[0].loss:.4f} -> {curve[-1].loss:.4f}, saved {args.ckpt}")
    return EXIT_OK


def cmd_eval(args) -> int:
    from vibrodiag.evalkit import evaluate, report_render
    from vibrodiag.optim import load_checkpoint
    from vibrodiag.pipeline import load_manifest, predict_split

    params, _ = load_checkpoint(args.ckpt)
    manifest, label_set = load_manifest(args.data)
    preds, truths = predict_split(params, args.data, manifest, label_set, args.split)
    report = evaluate(preds, truths, label_set)
    sys.stdout.write(report_render(report, args.format))
    return EXIT_OK


def cmd_diagnose(args) -> int:
    from vibrodiag.corpusgen import LABEL_SETS
    from vibrodiag.diagnose import diagnose
    from vibrodiag.optim import load_checkpoint
    from vibrodiag.sigproc import read_wav

    params, manifest = load_checkpoint(args.ckpt)
    label_set = LABEL_SETS[manifest.get("extra", {}).get("label_set", args.label_set)]
    clip = read_wav(args.wav)
    result = diagnose(params, clip, label_set)
    raw = result.raw_text.encode("unicode_escape").decode("ascii")
    print(f"raw: {raw}")
    print(f"label: {result.parsed_label if result.parsed_label else '<unparseable>'}")
    print(f"match: {result.match_mode if result.match_mode else 'none'}")
    return EXIT_OK


def cmd_ask(args) -> int:
    from vibrodiag.corpusgen import LABEL_SETS
    from vibrodiag.diagnose import follow_up, open_session
    from vibrodiag.optim import load_checkpoint
    from vibrodiag.sigproc import read_wav

    params, manifest = load_checkpoint(args.ckpt)
    label_set = LABEL_SETS[manifest.get("extra", {}).get("label_set", args.label_set)]
    clip = read_wav(args.wav)
    session, result = open_session(params, clip, label_set)
    print(f"diagnosis: {result.raw_text}")
    print("ask follow-up questions; EOF (ctrl-d) ends the session.")
    while True:
        try:
            question = input("> ").strip()
        except EOFError:
            print()
            return EXIT_OK
        if not question:
            continue
        answer = follow_up(session, question, params)
        print(answer)


def cmd_gradcheck(args) -> int:
    import numpy as np

    from vibrodiag.net import ModelConfig, init_params
    from vibrodiag.optim import grad_check
    from vibrodiag.optim.trainer import TrainExample, collate
    from vibrodiag.textcodec import build_prompt, target_mask

    cfg = ModelConfig()
    params = init_params(cfg, seed=args.seed)
    rng = np.random.default_rng(args.seed)
    examples = []
    for text in ("healthy", "inner ring fault"):
        ids = build_prompt(text, 13, "what is the bearing fault condition?")
        examples.append(
            TrainExample(
                mel=rng.standard_normal((49, cfg.mel_bins)).astype(np.float32),
                tokens=np.asarray(ids, dtype=np.int64),
                mask=np.asarray(target_mask(ids), dtype=bool),
            )
        )
    tokens, mels, mask = collate(examples)
    worst = grad_check(params, tokens, mels, mask, sample_size=args.samples, seed=args.seed)
    print(f"max relative gradient error: {worst:.3e}")
    return EXIT_OK if worst < 1e-3 else EXIT_RUNTIME


def cmd_serve(args) -> int:
    import uvicorn

    from vibrodiag.gateway import create_app

    app = create_app(
        ckpt_path=args.ckpt,
        label_set_name=args.label_set,
        static_dir=args.static_dir,
    )
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "corpus": cmd_corpus,
    "train": cmd_train,
    "eval": cmd_eval,
    "diagnose": cmd_diagnose,
    "ask": cmd_ask,
    "gradcheck": cmd_gradcheck,
    "serve": cmd_serve,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    logging.basicConfig(
        level=os.environ.get("VIBRODIAG_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        defaults = _load_config_defaults(argv)
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        sys.stderr.write(f"error: bad config file: {exc}\n")
        return EXIT_USAGE
    parser = build_parser(defaults)
    args = parser.parse_args(argv)
    from vibrodiag.errors import VibrodiagError

    try:
        return COMMANDS[args.command](args)
    except VibrodiagError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_RUNTIME
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
