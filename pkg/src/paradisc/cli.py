"""Command-line interface.

Exit codes: 0 success, 1 usage/config error, 2 data error,
3 training or verification failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import CRF_MODES, VARIANTS, TrainConfig, load_config
from .corpus import Corpus, Label, Split, load_corpus, load_embeddings, parse_corpus, save_corpus
from .errors import ConfigError, DataError, ParadiscError
from .metrics import class_names, evaluate, score_predictions
from .model import STREAM_OOV
from .numeric import make_rng
from .report import emit_report
from .snapshot import load_model, save_model
from .synth import REGIMES, SynthConfig, gen_synthetic
from .train import ensemble_predict, run_seeds, train

log = logging.getLogger("paradisc")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _seed_list(text):
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    if not out:
        raise argparse.ArgumentTypeError("empty seed list")
    return out


def _train_options(p):
    p.add_argument("--config", help="key-value file with TrainConfig fields")
    p.add_argument("--embeddings", help="word2vec text file (header 'count dim')")
    p.add_argument("--variant", choices=VARIANTS)
    p.add_argument("--alpha", type=float)
    p.add_argument("--crf", choices=CRF_MODES)
    p.add_argument("--binary", choices=[l.name for l in Label])
    p.add_argument("--max-epochs", type=int, dest="max_epochs")
    p.add_argument("--hidden", type=int)
    p.add_argument("--word-dim", type=int, dest="word_dim")
    p.add_argument("--lr", type=float)


def build_parser():
    parser = _Parser(prog="paradisc", description="Paragraph-level discourse relation sequence labeling.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train one model")
    p.add_argument("--corpus", required=True, help="directory with train.txt/dev.txt/test.txt")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    _train_options(p)

    p = sub.add_parser("eval", help="evaluate a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--corpus", required=True, help="corpus directory (uses --split) or a single file")
    p.add_argument("--split", default="test", choices=("train", "dev", "test"))
    p.add_argument("--out")

    p = sub.add_parser("predict", help="write per-slot predictions")
    p.add_argument("--model", required=True)
    p.add_argument("--corpus", required=True, help="corpus file")
    p.add_argument("--out", required=True, help="output TSV path")

    p = sub.add_parser("ensemble", help="train several seeds and majority-vote on test")
    p.add_argument("--corpus", required=True)
    p.add_argument("--seeds", type=_seed_list, default=list(range(10)))
    p.add_argument("--out", required=True)
    _train_options(p)

    p = sub.add_parser("gen-synth", help="write a synthetic corpus directory")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--regime", choices=REGIMES, default="connective-only")
    p.add_argument("--train-size", type=int, default=2000)
    p.add_argument("--dev-size", type=int, default=300)
    p.add_argument("--test-size", type=int, default=300)

    p = sub.add_parser("check", help="run the CRF oracle and gradient verification suites")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--instances", type=int, default=200)
    return parser


def _config(args, seed=None):
    overrides = {k: getattr(args, k, None) for k in
                 ("variant", "alpha", "crf", "binary", "max_epochs", "hidden", "word_dim", "lr")}
    if seed is not None:
        overrides["seed"] = seed
    if args.variant is not None and args.crf is None:
        overrides["crf"] = "typed8" if args.variant == "UNTIED+CRF" else "off"
    if args.config:
        return load_config(args.config, **overrides)
    return TrainConfig(**{k: v for k, v in overrides.items() if v is not None})


def _table_factory(args, cfg):
    if not args.embeddings:
        return None
    return lambda seed: load_embeddings(args.embeddings, make_rng(seed, STREAM_OOV), cfg.word_dim)


def _load_eval_split(path, model, split_name):
    path = Path(path)
    if path.is_dir():
        return parse_corpus(path / f"{split_name}.txt", model.inventories)
    return parse_corpus(path, model.inventories)


def cmd_train(args):
    cfg = _config(args, args.seed)
    corpus = load_corpus(args.corpus)
    factory = _table_factory(args, cfg)
    model, report = train(cfg, corpus, factory(cfg.seed) if factory else None)
    out = Path(args.out)
    emit_report(report, out)
    save_model(model, out / "model.npz")
    m = report.test
    print(f"selected epoch {report.selected_epoch}; test implicit macro-F1 {m.implicit.macro_f1:.4f} "
          f"acc {m.implicit.accuracy:.4f}; explicit macro-F1 {m.explicit.macro_f1:.4f} "
          f"acc {m.explicit.accuracy:.4f}")


def cmd_eval(args):
    model = load_model(args.model)
    split = _load_eval_split(args.corpus, model, args.split)
    if not len(split):
        raise DataError("evaluation split is empty")
    metrics = evaluate(model, split, buckets=True)
    if args.out:
        emit_report(metrics, args.out)
    print(json.dumps({"implicit": {"macro_f1": metrics.implicit.macro_f1, "accuracy": metrics.implicit.accuracy},
                      "explicit": {"macro_f1": metrics.explicit.macro_f1, "accuracy": metrics.explicit.accuracy}}))


def cmd_predict(args):
    model = load_model(args.model)
    split = _load_eval_split(args.corpus, model, "test")
    names = class_names(model.config.binary)
    lines = ["paragraph\tslot\tkind\tpredicted\tgold"]
    for i, para in enumerate(split):
        preds, _ = model.predict(para)
        for slot, pred in zip(para.slots, preds):
            gold = "|".join(g.name for g in slot.gold)
            lines.append(f"{i}\t{slot.index}\t{slot.kind.code}\t{names[pred]}\t{gold}")
    Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")


def cmd_ensemble(args):
    cfg = _config(args)
    corpus = load_corpus(args.corpus)
    models, reports = run_seeds(cfg, corpus, args.seeds, _table_factory(args, cfg))
    test = list(corpus.test)
    voted = ensemble_predict(models, test)
    metrics = score_predictions(test, voted, cfg.binary, True, cfg.fn_attribution)
    out = Path(args.out)
    emit_report(metrics, out)
    singles = [r.test.implicit.macro_f1 for r in reports]
    summary = {"seeds": args.seeds, "single_run_implicit_macro_f1": singles,
               "mean_single_run_implicit_macro_f1": float(np.mean(singles)),
               "ensemble_implicit_macro_f1": metrics.implicit.macro_f1,
               "ensemble_implicit_accuracy": metrics.implicit.accuracy,
               "ensemble_explicit_macro_f1": metrics.explicit.macro_f1}
    (out / "ensemble.json").write_text(json.dumps(summary, indent=2))
    print(json.dumps(summary))


def cmd_gen_synth(args):
    cfg = SynthConfig(regime=args.regime, n_train=args.train_size, n_dev=args.dev_size, n_test=args.test_size)
    corpus = gen_synthetic(cfg, args.seed)
    save_corpus(corpus, args.out)
    print(f"wrote {args.train_size}/{args.dev_size}/{args.test_size} paragraphs to {args.out}")


def cmd_check(args):
    from .checks import crf_oracle_suite, gradient_suite

    res = crf_oracle_suite(args.instances, seed=args.seed)
    print(f"crf oracle: {res['instances']} instances, max abs error {res['max_abs_error']:.2e}")
    rep = gradient_suite(seed=args.seed)
    print(f"gradients: {rep.checked} coordinates, max relative error {rep.max_rel_error:.2e}")


COMMANDS = {"train": cmd_train, "eval": cmd_eval, "predict": cmd_predict, "ensemble": cmd_ensemble,
            "gen-synth": cmd_gen_synth, "check": cmd_check}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except ParadiscError as exc:
        print(f"paradisc: error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
