"""Command-line entry point: ``adaptattn {stats,train,eval,predict,synth}``.

Exit status: 0 success, 2 usage/config/data/I-O error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from adaptattn.config import MODES, RunConfigError, load_run_config
from adaptattn.corpus import (
    Vocabulary,
    build_vocab,
    encode_corpus,
    encode_document,
    length_stats,
    load_corpus,
    tokenize,
    write_stats_csv,
)
from adaptattn.errors import AdaptAttnError, DataError, NumericError
from adaptattn.model import forward
from adaptattn.synthetic import write_corpus
from adaptattn.training import Batch, evaluate, load_checkpoint, train
from adaptattn.training.checkpoint import config_from_meta
from adaptattn.training.metrics import HISTORY_HEADER, HistoryRow, history_rows

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3

log = logging.getLogger("adaptattn")


class UsageError(AdaptAttnError):
    pass


def _run_config(args):
    return load_run_config(
        args.config,
        mode=getattr(args, "mode", None),
        seed=getattr(args, "seed", None),
        epochs=getattr(args, "epochs", None),
    )


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_stats(args) -> int:
    rc = _run_config(args)
    bins = rc.bin_config()
    docs = load_corpus(args.corpus, args.split, bins)
    stats = length_stats(docs)
    out = _out_dir(args)
    write_stats_csv(stats, out / "bins.csv", out / "histogram.csv")
    print(f"corpus: {args.corpus} split={args.split} mode={rc.mode}")
    if bins.adaptive:
        print(f"thresholds: L1={bins.L1} L2={bins.L2} max_len_cap={bins.max_len_cap}")
    print(stats.summary())
    return EXIT_OK


def cmd_train(args) -> int:
    rc = _run_config(args)
    bins = rc.bin_config()
    train_raw = load_corpus(args.corpus, "train", bins)
    test_raw = load_corpus(args.corpus, "test", bins) if (Path(args.corpus) / "test").is_dir() else None
    vocab = build_vocab((d.tokens for d in train_raw), rc.max_vocab, rc.min_freq)
    out = _out_dir(args)
    vocab_path = out / "vocab.txt"
    vocab.save(vocab_path)
    cfg = rc.train_config(vocab.size, out / "model.ckpt", out / "metrics.csv")
    docs = encode_corpus(train_raw, vocab, bins)
    eval_docs = encode_corpus(test_raw, vocab, bins) if test_raw else None
    _, history = train(docs, cfg, eval_docs, vocab_path=vocab_path.name)
    for row in history[-2 if eval_docs else -1 :]:
        print(f"epoch={row.epoch} split={row.split} {row.metrics.line()}")
    print(f"checkpoint: {cfg.checkpoint_path}")
    return EXIT_OK


def _load_model(args, dtype):
    ckpt = Path(args.checkpoint)
    _, meta = _peek(ckpt)
    expected = None
    if args.config is not None or getattr(args, "mode", None) is not None:
        rc = _run_config(args)
        stored = config_from_meta(meta)
        if rc.bin_config() != stored.bin_config:
            raise UsageError(f"bin configuration {rc.bin_config()} differs from checkpoint's {stored.bin_config}")
        expected = rc.model_config(stored.vocab_size)
    params, meta = load_checkpoint(ckpt, expected, dtype=dtype)
    vocab_ref = getattr(args, "vocab", None) or meta.get("vocab") or "vocab.txt"
    vocab_path = Path(vocab_ref) if Path(vocab_ref).is_absolute() else ckpt.parent / vocab_ref
    if getattr(args, "vocab", None):
        vocab_path = Path(args.vocab)
    vocab = Vocabulary.load(vocab_path)
    if vocab.size != params.config.vocab_size:
        raise UsageError(
            f"vocabulary {vocab_path} has {vocab.size} entries but checkpoint embedding has {params.config.vocab_size} rows"
        )
    return params, meta, vocab


def _peek(path: Path):
    from adaptattn.numcore import load_tensors

    return load_tensors(path)


def _precision(args) -> np.dtype:
    import os

    value = os.environ.get("ADAPTATTN_PRECISION", "f32").strip()
    if value not in ("f32", "f64"):
        raise UsageError(f"ADAPTATTN_PRECISION must be f32 or f64, got {value!r}")
    return np.float32 if value == "f32" else np.float64


def cmd_eval(args) -> int:
    params, meta, vocab = _load_model(args, _precision(args))
    bins = params.config.bin_config
    docs = encode_corpus(load_corpus(args.corpus, args.split, bins), vocab, bins)
    batch_size = int(meta.get("batch_size", 32))
    metrics = evaluate(params, docs, batch_size)
    print(metrics.line())
    row = history_rows([HistoryRow(int(meta.get("epoch", 0)), args.split, metrics, 0.0)])[0]
    if args.out:
        path = _out_dir(args) / "eval.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(HISTORY_HEADER)
            w.writerow(row)
    return EXIT_OK


def cmd_predict(args) -> int:
    params, _, vocab = _load_model(args, _precision(args))
    tokens = tokenize(args.text)
    if not tokens:
        raise DataError("empty document: the text has no word tokens")
    bins = params.config.bin_config
    ids, mask, b = encode_document(tokens, vocab, bins)
    batch = Batch(ids[None], mask[None], np.zeros(1, dtype=np.int64), b, bins.heads_for(b), np.zeros(1, np.int64))
    pred = forward(batch, params)
    p1, p2 = (float(v) for v in pred.probs.data[0])
    label = "positive" if pred.predicted_label[0] == 1 else "negative"
    print(f"label={label} P1={p1:.6f} P2={p2:.6f} bin={b.label} heads={batch.head_count} length={len(tokens)}")
    return EXIT_OK


def cmd_synth(args) -> int:
    rc = _run_config(args)
    write_corpus(args.out, args.n_train, args.n_test, rc.seed, rc.bin_config())
    print(f"wrote synthetic corpus to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adaptattn", description="Length-adaptive multi-head attention sentiment classifier")
    parser.add_argument("-v", "--verbose", action="store_true", help="log per-epoch progress")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, corpus=True, out_default="."):
        if corpus:
            p.add_argument("--corpus", required=True, help="root containing {train,test}/{pos,neg}/*.txt")
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--mode", choices=MODES, help="bin preset (default approach1)")
        p.add_argument("--seed", type=int)
        p.add_argument("--epochs", type=int)
        p.add_argument("--out", default=out_default, help="output directory")

    p = sub.add_parser("stats", help="length-bin statistics of a corpus split")
    common(p)
    p.add_argument("--split", choices=("train", "test"), default="train")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("train", help="train and write checkpoint + metrics CSV")
    common(p, out_default="run")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a corpus split")
    common(p, out_default=None)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--vocab", help="vocabulary file (default: the one named in the checkpoint)")
    p.add_argument("--split", choices=("train", "test"), default="test")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="classify one review text")
    common(p, corpus=False, out_default=None)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--vocab")
    p.add_argument("--text", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("synth", help="write a synthetic keyword-review corpus")
    common(p, corpus=False, out_default="synthetic")
    p.add_argument("--n-train", type=int, default=500)
    p.add_argument("--n-test", type=int, default=200)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except RunConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (AdaptAttnError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
