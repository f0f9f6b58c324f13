"""Command-line surface: prepare, train, eval, embed, gradcheck, sweep.

Exit codes: 0 success, 1 check or evaluation failure, 2 usage/config error,
3 data-format error, 4 numeric abort. Every command that writes artifacts
also writes a run manifest (key=value: resolved config, 64-bit input
digests, seed, version, timestamp) before the long work starts.
"""

import argparse
import hashlib
import os
import sys
from dataclasses import replace
from datetime import datetime, timezone

from . import __version__
from .data import SplitSpec, load_embeddings, load_semeval, load_turney, \
    read_pairs_tsv, read_ppdb_pairs, filter_pairs, split_dataset, \
    subsample_training, write_pairs_tsv, distinct_phrases
from .errors import ConfigError, DegenerateVectorError, EvaluationError, \
    FormatError, NumericError, OutOfVocabularyError
from .evaluation import PUBLISHED_REFERENCE, REFERENCE_KEPT_PAIRS, AverageEncoder, \
    RandomEncoder, SumEncoder, encoder_from_checkpoint, ranking_accuracy, \
    semeval_evaluate, sweep, turney5_evaluate, turney10_evaluate
from .gradcheck import run_all_checks
from .numeric import child_seed
from .training import TrainConfig, load_checkpoint, save_checkpoint, train, \
    write_metrics_tsv

__all__ = ["main", "build_parser"]


def _utc_now():
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def file_digest64(path):
    """64-bit content hash of a file, hex-encoded."""
    h = hashlib.blake2b(digest_size=8)
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(path, command, config_map, inputs, extras=None):
    """key=value run record: enough to rerun the command the same way."""
    lines = [f"command={command}",
             f"toolkit_version={__version__}",
             f"created_utc={_utc_now()}"]
    for key, value in (extras or {}).items():
        lines.append(f"{key}={value}")
    for key, value in config_map.items():
        lines.append(f"config.{key}={value}")
    for name in sorted(inputs):
        lines.append(f"input.{name}={file_digest64(inputs[name])}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def parse_config_file(path):
    """Flat "key = value" lines; blank lines and #-comments are ignored."""
    mapping = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ConfigError(f"{path}:{line_no}: expected key=value, got {line!r}")
            mapping[key.strip()] = value.strip()
    return mapping


def resolve_train_config(args):
    """Defaults, overridden by --config file entries, overridden by flags."""
    if args.config:
        config = TrainConfig.from_key_values(parse_config_file(args.config))
    else:
        config = TrainConfig()
    overrides = {}
    for flag, field in [("k", "k_contrasts"), ("seed", "seed"), ("lr", "lr"),
                        ("epochs", "max_epochs"), ("hidden_dim", "hidden_dim"),
                        ("embed_dim", "embed_dim"), ("batch_size", "batch_size"),
                        ("dropout", "dropout_rate"), ("margin", "margin"),
                        ("patience", "early_stop_patience"),
                        ("clip_norm", "clip_norm"), ("precision", "precision"),
                        ("similarity", "eval_similarity"), ("dev_k", "dev_k")]:
        value = getattr(args, flag, None)
        if value is not None:
            overrides[field] = value
    if getattr(args, "use_bias", False):
        overrides["use_bias"] = True
    if getattr(args, "mirror_pairs", False):
        overrides["mirror_pairs"] = True
    if getattr(args, "fine_tune_embeddings", False):
        overrides["freeze_embeddings"] = False
    if getattr(args, "deterministic", False):
        overrides["deterministic"] = True
    return replace(config, **overrides) if overrides else config


def _load_split_dir(data_dir):
    train_path = os.path.join(data_dir, "train.tsv")
    dev_path = os.path.join(data_dir, "dev.tsv")
    return train_path, dev_path, read_pairs_tsv(train_path), read_pairs_tsv(dev_path)


def cmd_prepare(args):
    os.makedirs(args.out, exist_ok=True)
    write_manifest(os.path.join(args.out, "run_manifest.txt"), "prepare",
                   {"seed": args.seed, "lowercase": str(not args.no_lowercase).lower()},
                   {"ppdb": args.ppdb, "embeddings": args.embeddings})
    table = load_embeddings(args.embeddings, lowercase=not args.no_lowercase)
    pairs = read_ppdb_pairs(args.ppdb)
    kept, report = filter_pairs(pairs, table)
    if not kept:
        raise EvaluationError("no pairs survived filtering")
    splits = split_dataset(kept, SplitSpec(seed=args.seed))
    for name, part in zip(("train", "dev", "test"), splits):
        write_pairs_tsv(part, os.path.join(args.out, f"{name}.tsv"))
    report_fields = [("input_pairs", report.input_pairs), ("identical", report.identical),
                     ("non_letter", report.non_letter), ("out_of_vocab", report.out_of_vocab),
                     ("both_single", report.both_single), ("duplicates", report.duplicates),
                     ("kept", report.kept)]
    with open(os.path.join(args.out, "filter_report.txt"), "w", encoding="utf-8",
              newline="\n") as fh:
        for key, value in report_fields:
            fh.write(f"{key}={value}\n")
    for key, value in report_fields:
        print(f"{key}={value}")
    print(f"split sizes: train={len(splits[0])} dev={len(splits[1])} test={len(splits[2])}")
    print(f"# full-scale reference corpus keeps {REFERENCE_KEPT_PAIRS} pairs")
    return 0


def cmd_train(args):
    config = resolve_train_config(args)
    train_path, dev_path, train_pairs, dev_pairs = _load_split_dir(args.data)
    inputs = {"train": train_path, "dev": dev_path, "embeddings": args.embeddings}
    if args.config:
        inputs["config"] = args.config
    extras = {}
    if args.fraction is not None:
        subsample_seed = child_seed(config.seed, int(round(args.fraction * 1_000_000)))
        train_pairs = subsample_training(train_pairs, args.fraction, subsample_seed)
        extras["fraction"] = repr(args.fraction)
    write_manifest(args.out + ".manifest.txt", "train", config.as_key_values(),
                   inputs, extras)

    table = load_embeddings(args.embeddings)
    ckpt, logs = train(config, train_pairs, dev_pairs, table)
    save_checkpoint(ckpt, args.out)
    metrics_path = args.metrics or args.out + ".metrics.tsv"
    write_metrics_tsv(logs, metrics_path)
    print(f"trained {len(logs)} epochs on {len(train_pairs)} pairs; "
          f"best dev accuracy {ckpt.best_dev_metric:.4f} at epoch {ckpt.epoch}")
    print(f"checkpoint: {args.out}")
    print(f"metrics: {metrics_path}")
    return 0


def _build_eval_encoder(args):
    table = None
    if args.embeddings:
        table = load_embeddings(args.embeddings)
    if args.ckpt:
        if table is None:
            raise ConfigError("--ckpt evaluation needs --embeddings")
        return encoder_from_checkpoint(load_checkpoint(args.ckpt), table)
    if args.baseline == "random":
        dim = table.dim if table is not None else args.dim
        return RandomEncoder(dim, args.seed)
    if table is None:
        raise ConfigError(f"--baseline {args.baseline} needs --embeddings")
    return {"avg": AverageEncoder, "sum": SumEncoder}[args.baseline](table)


def cmd_eval(args):
    encoder = _build_eval_encoder(args)
    if args.task != "semeval" and len(args.data) != 1:
        raise ConfigError(f"--task {args.task} takes exactly one --data file")
    rows = []
    if args.task == "ranking":
        pairs = read_pairs_tsv(args.data[0])
        pool = distinct_phrases(pairs, *[read_pairs_tsv(p) for p in args.pool])
        result = ranking_accuracy(encoder, pairs, pool, args.k, args.seed,
                                  similarity=args.similarity, oov_policy=args.oov)
        rows.append(("ranking", encoder.name, str(result.k), result.n_examples,
                     result.oov_skipped, result.accuracy))
    elif args.task == "semeval":
        if len(args.data) != 2:
            raise ConfigError("--task semeval needs --data TRAIN_TSV EVAL_TSV")
        result = semeval_evaluate(encoder, load_semeval(args.data[0]),
                                  load_semeval(args.data[1]),
                                  similarity=args.similarity, oov_policy=args.oov)
        print(f"# threshold={result.threshold!r} train_accuracy={result.train_accuracy:.4f}")
        rows.append(("semeval", encoder.name, "-", result.n_examples,
                     result.oov_skipped, result.accuracy))
    else:
        examples = load_turney(args.data[0])
        evaluate = turney5_evaluate if args.task == "turney5" else turney10_evaluate
        result = evaluate(encoder, examples, similarity=args.similarity,
                          oov_policy=args.oov)
        rows.append((args.task, encoder.name, "-", result.n_examples,
                     result.oov_skipped, result.accuracy))

    lines = [f"{task}\t{name}\t{k}\t{n}\t{oov}\t{acc!r}"
             for task, name, k, n, oov, acc in rows]
    for line in lines:
        print(line)
    for task, name, *_ in rows:
        reference = PUBLISHED_REFERENCE.get((task, name))
        if reference is not None:
            print(f"# published full-scale reference for {task}/{name}: {reference}")
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
        inputs = {f"data{i}": p for i, p in enumerate(args.data)}
        if args.embeddings:
            inputs["embeddings"] = args.embeddings
        if args.ckpt:
            inputs["ckpt"] = args.ckpt
        write_manifest(args.out + ".manifest.txt", "eval",
                       {"task": args.task, "k": args.k, "seed": args.seed,
                        "similarity": args.similarity, "oov": args.oov},
                       inputs)
    return 0


def cmd_embed(args):
    table = load_embeddings(args.embeddings)
    encoder = encoder_from_checkpoint(load_checkpoint(args.ckpt), table)
    with open(args.phrases, encoding="utf-8") as fh:
        phrases = [line.strip() for line in fh if line.strip()]
    if not phrases:
        raise ValueError(f"{args.phrases}: no phrases to embed")
    write_manifest(args.out + ".manifest.txt", "embed", {},
                   {"ckpt": args.ckpt, "embeddings": args.embeddings,
                    "phrases": args.phrases})
    emitted = 0
    with open(args.out, "w", encoding="utf-8", newline="\n") as out_fh, \
            open(args.out + ".oov.txt", "w", encoding="utf-8", newline="\n") as oov_fh:
        for phrase in phrases:
            try:
                vec = encoder.encode(phrase)
            except OutOfVocabularyError as exc:
                oov_fh.write(f"{phrase}\t{' '.join(exc.words)}\n")
                continue
            key = "_".join(table.tokenize(phrase))
            out_fh.write(key + "\t" + " ".join(repr(float(v)) for v in vec) + "\n")
            emitted += 1
    print(f"embedded {emitted} of {len(phrases)} phrases -> {args.out}")
    return 0


def cmd_gradcheck(args):
    results = run_all_checks(seed=args.seed, max_dim=args.dims, max_len=args.length,
                             corrupt=args.corrupt_gradients)
    lines = [r.report_line() for r in results]
    for line in lines:
        print(line)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
        write_manifest(args.out + ".manifest.txt", "gradcheck",
                       {"seed": args.seed, "dims": args.dims, "len": args.length}, {})
    return 0 if all(r.passed for r in results) else 1


def cmd_sweep(args):
    config = resolve_train_config(args)
    train_path, dev_path, train_pairs, dev_pairs = _load_split_dir(args.data)
    fractions = [float(f) for f in args.fractions.split(",") if f]
    k_values = [int(k) for k in args.k_list.split(",") if k]
    os.makedirs(args.out, exist_ok=True)
    write_manifest(os.path.join(args.out, "run_manifest.txt"), "sweep",
                   config.as_key_values(),
                   {"train": train_path, "dev": dev_path, "embeddings": args.embeddings},
                   {"fractions": args.fractions, "k_list": args.k_list,
                    "run_seed": args.run_seed, "eval_k": args.eval_k})
    table = load_embeddings(args.embeddings)
    cells = sweep(train_pairs, dev_pairs, table, config, fractions, k_values,
                  args.run_seed, eval_k=args.eval_k)
    lines = [f"{c.fraction!r}\t{c.k}\t{c.seed}\t{c.n_examples}\t{c.oov_skipped}"
             f"\t{c.accuracy!r}\t{c.best_epoch}" for c in cells]
    with open(os.path.join(args.out, "sweep.tsv"), "w", encoding="utf-8",
              newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    for line in lines:
        print(line)
    return 0


def _add_train_flags(sub):
    sub.add_argument("--config", help="flat key=value config file")
    sub.add_argument("--k", type=int, help="contrast phrases per example")
    sub.add_argument("--seed", type=int)
    sub.add_argument("--lr", type=float)
    sub.add_argument("--epochs", type=int)
    sub.add_argument("--hidden-dim", type=int, dest="hidden_dim")
    sub.add_argument("--embed-dim", type=int, dest="embed_dim")
    sub.add_argument("--batch-size", type=int, dest="batch_size")
    sub.add_argument("--dropout", type=float)
    sub.add_argument("--margin", type=float)
    sub.add_argument("--patience", type=int)
    sub.add_argument("--clip-norm", type=float, dest="clip_norm")
    sub.add_argument("--precision", choices=["f64", "f32"])
    sub.add_argument("--similarity", choices=["cosine", "dot"])
    sub.add_argument("--dev-k", type=int, dest="dev_k")
    sub.add_argument("--use-bias", action="store_true", dest="use_bias")
    sub.add_argument("--mirror-pairs", action="store_true", dest="mirror_pairs")
    sub.add_argument("--fine-tune-embeddings", action="store_true",
                     dest="fine_tune_embeddings")
    sub.add_argument("--deterministic", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="pairgru",
        description="Phrase embeddings from paraphrase pairs: train a recurrent "
                    "encoder, evaluate it against order-blind baselines.")
    parser.add_argument("--version", action="version", version=f"pairgru {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser("prepare", help="filter pairs, split, and cache them")
    p.add_argument("--ppdb", required=True, help="paraphrase database file")
    p.add_argument("--embeddings", required=True, help="word vector text file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-lowercase", action="store_true", dest="no_lowercase")
    p.set_defaults(func=cmd_prepare)

    p = commands.add_parser("train", help="train the recurrent encoder")
    p.add_argument("--data", required=True, help="directory holding train.tsv/dev.tsv")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--out", required=True, help="checkpoint output path")
    p.add_argument("--metrics", help="metrics TSV path (default: <out>.metrics.tsv)")
    p.add_argument("--fraction", type=float, help="train on this fraction of pairs")
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = commands.add_parser("eval", help="score an encoder on a task")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--ckpt", help="trained checkpoint path")
    group.add_argument("--baseline", choices=["avg", "sum", "random"])
    p.add_argument("--task", required=True,
                   choices=["ranking", "semeval", "turney5", "turney10"])
    p.add_argument("--data", required=True, nargs="+",
                   help="task data file(s); semeval takes TRAIN_TSV EVAL_TSV")
    p.add_argument("--embeddings")
    p.add_argument("--pool", nargs="*", default=[],
                   help="extra pairs TSVs whose phrases join the ranking pool")
    p.add_argument("--k", type=int, default=99)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dim", type=int, default=16,
                   help="vector width for --baseline random without --embeddings")
    p.add_argument("--similarity", choices=["cosine", "dot"], default="cosine")
    p.add_argument("--oov", choices=["skip", "drop"], default="skip")
    p.add_argument("--out", help="also write the report TSV here")
    p.set_defaults(func=cmd_eval)

    p = commands.add_parser("embed", help="export phrase embeddings")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--phrases", required=True, help="input file, one phrase per line")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_embed)

    p = commands.add_parser("gradcheck", help="finite-difference gradient self-check")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dims", type=int, default=8)
    p.add_argument("--len", type=int, default=6, dest="length")
    p.add_argument("--out", help="also write the report here")
    p.add_argument("--corrupt-gradients", action="store_true",
                   dest="corrupt_gradients", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_gradcheck)

    p = commands.add_parser("sweep", help="train/evaluate a fraction-by-k grid")
    p.add_argument("--data", required=True, help="directory holding train.tsv/dev.tsv")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--fractions", default="0.01,0.1,1.0")
    p.add_argument("--k-list", default="9,29,99", dest="k_list")
    p.add_argument("--run-seed", type=int, default=0, dest="run_seed")
    p.add_argument("--eval-k", type=int, default=99, dest="eval_k")
    _add_train_flags(p)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FormatError as exc:
        print(f"data format error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"numeric abort: {exc}", file=sys.stderr)
        return 4
    except (EvaluationError, DegenerateVectorError) as exc:
        print(f"evaluation failure: {exc}", file=sys.stderr)
        return 1
    except (ValueError, LookupError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
