"""``lacuna`` command-line front end.

Exit status: 0 on success, 1 when a stage fails at runtime, 2 for usage,
configuration or missing-input errors.
"""

from __future__ import annotations

import argparse
import glob
import json
import logging
import sys
from pathlib import Path

from lacuna import __version__
from lacuna.corpus import SplitConfig, read_corpus
from lacuna.decode import read_predictions
from lacuna.ensemble import VoteConfig, read_ranked, select_top_runs
from lacuna.evaluation import (
    accuracy,
    baseline_words,
    frequency_report,
    most_common_word_baseline,
    ranked_report,
    write_frequency_csv,
)
from lacuna.io import read_jsonl
from lacuna.lm import SamplingParams
from lacuna.masking import MaskingConfig, read_variants
from lacuna.pipeline import (
    ConfigError,
    StageError,
    bundled_config_path,
    load_config,
    require_file,
    run_pipeline,
    stage_ensemble,
    stage_ingest,
    stage_mask,
    stage_predict,
    stage_split,
    stage_train,
)

logger = logging.getLogger("lacuna")


def _expand(patterns: list[str]) -> list[Path]:
    paths: list[Path] = []
    for pat in patterns:
        hits = sorted(glob.glob(pat))
        if not hits:
            raise ConfigError(f"no files match {pat}")
        paths.extend(Path(h) for h in hits if not h.endswith(".manifest.json"))
    return paths


def cmd_ingest(args) -> int:
    corpus = stage_ingest(args.input, args.output)
    logger.info("%d documents, %d tokens", len(corpus), sum(len(d) for d in corpus))
    return 0


def cmd_split(args) -> int:
    try:
        cfg = SplitConfig(args.dev_fraction, args.seed, args.min_dev_words)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    train, dev = stage_split(args.corpus, args.train_output, args.dev_output, cfg)
    logger.info("train %d documents, dev %d documents", len(train), len(dev))
    return 0


def cmd_mask(args) -> int:
    try:
        cfg = MaskingConfig(args.rate, args.max_variants, args.seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    variants = stage_mask(args.corpus, args.output, cfg, args.prompts_output)
    logger.info("%d variants", len(variants))
    return 0


def cmd_train(args) -> int:
    model = stage_train(args.corpus, args.output, args.order, args.kappa, args.backoff)
    logger.info("%r", model)
    return 0


def cmd_predict(args) -> int:
    params = SamplingParams(args.temperature, args.max_new_tokens, tuple(args.stop or ()), args.seed)
    run = stage_predict(
        args.method,
        args.backend,
        args.variants,
        args.system_id,
        args.output,
        params,
        args.reproduce_mask_bug,
        args.scored_backend,
    )
    logger.info("%d predictions, %d failed calls", len(run.records), len(run.failures))
    return 0


def cmd_ensemble(args) -> int:
    paths = _expand(args.runs)
    if args.select_top is not None:
        if not args.variants:
            raise ConfigError("--select-top needs --variants to score the runs")
        variants = read_variants(require_file(args.variants))
        scores = {str(p): accuracy(read_predictions(p), variants).accuracy for p in paths}
        paths = [Path(p) for p in select_top_runs(scores, args.select_top)]
    ranked = stage_ensemble(paths, args.output, VoteConfig(top_k=args.top_k))
    logger.info("%d positions voted from %d runs", len(ranked), len(paths))
    return 0


def _is_ranked(path: Path) -> bool:
    first = next(read_jsonl(path), None)
    return first is not None and "ranked" in first


def cmd_evaluate(args) -> int:
    variants = read_variants(require_file(args.variants))
    report: dict = {"systems": {}}
    for path in _expand(args.predictions):
        if _is_ranked(path):
            r = ranked_report(read_ranked(path), variants, k=args.top_k, top_n=args.top, macro=args.macro, label=path.stem)
            report.setdefault("ensembles", {})[path.stem] = r.to_json()
        else:
            r = accuracy(read_predictions(path), variants, top_n=args.top, macro=args.macro, label=path.stem)
            report["systems"][path.stem] = r.to_json()
        line = f"{path.stem}: accuracy {r.accuracy:.4f} ({r.n_correct}/{r.n_positions})"
        if r.topk is not None:
            line += f", top-{r.topk} {r.topk_accuracy:.4f}"
        print(line)
    if args.train_corpus:
        train = read_corpus(require_file(args.train_corpus))
        b = most_common_word_baseline(train, variants, top_n=args.top)
        report["baseline"] = {"words": baseline_words(train), **b.to_json()}
        print(f"most-common-word baseline: accuracy {b.accuracy:.4f}")
    if args.report:
        Path(args.report).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return 0


def cmd_frequencies(args) -> int:
    tables = {}
    for path in _expand(args.predictions):
        tables[path.stem] = frequency_report((r.predicted for r in read_predictions(path) if r.predicted), args.top)
    if args.variants:
        tables["reference"] = frequency_report((g for v in read_variants(args.variants) for g in v.gold), args.top)
    for name, t in tables.items():
        print(f"{name}: {t.unique} unique of {t.total}")
        for word, freq in t.rows:
            print(f"  {word}\t{freq:.4f}")
    if args.csv:
        write_frequency_csv(args.csv, tables)
    return 0


def cmd_run(args) -> int:
    config = Path(args.config) if args.config else bundled_config_path()
    overrides = list(args.set or [])
    if args.output_dir:
        overrides.append(f"run.output_dir={json.dumps(str(Path(args.output_dir).resolve()))}")
    cfg = load_config(config, overrides)
    # relative paths in a user config are relative to the config file
    base = config.resolve().parent if args.config else Path.cwd()
    result = run_pipeline(cfg, base, sys.argv)
    print((result.output_dir / "report.txt").read_text(encoding="utf-8"), end="")
    print(f"artifacts in {result.output_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lacuna", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"lacuna {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="token TSV -> document JSONL")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("split", help="seeded train/dev split")
    p.add_argument("--corpus", required=True)
    p.add_argument("--dev-fraction", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--min-dev-words", type=int, default=2)
    p.add_argument("--train-output", required=True)
    p.add_argument("--dev-output", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("mask", help="generate masked variants")
    p.add_argument("--corpus", required=True)
    p.add_argument("--rate", type=float, default=0.15)
    p.add_argument("--max-variants", type=int, default=15)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", required=True)
    p.add_argument("--prompts-output", help="also write every rendered prompt for audit")
    p.set_defaults(func=cmd_mask)

    p = sub.add_parser("train-ngram", help="train the local subword n-gram model")
    p.add_argument("--corpus", required=True)
    p.add_argument("--order", type=int, default=4)
    p.add_argument("--kappa", type=float, default=0.01)
    p.add_argument("--backoff", type=float, default=0.4)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="run one prediction method")
    p.add_argument("--method", required=True, choices=["all", "one-by-one", "restore"])
    p.add_argument("--backend", required=True, help="ngram:<model-file> or remote:<config-file>")
    p.add_argument("--scored-backend", help="ngram:<model-file> used by restore when --backend is remote")
    p.add_argument("--variants", required=True)
    p.add_argument("--system-id", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--temperature", type=float, default=0.2)
    p.add_argument("--max-new-tokens", type=int, default=64)
    p.add_argument("--stop", action="append")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--reproduce-mask-bug", action="store_true", help="allow [MASK] as a restore prediction")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("ensemble", help="majority vote over prediction runs")
    p.add_argument("--runs", required=True, nargs="+", help="prediction files or globs")
    p.add_argument("--top-k", type=int, default=3)
    p.add_argument("--select-top", type=int, help="keep only the N most accurate runs (default off; 60 in the full setup)")
    p.add_argument("--variants", help="gold variants used by --select-top")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_ensemble)

    p = sub.add_parser("evaluate", help="accuracy, top-k and baseline report")
    p.add_argument("--predictions", required=True, nargs="+")
    p.add_argument("--variants", required=True)
    p.add_argument("--train-corpus")
    p.add_argument("--report")
    p.add_argument("--top", type=int, default=20)
    p.add_argument("--top-k", type=int, default=3)
    p.add_argument("--macro", action="store_true", help="also report per-variant macro accuracy")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report-frequencies", help="top-N relative frequency tables")
    p.add_argument("--predictions", required=True, nargs="+")
    p.add_argument("--variants", help="add the reference table from gold words")
    p.add_argument("--top", type=int, default=20)
    p.add_argument("--csv")
    p.set_defaults(func=cmd_frequencies)

    p = sub.add_parser("run", help="full pipeline from a TOML config")
    p.add_argument("--config", help="TOML file (default: bundled synthetic setup)")
    p.add_argument("--output-dir")
    p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE", help="override a config value")
    p.set_defaults(func=cmd_run)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s"
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"lacuna: error: {exc}", file=sys.stderr)
        return 2
    except StageError as exc:
        print(f"lacuna: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - any stage failure is exit 1
        print(f"lacuna: {args.command} failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
