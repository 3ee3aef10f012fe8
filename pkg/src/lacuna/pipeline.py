"""Stage functions shared by the CLI, and the configured end-to-end run."""

from __future__ import annotations

import copy
import json
import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Sequence

from lacuna.corpus import (
    Document,
    SplitConfig,
    ingest_tokens,
    read_corpus,
    read_token_tsv,
    split_dev,
    write_corpus,
)
from lacuna.decode import PredictionRun, predict_variants, read_predictions, write_predictions
from lacuna.ensemble import VoteConfig, majority_vote, select_top_runs, write_ranked
from lacuna.evaluation import (
    EvalReport,
    FrequencyTable,
    accuracy,
    baseline_words,
    format_accuracy_table,
    frequency_report,
    most_common_word_baseline,
    ranked_report,
    write_frequency_csv,
)
from lacuna.io import write_jsonl
from lacuna.lm import NgramModel, RemoteBackend, RemoteBackendConfig, SamplingParams, train_ngram
from lacuna.manifest import RunManifest, write_sidecars
from lacuna.masking import MaskingConfig, mask_corpus, read_variants, write_variants
from lacuna.prompts import Method, build_prompts

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

logger = logging.getLogger(__name__)

SYNTHETIC = "synthetic"


class ConfigError(ValueError):
    """Bad configuration or missing input; maps to exit status 2."""


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage} failed: {cause}")
        self.stage = stage
        self.cause = cause


def bundled_corpus_path() -> Path:
    return Path(str(resources.files("lacuna") / "data" / "synthetic_corpus.tsv"))


def bundled_config_path() -> Path:
    return Path(str(resources.files("lacuna") / "data" / "synthetic_run.toml"))


def require_file(path: str | Path) -> Path:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"input file not found: {path}")
    return path


# -- config ----------------------------------------------------------------

# section -> key -> (accepted types, default)
SCHEMA: dict[str, dict[str, tuple[tuple[type, ...], Any]]] = {
    "run": {"input": ((str,), SYNTHETIC), "output_dir": ((str,), "lacuna-run")},
    "split": {"dev_fraction": ((float, int), 0.01), "seed": ((int,), 0), "min_dev_words": ((int,), 2)},
    "masking": {"rate": ((float, int), 0.15), "max_variants": ((int,), 15), "seed": ((int,), 0)},
    "ngram": {"order": ((int,), 4), "kappa": ((float, int), 0.01), "backoff": ((float, int), 0.4)},
    "predict": {
        "methods": ((list,), ["all", "one-by-one", "restore"]),
        "backend": ((str,), "ngram"),
        "temperature": ((float, int), 0.2),
        "max_new_tokens": ((int,), 32),
        "seed": ((int,), 0),
        "reproduce_mask_bug": ((bool,), False),
    },
    "ensemble": {"top_k": ((int,), 3), "top_runs": ((int,), 60)},
    "evaluate": {"top_n": ((int,), 20), "macro": ((bool,), False)},
}


def validate_config(raw: Mapping[str, Any]) -> dict[str, dict[str, Any]]:
    """Fill defaults and type-check; errors name the offending field path."""
    cfg = {sec: {k: copy.deepcopy(d) for k, (_, d) in keys.items()} for sec, keys in SCHEMA.items()}
    for sec, values in raw.items():
        if sec not in SCHEMA:
            raise ConfigError(f"{sec}: unknown section")
        if not isinstance(values, Mapping):
            raise ConfigError(f"{sec}: expected a table")
        for key, value in values.items():
            if key not in SCHEMA[sec]:
                raise ConfigError(f"{sec}.{key}: unknown field")
            types, _ = SCHEMA[sec][key]
            if isinstance(value, bool) and bool not in types or not isinstance(value, types):
                raise ConfigError(f"{sec}.{key}: expected {'/'.join(t.__name__ for t in types)}, got {value!r}")
            cfg[sec][key] = value
    for m in cfg["predict"]["methods"]:
        try:
            Method(m)
        except ValueError:
            raise ConfigError(f"predict.methods: unknown method {m!r}") from None
    try:
        SplitConfig(cfg["split"]["dev_fraction"], cfg["split"]["seed"], cfg["split"]["min_dev_words"])
        MaskingConfig(cfg["masking"]["rate"], cfg["masking"]["max_variants"], cfg["masking"]["seed"])
        SamplingParams(cfg["predict"]["temperature"], cfg["predict"]["max_new_tokens"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def load_config(path: str | Path, overrides: Sequence[str] = ()) -> dict[str, dict[str, Any]]:
    path = require_file(path)
    try:
        raw = tomllib.loads(path.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    for item in overrides:
        dotted, sep, value = item.partition("=")
        sec, dot, key = dotted.partition(".")
        if not sep or not dot:
            raise ConfigError(f"override {item!r} must look like section.key=value")
        try:
            parsed = tomllib.loads(f"v = {value}")["v"]
        except tomllib.TOMLDecodeError:
            parsed = value
        raw.setdefault(sec, {})[key] = parsed
    return validate_config(raw)


# -- stages ------------------------------------------------------------------


def _finish(manifest: RunManifest, inputs: Sequence[Path], outputs: Sequence[Path]) -> None:
    manifest.finish()
    write_sidecars(manifest, inputs, outputs)


def stage_ingest(tsv: str | Path, output: str | Path) -> list[Document]:
    tsv = require_file(tsv)
    manifest = RunManifest.start({"stage": "ingest"})
    corpus = ingest_tokens(read_token_tsv(tsv))
    write_corpus(output, corpus)
    _finish(manifest, [tsv], [Path(output)])
    return corpus


def stage_split(corpus_path, train_out, dev_out, cfg: SplitConfig) -> tuple[list[Document], list[Document]]:
    corpus_path = require_file(corpus_path)
    manifest = RunManifest.start({"stage": "split", **vars(cfg)}, {"split": cfg.seed})
    train, dev = split_dev(read_corpus(corpus_path), cfg)
    write_corpus(train_out, train)
    write_corpus(dev_out, dev)
    _finish(manifest, [corpus_path], [Path(train_out), Path(dev_out)])
    return train, dev


def stage_mask(corpus_path, output, cfg: MaskingConfig, prompts_output=None):
    corpus_path = require_file(corpus_path)
    manifest = RunManifest.start({"stage": "mask", **vars(cfg)}, {"masking": cfg.seed})
    variants = list(mask_corpus(read_corpus(corpus_path), cfg))
    write_variants(output, variants)
    outputs = [Path(output)]
    if prompts_output:
        write_jsonl(prompts_output, (p.to_json() for v in variants for m in Method for p in build_prompts(m, v)))
        outputs.append(Path(prompts_output))
    _finish(manifest, [corpus_path], outputs)
    return variants


def stage_train(corpus_path, output, order=4, kappa=0.01, backoff=0.4) -> NgramModel:
    corpus_path = require_file(corpus_path)
    manifest = RunManifest.start({"stage": "train-ngram", "order": order, "kappa": kappa, "backoff": backoff})
    model = train_ngram(read_corpus(corpus_path), order, kappa, backoff)
    model.save(output)
    _finish(manifest, [corpus_path], [Path(output)])
    return model


def open_backend(spec: str) -> tuple[Any, list[Path], dict[str, Any]]:
    """Parse ``ngram:<model>`` or ``remote:<config>`` into (backend, input files, digest info)."""
    kind, sep, target = spec.partition(":")
    if not sep or kind not in {"ngram", "remote"}:
        raise ConfigError(f"backend must be ngram:<model-file> or remote:<config-file>, got {spec!r}")
    path = require_file(target)
    if kind == "ngram":
        return NgramModel.load(path), [path], {"backend": "ngram"}
    try:
        rcfg = RemoteBackendConfig.from_file(path)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return RemoteBackend(rcfg), [path], {"backend": "remote", **rcfg.digest_fields()}


def stage_predict(
    method: Method | str,
    backend_spec: str,
    variants_path,
    system_id: str,
    output,
    params: SamplingParams = SamplingParams(),
    reproduce_mask_bug: bool = False,
    scored_backend: str | None = None,
) -> PredictionRun:
    method = Method(method)
    variants_path = require_file(variants_path)
    backend, backend_inputs, info = open_backend(backend_spec)
    if method is Method.RESTORE and scored_backend and not isinstance(backend, NgramModel):
        backend, extra, _ = open_backend(scored_backend)
        backend_inputs += extra
    manifest = RunManifest.start(
        {
            "stage": "predict",
            "method": method.value,
            "system_id": system_id,
            "backend": info,
            "temperature": params.temperature,
            "max_new_tokens": params.max_new_tokens,
            "reproduce_mask_bug": reproduce_mask_bug,
        },
        {"sampling": params.seed},
    )
    try:
        run = predict_variants(
            method, backend, read_variants(variants_path), params, system_id, ban_mask_token=not reproduce_mask_bug
        )
    finally:
        if isinstance(backend, RemoteBackend):
            backend.close()
    write_predictions(output, run.records)
    manifest.failures = {"failed_calls": len(run.failures)}
    _finish(manifest, [variants_path, *backend_inputs], [Path(output)])
    return run


def stage_ensemble(run_paths: Sequence[Path], output, cfg: VoteConfig):
    manifest = RunManifest.start({"stage": "ensemble", "top_k": cfg.top_k, "runs": [p.name for p in run_paths]})
    runs = [read_predictions(require_file(p)) for p in run_paths]
    ranked = majority_vote(runs, cfg)
    write_ranked(output, ranked)
    _finish(manifest, list(run_paths), [Path(output)])
    return ranked


# -- full run -------------------------------------------------------------------


@dataclass
class PipelineResult:
    output_dir: Path
    report: dict[str, Any]
    manifest: RunManifest
    artifacts: list[Path] = field(default_factory=list)


def _resolve_input(value: str, config_dir: Path | None) -> Path:
    if value == SYNTHETIC:
        return bundled_corpus_path()
    path = Path(value)
    if not path.is_absolute() and config_dir is not None:
        path = config_dir / path
    return require_file(path)


def build_report(
    system_reports: Mapping[str, EvalReport],
    system_methods: Mapping[str, Method],
    baseline: EvalReport,
    words: Mapping[str, str],
    ensemble: EvalReport | None = None,
    selected: Sequence[str] = (),
) -> dict[str, Any]:
    out: dict[str, Any] = {
        "systems": {sid: {"method": system_methods[sid].value, **r.to_json()} for sid, r in system_reports.items()},
        "baseline": {"words": dict(words), **baseline.to_json()},
    }
    if ensemble is not None:
        out["ensemble"] = {"runs": list(selected), **ensemble.to_json()}
    return out


def run_pipeline(cfg: Mapping[str, Mapping[str, Any]], config_dir: Path | None = None, command=None) -> PipelineResult:
    """Ingest, split, mask, train, predict, vote and evaluate in one go.

    Artifacts are byte-identical across runs with the same config and a local
    backend; only manifest timestamps differ.
    """
    out = Path(cfg["run"]["output_dir"])
    if not out.is_absolute() and config_dir is not None:
        out = config_dir / out
    tsv = _resolve_input(cfg["run"]["input"], config_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "predictions").mkdir(exist_ok=True)
    seeds = {"split": cfg["split"]["seed"], "masking": cfg["masking"]["seed"], "sampling": cfg["predict"]["seed"]}
    manifest = RunManifest.start(cfg, seeds, command)
    manifest.add_inputs([tsv], out)
    artifacts: list[Path] = []
    stage = "ingest"

    def done(*paths: Path) -> None:
        artifacts.extend(paths)

    try:
        stage_ingest(tsv, out / "corpus.jsonl")
        done(out / "corpus.jsonl")

        stage = "split"
        s = cfg["split"]
        train, _ = stage_split(
            out / "corpus.jsonl",
            out / "train.jsonl",
            out / "dev.jsonl",
            SplitConfig(s["dev_fraction"], s["seed"], s["min_dev_words"]),
        )
        done(out / "train.jsonl", out / "dev.jsonl")

        stage = "mask"
        m = cfg["masking"]
        variants = stage_mask(out / "dev.jsonl", out / "variants.jsonl", MaskingConfig(m["rate"], m["max_variants"], m["seed"]))
        done(out / "variants.jsonl")
        if not variants:
            raise ValueError("dev split is empty; raise split.dev_fraction")

        stage = "train-ngram"
        n = cfg["ngram"]
        stage_train(out / "train.jsonl", out / "model.ngram", n["order"], n["kappa"], n["backoff"])
        done(out / "model.ngram")
        local = f"ngram:{out / 'model.ngram'}"

        stage = "predict"
        p = cfg["predict"]
        backend_spec = local if p["backend"] == "ngram" else p["backend"]
        label = "ngram" if p["backend"] == "ngram" else p["backend"].partition(":")[0]
        params = SamplingParams(p["temperature"], p["max_new_tokens"], (), p["seed"])
        run_paths: dict[str, Path] = {}
        methods: dict[str, Method] = {}
        runs: dict[str, PredictionRun] = {}
        for name in p["methods"]:
            method = Method(name)
            sid = f"{label}-{method.value}"
            path = out / "predictions" / f"{sid}.jsonl"
            runs[sid] = stage_predict(
                method, backend_spec, out / "variants.jsonl", sid, path, params, p["reproduce_mask_bug"], local
            )
            run_paths[sid], methods[sid] = path, method
            done(path)
        manifest.failures = {sid: len(r.failures) for sid, r in runs.items()}

        stage = "evaluate"
        e = cfg["evaluate"]
        reports = {
            sid: accuracy(r.records, variants, top_n=e["top_n"], macro=e["macro"], label=sid) for sid, r in runs.items()
        }
        baseline = most_common_word_baseline(train, variants, top_n=e["top_n"])

        stage = "ensemble"
        ens_report = None
        selected: list[str] = []
        if runs:
            selected = select_top_runs({sid: r.accuracy for sid, r in reports.items()}, cfg["ensemble"]["top_runs"])
            vote = VoteConfig(top_k=cfg["ensemble"]["top_k"])
            ranked = stage_ensemble([run_paths[sid] for sid in selected], out / "ensemble.jsonl", vote)
            done(out / "ensemble.jsonl")
            ens_report = ranked_report(ranked, variants, k=vote.top_k, top_n=e["top_n"], macro=e["macro"])

        stage = "report"
        report = build_report(reports, methods, baseline, baseline_words(train), ens_report, selected)
        (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        (out / "report.txt").write_text(render_text_report(reports, methods, baseline, ens_report, label), encoding="utf-8")
        tables: dict[str, FrequencyTable] = {sid: r.top_predicted for sid, r in reports.items()}
        tables["reference"] = frequency_report((g for v in variants for g in v.gold), e["top_n"])
        write_frequency_csv(out / "frequencies.csv", tables)
        done(out / "report.json", out / "report.txt", out / "frequencies.csv")
    except ConfigError:
        raise
    except Exception as exc:
        manifest.add_outputs(artifacts, out)
        manifest.finish(f"failed: {stage}")
        manifest.write(out / "manifest.json")
        raise StageError(stage, exc) from exc

    manifest.add_outputs(artifacts, out)
    manifest.finish()
    manifest.write(out / "manifest.json")
    return PipelineResult(out, report, manifest, artifacts)


def render_text_report(
    reports: Mapping[str, EvalReport],
    methods: Mapping[str, Method],
    baseline: EvalReport,
    ensemble: EvalReport | None,
    system_label: str,
) -> str:
    acc = {(methods[sid], system_label): r.accuracy for sid, r in reports.items()}
    majority = (ensemble.accuracy, ensemble.topk_accuracy or 0.0) if ensemble else None
    lines = [format_accuracy_table(acc, [system_label], majority, baseline.accuracy), ""]
    lines.append("unique predicted words (reference: %d)" % baseline.unique_reference)
    for sid, r in reports.items():
        lines.append(f"  {sid}: {r.unique_predicted}")
    return "\n".join(lines) + "\n"
