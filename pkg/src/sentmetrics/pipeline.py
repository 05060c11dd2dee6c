"""Ingestion -> scoring -> joining -> evaluation orchestration.

The pipeline is configured by a single JSON document (see README for the
key reference), writes a normalized corpus store under ``out_dir/store``,
a fixed-schema metrics CSV, and JSON reports. With the mock backend and a
fixed seed, reruns are byte-identical: floats are serialized with 9
significant digits and missing values as empty CSV fields.
"""

from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import FIRST_EXCEPTION, ThreadPoolExecutor, wait
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping, Sequence

from .backend import make_backend
from .corpus import (
    Discourse,
    FrequencyTable,
    ReadingRecord,
    ingest_discourse,
    ingest_reading_data,
    load_frequency_table,
    sentence_controls,
    write_discourse,
    write_reading_data,
)
from .errors import (
    EvaluationError,
    FormatError,
    NumericalError,
    SentmetricsError,
    UndefinedCorrelationError,
    ValidationError,
)
from .gamlite import (
    FeatureRow,
    FitResult,
    base_spec,
    delta_aic,
    fit_with_selected,
    full_spec,
    pearson,
)
from .relevance import WindowSpec, score_discourse_relevance
from .surprisal import METHODS, ContextPolicy, score_discourse_surprisal

METRICS_CSV_COLUMNS = (
    "text_id",
    "sentence_index",
    "lang",
    "n_words",
    "mean_word_length",
    "mean_log_freq",
    "surprisal_cr_bits",
    "surprisal_nll_bits",
    "surprisal_nsp_bits",
    "relevance",
)

SURPRISAL_COLUMNS = {
    "CR": "surprisal_cr_bits",
    "NLL": "surprisal_nll_bits",
    "NSP": "surprisal_nsp_bits",
}

DEFAULT_LAMBDA_GRID = (1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0, 1e3, 1e4)


def fmt9(value: float) -> str:
    """Serialize a float with 9 significant digits."""
    return format(float(value), ".9g")


def round9(obj):
    """Recursively round floats in a JSON-able structure to 9 significant
    digits; non-finite values become null."""
    if isinstance(obj, float):
        if obj != obj or obj in (float("inf"), float("-inf")):
            return None
        return float(fmt9(obj))
    if isinstance(obj, dict):
        return {k: round9(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round9(v) for v in obj]
    return obj


def _write_json(path: Path, payload: Mapping[str, Any]) -> None:
    text = json.dumps(round9(payload), indent=2, sort_keys=True)
    path.write_text(text + "\n", encoding="utf-8")


@dataclass(frozen=True)
class EvalSettings:
    """Model-comparison settings for ``evaluate``."""

    metrics: tuple[str, ...] = ()
    per_language: bool = False
    basis_size: int = 10
    lambda_grid: tuple[float, ...] = DEFAULT_LAMBDA_GRID
    combined: bool = True


@dataclass(frozen=True)
class PipelineConfig:
    """Reproducible configuration for one pipeline run."""

    discourse_files: tuple[str, ...] = ()
    reading_files: tuple[str, ...] = ()
    frequency_lists: Mapping[str, str] = field(default_factory=dict)
    out_dir: str = "out"
    backend: str = "mock"
    methods: tuple[str, ...] = ("CR", "NLL", "NSP")
    relevance: bool = True
    seed: int = 0
    mock_vocab_size: int = 4
    mock_dim: int = 16
    context: ContextPolicy = ContextPolicy()
    window: WindowSpec = WindowSpec()
    max_workers: int = 4
    discourse_format: str = "one-sentence-per-line"
    evaluate: EvalSettings = EvalSettings()

    def __post_init__(self) -> None:
        for m in self.methods:
            if m not in METHODS:
                raise ValidationError(f"unknown surprisal method {m!r}")
        if not self.methods and not self.relevance:
            raise ValidationError("at least one metric must be enabled")

    # -- construction ----------------------------------------------------

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], base_dir: str | Path = ".") -> "PipelineConfig":
        base = Path(base_dir)

        def path_of(p: str) -> str:
            q = Path(p)
            return str(q if q.is_absolute() else base / q)

        kwargs: dict[str, Any] = {}
        if "discourse_files" in data:
            kwargs["discourse_files"] = tuple(path_of(p) for p in data["discourse_files"])
        if "reading_files" in data:
            kwargs["reading_files"] = tuple(path_of(p) for p in data["reading_files"])
        if "frequency_lists" in data:
            kwargs["frequency_lists"] = {
                lang: path_of(p) for lang, p in data["frequency_lists"].items()
            }
        if "out_dir" in data:
            kwargs["out_dir"] = path_of(data["out_dir"])
        for key in ("backend", "relevance", "seed", "max_workers", "discourse_format"):
            if key in data:
                kwargs[key] = data[key]
        if "methods" in data:
            kwargs["methods"] = tuple(data["methods"])
        if "mock" in data:
            mock = data["mock"]
            kwargs["mock_vocab_size"] = int(mock.get("vocab_size", 4))
            kwargs["mock_dim"] = int(mock.get("dim", 16))
        if "context" in data:
            kwargs["context"] = ContextPolicy(**data["context"])
        if "window" in data:
            window = dict(data["window"])
            for side in ("weights_before", "weights_after"):
                if side in window:
                    window[side] = tuple(window[side])
            kwargs["window"] = WindowSpec(**window)
        if "evaluate" in data:
            ev = dict(data["evaluate"])
            if "metrics" in ev:
                ev["metrics"] = tuple(ev["metrics"])
            if "lambda_grid" in ev:
                ev["lambda_grid"] = tuple(ev["lambda_grid"])
            kwargs["evaluate"] = EvalSettings(**ev)
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path: str | Path) -> "PipelineConfig":
        path = Path(path)
        data = json.loads(path.read_text(encoding="utf-8"))
        return cls.from_dict(data, base_dir=path.parent)

    def with_overrides(self, **kwargs) -> "PipelineConfig":
        return replace(self, **kwargs)

    # -- derived paths ---------------------------------------------------

    @property
    def out_path(self) -> Path:
        return Path(self.out_dir)

    @property
    def store_path(self) -> Path:
        return self.out_path / "store"

    @property
    def metrics_path(self) -> Path:
        return self.out_path / "metrics.csv"

    @property
    def checkpoint_path(self) -> Path:
        return self.out_path / "score_checkpoint.json"

    def enabled_metric_columns(self) -> list[str]:
        cols = [SURPRISAL_COLUMNS[m] for m in METHODS if m in self.methods]
        if self.relevance:
            cols.append("relevance")
        return cols

    def scoring_fingerprint(self) -> str:
        payload = {
            "backend": self.backend,
            "methods": list(self.methods),
            "relevance": self.relevance,
            "seed": self.seed,
            "mock": [self.mock_vocab_size, self.mock_dim],
            "context": asdict(self.context),
            "window": asdict(self.window),
        }
        blob = json.dumps(payload, sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()

    def make_backend(self):
        return make_backend(
            self.backend,
            vocab_size=self.mock_vocab_size,
            dim=self.mock_dim,
            seed=self.seed,
        )


# ---------------------------------------------------------------------------
# ingest


def cmd_ingest(config: PipelineConfig) -> dict[str, Any]:
    """Normalize inputs into the on-disk store; returns the ingest report."""
    for p in list(config.discourse_files) + list(config.reading_files):
        if not Path(p).exists():
            raise ValidationError(f"input file does not exist: {p}")
    for lang, p in config.frequency_lists.items():
        if not Path(p).exists():
            raise ValidationError(f"frequency list for {lang!r} does not exist: {p}")
    if not config.discourse_files:
        raise ValidationError("no discourse files configured")

    discourses: list[Discourse] = []
    seen: set[str] = set()
    for p in config.discourse_files:
        d = ingest_discourse(p, config.discourse_format)
        if d.text_id in seen:
            raise FormatError(f"duplicate text_id {d.text_id!r} (file {p})")
        seen.add(d.text_id)
        discourses.append(d)

    languages = sorted({d.language for d in discourses})
    missing = [lang for lang in languages if lang not in config.frequency_lists]
    if missing:
        raise ValidationError(f"missing frequency list for language(s): {missing}")

    tables = {
        lang: load_frequency_table(config.frequency_lists[lang], lang)
        for lang in languages
    }

    records: list[ReadingRecord] = []
    row_errors: list[dict[str, Any]] = []
    for p in config.reading_files:
        data = ingest_reading_data(p)
        records.extend(data.records)
        row_errors.extend(
            {"file": str(p), "line": e.line, "message": e.message} for e in data.errors
        )

    store = config.store_path
    (store / "discourses").mkdir(parents=True, exist_ok=True)
    (store / "frequencies").mkdir(parents=True, exist_ok=True)
    for d in discourses:
        write_discourse(d, store / "discourses" / f"{d.text_id}.txt")
    for lang, table in tables.items():
        lines = [f"#total\t{table.corpus_total}"]
        lines.extend(f"{w}\t{c}" for w, c in sorted(table.counts.items()))
        (store / "frequencies" / f"{lang}.tsv").write_text(
            "\n".join(lines) + "\n", encoding="utf-8"
        )
    write_reading_data(records, store / "reading_records.tsv")

    report = {
        "discourses": len(discourses),
        "sentences": sum(len(d) for d in discourses),
        "languages": languages,
        "reading_records": len(records),
        "row_errors": row_errors,
        "warnings": bool(row_errors),
    }
    _write_json(store / "ingest_report.json", report)
    return report


def _load_store(config: PipelineConfig) -> tuple[list[Discourse], dict[str, FrequencyTable]]:
    store = config.store_path
    if not (store / "discourses").is_dir():
        raise ValidationError(f"no ingested store at {store}; run ingest first")
    discourses = [
        ingest_discourse(p, "one-sentence-per-line")
        for p in sorted((store / "discourses").glob("*.txt"))
    ]
    if not discourses:
        raise ValidationError(f"store at {store} holds no discourses")
    tables = {}
    for d in discourses:
        if d.language not in tables:
            tables[d.language] = load_frequency_table(
                store / "frequencies" / f"{d.language}.tsv", d.language
            )
    return discourses, tables


# ---------------------------------------------------------------------------
# score


def _score_discourse(
    discourse: Discourse,
    table: FrequencyTable,
    backend,
    config: PipelineConfig,
) -> list[dict[str, str]]:
    """Metric rows (already string-formatted) for one discourse."""
    n = len(discourse.sentences)
    surprisal: dict[str, list] = {}
    for method in config.methods:
        surprisal[method] = score_discourse_surprisal(
            discourse, backend, method, config.context
        )
    relevance = (
        score_discourse_relevance(discourse, backend, config.window)
        if config.relevance
        else [None] * n
    )

    rows = []
    for sent in discourse.sentences:
        controls = sentence_controls(sent, table)
        row = {
            "text_id": discourse.text_id,
            "sentence_index": str(sent.index),
            "lang": discourse.language,
            "n_words": str(sent.word_count),
            "mean_word_length": fmt9(controls.mean_word_length),
            "mean_log_freq": fmt9(controls.mean_log_freq),
        }
        for method, column in SURPRISAL_COLUMNS.items():
            score = surprisal.get(method, [None] * n)[sent.index]
            row[column] = fmt9(score.bits) if score is not None else ""
        rel = relevance[sent.index]
        row["relevance"] = fmt9(rel.value) if rel is not None else ""
        rows.append(row)
    return rows


def _load_checkpoint(config: PipelineConfig) -> dict[str, list[dict[str, str]]]:
    path = config.checkpoint_path
    if not path.exists():
        return {}
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError:
        return {}
    if payload.get("fingerprint") != config.scoring_fingerprint():
        return {}
    return payload.get("completed", {})


def _write_checkpoint(config: PipelineConfig, completed: Mapping[str, list]) -> None:
    payload = {
        "fingerprint": config.scoring_fingerprint(),
        "completed": dict(sorted(completed.items())),
    }
    config.checkpoint_path.write_text(
        json.dumps(payload, sort_keys=True), encoding="utf-8"
    )


def cmd_score(config: PipelineConfig, backend=None) -> Path:
    """Compute the per-sentence metrics table; returns the CSV path.

    Scoring is checkpointed per discourse: a backend failure deletes any
    partial CSV, persists completed discourses, and re-raises; the next
    run resumes from the checkpoint.
    """
    discourses, tables = _load_store(config)
    own_backend = backend is None
    if own_backend:
        backend = config.make_backend()

    completed = _load_checkpoint(config)
    todo = [d for d in discourses if d.text_id not in completed]

    try:
        if todo:
            workers = max(1, config.max_workers)
            with ThreadPoolExecutor(max_workers=workers) as pool:
                futures = {
                    pool.submit(
                        _score_discourse, d, tables[d.language], backend, config
                    ): d
                    for d in todo
                }
                done, pending = wait(futures, return_when=FIRST_EXCEPTION)
                failure: BaseException | None = None
                for fut in done:
                    exc = fut.exception()
                    if exc is not None:
                        failure = exc
                        continue
                    completed[futures[fut].text_id] = fut.result()
                for fut in pending:
                    fut.cancel()
                if failure is not None:
                    raise failure
    except SentmetricsError:
        _write_checkpoint(config, completed)
        config.metrics_path.unlink(missing_ok=True)
        raise
    finally:
        if own_backend:
            backend.close()

    ordered = sorted(completed)
    lines = [",".join(METRICS_CSV_COLUMNS)]
    for text_id in ordered:
        for row in completed[text_id]:
            lines.append(",".join(row[c] for c in METRICS_CSV_COLUMNS))
    tmp = config.metrics_path.with_suffix(".csv.tmp")
    tmp.write_text("\n".join(lines) + "\n", encoding="utf-8")
    os.replace(tmp, config.metrics_path)
    config.checkpoint_path.unlink(missing_ok=True)
    return config.metrics_path


# ---------------------------------------------------------------------------
# join + evaluate


def read_metrics_csv(path: str | Path) -> list[dict[str, Any]]:
    """Parse the metrics CSV back into typed per-sentence dicts."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise FormatError(f"{path}: empty metrics file")
    header = lines[0].split(",")
    if tuple(header) != METRICS_CSV_COLUMNS:
        raise FormatError(f"{path}: unexpected metrics header {header}")
    out = []
    for line in lines[1:]:
        if not line:
            continue
        values = line.split(",")
        row: dict[str, Any] = dict(zip(header, values))
        row["sentence_index"] = int(row["sentence_index"])
        row["n_words"] = int(row["n_words"])
        for col in (
            "mean_word_length",
            "mean_log_freq",
            "surprisal_cr_bits",
            "surprisal_nll_bits",
            "surprisal_nsp_bits",
            "relevance",
        ):
            row[col] = float(row[col]) if row[col] != "" else None
        out.append(row)
    return out


def join_rows(
    metric_rows: Sequence[Mapping[str, Any]],
    records: Sequence[ReadingRecord],
) -> tuple[list[FeatureRow], dict[str, int]]:
    """Join sentence metrics to per-participant reading records."""
    by_key = {(m["text_id"], m["sentence_index"]): m for m in metric_rows}
    joined: list[FeatureRow] = []
    unmatched = 0
    hit: set[tuple[str, int]] = set()
    for rec in records:
        key = (rec.text_id, rec.sentence_index)
        m = by_key.get(key)
        if m is None:
            unmatched += 1
            continue
        hit.add(key)
        joined.append(
            FeatureRow(
                participant_id=rec.participant_id,
                language=m["lang"],
                text_id=rec.text_id,
                sentence_index=rec.sentence_index,
                reading_speed=rec.reading_speed,
                mean_word_length=m["mean_word_length"],
                mean_log_freq=m["mean_log_freq"],
                surprisal_cr_bits=m["surprisal_cr_bits"],
                surprisal_nll_bits=m["surprisal_nll_bits"],
                surprisal_nsp_bits=m["surprisal_nsp_bits"],
                relevance=m["relevance"],
            )
        )
    counts = {
        "reading_records": len(records),
        "metric_sentences": len(metric_rows),
        "joined_rows": len(joined),
        "unmatched_records": unmatched,
        "unscored_sentences": len(by_key) - len(hit),
    }
    return joined, counts


def _fit_summary(fit: FitResult) -> dict[str, Any]:
    return {
        "aic": fit.aic,
        "edf": fit.edf,
        "rss": fit.rss,
        "sigma2": fit.sigma2,
        "n": fit.n,
        "lambdas": dict(fit.lambdas),
        "per_term_edf": dict(fit.per_term_edf),
    }


def _drop_aliased(rows: Sequence[FeatureRow], metrics: Sequence[str]):
    """Keep one representative of any metrics with identical value columns.

    Exact duplicates (the mock's CR and NLL columns, for example) would
    make the combined design singular: two copies of the same smooth share
    an unpenalized direction.
    """
    kept: list[str] = []
    seen: list[tuple[str, tuple]] = []
    aliased: dict[str, str] = {}
    for metric in metrics:
        values = tuple(getattr(r, metric) for r in rows)
        twin = next((name for name, v in seen if v == values), None)
        if twin is None:
            seen.append((metric, values))
            kept.append(metric)
        else:
            aliased[metric] = twin
    return kept, aliased


def _compare_models(
    rows: Sequence[FeatureRow],
    metrics: Sequence[str],
    settings: EvalSettings,
) -> dict[str, Any]:
    """Fit base and full models on rows complete for ``metrics``."""
    usable = [r for r in rows if all(getattr(r, m) is not None for m in metrics)]
    dropped = len(rows) - len(usable)
    kept, aliased = _drop_aliased(usable, metrics)
    k, grid = settings.basis_size, settings.lambda_grid
    base = fit_with_selected(base_spec(k), usable, grid)
    full = fit_with_selected(full_spec(kept, k), usable, grid)
    entry = {
        "metrics": list(metrics),
        "n": full.n,
        "dropped_rows": dropped,
        "delta_aic": delta_aic(full, base),
        "base": _fit_summary(base),
        "full": _fit_summary(full),
        "smooth_endpoint_delta": {m: full.endpoint_delta(m) for m in kept},
        "metric_shift": {m: full.smooth_shift(m) for m in kept},
    }
    if aliased:
        entry["aliased"] = aliased
    return entry


def _comparison_or_error(rows, metrics, settings) -> dict[str, Any]:
    try:
        return _compare_models(rows, metrics, settings)
    except (EvaluationError, NumericalError, ValueError) as exc:
        return {"metrics": list(metrics), "error": str(exc)}


def _correlation_table(
    metric_rows: Sequence[Mapping[str, Any]],
    surprisal_cols: Sequence[str],
) -> dict[str, Any]:
    """Overall and per-language correlations of each surprisal vs relevance."""

    def corr(rows, a, b):
        try:
            return {"value": pearson([r[a] for r in rows], [r[b] for r in rows])}
        except UndefinedCorrelationError as exc:
            return {"value": None, "reason": str(exc)}

    overall = {
        f"{col}~relevance": corr(metric_rows, col, "relevance")
        for col in surprisal_cols
    }
    per_language: dict[str, Any] = {}
    for lang in sorted({r["lang"] for r in metric_rows}):
        rows_l = [r for r in metric_rows if r["lang"] == lang]
        per_language[lang] = {
            f"{col}~relevance": corr(rows_l, col, "relevance")
            for col in surprisal_cols
        }
    return {"overall": overall, "per_language": per_language}


def cmd_evaluate(config: PipelineConfig) -> dict[str, Any]:
    """Join metrics with reading records, compare models, write the report."""
    if not config.metrics_path.exists():
        raise ValidationError(f"no metrics table at {config.metrics_path}; run score first")
    reading_path = config.store_path / "reading_records.tsv"
    if not reading_path.exists():
        raise ValidationError(f"no reading records at {reading_path}; run ingest first")

    metric_rows = read_metrics_csv(config.metrics_path)
    records = ingest_reading_data(reading_path).records
    if not records:
        raise EvaluationError("no reading records to evaluate against")
    joined, join_counts = join_rows(metric_rows, records)

    settings = config.evaluate
    metrics = list(settings.metrics) or config.enabled_metric_columns()

    models = {m: _comparison_or_error(joined, [m], settings) for m in metrics}

    combined: dict[str, Any] | None = None
    if settings.combined and "relevance" in metrics:
        surp = [m for m in metrics if m.startswith("surprisal_")]
        if surp:
            pick = "surprisal_cr_bits" if "surprisal_cr_bits" in surp else surp[0]
            combined = _comparison_or_error(joined, [pick, "relevance"], settings)

    per_language: dict[str, Any] = {}
    if settings.per_language:
        for lang in sorted({r.language for r in joined}):
            rows_l = [r for r in joined if r.language == lang]
            per_language[lang] = {
                m: _comparison_or_error(rows_l, [m], settings) for m in metrics
            }

    surprisal_cols = [c for c in config.enabled_metric_columns() if c.startswith("surprisal_")]
    correlations = (
        _correlation_table(metric_rows, surprisal_cols) if config.relevance else {}
    )

    report = {
        "join": join_counts,
        "models": models,
        "combined": combined,
        "per_language": per_language,
        "correlations": correlations,
        "settings": {
            "metrics": metrics,
            "basis_size": settings.basis_size,
            "lambda_grid": list(settings.lambda_grid),
            "per_language": settings.per_language,
            "seed": config.seed,
        },
    }
    _write_json(config.out_path / "evaluation.json", report)
    return report


def cmd_correlate(config: PipelineConfig) -> dict[str, Any]:
    """Correlate each surprisal method with relevance; write the report."""
    if not config.metrics_path.exists():
        raise ValidationError(f"no metrics table at {config.metrics_path}; run score first")
    metric_rows = read_metrics_csv(config.metrics_path)
    surprisal_cols = [c for c in config.enabled_metric_columns() if c.startswith("surprisal_")]
    report = _correlation_table(metric_rows, surprisal_cols)
    report["n_sentences"] = len(metric_rows)
    _write_json(config.out_path / "correlation.json", report)
    return report
