"""End-to-end pipeline on a synthetic multilingual corpus.

Builds a seeded corpus, scores it with the mock backend, generates reading
records with planted effects (surprisal slows reading, relevance speeds it
up), and runs the evaluation: base-vs-full AIC differences per metric, the
combined model, and the surprisal/relevance correlation.
Run: python3 demos/04_full_pipeline.py
"""

import json
import tempfile
from pathlib import Path

from sentmetrics import EvalSettings, PipelineConfig
from sentmetrics.pipeline import cmd_correlate, cmd_evaluate, cmd_ingest, cmd_score
from sentmetrics.synth import plant_reading_data, synthesize_corpus

workdir = Path(tempfile.mkdtemp(prefix="sentmetrics_demo_"))
print(f"working directory: {workdir}")

corpus = synthesize_corpus(
    workdir / "corpus",
    languages=("en", "de", "fi"),
    discourses_per_language=5,
    sentences_per_discourse=20,
    seed=42,
)
print(f"synthesized {len(corpus.discourse_files)} discourses in {corpus.languages}")

config = PipelineConfig(
    discourse_files=tuple(str(p) for p in corpus.discourse_files),
    frequency_lists={k: str(v) for k, v in corpus.frequency_lists.items()},
    out_dir=str(workdir / "out"),
    backend="mock",
    methods=("CR", "NLL", "NSP"),
    relevance=True,
    seed=42,
    evaluate=EvalSettings(metrics=("surprisal_cr_bits", "relevance"), basis_size=10),
)

report = cmd_ingest(config)
print(f"ingested: {report['discourses']} discourses, {report['sentences']} sentences")

cmd_score(config)
print(f"metrics table: {config.metrics_path}")

reading = plant_reading_data(
    config.metrics_path,
    workdir / "reading.tsv",
    n_participants=20,
    seed=42,
    surprisal_beta=-0.3,
    relevance_beta=0.3,
    noise_sd=0.4,
)
config = config.with_overrides(reading_files=(str(reading),))
cmd_ingest(config)
print(f"planted reading records: {reading}")
print()

evaluation = cmd_evaluate(config)
print("model comparison (delta AIC, negative favors the metric):")
for metric, entry in evaluation["models"].items():
    if "error" in entry:
        print(f"  {metric:<22} error: {entry['error']}")
    else:
        endpoint = entry["smooth_endpoint_delta"][metric]
        print(
            f"  {metric:<22} delta_aic = {entry['delta_aic']:9.2f}"
            f"   fitted effect end-to-end: {endpoint:+.3f}"
        )
combined = evaluation["combined"]
print(
    f"  {'+'.join(combined['metrics']):<22} delta_aic = {combined['delta_aic']:9.2f}"
    "   (both metrics in one model)"
)
print()

correlation = cmd_correlate(config)
pair = correlation["overall"]["surprisal_cr_bits~relevance"]
print(f"surprisal~relevance correlation: r = {pair['value']:+.4f} (distinct metrics)")
print()
print(f"reports: {config.out_path / 'evaluation.json'}")
print(f"         {config.out_path / 'correlation.json'}")
print()
print("same thing via the CLI:")
doc = {
    "discourse_files": [str(p) for p in corpus.discourse_files],
    "reading_files": [str(reading)],
    "frequency_lists": {k: str(v) for k, v in corpus.frequency_lists.items()},
    "out_dir": str(workdir / "out_cli"),
    "backend": "mock",
    "seed": 42,
}
config_path = workdir / "config.json"
config_path.write_text(json.dumps(doc, indent=2))
print(f"  sentmetrics ingest   --config {config_path}")
print(f"  sentmetrics score    --config {config_path}")
print(f"  sentmetrics evaluate --config {config_path} --per-language")
print(f"  sentmetrics correlate --config {config_path}")
