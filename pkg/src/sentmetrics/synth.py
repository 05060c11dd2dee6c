"""Seeded synthetic corpora and planted-signal reading data.

Supports the validation experiments: build a small multilingual corpus
(discourse files plus matching frequency lists), score it with the mock
backend, then generate reading records whose speeds depend on the actual
computed metrics through known effect directions. Model comparison should
then recover the planted signal (negative AIC difference) and its sign,
while a permuted copy of a metric column should buy essentially nothing.
"""

from __future__ import annotations

import string
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Discourse, Sentence, write_discourse
from .pipeline import fmt9, read_metrics_csv

_LETTERS = string.ascii_lowercase


@dataclass
class SyntheticCorpus:
    root: Path
    discourse_files: list[Path]
    frequency_lists: dict[str, Path]
    languages: tuple[str, ...]


def _lexicon(rng: np.random.Generator, size: int) -> tuple[list[str], np.ndarray]:
    """Random word shapes with Zipf-like counts (count of rank r ~ 1/r)."""
    words: list[str] = []
    seen: set[str] = set()
    while len(words) < size:
        length = int(rng.integers(2, 11))
        word = "".join(rng.choice(list(_LETTERS), size=length))
        if word not in seen:
            seen.add(word)
            words.append(word)
    ranks = np.arange(1, size + 1, dtype=float)
    counts = np.maximum(1, np.round(1e6 / ranks / np.log(size))).astype(int)
    return words, counts


def synthesize_corpus(
    root: str | Path,
    languages: tuple[str, ...] = ("en", "de", "fi"),
    discourses_per_language: int = 5,
    sentences_per_discourse: int = 20,
    lexicon_size: int = 400,
    words_per_sentence: tuple[int, int] = (5, 15),
    seed: int = 0,
) -> SyntheticCorpus:
    """Write discourse files and frequency lists for a synthetic corpus."""
    root = Path(root)
    (root / "texts").mkdir(parents=True, exist_ok=True)
    (root / "frequencies").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)

    discourse_files: list[Path] = []
    frequency_lists: dict[str, Path] = {}
    lo, hi = words_per_sentence
    for lang in languages:
        words, counts = _lexicon(rng, lexicon_size)
        probs = counts / counts.sum()
        freq_path = root / "frequencies" / f"{lang}.tsv"
        lines = [f"#total\t{int(counts.sum())}"]
        lines.extend(f"{w}\t{c}" for w, c in zip(words, counts))
        freq_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        frequency_lists[lang] = freq_path

        for d in range(discourses_per_language):
            sentences = []
            for i in range(sentences_per_discourse):
                n_words = int(rng.integers(lo, hi + 1))
                draw = rng.choice(words, size=n_words, p=probs)
                text = " ".join(draw).capitalize() + "."
                sentences.append(Sentence.from_text(i, text))
            text_id = f"{lang}_{d:02d}"
            path = root / "texts" / f"{text_id}.txt"
            write_discourse(Discourse(text_id, lang, tuple(sentences)), path)
            discourse_files.append(path)

    return SyntheticCorpus(root, discourse_files, frequency_lists, tuple(languages))


def _standardize(values: np.ndarray) -> np.ndarray:
    sd = values.std()
    if sd == 0:
        return np.zeros_like(values)
    return (values - values.mean()) / sd


def plant_reading_data(
    metrics_csv: str | Path,
    out_path: str | Path,
    n_participants: int = 20,
    seed: int = 0,
    surprisal_col: str = "surprisal_cr_bits",
    relevance_col: str = "relevance",
    surprisal_beta: float = -0.35,
    relevance_beta: float = 0.35,
    participant_sd: float = 0.2,
    noise_sd: float = 0.25,
    intercept: float = 3.0,
) -> Path:
    """Generate reading records with known effect directions.

    Reading speed is a smooth function of the control features plus a
    negative effect of log surprisal, a positive effect of log-shifted
    relevance, a participant intercept, and Gaussian noise. Fixation
    durations are derived so that speed round-trips exactly.
    """
    rows = read_metrics_csv(metrics_csv)
    rng = np.random.default_rng(seed)

    mwl = _standardize(np.array([r["mean_word_length"] for r in rows]))
    mlf = _standardize(np.array([r["mean_log_freq"] for r in rows]))

    def metric_z(col: str) -> np.ndarray:
        vals = np.array(
            [r[col] if r[col] is not None else np.nan for r in rows], dtype=float
        )
        filled = np.where(np.isfinite(vals), vals, np.nanmean(vals))
        shift = 1.0 + 1e-6 if filled.min() < 0 else 1e-6
        if filled.min() + shift <= 0:
            shift = 1e-6 - filled.min()
        z = _standardize(np.log(filled + shift))
        return np.where(np.isfinite(vals), z, 0.0)

    z_surp = metric_z(surprisal_col)
    z_rel = metric_z(relevance_col)

    base = (
        intercept
        - 0.30 * mwl
        + 0.06 * mwl**2
        + 0.25 * mlf
        + surprisal_beta * z_surp
        + relevance_beta * z_rel
    )

    participant_effects = rng.normal(0.0, participant_sd, size=n_participants)
    lines = ["participant_id\ttext_id\tsentence_index\tword_count\ttotal_fixation_ms"]
    for p in range(n_participants):
        noise = rng.normal(0.0, noise_sd, size=len(rows))
        speeds = np.maximum(0.3, base + participant_effects[p] + noise)
        for row, speed in zip(rows, speeds):
            fixation = row["n_words"] / speed * 1000.0
            lines.append(
                f"p{p:02d}\t{row['text_id']}\t{row['sentence_index']}"
                f"\t{row['n_words']}\t{fmt9(fixation)}"
            )
    out_path = Path(out_path)
    out_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return out_path


def permute_csv_column(
    src: str | Path,
    dst: str | Path,
    column: str,
    seed: int = 0,
) -> Path:
    """Copy a CSV, shuffling one column's values across rows (seeded)."""
    lines = Path(src).read_text(encoding="utf-8").splitlines()
    header = lines[0].split(",")
    if column not in header:
        raise ValueError(f"column {column!r} not in {header}")
    idx = header.index(column)
    body = [line.split(",") for line in lines[1:] if line]
    values = [fields[idx] for fields in body]
    order = np.random.default_rng(seed).permutation(len(values))
    for fields, j in zip(body, order):
        fields[idx] = values[j]
    out = [lines[0]] + [",".join(fields) for fields in body]
    dst = Path(dst)
    dst.write_text("\n".join(out) + "\n", encoding="utf-8")
    return dst
