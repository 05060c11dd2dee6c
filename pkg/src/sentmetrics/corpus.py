"""Discourse texts, eye-tracking reading records, and lexical statistics.

File formats
------------
Discourse (one-sentence-per-line): UTF-8, line 1 is ``text_id<TAB>lang``,
every following non-blank line is one sentence.

Reading data: UTF-8 TSV with header columns ``participant_id``, ``text_id``,
``sentence_index``, ``word_count``, ``total_fixation_ms`` (``.`` decimal
separator, extra columns ignored).

Frequency list: UTF-8, lines ``word<TAB>count``; an optional first line
``#total<TAB>N`` supplies the corpus total explicitly.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from .errors import EmptyInputError, FormatError

#: Characters that can end a sentence.
SENTENCE_TERMINATORS = ".!?…"

#: Abbreviations the plain-text segmenter never splits after.
DEFAULT_ABBREVIATIONS = frozenset({
    "Dr.", "Mr.", "Mrs.", "Ms.", "Prof.", "St.", "Jr.", "Sr.",
    "vs.", "etc.", "e.g.", "i.e.", "cf.", "ca.", "Fig.", "No.",
})

#: Zipf value assigned to words absent from the frequency table.
ZIPF_FLOOR = 1.0

_EDGE_PUNCT = re.compile(r"^\W+|\W+$", re.UNICODE)


def _core(token: str) -> str:
    """Surface token with leading/trailing punctuation removed."""
    return _EDGE_PUNCT.sub("", token)


def _words(text: str) -> list[str]:
    """Whitespace tokens of ``text``, dropping punctuation-only tokens."""
    return [tok for tok in text.split() if _core(tok)]


@dataclass(frozen=True)
class Sentence:
    """One sentence of a discourse.

    ``words`` keeps the surface tokens (attached punctuation included);
    ``char_lengths`` counts characters after stripping edge punctuation,
    so "cat," contributes 3.
    """

    index: int
    text: str
    words: tuple[str, ...]
    word_count: int
    char_lengths: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.index < 0:
            raise ValueError(f"sentence index must be >= 0, got {self.index}")
        if not self.text.strip():
            raise ValueError("sentence text is empty")
        if self.word_count != len(self.words):
            raise ValueError("word_count does not match words")
        if self.word_count < 1:
            raise ValueError(f"sentence {self.index} has no words: {self.text!r}")
        if len(self.char_lengths) != self.word_count:
            raise ValueError("char_lengths does not match words")

    @classmethod
    def from_text(cls, index: int, text: str) -> "Sentence":
        """Build a sentence from raw text, normalizing interior whitespace."""
        norm = " ".join(text.split())
        words = tuple(_words(norm))
        lengths = tuple(len(_core(w)) for w in words)
        return cls(index, norm, words, len(words), lengths)


@dataclass(frozen=True)
class Discourse:
    """An ordered, identified sequence of sentences in one language."""

    text_id: str
    language: str
    sentences: tuple[Sentence, ...]

    def __post_init__(self) -> None:
        if not self.text_id:
            raise ValueError("text_id is empty")
        if not self.language:
            raise ValueError("language is empty")
        if not self.sentences:
            raise ValueError(f"discourse {self.text_id!r} has no sentences")
        for pos, sent in enumerate(self.sentences):
            if sent.index != pos:
                raise ValueError(
                    f"discourse {self.text_id!r}: sentence index {sent.index} "
                    f"at position {pos} (indices must be contiguous from 0)"
                )

    def __len__(self) -> int:
        return len(self.sentences)


def segment_text(raw: str, abbreviations: Iterable[str] = DEFAULT_ABBREVIATIONS) -> list[str]:
    """Split plain text into sentence strings.

    Splits after a terminator in ``SENTENCE_TERMINATORS`` followed by
    whitespace and an uppercase letter, never inside a known abbreviation.
    The concatenation of the output, modulo whitespace, equals the input;
    text with no split point comes back as a single segment.
    """
    if not raw.strip():
        raise ValueError("raw text is empty")
    abbrev = frozenset(abbreviations)
    segments: list[str] = []
    start = 0
    i = 0
    n = len(raw)
    while i < n:
        if raw[i] in SENTENCE_TERMINATORS and i + 1 < n and raw[i + 1].isspace():
            k = i + 1
            while k < n and raw[k].isspace():
                k += 1
            if k < n and raw[k].isupper():
                # token ending at the terminator, e.g. "Dr." in "met Dr. Who"
                head = raw[start:i + 1]
                token = head.rsplit(None, 1)[-1] if head.split() else head
                if token not in abbrev:
                    segments.append(head.strip())
                    start = k
                    i = k
                    continue
        i += 1
    tail = raw[start:].strip()
    if tail:
        segments.append(tail)
    return segments


def ingest_discourse(
    path: str | Path,
    format: str = "one-sentence-per-line",
    text_id: str | None = None,
    language: str | None = None,
) -> Discourse:
    """Read a discourse file.

    ``one-sentence-per-line`` files carry a ``text_id<TAB>lang`` header;
    ``plain-text`` files are segmented by :func:`segment_text`, with
    ``text_id`` defaulting to the file stem and ``language`` to ``"en"``.
    """
    path = Path(path)
    raw = path.read_text(encoding="utf-8")
    if not raw.strip():
        raise EmptyInputError(f"{path}: file is empty")

    if format == "one-sentence-per-line":
        lines = raw.splitlines()
        header = lines[0].rstrip("\n")
        parts = header.split("\t")
        if len(parts) != 2 or not parts[0].strip() or not parts[1].strip():
            raise FormatError(
                f"{path}: malformed header {header!r} (expected 'text_id<TAB>lang')"
            )
        file_id, file_lang = parts[0].strip(), parts[1].strip()
        texts = [line for line in lines[1:] if line.strip()]
        if not texts:
            raise EmptyInputError(f"{path}: header present but no sentences")
        sentences = tuple(Sentence.from_text(i, t) for i, t in enumerate(texts))
        return Discourse(text_id or file_id, language or file_lang, sentences)

    if format == "plain-text":
        texts = segment_text(raw)
        sentences = tuple(Sentence.from_text(i, t) for i, t in enumerate(texts))
        return Discourse(text_id or path.stem, language or "en", sentences)

    raise ValueError(f"unknown discourse format {format!r}")


def write_discourse(discourse: Discourse, path: str | Path) -> None:
    """Serialize to the one-sentence-per-line format (round-trips exactly)."""
    lines = [f"{discourse.text_id}\t{discourse.language}"]
    lines.extend(s.text for s in discourse.sentences)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def reading_speed(word_count: int, total_fixation_ms: float) -> float:
    """Words per second: ``word_count / (total_fixation_ms / 1000)``."""
    if word_count < 1:
        raise ValueError(f"word_count must be >= 1, got {word_count}")
    if not total_fixation_ms > 0:
        raise ValueError(f"total_fixation_ms must be > 0, got {total_fixation_ms}")
    return word_count / (total_fixation_ms / 1000.0)


@dataclass(frozen=True)
class ReadingRecord:
    """One participant x sentence observation."""

    participant_id: str
    text_id: str
    sentence_index: int
    word_count: int
    total_fixation_ms: float
    reading_speed: float

    def __post_init__(self) -> None:
        if not self.total_fixation_ms > 0:
            raise ValueError("total_fixation_ms must be > 0")
        expected = reading_speed(self.word_count, self.total_fixation_ms)
        if abs(self.reading_speed - expected) > 1e-9 * max(1.0, abs(expected)):
            raise ValueError(
                f"reading_speed {self.reading_speed} inconsistent with "
                f"{self.word_count} words / {self.total_fixation_ms} ms"
            )

    @classmethod
    def from_row(
        cls,
        participant_id: str,
        text_id: str,
        sentence_index: int,
        word_count: int,
        total_fixation_ms: float,
    ) -> "ReadingRecord":
        return cls(
            participant_id,
            text_id,
            sentence_index,
            word_count,
            total_fixation_ms,
            reading_speed(word_count, total_fixation_ms),
        )


@dataclass(frozen=True)
class FrequencyTable:
    """Word counts for one language; keys are lowercased words."""

    language: str
    counts: Mapping[str, int]
    corpus_total: int

    def __post_init__(self) -> None:
        if self.corpus_total <= 0:
            raise ValueError("corpus_total must be > 0")
        top = max(self.counts.values(), default=0)
        if self.corpus_total < top:
            raise ValueError(
                f"corpus_total {self.corpus_total} smaller than max count {top}"
            )

    @classmethod
    def from_counts(
        cls,
        language: str,
        counts: Mapping[str, int],
        corpus_total: int | None = None,
    ) -> "FrequencyTable":
        folded: dict[str, int] = {}
        for word, count in counts.items():
            key = word.lower()
            folded[key] = folded.get(key, 0) + int(count)
        total = corpus_total if corpus_total is not None else sum(folded.values())
        return cls(language, folded, total)


def load_frequency_table(path: str | Path, language: str) -> FrequencyTable:
    """Parse a ``word<TAB>count`` list, honoring an optional ``#total`` line."""
    path = Path(path)
    counts: dict[str, int] = {}
    explicit_total: int | None = None
    with path.open(encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise FormatError(f"{path}:{lineno}: expected 'word<TAB>count', got {line!r}")
            word, value = parts
            try:
                count = int(value)
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: bad count {value!r}") from exc
            if lineno == 1 and word == "#total":
                explicit_total = count
                continue
            key = word.strip().lower()
            counts[key] = counts.get(key, 0) + count
    if not counts:
        raise EmptyInputError(f"{path}: no frequency entries")
    return FrequencyTable.from_counts(language, counts, explicit_total)


def zipf_frequency(word: str, table: FrequencyTable) -> float:
    """Zipf value ``log10(count per million) + 3``; unknown words get the floor.

    Lookups lowercase the word and strip edge punctuation, matching how
    subtitle frequency lists are normalized.
    """
    if table.corpus_total <= 0:
        raise ValueError("corpus_total must be > 0")
    key = _core(word).lower()
    count = table.counts.get(key, 0)
    if count <= 0:
        return ZIPF_FLOOR
    per_million = count / table.corpus_total * 1_000_000.0
    return math.log10(per_million) + 3.0


@dataclass(frozen=True)
class SentenceControls:
    """Per-sentence control features for the reading-speed models."""

    mean_word_length: float
    mean_log_freq: float

    def __post_init__(self) -> None:
        if not self.mean_word_length > 0:
            raise ValueError("mean_word_length must be > 0")
        if not math.isfinite(self.mean_log_freq):
            raise ValueError("mean_log_freq must be finite")


def sentence_controls(sentence: Sentence, table: FrequencyTable) -> SentenceControls:
    """Mean word length (characters) and mean Zipf frequency of a sentence."""
    mean_len = sum(sentence.char_lengths) / sentence.word_count
    mean_freq = sum(zipf_frequency(w, table) for w in sentence.words) / sentence.word_count
    return SentenceControls(mean_len, mean_freq)


@dataclass(frozen=True)
class RowError:
    """Diagnostic for one rejected reading-data row."""

    line: int
    message: str


@dataclass
class ReadingData:
    """Accepted reading records plus per-row rejection diagnostics."""

    records: list[ReadingRecord] = field(default_factory=list)
    errors: list[RowError] = field(default_factory=list)


_READING_COLUMNS = (
    "participant_id",
    "text_id",
    "sentence_index",
    "word_count",
    "total_fixation_ms",
)


def ingest_reading_data(path: str | Path) -> ReadingData:
    """Read a reading-data TSV; bad rows are reported, never silently dropped."""
    path = Path(path)
    with path.open(encoding="utf-8") as handle:
        lines = handle.read().splitlines()
    if not lines:
        raise EmptyInputError(f"{path}: file is empty")
    header = lines[0].split("\t")
    missing = [c for c in _READING_COLUMNS if c not in header]
    if missing:
        raise FormatError(f"{path}: missing column(s) {', '.join(missing)}")
    idx = {name: header.index(name) for name in _READING_COLUMNS}

    result = ReadingData()
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) < len(header):
            result.errors.append(RowError(lineno, f"expected {len(header)} fields, got {len(fields)}"))
            continue
        try:
            participant = fields[idx["participant_id"]].strip()
            text_id = fields[idx["text_id"]].strip()
            sentence_index = int(fields[idx["sentence_index"]])
            word_count = int(fields[idx["word_count"]])
            fixation = float(fields[idx["total_fixation_ms"]])
        except ValueError as exc:
            result.errors.append(RowError(lineno, f"unparsable value: {exc}"))
            continue
        if sentence_index < 0:
            result.errors.append(RowError(lineno, f"sentence_index {sentence_index} < 0"))
            continue
        if word_count < 1:
            result.errors.append(RowError(lineno, f"word_count {word_count} < 1"))
            continue
        if fixation <= 0:
            result.errors.append(RowError(lineno, f"total_fixation_ms {fixation} <= 0"))
            continue
        result.records.append(
            ReadingRecord.from_row(participant, text_id, sentence_index, word_count, fixation)
        )
    return result


def write_reading_data(records: Iterable[ReadingRecord], path: str | Path) -> None:
    """Write records in the normalized reading-data TSV layout."""
    lines = ["\t".join(_READING_COLUMNS)]
    for rec in records:
        lines.append(
            f"{rec.participant_id}\t{rec.text_id}\t{rec.sentence_index}"
            f"\t{rec.word_count}\t{format(rec.total_fixation_ms, '.9g')}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
