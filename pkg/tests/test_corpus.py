import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sentmetrics.corpus import (
    DEFAULT_ABBREVIATIONS,
    Discourse,
    FrequencyTable,
    ReadingRecord,
    Sentence,
    ZIPF_FLOOR,
    ingest_discourse,
    ingest_reading_data,
    load_frequency_table,
    reading_speed,
    segment_text,
    sentence_controls,
    write_discourse,
    zipf_frequency,
)
from sentmetrics.errors import EmptyInputError, FormatError


def make_table(counts, total=1_000_000, language="en"):
    return FrequencyTable.from_counts(language, counts, total)


class TestIngestDiscourse:
    def test_two_sentences(self, tmp_path):
        path = tmp_path / "t1.txt"
        path.write_text("t1\ten\nA b c.\nD e.\n", encoding="utf-8")
        d = ingest_discourse(path)
        assert d.text_id == "t1"
        assert d.language == "en"
        assert [s.word_count for s in d.sentences] == [3, 2]
        assert [s.index for s in d.sentences] == [0, 1]

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.txt"
        path.write_text("", encoding="utf-8")
        with pytest.raises(EmptyInputError):
            ingest_discourse(path)

    def test_single_sentence(self, tmp_path):
        path = tmp_path / "t.txt"
        path.write_text("t\ten\nHello.\n", encoding="utf-8")
        d = ingest_discourse(path)
        assert len(d) == 1
        assert d.sentences[0].word_count == 1

    def test_malformed_header(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("no tabs here\nA b.\n", encoding="utf-8")
        with pytest.raises(FormatError):
            ingest_discourse(path)

    def test_plain_text_is_segmented(self, tmp_path):
        path = tmp_path / "raw.txt"
        path.write_text("A b. C d.", encoding="utf-8")
        d = ingest_discourse(path, format="plain-text", text_id="raw", language="en")
        assert [s.text for s in d.sentences] == ["A b.", "C d."]

    def test_round_trip(self, tmp_path):
        path = tmp_path / "t1.txt"
        path.write_text("t1\tfi\nYksi kaksi.\nKolme.\nNeljä viisi kuusi.\n", encoding="utf-8")
        d = ingest_discourse(path)
        out = tmp_path / "copy.txt"
        write_discourse(d, out)
        d2 = ingest_discourse(out)
        assert [s.text for s in d2.sentences] == [s.text for s in d.sentences]
        assert [s.index for s in d2.sentences] == [s.index for s in d.sentences]
        assert (d2.text_id, d2.language) == (d.text_id, d.language)


class TestSegmentText:
    def test_two_periods(self):
        assert segment_text("A b. C d.") == ["A b.", "C d."]

    def test_abbreviation_suppression(self):
        assert "Dr." in DEFAULT_ABBREVIATIONS
        assert segment_text("Dr. Smith left.") == ["Dr. Smith left."]

    def test_no_terminator(self):
        assert segment_text("No terminator") == ["No terminator"]

    def test_lowercase_continuation_not_split(self):
        assert segment_text("It was v. cold outside.") == ["It was v. cold outside."]

    def test_question_and_exclamation(self):
        assert segment_text("Really? Yes! Fine.") == ["Really?", "Yes!", "Fine."]

    @given(st.lists(st.sampled_from(["Abc", "de", "Fg.", "hi!", "Jk?", "lm,"]), min_size=1, max_size=20))
    @settings(max_examples=200, deadline=None)
    def test_characters_preserved_in_order(self, tokens):
        raw = " ".join(tokens)
        joined = " ".join(segment_text(raw))
        assert "".join(joined.split()) == "".join(raw.split())


class TestReadingSpeed:
    def test_basic(self):
        assert reading_speed(10, 2000) == 5.0

    def test_identity(self):
        assert reading_speed(1, 1000) == 1.0

    def test_zero_fixation(self):
        with pytest.raises(ValueError):
            reading_speed(7, 0)

    @given(
        st.integers(min_value=1, max_value=500),
        st.floats(min_value=1.0, max_value=1e6),
        st.floats(min_value=1.01, max_value=4.0),
    )
    @settings(max_examples=100, deadline=None)
    def test_monotonicity(self, wc, fix, factor):
        assert reading_speed(wc, fix * factor) < reading_speed(wc, fix)
        assert reading_speed(wc + 1, fix) > reading_speed(wc, fix)


class TestZipf:
    def test_thousand_per_million(self):
        table = make_table({"the": 1000})
        assert zipf_frequency("the", table) == pytest.approx(6.0, abs=1e-12)

    def test_one_per_million(self):
        table = make_table({"rare": 1})
        assert zipf_frequency("rare", table) == pytest.approx(3.0, abs=1e-12)

    def test_unknown_word_floor(self):
        table = make_table({"the": 1000})
        assert zipf_frequency("nope", table) == ZIPF_FLOOR

    def test_case_fold_and_edge_punctuation(self):
        table = make_table({"the": 1000})
        assert zipf_frequency("The,", table) == pytest.approx(6.0, abs=1e-12)

    def test_monotone_in_count(self):
        table = make_table({"a": 5, "b": 50, "c": 500})
        values = [zipf_frequency(w, table) for w in ("a", "b", "c")]
        assert values == sorted(values)

    def test_explicit_total_must_cover_max(self):
        with pytest.raises(ValueError):
            FrequencyTable.from_counts("en", {"the": 1000}, corpus_total=10)


class TestSentenceControls:
    def test_mean_word_length(self):
        s = Sentence.from_text(0, "ab abcd")
        table = make_table({"ab": 1, "abcd": 1})
        assert sentence_controls(s, table).mean_word_length == 3.0

    def test_single_word_identity(self):
        s = Sentence.from_text(0, "a")
        table = make_table({"a": 1000})
        controls = sentence_controls(s, table)
        assert controls.mean_word_length == 1.0
        assert controls.mean_log_freq == pytest.approx(6.0, abs=1e-12)

    def test_mean_of_two_zipf_values(self):
        # counts 1 and 100 per million give Zipf 3.0 and 5.0
        table = make_table({"rare": 1, "mid": 100})
        s = Sentence.from_text(0, "rare mid")
        assert sentence_controls(s, table).mean_log_freq == pytest.approx(4.0, abs=1e-12)

    def test_punctuation_only_tokens_dropped(self):
        s = Sentence.from_text(0, "a - b .")
        assert s.word_count == 2


class TestReadingData:
    HEADER = "participant_id\ttext_id\tsentence_index\tword_count\ttotal_fixation_ms"

    def _ingest(self, tmp_path, rows):
        path = tmp_path / "reading.tsv"
        path.write_text("\n".join([self.HEADER, *rows]) + "\n", encoding="utf-8")
        return ingest_reading_data(path)

    def test_derives_speed(self, tmp_path):
        data = self._ingest(tmp_path, ["p1\tt1\t0\t10\t2000"])
        assert len(data.records) == 1
        assert data.records[0].reading_speed == 5.0
        assert not data.errors

    def test_zero_fixation_rejected_with_diagnostics(self, tmp_path):
        data = self._ingest(tmp_path, ["p1\tt1\t0\t10\t0"])
        assert not data.records
        assert len(data.errors) == 1
        assert data.errors[0].line == 2

    def test_header_only(self, tmp_path):
        data = self._ingest(tmp_path, [])
        assert data.records == [] and data.errors == []

    def test_unparsable_number_collected(self, tmp_path):
        data = self._ingest(tmp_path, ["p1\tt1\t0\tten\t2000", "p1\tt1\t1\t5\t1000"])
        assert len(data.records) == 1
        assert len(data.errors) == 1

    def test_missing_column(self, tmp_path):
        path = tmp_path / "broken.tsv"
        path.write_text("participant_id\ttext_id\n", encoding="utf-8")
        with pytest.raises(FormatError):
            ingest_reading_data(path)

    def test_record_invariant_checked(self):
        with pytest.raises(ValueError):
            ReadingRecord("p", "t", 0, 10, 2000.0, reading_speed=4.9)


class TestFrequencyFile:
    def test_load_with_total(self, tmp_path):
        path = tmp_path / "freq.tsv"
        path.write_text("#total\t2000000\nthe\t1000\n", encoding="utf-8")
        table = load_frequency_table(path, "en")
        assert table.corpus_total == 2_000_000
        assert zipf_frequency("the", table) == pytest.approx(math.log10(500) + 3, abs=1e-12)

    def test_load_summing(self, tmp_path):
        path = tmp_path / "freq.tsv"
        path.write_text("a\t3\nb\t7\n", encoding="utf-8")
        assert load_frequency_table(path, "en").corpus_total == 10

    def test_malformed_line(self, tmp_path):
        path = tmp_path / "freq.tsv"
        path.write_text("a 3\n", encoding="utf-8")
        with pytest.raises(FormatError):
            load_frequency_table(path, "en")


@given(st.lists(st.integers(min_value=0, max_value=30), min_size=1, max_size=30))
@settings(max_examples=100, deadline=None)
def test_discourse_requires_contiguous_indices(indices):
    sentences = tuple(Sentence.from_text(i, f"w{i}") for i in indices)
    contiguous = list(indices) == list(range(len(indices)))
    if contiguous:
        Discourse("t", "en", sentences)
    else:
        with pytest.raises(ValueError):
            Discourse("t", "en", sentences)
