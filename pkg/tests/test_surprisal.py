import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sentmetrics.backend import mock_backend
from sentmetrics.corpus import Discourse, Sentence
from sentmetrics.surprisal import (
    LN2,
    ContextPolicy,
    cr_surprisal,
    nll_surprisal,
    nll_to_probability,
    nsp_surprisal,
    score_discourse_surprisal,
)

logprob_lists = st.lists(
    st.floats(min_value=-30.0, max_value=0.0, allow_nan=False), min_size=1, max_size=40
)


def make_discourse(texts, text_id="t", language="en"):
    return Discourse(
        text_id, language, tuple(Sentence.from_text(i, t) for i, t in enumerate(texts))
    )


class TestChainRule:
    def test_two_half_probabilities(self):
        score = cr_surprisal([math.log(0.5), math.log(0.5)])
        assert score.bits == pytest.approx(2.0, abs=1e-12)
        assert score.method == "CR"
        assert score.token_count == 2

    def test_certain_token(self):
        assert cr_surprisal([0.0]).bits == 0.0

    def test_sum_of_nats(self):
        # independent evaluation: -(-1 - 2) / ln 2
        assert cr_surprisal([-1.0, -2.0]).bits == pytest.approx(
            4.328085122666891, rel=1e-15
        )

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            cr_surprisal([])
        with pytest.raises(ValueError):
            cr_surprisal([0.5])
        with pytest.raises(ValueError):
            cr_surprisal([float("nan")])

    @given(logprob_lists, st.floats(min_value=-10.0, max_value=-1e-6))
    @settings(max_examples=200, deadline=None)
    def test_appending_token_increases_bits(self, logprobs, extra):
        assert cr_surprisal(logprobs + [extra]).bits > cr_surprisal(logprobs).bits

    @given(logprob_lists)
    @settings(max_examples=200, deadline=None)
    def test_scale_identity(self, logprobs):
        score = cr_surprisal(logprobs)
        nats = -sum(logprobs)
        assert score.bits == pytest.approx(nats / LN2, rel=1e-12)
        assert score.nats == pytest.approx(nats, rel=1e-12)


class TestNll:
    def test_zero_nll_probability_one(self):
        assert nll_to_probability(0.0) == 1.0

    def test_two_unit_nats(self):
        score = nll_surprisal([-1.0, -1.0])
        assert score.nats == pytest.approx(2.0, rel=1e-12)
        # independent evaluation of e^{-2}
        assert nll_to_probability(score.nats) == pytest.approx(
            0.1353352832366127, rel=1e-12
        )

    def test_negative_nll_rejected(self):
        with pytest.raises(ValueError):
            nll_to_probability(-0.5)

    @given(logprob_lists)
    @settings(max_examples=200, deadline=None)
    def test_cr_and_nll_bits_agree_exactly(self, logprobs):
        assert cr_surprisal(logprobs).bits == nll_surprisal(logprobs).bits


class TestNsp:
    def test_half(self):
        assert nsp_surprisal(0.5).bits == 1.0

    def test_quarter(self):
        assert nsp_surprisal(0.25).bits == 2.0

    def test_probability_one_rejected(self):
        with pytest.raises(ValueError):
            nsp_surprisal(1.0)
        with pytest.raises(ValueError):
            nsp_surprisal(0.0)

    def test_token_count_convention(self):
        assert nsp_surprisal(0.5).token_count == 0

    @given(st.floats(min_value=1e-9, max_value=1 - 1e-9), st.floats(min_value=1.001, max_value=2.0))
    @settings(max_examples=200, deadline=None)
    def test_strictly_decreasing_in_p(self, p, factor):
        q = min(p * factor, 1 - 1e-12)
        if q > p:
            assert nsp_surprisal(q).bits < nsp_surprisal(p).bits


class _SpyBackend:
    """Wraps the mock and records (context, target, mode) per call."""

    def __init__(self, inner):
        self.inner = inner
        self.logprob_calls = []
        self.nsp_calls = []

    def logprobs(self, context, target, mode="causal"):
        self.logprob_calls.append((context, target, mode))
        return self.inner.logprobs(context, target, mode)

    def nsp(self, a, b):
        self.nsp_calls.append((a, b))
        return self.inner.nsp(a, b)

    def hidden_states(self, text):
        return self.inner.hidden_states(text)


class TestScoreDiscourse:
    def test_uniform_mock_closed_form(self):
        backend = mock_backend(vocab_size=4)
        d = make_discourse(["one two three."])
        scores = score_discourse_surprisal(d, backend, "CR")
        assert scores[0].bits == pytest.approx(3 * math.log2(4), abs=1e-9)
        assert scores[0].context_sentences_used == 0

    def test_nsp_first_sentence_missing(self):
        backend = mock_backend()
        d = make_discourse(["First one.", "Second one."])
        scores = score_discourse_surprisal(d, backend, "NSP")
        assert scores[0] is None
        assert scores[1].bits == pytest.approx(1.0, abs=1e-12)

    def test_context_policy_limits_sentences(self):
        backend = _SpyBackend(mock_backend())
        d = make_discourse(["S zero.", "S one.", "S two."])
        score_discourse_surprisal(d, backend, "CR", ContextPolicy(max_context_sentences=1))
        contexts = [c for c, _, _ in backend.logprob_calls]
        assert contexts == ["", "S zero.", "S one."]

    def test_default_context_uses_all_preceding(self):
        backend = _SpyBackend(mock_backend())
        d = make_discourse(["S zero.", "S one.", "S two."])
        score_discourse_surprisal(d, backend, "CR")
        assert backend.logprob_calls[2][0] == "S zero. S one."

    def test_token_truncation_keeps_most_recent(self):
        backend = _SpyBackend(mock_backend())
        d = make_discourse(["a b c d.", "e f.", "target here."])
        score_discourse_surprisal(d, backend, "CR", ContextPolicy(max_context_tokens=3))
        assert backend.logprob_calls[2][0] == "d. e f."

    def test_nll_uses_masked_mode(self):
        backend = _SpyBackend(mock_backend())
        d = make_discourse(["Alpha beta.", "Gamma delta."])
        scores = score_discourse_surprisal(d, backend, "NLL")
        assert all(mode == "masked-bidirectional" for _, _, mode in backend.logprob_calls)
        assert scores[1].method == "NLL"

    def test_nsp_uses_previous_sentence_only(self):
        backend = _SpyBackend(mock_backend())
        d = make_discourse(["S zero.", "S one.", "S two."])
        score_discourse_surprisal(d, backend, "NSP")
        assert backend.nsp_calls == [("S zero.", "S one."), ("S one.", "S two.")]

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            score_discourse_surprisal(make_discourse(["A."]), mock_backend(), "XX")

    def test_backend_error_carries_sentence_index(self):
        class Exploding:
            def logprobs(self, *a, **k):
                from sentmetrics.errors import ScoringError

                raise ScoringError("model: kaboom")

        from sentmetrics.errors import ScoringError

        d = make_discourse(["A.", "B."], text_id="tx")
        with pytest.raises(ScoringError, match=r"tx\[0\]"):
            score_discourse_surprisal(d, Exploding(), "CR")
