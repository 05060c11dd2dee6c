"""Sentence surprisal by three estimation methods.

Surprisal of a sentence is the negative log-probability of the sentence
given its preceding discourse context, reported in bits:

* ``CR``  -- chain rule: sum of causal next-token conditional
  log-probabilities (autoregressive scoring).
* ``NLL`` -- same aggregation over masked-bidirectional per-token
  log-probabilities (each token predicted with the rest visible).
* ``NSP`` -- ``-log2`` of a next-sentence probability from a sentence-pair
  head; defined only for sentences with a predecessor.

The CR/NLL distinction is the backend scoring mode, not the arithmetic:
on identical log-probability vectors both aggregate to identical bits.
The wire carries natural logs; the single ln -> log2 conversion happens
here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .backend import fetch_logprobs, fetch_nsp
from .corpus import Discourse
from .errors import SentmetricsError
from .protocol import MODE_CAUSAL, MODE_MASKED

LN2 = math.log(2.0)

METHODS = ("CR", "NLL", "NSP")

_METHOD_MODE = {"CR": MODE_CAUSAL, "NLL": MODE_MASKED}


@dataclass(frozen=True)
class SurprisalScore:
    """Sentence surprisal in bits, tagged with its estimation method."""

    method: str
    bits: float
    token_count: int
    context_sentences_used: int = 0

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if not math.isfinite(self.bits) or self.bits < 0:
            raise ValueError(f"bits must be finite and >= 0, got {self.bits}")
        if self.method == "NSP":
            if self.token_count != 0:
                raise ValueError("NSP scores carry token_count 0 by convention")
        elif self.token_count < 1:
            raise ValueError(f"token_count must be >= 1, got {self.token_count}")

    @property
    def nats(self) -> float:
        """Surprisal in natural-log units (exact conversion from bits)."""
        return self.bits * LN2


@dataclass(frozen=True)
class ContextPolicy:
    """How much preceding discourse to condition on.

    ``None`` means unlimited. The default uses all preceding sentences of
    the discourse; token truncation drops the oldest tokens first.
    """

    max_context_sentences: int | None = None
    max_context_tokens: int | None = None

    def __post_init__(self) -> None:
        for name in ("max_context_sentences", "max_context_tokens"):
            value = getattr(self, name)
            if value is not None and value < 0:
                raise ValueError(f"{name} must be >= 0, got {value}")


def _check_logprobs(logprobs) -> list[float]:
    values = [float(lp) for lp in logprobs]
    if not values:
        raise ValueError("logprobs is empty")
    for lp in values:
        if not math.isfinite(lp) or lp > 0:
            raise ValueError(f"invalid token logprob {lp} (must be finite and <= 0)")
    return values


def _bits(values: list[float]) -> float:
    # per-token conversion before the compensated sum keeps integer bit
    # counts (uniform models over power-of-two vocabularies) exact at any
    # sentence length
    return math.fsum(-lp / LN2 for lp in values)


def cr_surprisal(logprobs, context_sentences_used: int = 0) -> SurprisalScore:
    """Chain-rule surprisal: ``-(sum of natural-log probabilities) / ln 2``."""
    values = _check_logprobs(logprobs)
    return SurprisalScore("CR", _bits(values), len(values), context_sentences_used)


def nll_surprisal(logprobs, context_sentences_used: int = 0) -> SurprisalScore:
    """Negative log-likelihood surprisal; same bits as CR on the same input."""
    values = _check_logprobs(logprobs)
    return SurprisalScore("NLL", _bits(values), len(values), context_sentences_used)


def nll_to_probability(nll: float) -> float:
    """Sentence probability ``e^{-NLL}`` for an NLL in natural-log units."""
    if not math.isfinite(nll) or nll < 0:
        raise ValueError(f"NLL must be finite and >= 0, got {nll}")
    return math.exp(-nll)


def nsp_surprisal(p_is_next: float) -> SurprisalScore:
    """Surprisal ``-log2(p)`` of a next-sentence probability in (0, 1)."""
    if not 0.0 < p_is_next < 1.0:
        raise ValueError(f"p_is_next must lie strictly in (0, 1), got {p_is_next}")
    return SurprisalScore("NSP", -math.log2(p_is_next), 0, 1)


def _context_sentences(discourse: Discourse, index: int, policy: ContextPolicy):
    if policy.max_context_sentences is None:
        lo = 0
    else:
        lo = max(0, index - policy.max_context_sentences)
    return discourse.sentences[lo:index]


def _truncate_tokens(context: str, max_tokens: int | None) -> str:
    if max_tokens is None:
        return context
    tokens = context.split()
    if len(tokens) <= max_tokens:
        return context
    return " ".join(tokens[len(tokens) - max_tokens:])


def score_discourse_surprisal(
    discourse: Discourse,
    backend,
    method: str = "CR",
    policy: ContextPolicy = ContextPolicy(),
) -> list[SurprisalScore | None]:
    """Score every sentence of a discourse; one entry per sentence.

    CR/NLL condition sentence ``i`` on the concatenation of its preceding
    sentences under ``policy`` (sentence 0 is scored with empty context).
    NSP uses only the immediately preceding sentence, so sentence 0 gets
    ``None`` rather than a score.
    """
    method = method.upper()
    if method not in METHODS:
        raise ValueError(f"unknown surprisal method {method!r}")
    scores: list[SurprisalScore | None] = []
    for sent in discourse.sentences:
        i = sent.index
        try:
            if method == "NSP":
                if i == 0:
                    scores.append(None)
                    continue
                resp = fetch_nsp(backend, discourse.sentences[i - 1].text, sent.text)
                scores.append(nsp_surprisal(resp.p_is_next))
            else:
                ctx_sents = _context_sentences(discourse, i, policy)
                context = _truncate_tokens(
                    " ".join(s.text for s in ctx_sents), policy.max_context_tokens
                )
                resp = fetch_logprobs(backend, context, sent.text, _METHOD_MODE[method])
                build = cr_surprisal if method == "CR" else nll_surprisal
                scores.append(build(resp.logprobs, context_sentences_used=len(ctx_sents)))
        except SentmetricsError as exc:
            raise type(exc)(f"{discourse.text_id}[{i}]: {exc}") from exc
    return scores
