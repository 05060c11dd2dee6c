"""Attention-aware sentence semantic relevance.

A sentence embedding is the arithmetic mean of its per-token final-layer
vectors. The relevance of a target sentence is the weighted sum of its
cosine similarities to neighboring sentences in a discourse window, with
weights decaying with positional distance: by default the adjacent
sentences (previous and next) weigh 1/2 and the sentence two back weighs
1/3, mimicking how retained memory declines with distance.

Neighbor positions are signed offsets relative to the target: ``-1`` is
the previous sentence, ``-2`` the one before it, ``+1`` the next.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .backend import fetch_hidden_states
from .corpus import Discourse
from .errors import SentmetricsError


class SentenceEmbedding:
    """A d-dimensional sentence vector with a strictly positive norm."""

    __slots__ = ("vector", "d", "norm")

    def __init__(self, vector) -> None:
        v = np.asarray(vector, dtype=float)
        if v.ndim != 1:
            raise ValueError(f"embedding must be 1-D, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("embedding has non-finite entries")
        norm = float(np.linalg.norm(v))
        if norm == 0.0:
            raise ValueError("degenerate embedding: zero norm")
        self.vector = v
        self.d = v.size
        self.norm = norm

    def __repr__(self) -> str:
        return f"SentenceEmbedding(d={self.d}, norm={self.norm:.4g})"


@dataclass(frozen=True)
class WindowSpec:
    """Discourse window and positional weights for relevance aggregation.

    ``weights_before`` is ordered nearest-first: index 0 is the weight of
    the immediately preceding sentence. Weights must lie in (0, 1] and be
    non-increasing with distance.
    """

    n_before: int = 2
    n_after: int = 1
    weights_before: tuple[float, ...] = (1.0 / 2.0, 1.0 / 3.0)
    weights_after: tuple[float, ...] = (1.0 / 2.0,)
    renormalize: bool = False

    def __post_init__(self) -> None:
        if self.n_before < 0 or self.n_after < 0:
            raise ValueError("window sizes must be >= 0")
        if self.n_before + self.n_after < 1:
            raise ValueError("window must contain at least one neighbor")
        if len(self.weights_before) != self.n_before:
            raise ValueError("weights_before length must equal n_before")
        if len(self.weights_after) != self.n_after:
            raise ValueError("weights_after length must equal n_after")
        for side in (self.weights_before, self.weights_after):
            for w in side:
                if not 0.0 < w <= 1.0:
                    raise ValueError(f"weight {w} outside (0, 1]")
            if any(side[i] < side[i + 1] for i in range(len(side) - 1)):
                raise ValueError("weights must be non-increasing with distance")

    def weight(self, offset: int) -> float:
        """Weight of the neighbor at signed ``offset`` from the target."""
        if offset < 0 and -offset <= self.n_before:
            return self.weights_before[-offset - 1]
        if offset > 0 and offset <= self.n_after:
            return self.weights_after[offset - 1]
        raise ValueError(f"offset {offset} outside window")

    def offsets(self) -> list[int]:
        """All window offsets, farthest-before to farthest-after."""
        before = [-(k + 1) for k in reversed(range(self.n_before))]
        after = [k + 1 for k in range(self.n_after)]
        return before + after


@dataclass(frozen=True)
class RelevanceScore:
    """Weighted relevance of a sentence within its discourse window."""

    value: float
    neighbors_used: int
    renormalized: bool

    def __post_init__(self) -> None:
        if self.neighbors_used < 1:
            raise ValueError("a relevance score requires at least one neighbor")
        if not math.isfinite(self.value):
            raise ValueError("relevance value must be finite")


def mean_pool(matrix) -> SentenceEmbedding:
    """Column-wise mean of an ``n_tokens x d`` matrix of token vectors."""
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] < 1:
        raise ValueError(f"expected an n_tokens x d matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return SentenceEmbedding(m.mean(axis=0))


def cosine(a: SentenceEmbedding, b: SentenceEmbedding) -> float:
    """Cosine similarity, clamped into [-1, 1] after floating-point error."""
    if a.d != b.d:
        raise ValueError(f"dimension mismatch: {a.d} vs {b.d}")
    value = float(np.dot(a.vector, b.vector) / (a.norm * b.norm))
    return max(-1.0, min(1.0, value))


def attention_aware_relevance(
    similarities: Mapping[int, float],
    spec: WindowSpec = WindowSpec(),
) -> RelevanceScore:
    """Aggregate neighbor similarities into one weighted relevance value.

    ``similarities`` maps signed offsets to target-to-neighbor cosine
    values. The result is ``sum(sim * weight)``; with ``renormalize`` it is
    divided by the sum of the active weights.
    """
    if not similarities:
        raise ValueError("no neighbors: relevance is undefined")
    total = 0.0
    weight_sum = 0.0
    for offset, sim in similarities.items():
        w = spec.weight(offset)
        total += sim * w
        weight_sum += w
    value = total / weight_sum if spec.renormalize else total
    return RelevanceScore(value, len(similarities), spec.renormalize)


def score_discourse_relevance(
    discourse: Discourse,
    backend,
    spec: WindowSpec = WindowSpec(),
) -> list[RelevanceScore | None]:
    """Relevance for every sentence; ``None`` where no neighbor exists.

    Each sentence is embedded once per discourse (mean-pooled hidden
    states) and reused across the windows it participates in.
    """
    cache: dict[int, SentenceEmbedding] = {}

    def embed(index: int) -> SentenceEmbedding:
        if index not in cache:
            try:
                resp = fetch_hidden_states(backend, discourse.sentences[index].text)
                cache[index] = mean_pool(np.asarray(resp.matrix))
            except SentmetricsError as exc:
                raise type(exc)(f"{discourse.text_id}[{index}]: {exc}") from exc
        return cache[index]

    n = len(discourse.sentences)
    scores: list[RelevanceScore | None] = []
    for i in range(n):
        offsets = [off for off in spec.offsets() if 0 <= i + off < n]
        if not offsets:
            scores.append(None)
            continue
        target = embed(i)
        sims = {off: cosine(target, embed(i + off)) for off in offsets}
        scores.append(attention_aware_relevance(sims, spec))
    return scores
