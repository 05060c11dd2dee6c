"""Attention-aware sentence relevance: windows, weights, and edges.

Shows how target-to-neighbor cosine similarities are weighted by positional
distance (1/2 adjacent, 1/3 two back) and what happens at discourse edges.
Run: python3 demos/02_relevance_windows.py
"""

import numpy as np

from sentmetrics import (
    Discourse,
    Sentence,
    WindowSpec,
    attention_aware_relevance,
    cosine,
    mean_pool,
    mock_backend,
    score_discourse_relevance,
)
from sentmetrics.backend import fetch_hidden_states

spec = WindowSpec()
print("Default window: two sentences back, one ahead.")
for offset in spec.offsets():
    print(f"  offset {offset:+d} -> weight {spec.weight(offset):.4f}")
print()

print("If every neighbor were perfectly similar (cosine 1.0), the relevance")
score = attention_aware_relevance({-2: 1.0, -1: 1.0, 1: 1.0}, spec)
print(f"of an interior sentence would be 1/3 + 1/2 + 1/2 = {score.value:.4f}.")
print()

texts = [
    "A lighthouse stood at the end of the pier.",
    "Its beam swept across the harbor every night.",
    "Fishermen used it to find their way home.",
    "One winter the light suddenly went dark.",
    "The whole village came out to repair it.",
]

discourse = Discourse(
    "demo", "en", tuple(Sentence.from_text(i, t) for i, t in enumerate(texts))
)
backend = mock_backend(vocab_size=4, dim=32, seed=1)

scores = score_discourse_relevance(discourse, backend, spec)
print("Relevance per sentence (mock embeddings, so values hover near 0):")
for sent, score in zip(discourse.sentences, scores):
    shown = f"{score.value:+.4f} ({score.neighbors_used} neighbors)" if score else "undefined"
    print(f"  [{sent.index}] {sent.text:<46} {shown}")
print()

print("Edge sentences use only the neighbors they have: sentence 0 sees just")
print("the next sentence (weight 1/2); the last sees prev1 and prev2.")
print()

# The aggregation is a plain weighted sum of cosines; verify one by hand.
def embed(i):
    return mean_pool(np.asarray(fetch_hidden_states(backend, texts[i]).matrix))

target = embed(2)
by_hand = (
    cosine(target, embed(0)) * (1 / 3)
    + cosine(target, embed(1)) * (1 / 2)
    + cosine(target, embed(3)) * (1 / 2)
)
print(f"Sentence 2 by hand: {by_hand:+.6f}; pipeline: {scores[2].value:+.6f}")

renorm = WindowSpec(renormalize=True)
renorm_scores = score_discourse_relevance(discourse, backend, renorm)
print()
print("With renormalize=True values are divided by the active weight sum,")
print("making edge and interior sentences directly comparable:")
print("  " + "  ".join(f"{s.value:+.3f}" if s else "--" for s in renorm_scores))
