"""Sentence-level predictors of reading: surprisal and semantic relevance.

Computes sentence surprisal (chain rule, NLL, next-sentence prediction)
and attention-aware sentence relevance from a pluggable model backend,
joins them with eye-tracking reading records and lexical statistics, and
evaluates their predictive power with penalized-spline regression and
AIC-difference model comparison.
"""

from .backend import (
    HttpClient,
    MockBackend,
    StdioClient,
    fetch_hidden_states,
    fetch_logprobs,
    fetch_nsp,
    make_backend,
    mock_backend,
)
from .corpus import (
    Discourse,
    FrequencyTable,
    ReadingRecord,
    Sentence,
    SentenceControls,
    ingest_discourse,
    ingest_reading_data,
    load_frequency_table,
    reading_speed,
    segment_text,
    sentence_controls,
    zipf_frequency,
)
from .gamlite import (
    FeatureRow,
    FitResult,
    ModelSpec,
    SmoothTerm,
    aic,
    base_spec,
    delta_aic,
    fit_penalized,
    full_spec,
    pearson,
    select_lambda,
)
from .pipeline import (
    EvalSettings,
    PipelineConfig,
    cmd_correlate,
    cmd_evaluate,
    cmd_ingest,
    cmd_score,
)
from .relevance import (
    RelevanceScore,
    SentenceEmbedding,
    WindowSpec,
    attention_aware_relevance,
    cosine,
    mean_pool,
    score_discourse_relevance,
)
from .splines import bspline_basis, quantile_knots, second_difference_penalty
from .surprisal import (
    ContextPolicy,
    SurprisalScore,
    cr_surprisal,
    nll_surprisal,
    nll_to_probability,
    nsp_surprisal,
    score_discourse_surprisal,
)

__version__ = "0.1.0"
