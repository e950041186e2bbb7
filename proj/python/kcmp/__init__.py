"""Black-box membership auditing for vision-language models."""

from ._kcmp import (
    BackendError,
    InvalidInput,
    auc,
    cost_estimate,
    filter_score,
    kl_divergence,
    match_answer,
    min_k_score,
    perplexity_score,
    renyi_entropy,
    roc_curve,
    rouge_l_f1,
    set_level_accuracy,
    simulate,
)

__all__ = [
    "BackendError",
    "InvalidInput",
    "auc",
    "cost_estimate",
    "filter_score",
    "kl_divergence",
    "match_answer",
    "min_k_score",
    "perplexity_score",
    "renyi_entropy",
    "roc_curve",
    "rouge_l_f1",
    "set_level_accuracy",
    "simulate",
]
