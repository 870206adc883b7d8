"""Accuracy, true-positive-rate gaps, similarity correlation, nearest neighbors."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import ContractError, MetricUndefinedError, UnknownTokenError


@dataclass(frozen=True)
class EvalReport:
    """Bundle of evaluation results for one configuration."""

    task_accuracy: float
    attribute_accuracy: float
    tpr_gap: float | None = None
    tpr_rms: float | None = None
    attribute_accuracy_kernel: float | None = None
    deviation_ratio: float | None = None
    similarity_correlations: dict = field(default=None)
    skipped_classes: int = 0

    def __post_init__(self):
        for name in ("task_accuracy", "attribute_accuracy", "attribute_accuracy_kernel"):
            value = getattr(self, name)
            if value is not None and not 0.0 <= value <= 1.0:
                raise ContractError(f"{name}={value} outside [0, 1]")
        for name in ("tpr_gap", "tpr_rms"):
            value = getattr(self, name)
            if value is not None and value < 0.0:
                raise ContractError(f"{name}={value} must be non-negative")
        if self.similarity_correlations:
            for key, value in self.similarity_correlations.items():
                if not -1.0 <= value <= 1.0:
                    raise ContractError(f"correlation {key}={value} outside [-1, 1]")


def accuracy(predictions: np.ndarray, labels: np.ndarray) -> float:
    """Fraction of predictions equal to the labels."""
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.shape != labels.shape:
        raise ContractError("predictions and labels differ in length")
    if predictions.size == 0:
        raise ContractError("empty prediction vector")
    return float(np.mean(predictions == labels))


def _positive_value(labels: np.ndarray):
    values = sorted(set(labels.tolist()), key=str)
    if len(values) != 2:
        raise ContractError(f"binary labels required, found {len(values)} distinct values")
    return values[1]


def tpr_gap(
    predictions: np.ndarray,
    labels: np.ndarray,
    groups: np.ndarray,
    positive_label=None,
) -> float:
    """Absolute true-positive-rate difference between the two groups.

    TPR is P(prediction = positive | label = positive, group). The positive
    label defaults to the lexicographically larger of the two label values.
    A group without any positive-label samples leaves the metric undefined.
    """
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    groups = np.asarray(groups)
    if not (len(predictions) == len(labels) == len(groups)):
        raise ContractError("predictions, labels and groups differ in length")
    group_values = sorted(set(groups.tolist()), key=str)
    if len(group_values) != 2:
        raise ContractError(f"two groups required, found {len(group_values)}")
    if positive_label is None:
        positive_label = _positive_value(labels)

    rates = []
    for g in group_values:
        mask = (groups == g) & (labels == positive_label)
        if not mask.any():
            raise MetricUndefinedError(
                f"group {g!r} has no positive-label samples; TPR gap undefined"
            )
        rates.append(float(np.mean(predictions[mask] == positive_label)))
    return abs(rates[0] - rates[1])


def per_class_tpr_gaps(
    predictions: np.ndarray, labels: np.ndarray, groups: np.ndarray
) -> tuple[dict, list]:
    """Per-class TPR gaps between two groups, plus the classes skipped.

    A class is skipped when either group has no sample of that class.
    """
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    groups = np.asarray(groups)
    if not (len(predictions) == len(labels) == len(groups)):
        raise ContractError("predictions, labels and groups differ in length")
    group_values = sorted(set(groups.tolist()), key=str)
    if len(group_values) != 2:
        raise ContractError(f"two groups required, found {len(group_values)}")

    gaps: dict = {}
    skipped: list = []
    for cls in sorted(set(labels.tolist()), key=str):
        rates = []
        for g in group_values:
            mask = (groups == g) & (labels == cls)
            if not mask.any():
                rates = None
                break
            rates.append(float(np.mean(predictions[mask] == cls)))
        if rates is None:
            skipped.append(cls)
        else:
            gaps[cls] = abs(rates[0] - rates[1])
    return gaps, skipped


def tpr_rms(predictions: np.ndarray, labels: np.ndarray, groups: np.ndarray) -> float:
    """Root mean square of the per-class TPR gaps over the usable classes."""
    gaps, _ = per_class_tpr_gaps(predictions, labels, groups)
    if not gaps:
        raise MetricUndefinedError("no class has samples in both groups; TPR RMS undefined")
    values = np.array(list(gaps.values()))
    return float(np.sqrt(np.mean(values**2)))


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(a @ b / (na * nb))


def similarity_report(embeddings, scored_pairs) -> dict:
    """Correlations between embedding cosine similarities and human scores.

    ``scored_pairs`` is an iterable of (word1, word2, score). Pairs with a
    word missing from the vocabulary are skipped and counted. Both Spearman
    and Pearson correlations are reported since conventions differ.
    """
    sims = []
    scores = []
    skipped = 0
    for w1, w2, score in scored_pairs:
        try:
            v1 = embeddings.vector(w1)
            v2 = embeddings.vector(w2)
        except UnknownTokenError:
            skipped += 1
            continue
        sims.append(_cosine(v1, v2))
        scores.append(float(score))
    if len(sims) < 5:
        raise ContractError(
            f"need at least 5 scored pairs inside the vocabulary, got {len(sims)}"
        )
    spearman = float(stats.spearmanr(sims, scores).statistic)
    pearson = float(stats.pearsonr(sims, scores).statistic)
    return {
        "spearman": spearman,
        "pearson": pearson,
        "pairs_used": len(sims),
        "pairs_skipped": skipped,
    }


def similarity_correlation(embeddings, scored_pairs) -> float:
    """Spearman correlation between cosine similarities and human scores."""
    return similarity_report(embeddings, scored_pairs)["spearman"]


def nearest_neighbors(embeddings, query_word: str, m: int) -> list:
    """The m closest words to the query by cosine similarity.

    The query itself is excluded; exact similarity ties break in lexicographic
    word order.
    """
    vectors = embeddings.vectors
    vocab = embeddings.vocabulary
    if m >= len(vocab):
        raise ContractError(f"m={m} must be smaller than the vocabulary size {len(vocab)}")
    q = embeddings.vector(query_word)
    qn = np.linalg.norm(q)
    norms = np.linalg.norm(vectors, axis=1)
    safe = norms * (qn if qn > 0 else 1.0)
    safe[safe == 0] = 1.0
    sims = (vectors @ q) / safe
    if qn == 0:
        sims[:] = 0.0
    ranked = sorted(
        (w for w in vocab if w != query_word),
        key=lambda w: (-sims[embeddings.index(w)], w),
    )
    return ranked[:m]
