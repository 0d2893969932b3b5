"""Reputation aggregators, the opinion-category distribution and top-k selection."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

from .grouping import OpinionGroup
from .sentiment import FINE_LABELS, NEGATIVE, POSITIVE


class ReputationError(ValueError):
    pass


# ---------------------------------------------------------------------------
# aggregators
# ---------------------------------------------------------------------------


def group_set_reputation(groups: Sequence[OpinionGroup]) -> float:
    """Mean over opinion sets of (average similarity x average rating)."""
    if not groups:
        raise ReputationError("no opinion sets to aggregate")
    terms = [(g.sv * g.ss) / (g.n * g.n) for g in groups]
    return math.fsum(terms) / len(groups)


def combine_polarity_reputations(
    rep_positive: Optional[float],
    n_positive: int,
    rep_negative: Optional[float],
    n_negative: int,
) -> float:
    """Opinion-count weighted mean of the positive and negative reputations.

    An empty side (count 0) drops out and its reputation may be ``None``.
    """
    if n_positive < 0 or n_negative < 0:
        raise ReputationError("opinion counts must be nonnegative")
    if n_positive + n_negative == 0:
        raise ReputationError("both polarities are empty")
    if n_negative == 0:
        return float(rep_positive)
    if n_positive == 0:
        return float(rep_negative)
    return (rep_positive * n_positive + rep_negative * n_negative) / (n_positive + n_negative)


def class_custom_score(ss: float, sv: float, n: int, scale_max: int) -> float:
    """Mean of the scale-stretched average similarity and the average rating."""
    if n < 1:
        raise ReputationError("class custom score needs at least one review")
    return (scale_max * ss + sv) / (2 * n)


def class_weighted_reputation(scores: Mapping[str, float], sizes: Mapping[str, int]) -> float:
    """Class-size weighted mean of class custom scores."""
    keys = [k for k in scores if sizes.get(k, 0) > 0]
    total = sum(sizes[k] for k in keys)
    if total < 1:
        raise ReputationError("all opinion classes are empty")
    return math.fsum(scores[k] * sizes[k] for k in keys) / total


def score_weighted_reputation(review_scores: Sequence[float], ratings: Sequence[float]) -> float:
    """Mean of review score x rating over all reviews."""
    if len(review_scores) != len(ratings):
        raise ReputationError("review scores and ratings differ in length")
    if not ratings:
        raise ReputationError("no reviews")
    return math.fsum(rs * v for rs, v in zip(review_scores, ratings)) / len(ratings)


# ---------------------------------------------------------------------------
# category distribution
# ---------------------------------------------------------------------------

RATING_CATEGORIES = ("very bad", "bad", "neutral", "good", "very good")


def rating_category(rating: float, scale_max: int) -> str:
    """Five equal-width bands: 1..5 one per star, 1..10 two points per band."""
    if scale_max not in (5, 10):
        raise ReputationError(f"unsupported scale {scale_max}")
    band = math.ceil(round(rating * 5 / scale_max, 9))
    return RATING_CATEGORIES[min(max(band, 1), 5) - 1]


@dataclass(frozen=True)
class CategoryDistribution:
    labels: tuple[str, ...]
    counts: tuple[int, ...]
    percents: tuple[float, ...]

    @property
    def total(self) -> int:
        return sum(self.counts)

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.labels, self.percents))

    @classmethod
    def from_counts(cls, labels: Sequence[str], counts: Sequence[int]) -> "CategoryDistribution":
        """Percentages at 2 decimals, apportioned by largest remainder so they
        add up to exactly 100 whenever any count is nonzero."""
        labels, counts = tuple(labels), tuple(int(c) for c in counts)
        if len(labels) != len(counts):
            raise ReputationError("labels and counts differ in length")
        total = sum(counts)
        if total == 0:
            return cls(labels, counts, tuple(0.0 for _ in counts))
        exact = [c * 10000 / total for c in counts]  # in hundredths of a percent
        floors = [math.floor(e) for e in exact]
        short = 10000 - sum(floors)
        order = sorted(range(len(counts)), key=lambda i: (-(exact[i] - floors[i]), i))
        for i in order[:short]:
            floors[i] += 1
        return cls(labels, counts, tuple(f / 100 for f in floors))


def category_distribution(ratings: Sequence[float], scale_max: int) -> CategoryDistribution:
    if not ratings:
        raise ReputationError("no ratings")
    counts = {c: 0 for c in RATING_CATEGORIES}
    for r in ratings:
        counts[rating_category(r, scale_max)] += 1
    return CategoryDistribution.from_counts(RATING_CATEGORIES, [counts[c] for c in RATING_CATEGORIES])


def label_distribution(labels: Sequence[str], label_set: Sequence[str] = FINE_LABELS) -> CategoryDistribution:
    if not labels:
        raise ReputationError("no labels")
    counts = [sum(1 for l in labels if l == c) for c in label_set]
    if sum(counts) != len(labels):
        raise ReputationError("labels outside the category set")
    return CategoryDistribution.from_counts(label_set, counts)


# ---------------------------------------------------------------------------
# top-k reviews
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RankedReview:
    review_id: str
    polarity: Optional[str]
    review_score: float
    helpful_votes: int = 0
    posting_year: Optional[int] = None
    position: int = 0
    text: str = ""
    rating: Optional[float] = None
    components: Mapping[str, Optional[float]] = field(default_factory=dict)


def _rank_key(r: RankedReview):
    year = r.posting_year if r.posting_year is not None else -math.inf
    return (-r.review_score, -r.helpful_votes, -year, r.position)


def top_k_reviews(reviews: Sequence[RankedReview], k: int) -> tuple[list[RankedReview], list[RankedReview]]:
    """Best ``k`` positive and ``k`` negative reviews by review score.

    Ties fall back to helpful votes, then posting year (newer first), then
    input position. Reviews without a polarity are never selected; k=0 gives
    two empty lists.
    """
    if k < 0:
        raise ReputationError("k must be nonnegative")
    pos = sorted((r for r in reviews if r.polarity == POSITIVE), key=_rank_key)
    neg = sorted((r for r in reviews if r.polarity == NEGATIVE), key=_rank_key)
    return pos[:k], neg[:k]


# ---------------------------------------------------------------------------
# result record
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ReputationResult:
    entity_id: str
    pipeline: str
    reputation: float
    scale_max: int
    categories: CategoryDistribution
    top_positive: tuple[RankedReview, ...] = ()
    top_negative: tuple[RankedReview, ...] = ()
    details: Mapping[str, object] = field(default_factory=dict)
