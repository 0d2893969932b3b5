"""Per-review component scores and the review score that combines them."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

HELPFULNESS_FLOOR_UNIFORM = 0.75
HELPFULNESS_FLOOR_WEIGHTED = 0.8
TIME_FLOOR = 0.8
TIME_DECAY_PER_YEAR = 0.002
TIME_HORIZON_YEARS = 100
DEFAULT_CREDIBILITY = 0.5


@dataclass(frozen=True)
class ScoreWeights:
    helpfulness: float = 0.4
    time: float = 0.35
    credibility: float = 0.25

    def __post_init__(self):
        values = (self.helpfulness, self.time, self.credibility)
        if any(w < 0 or not math.isfinite(w) for w in values):
            raise ValueError("score weights must be finite and nonnegative")
        if sum(values) <= 0:
            raise ValueError("score weights must not all be zero")

    @classmethod
    def parse(cls, text: str) -> "ScoreWeights":
        parts = [float(p) for p in text.replace(" ", "").split(",")]
        if len(parts) != 3:
            raise ValueError(f"expected three comma-separated weights, got {text!r}")
        return cls(*parts)

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.helpfulness, self.time, self.credibility)


@dataclass(frozen=True)
class ReviewScoreBreakdown:
    review_id: str
    H: float
    T: float
    RS: float
    S: Optional[float] = None
    C: Optional[float] = None

    def components(self) -> dict[str, Optional[float]]:
        return {"H": self.H, "T": self.T, "S": self.S, "C": self.C}


def helpfulness_score(votes: int, max_votes: int, floor: float = HELPFULNESS_FLOOR_UNIFORM) -> float:
    """Log-scaled helpfulness ``log_N(votes)`` with a floor.

    ``max_votes`` is the vote count of the entity's most-voted review. When it
    is 0 or 1 the logarithm base is degenerate and every review gets the floor.
    """
    if votes < 0 or max_votes < 0:
        raise ValueError("vote counts must be nonnegative")
    if votes > max_votes:
        raise ValueError(f"votes {votes} exceed the entity maximum {max_votes}")
    if votes == 0 or max_votes <= 1:
        return floor
    value = math.log(votes) / math.log(max_votes)
    return floor if value <= floor else value


def time_score(year: int, current_year: int) -> float:
    age = current_year - year
    if age < 0:
        raise ValueError(f"future-dated review: {year} is after {current_year}")
    if age >= TIME_HORIZON_YEARS:
        return TIME_FLOOR
    return 1.0 - age * TIME_DECAY_PER_YEAR


def credibility_score(
    helpful_votes: Optional[int],
    review_count: Optional[int],
    default: float = DEFAULT_CREDIBILITY,
) -> float:
    """Sigmoid of the author's helpful votes per review.

    Missing author statistics yield ``default``.
    """
    if helpful_votes is None or review_count is None:
        return default
    if review_count <= 0:
        raise ValueError("user review count must be >= 1")
    if helpful_votes < 0:
        raise ValueError("user helpful votes must be nonnegative")
    return 1.0 / (1.0 + math.exp(-helpful_votes / review_count))


def review_score_uniform(h: float, t: float, s: float) -> float:
    return (h + t + s) / 3.0


def review_score_weighted(h: float, t: float, c: float, weights: ScoreWeights = ScoreWeights()) -> float:
    a1, a2, a3 = weights.as_tuple()
    return (a1 * h + a2 * t + a3 * c) / (a1 + a2 + a3)


def max_helpful_votes(votes: Sequence[int]) -> int:
    return max(votes) if votes else 0
