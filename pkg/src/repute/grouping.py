"""Fusing reviews into principal opinion sets and collecting their statistics.

Every set is summarised by ``(N, SS, SV)``: member count, summed similarity of
each member to the set's seed (its first review, self-similarity included,
negative cosines clamped to 0), and summed ratings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .features import cosine
from .sentiment import FINE_LABELS


class GroupingError(ValueError):
    pass


LINKAGES = ("member", "seed")


@dataclass(frozen=True)
class GroupingConfig:
    """``linkage="member"``: a review joins the earliest-seeded set holding
    *any* member at cosine >= t0. ``"seed"``: only the seed is compared.

    Member linkage is the default because its set count can only grow as t0
    rises (a review seeds a set iff no earlier review reaches t0); the
    seed-only rule does not have that property.
    """

    t0: float = 0.95
    backend: str = "lsa"  # "lsa" | "external"
    linkage: str = "member"

    def __post_init__(self):
        if not 0.0 <= self.t0 <= 1.0:
            raise ValueError(f"t0 must lie in [0, 1], got {self.t0}")
        if self.linkage not in LINKAGES:
            raise ValueError(f"linkage must be one of {LINKAGES}")
        if self.backend not in ("lsa", "external"):
            raise ValueError("backend must be 'lsa' or 'external'")


@dataclass(frozen=True)
class OpinionGroup:
    seed_review_id: str
    member_review_ids: tuple[str, ...]
    n: int
    ss: float
    sv: float

    def __post_init__(self):
        if self.n != len(self.member_review_ids) or self.n < 1:
            raise ValueError("group size must equal the member count and be >= 1")
        if self.member_review_ids[0] != self.seed_review_id:
            raise ValueError("seed must be the first member")


def group_statistics(vectors: Sequence[np.ndarray], ratings: Sequence[float]) -> tuple[int, float, float]:
    """``(N, SS, SV)`` for a group whose first vector is the seed."""
    if not vectors:
        raise GroupingError("empty group")
    if len(vectors) != len(ratings):
        raise GroupingError("vectors and ratings differ in length")
    seed = vectors[0]
    sims = [max(0.0, cosine(seed, v)) for v in vectors]
    # self-similarity is 1 by definition, also for an all-zero (out-of-vocabulary) seed
    sims[0] = 1.0
    return len(vectors), math.fsum(sims), math.fsum(float(r) for r in ratings)


def _lookup(ids, table, what):
    missing = [i for i in ids if i not in table]
    if missing:
        raise GroupingError(f"no {what} for review(s) {missing[:5]}")


def fuse_and_group(
    review_ids: Sequence[str],
    vectors: Mapping[str, np.ndarray],
    ratings: Mapping[str, float],
    cfg: Optional[GroupingConfig] = None,
) -> list[OpinionGroup]:
    """Single greedy pass in input order; see :class:`GroupingConfig` for linkage."""
    cfg = cfg or GroupingConfig()
    _lookup(review_ids, vectors, "vector")
    _lookup(review_ids, ratings, "rating")
    if len(set(review_ids)) != len(review_ids):
        raise GroupingError("duplicate review ids")
    members: list[list[str]] = []
    for rid in review_ids:
        v = vectors[rid]
        target = None
        for g, group in enumerate(members):
            candidates = group if cfg.linkage == "member" else group[:1]
            if any(cosine(vectors[m], v) >= cfg.t0 for m in candidates):
                target = g
                break
        if target is None:
            members.append([rid])
        else:
            members[target].append(rid)
    groups = []
    for group in members:
        n, ss, sv = group_statistics([vectors[m] for m in group], [ratings[m] for m in group])
        groups.append(OpinionGroup(group[0], tuple(group), n, ss, sv))
    return groups


def group_by_polarity(
    positive_ids: Sequence[str],
    negative_ids: Sequence[str],
    vectors: Mapping[str, np.ndarray],
    ratings: Mapping[str, float],
    cfg: Optional[GroupingConfig] = None,
) -> tuple[list[OpinionGroup], list[OpinionGroup]]:
    overlap = set(positive_ids) & set(negative_ids)
    if overlap:
        raise GroupingError(f"review(s) on both polarity sides: {sorted(overlap)[:5]}")
    return (
        fuse_and_group(positive_ids, vectors, ratings, cfg),
        fuse_and_group(negative_ids, vectors, ratings, cfg),
    )


def group_by_fine_grained(
    class_ids: Mapping[str, Sequence[str]],
    vectors: Mapping[str, np.ndarray],
    ratings: Mapping[str, float],
) -> dict[str, OpinionGroup]:
    """One group per non-empty intensity class, seeded by the class's first review.

    No threshold fusion happens inside a class. Output follows the fixed
    class order.
    """
    unknown = set(class_ids) - set(FINE_LABELS)
    if unknown:
        raise GroupingError(f"unknown class label(s): {sorted(unknown)}")
    seen: set[str] = set()
    out = {}
    for label in FINE_LABELS:
        ids = list(class_ids.get(label, ()))
        if not ids:
            continue
        if seen & set(ids):
            raise GroupingError("class partition overlaps")
        seen.update(ids)
        _lookup(ids, vectors, "vector")
        _lookup(ids, ratings, "rating")
        n, ss, sv = group_statistics([vectors[i] for i in ids], [ratings[i] for i in ids])
        out[label] = OpinionGroup(ids[0], tuple(ids), n, ss, sv)
    return out
