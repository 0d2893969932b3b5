"""End-to-end reputation pipelines wiring classifiers, grouping and scoring.

Four pipelines are available:

``cascade-fusion``
    Cascade polarity split, similarity fusion into opinion sets per polarity,
    set-level reputation, then an opinion-count weighted mean.
``fine-grained``
    Five-class intensity labels; each class forms one group whose custom
    score feeds a class-size weighted mean.
``attribute-aggregation``
    Per-review score from helpfulness, time and sentiment orientation
    (uniform mean), multiplied into the rating mean.
``credibility``
    As above with author credibility in place of sentiment and weighted
    components.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .config import (
    ATTRIBUTE_AGGREGATION,
    CASCADE_FUSION,
    CREDIBILITY,
    FINE_GRAINED,
    PipelineConfig,
)
from .corpus import (
    PreprocessOptions,
    ReviewDataset,
    TokenizedReview,
    ValidationError,
    impute_missing_ratings,
    require_ratings,
    tokenize_reviews,
)
from .features import lsa_vectors
from .grouping import GroupingConfig, OpinionGroup, group_by_fine_grained, group_by_polarity
from .reputation import (
    RankedReview,
    ReputationResult,
    category_distribution,
    class_custom_score,
    class_weighted_reputation,
    combine_polarity_reputations,
    group_set_reputation,
    label_distribution,
    score_weighted_reputation,
    top_k_reviews,
)
from .scoring import (
    ReviewScoreBreakdown,
    credibility_score,
    helpfulness_score,
    max_helpful_votes,
    review_score_uniform,
    review_score_weighted,
    time_score,
)
from .sentiment import FINE_LABELS, POLARITY_LABELS, FineGrainedLabel, cascade_classify, sentiment_score

log = logging.getLogger(__name__)


class MissingModelError(ValueError):
    """A pipeline needs a model or prediction file that was not supplied."""

    def __init__(self, what: str, hint: str):
        super().__init__(f"missing {what}; {hint}")


_TRAIN_HINT = "create it with `repute train --pipeline {pipeline} CORPUS --out DIR`"


@dataclass
class Models:
    """Classifiers and vectors a pipeline may consume.

    ``polarity`` is any object with ``predict(doc) -> PolarityPrediction`` over
    the two polarity labels (a trained NB or precomputed probabilities);
    ``svm`` needs ``predict_label(doc)``; ``fine`` is a five-class predictor.
    """

    polarity: Optional[object] = None
    svm: Optional[object] = None
    fine: Optional[object] = None
    vectors: Optional[Mapping[str, np.ndarray]] = None


def _require(model, what: str, cfg: PipelineConfig, flag: str):
    if model is None:
        hint = _TRAIN_HINT.format(pipeline=cfg.pipeline) + f" and pass it with {flag}"
        raise MissingModelError(what, hint)
    return model


def _check_labels(model, expected: Sequence[str], what: str):
    labels = tuple(getattr(model, "labels", expected))
    if labels != tuple(expected):
        raise ValueError(f"{what} has classes {list(labels)}, expected {list(expected)}")


def _preprocess_options(cfg: PipelineConfig) -> PreprocessOptions:
    return PreprocessOptions(remove_stopwords=cfg.remove_stopwords, stem=cfg.stem)


def _ratings(ds: ReviewDataset, cfg: PipelineConfig, impute: bool = False) -> tuple[ReviewDataset, list[float]]:
    if not ds.reviews:
        raise ValidationError("no reviews")
    if ds.scale_max != cfg.scale_max:
        raise ValidationError(f"dataset scale {ds.scale_max} differs from configured scale {cfg.scale_max}")
    if impute:
        ds = impute_missing_ratings(ds)
    return ds, require_ratings(ds)


def _vectors(docs: Sequence[TokenizedReview], cfg: PipelineConfig, models: Models) -> Mapping[str, np.ndarray]:
    if models.vectors is not None:
        missing = [d.review_id for d in docs if d.review_id not in models.vectors]
        if missing:
            raise ValueError(f"external vectors lack review(s) {missing[:5]}")
        return models.vectors
    return lsa_vectors(docs, k=cfg.lsa_rank)


def _ranked(ds: ReviewDataset, polarity: Sequence[Optional[str]], scores: Sequence[float],
            components: Sequence[Mapping[str, Optional[float]]]) -> list[RankedReview]:
    return [
        RankedReview(
            review_id=r.id,
            polarity=polarity[i],
            review_score=float(scores[i]),
            helpful_votes=r.helpful_votes,
            posting_year=r.posting_year,
            position=i,
            text=r.text,
            rating=r.rating,
            components={k: components[i].get(k) for k in ("H", "T", "S", "C")},
        )
        for i, r in enumerate(ds.reviews)
    ]


def _result(ds, cfg, reputation, categories, ranked, details) -> ReputationResult:
    top_pos, top_neg = top_k_reviews(ranked, cfg.top_k)
    return ReputationResult(
        entity_id=ds.entity_id,
        pipeline=cfg.pipeline,
        reputation=float(reputation),
        scale_max=ds.scale_max,
        categories=categories,
        top_positive=tuple(top_pos),
        top_negative=tuple(top_neg),
        details=details,
    )


def _group_record(g: OpinionGroup, **extra) -> dict:
    return {
        "seed_review_id": g.seed_review_id,
        "member_review_ids": list(g.member_review_ids),
        "n": g.n,
        "ss": g.ss,
        "sv": g.sv,
        **extra,
    }


# ---------------------------------------------------------------------------
# cascade-fusion
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CascadeState:
    """Everything in the cascade-fusion pipeline that does not depend on t0."""

    ds: ReviewDataset
    ratings: tuple[float, ...]
    positive_ids: tuple[str, ...]
    negative_ids: tuple[str, ...]
    polarity: tuple[str, ...]
    stage: tuple[int, ...]
    scores: tuple[float, ...]
    vectors: Mapping[str, np.ndarray]


def prepare_cascade(ds: ReviewDataset, cfg: PipelineConfig, models: Models) -> CascadeState:
    nb = _require(models.polarity, "polarity model", cfg, "--nb-model")
    svm = _require(models.svm, "SVM model", cfg, "--svm-model")
    _check_labels(nb, POLARITY_LABELS, "polarity model")
    ds, ratings = _ratings(ds, cfg)
    docs = tokenize_reviews(ds.reviews, _preprocess_options(cfg))
    cascade = cascade_classify(docs, ratings, nb, svm, midpoint=cfg.effective_midpoint)
    ids = [r.id for r in ds.reviews]
    scores = tuple(sentiment_score(p) for p in _predict_all(nb, docs))
    return CascadeState(
        ds=ds,
        ratings=tuple(ratings),
        positive_ids=tuple(ids[i] for i in cascade.positive),
        negative_ids=tuple(ids[i] for i in cascade.negative),
        polarity=tuple(cascade.labels),
        stage=cascade.stage,
        scores=scores,
        vectors=_vectors(docs, cfg, models),
    )


def aggregate_cascade(state: CascadeState, cfg: PipelineConfig, t0: Optional[float] = None) -> ReputationResult:
    t0 = cfg.t0 if t0 is None else t0
    gcfg = GroupingConfig(t0=t0, linkage=cfg.linkage, backend="lsa")
    rating_of = {r.id: v for r, v in zip(state.ds.reviews, state.ratings)}
    pos_groups, neg_groups = group_by_polarity(
        state.positive_ids, state.negative_ids, state.vectors, rating_of, gcfg
    )
    rep_pos = group_set_reputation(pos_groups) if pos_groups else None
    rep_neg = group_set_reputation(neg_groups) if neg_groups else None
    reputation = combine_polarity_reputations(
        rep_pos, len(state.positive_ids), rep_neg, len(state.negative_ids)
    )
    ranked = _ranked(state.ds, state.polarity, state.scores, [{"S": s} for s in state.scores])
    details = {
        "t0": t0,
        "rep_positive": rep_pos,
        "rep_negative": rep_neg,
        "n_positive": len(state.positive_ids),
        "n_negative": len(state.negative_ids),
        "group_count": len(pos_groups) + len(neg_groups),
        "cascade_stage_counts": {str(s): state.stage.count(s) for s in (1, 2, 3)},
        "groups": [_group_record(g, polarity="positive") for g in pos_groups]
        + [_group_record(g, polarity="negative") for g in neg_groups],
    }
    return _result(state.ds, cfg, reputation, category_distribution(state.ratings, state.ds.scale_max),
                   ranked, details)


def run_cascade_fusion(ds: ReviewDataset, cfg: PipelineConfig, models: Models) -> ReputationResult:
    return aggregate_cascade(prepare_cascade(ds, cfg, models), cfg)


def _predict_all(model, docs):
    many = getattr(model, "predict_many", None)
    return many(docs) if many is not None else [model.predict(d) for d in docs]


# ---------------------------------------------------------------------------
# fine-grained
# ---------------------------------------------------------------------------


def run_fine_grained(ds: ReviewDataset, cfg: PipelineConfig, models: Models) -> ReputationResult:
    fine = _require(models.fine, "five-class model", cfg, "--fine-model")
    _check_labels(fine, FINE_LABELS, "five-class model")
    n_imputed = sum(1 for r in ds.reviews if r.rating is None)
    ds, ratings = _ratings(ds, cfg, impute=cfg.impute_ratings)
    docs = tokenize_reviews(ds.reviews, _preprocess_options(cfg))
    preds = _predict_all(fine, docs)
    labels = [p.label for p in preds]
    class_ids: dict[str, list[str]] = {}
    for r, label in zip(ds.reviews, labels):
        class_ids.setdefault(label, []).append(r.id)
    rating_of = {r.id: v for r, v in zip(ds.reviews, ratings)}
    groups = group_by_fine_grained(class_ids, _vectors(docs, cfg, models), rating_of)
    scores = {l: class_custom_score(g.ss, g.sv, g.n, ds.scale_max) for l, g in groups.items()}
    sizes = {l: g.n for l, g in groups.items()}
    reputation = class_weighted_reputation(scores, sizes)
    confidence = [max(p.probabilities) for p in preds]
    polarity = [FineGrainedLabel(l).polarity for l in labels]
    ranked = _ranked(ds, polarity, confidence, [{"S": s} for s in confidence])
    details = {
        "labels": labels,
        "classes": [_group_record(g, label=l, custom_score=scores[l]) for l, g in groups.items()],
        "ratings_imputed": n_imputed,
    }
    return _result(ds, cfg, reputation, label_distribution(labels), ranked, details)


# ---------------------------------------------------------------------------
# review-score pipelines
# ---------------------------------------------------------------------------


def _current_year(ds: ReviewDataset, cfg: PipelineConfig) -> int:
    year = cfg.current_year if cfg.current_year is not None else ds.current_year
    if year is None:
        raise ValidationError("current year is not set; pass --current-year")
    return year


def review_breakdowns(ds: ReviewDataset, cfg: PipelineConfig, models: Models) -> tuple[list[ReviewScoreBreakdown], list[str]]:
    """Per-review component scores and polarity labels for the review-score pipelines."""
    predictor = _require(models.polarity, "polarity model or probabilities file", cfg,
                         "--nb-model or --probabilities")
    _check_labels(predictor, POLARITY_LABELS, "polarity model")
    year = _current_year(ds, cfg)
    docs = tokenize_reviews(ds.reviews, _preprocess_options(cfg))
    preds = _predict_all(predictor, docs)
    top_votes = max_helpful_votes([r.helpful_votes for r in ds.reviews])
    floor = cfg.effective_floor_h
    out = []
    for r, pred in zip(ds.reviews, preds):
        if r.posting_year is None:
            raise ValidationError(f"review {r.id!r} has no posting date")
        h = helpfulness_score(r.helpful_votes, top_votes, floor)
        t = time_score(r.posting_year, year)
        s = sentiment_score(pred)
        if cfg.pipeline == CREDIBILITY:
            c = credibility_score(r.user_helpful_votes, r.user_review_count, cfg.default_credibility)
            out.append(ReviewScoreBreakdown(r.id, h, t, review_score_weighted(h, t, c, cfg.weights), S=s, C=c))
        else:
            out.append(ReviewScoreBreakdown(r.id, h, t, review_score_uniform(h, t, s), S=s))
    return out, [p.label for p in preds]


def run_review_score(ds: ReviewDataset, cfg: PipelineConfig, models: Models) -> ReputationResult:
    ds, ratings = _ratings(ds, cfg)
    breakdowns, polarity = review_breakdowns(ds, cfg, models)
    scores = [b.RS for b in breakdowns]
    reputation = score_weighted_reputation(scores, ratings)
    ranked = _ranked(ds, polarity, scores, [b.components() for b in breakdowns])
    details = {
        "reviews": [
            {"review_id": b.review_id, "polarity": p, "H": b.H, "T": b.T, "S": b.S, "C": b.C, "RS": b.RS}
            for b, p in zip(breakdowns, polarity)
        ],
    }
    return _result(ds, cfg, reputation, category_distribution(ratings, ds.scale_max), ranked, details)


RUNNERS = {
    CASCADE_FUSION: run_cascade_fusion,
    FINE_GRAINED: run_fine_grained,
    ATTRIBUTE_AGGREGATION: run_review_score,
    CREDIBILITY: run_review_score,
}


def run_pipeline(ds: ReviewDataset, cfg: PipelineConfig, models: Models) -> ReputationResult:
    log.debug("running %s on %s (%d reviews)", cfg.pipeline, ds.entity_id, len(ds))
    return RUNNERS[cfg.pipeline](ds, cfg, models)
