"""Sentiment classifiers and the polarity/intensity decisions built on them.

Label order is fixed: ``negative < positive`` for polarity and the five
intensity classes from most negative to most positive. Every argmax breaks
ties toward the earlier (more negative) label.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .corpus import TokenizedReview
from .features import Vocabulary, build_vocabulary, vectorize_many

NEGATIVE = "negative"
POSITIVE = "positive"
POLARITY_LABELS = (NEGATIVE, POSITIVE)
MODEL_FORMAT = "repute-model"
MODEL_VERSION = 1


class FineGrainedLabel(str, Enum):
    STRONGLY_NEGATIVE = "strongly_negative"
    WEAKLY_NEGATIVE = "weakly_negative"
    NEUTRAL = "neutral"
    WEAKLY_POSITIVE = "weakly_positive"
    STRONGLY_POSITIVE = "strongly_positive"

    @property
    def polarity(self) -> Optional[str]:
        if self in (FineGrainedLabel.STRONGLY_NEGATIVE, FineGrainedLabel.WEAKLY_NEGATIVE):
            return NEGATIVE
        if self in (FineGrainedLabel.WEAKLY_POSITIVE, FineGrainedLabel.STRONGLY_POSITIVE):
            return POSITIVE
        return None


FINE_LABELS = tuple(label.value for label in FineGrainedLabel)


class ModelError(ValueError):
    pass


def canonical_order(labels) -> tuple[str, ...]:
    """Sort labels into the declared order; unknown labels follow alphabetically."""
    labels = set(labels)
    for known in (POLARITY_LABELS, FINE_LABELS):
        if labels <= set(known):
            return tuple(l for l in known if l in labels)
    return tuple(sorted(labels))


@dataclass(frozen=True)
class PolarityPrediction:
    labels: tuple[str, ...]
    probabilities: tuple[float, ...]

    def __post_init__(self):
        if len(self.labels) != len(self.probabilities) or not self.labels:
            raise ValueError("labels and probabilities must be non-empty and aligned")

    @property
    def label(self) -> str:
        return self.labels[int(np.argmax(self.probabilities))]

    def posterior(self, label: str) -> float:
        return self.probabilities[self.labels.index(label)]


def _softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - np.max(scores, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


# ---------------------------------------------------------------------------
# Multinomial naive Bayes
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class NaiveBayesModel:
    labels: tuple[str, ...]
    log_prior: np.ndarray       # (C,)
    log_likelihood: np.ndarray  # (C, |V|)
    vocabulary: Vocabulary
    alpha: float = 1.0

    def log_scores(self, docs: Sequence[TokenizedReview]) -> np.ndarray:
        x = vectorize_many(docs, self.vocabulary, "count")
        return np.asarray(x @ self.log_likelihood.T) + self.log_prior

    def predict(self, doc: TokenizedReview) -> PolarityPrediction:
        return self.predict_many([doc])[0]

    def predict_many(self, docs: Sequence[TokenizedReview]) -> list[PolarityPrediction]:
        if not docs:
            return []
        probs = _softmax(self.log_scores(docs))
        return [PolarityPrediction(self.labels, tuple(float(p) for p in row)) for row in probs]

    def predict_label(self, doc: TokenizedReview) -> str:
        return self.predict(doc).label


def train_nb(
    docs: Sequence[TokenizedReview],
    labels: Sequence[str],
    ngram=(1,),
    min_df: int = 1,
    alpha: float = 1.0,
    vocabulary: Optional[Vocabulary] = None,
    label_set: Optional[Sequence[str]] = None,
) -> NaiveBayesModel:
    """Fit a multinomial NB on n-gram counts with additive smoothing ``alpha``.

    ``label_set`` pins the class list; a declared class without examples is an
    error rather than a silently dropped column.
    """
    if len(docs) != len(labels):
        raise ValueError("docs and labels differ in length")
    if not docs:
        raise ValueError("empty training corpus")
    if alpha <= 0:
        raise ValueError("smoothing alpha must be positive")
    classes = canonical_order(label_set if label_set is not None else labels)
    unknown = set(labels) - set(classes)
    if unknown:
        raise ValueError(f"labels outside the declared set: {sorted(unknown)}")
    y = np.array([classes.index(l) for l in labels])
    counts = np.bincount(y, minlength=len(classes))
    empty = [classes[i] for i in np.flatnonzero(counts == 0)]
    if empty:
        raise ValueError(f"class(es) with zero training examples: {empty}")

    vocab = vocabulary if vocabulary is not None else build_vocabulary(docs, ngram=ngram, min_df=min_df)
    x = vectorize_many(docs, vocab, "count")
    indicator = sp.csr_matrix((np.ones(len(y)), (y, np.arange(len(y)))), shape=(len(classes), len(y)))
    feature_counts = np.asarray((indicator @ x).todense()) + alpha
    if feature_counts.shape[1]:
        log_likelihood = np.log(feature_counts) - np.log(feature_counts.sum(axis=1, keepdims=True))
    else:  # every training doc was empty after preprocessing
        log_likelihood = feature_counts
    log_prior = np.log(counts) - np.log(counts.sum())
    return NaiveBayesModel(
        labels=classes,
        log_prior=log_prior,
        log_likelihood=log_likelihood,
        vocabulary=vocab,
        alpha=float(alpha),
    )


def predict_nb(model: NaiveBayesModel, doc: TokenizedReview) -> PolarityPrediction:
    return model.predict(doc)


# ---------------------------------------------------------------------------
# linear SVM
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LinearSvmModel:
    weights: np.ndarray
    bias: float
    labels: tuple[str, str] = POLARITY_LABELS
    lam: float = 1e-4
    epochs: int = 10
    seed: int = 0
    loss_history: tuple[float, ...] = ()
    vocabulary: Optional[Vocabulary] = None
    weighting: str = "tfidf"

    def decision(self, x) -> np.ndarray:
        return np.asarray(x @ self.weights).ravel() + self.bias

    def featurize(self, docs: Sequence[TokenizedReview]):
        if self.vocabulary is None:
            raise ModelError("this SVM was trained on raw vectors; pass feature rows to decision()")
        return vectorize_many(docs, self.vocabulary, self.weighting)

    def predict_label(self, doc: TokenizedReview) -> str:
        return self.predict_labels([doc])[0]

    def predict_labels(self, docs: Sequence[TokenizedReview]) -> list[str]:
        if not docs:
            return []
        scores = self.decision(self.featurize(docs))
        # a zero margin falls to the negative side
        return [self.labels[1] if s > 0 else self.labels[0] for s in scores]


def hinge_objective(x, y: np.ndarray, weights: np.ndarray, bias: float, lam: float) -> float:
    margins = y * (np.asarray(x @ weights).ravel() + bias)
    return 0.5 * lam * float(weights @ weights) + float(np.mean(np.maximum(0.0, 1.0 - margins)))


def train_svm(
    x,
    labels: Sequence[str],
    lam: float = 1e-4,
    epochs: int = 10,
    seed: int = 0,
    vocabulary: Optional[Vocabulary] = None,
    weighting: str = "tfidf",
) -> LinearSvmModel:
    """L2-regularized hinge-loss linear classifier fit by seeded SGD.

    Step size ``1 / (lam * t + 1)``. The weights are stored as ``a * v`` so
    the shrink step is O(1) on sparse rows. The returned model is the epoch
    iterate with the lowest objective, so it never scores worse than the state
    after the first epoch.
    """
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    classes = canonical_order(labels)
    if len(classes) != 2:
        raise ValueError(f"SVM needs exactly two classes, got {list(classes)}")
    x = sp.csr_matrix(x, dtype=float)
    n, d = x.shape
    if n != len(labels):
        raise ValueError("feature rows and labels differ in length")
    y = np.array([1.0 if l == classes[1] else -1.0 for l in labels])

    rng = np.random.default_rng(seed)
    v = np.zeros(d)
    scale = 1.0
    bias = 0.0
    t = 0
    best = None
    history = []
    indptr, indices, data = x.indptr, x.indices, x.data
    for _ in range(epochs):
        for i in rng.permutation(n):
            t += 1
            eta = 1.0 / (lam * t + 1.0)
            lo, hi = indptr[i], indptr[i + 1]
            cols, vals = indices[lo:hi], data[lo:hi]
            margin = y[i] * (scale * float(v[cols] @ vals) + bias)
            scale *= 1.0 - eta * lam
            if margin < 1.0:
                v[cols] += (eta * y[i] / scale) * vals
                bias += eta * y[i]
            if scale < 1e-9:
                v *= scale
                scale = 1.0
        w = scale * v
        obj = hinge_objective(x, y, w, bias, lam)
        history.append(obj)
        if best is None or obj < best[0]:
            best = (obj, w.copy(), bias)
    _, w, b = best
    return LinearSvmModel(
        weights=w,
        bias=float(b),
        labels=classes,  # type: ignore[arg-type]
        lam=float(lam),
        epochs=int(epochs),
        seed=int(seed),
        loss_history=tuple(history),
        vocabulary=vocabulary,
        weighting=weighting,
    )


def train_svm_on_docs(
    docs: Sequence[TokenizedReview],
    labels: Sequence[str],
    lam: float = 1e-4,
    epochs: int = 10,
    seed: int = 0,
    ngram=(1,),
    min_df: int = 1,
) -> LinearSvmModel:
    """SVM over TF-IDF n-grams of ``docs``; the vocabulary travels with the model."""
    vocab = build_vocabulary(docs, ngram=ngram, min_df=min_df)
    x = vectorize_many(docs, vocab, "tfidf")
    return train_svm(x, labels, lam=lam, epochs=epochs, seed=seed, vocabulary=vocab, weighting="tfidf")


# ---------------------------------------------------------------------------
# decisions built on the classifiers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CascadeResult:
    positive: tuple[int, ...]
    negative: tuple[int, ...]
    stage: tuple[int, ...]            # stage (1, 2, 3) that settled each review
    nb_labels: tuple[str, ...]
    svm_labels: Mapping[int, str] = field(default_factory=dict)

    def label(self, i: int) -> str:
        return POSITIVE if i in set(self.positive) else NEGATIVE

    @property
    def labels(self) -> list[str]:
        pos = set(self.positive)
        return [POSITIVE if i in pos else NEGATIVE for i in range(len(self.stage))]


def cascade_classify(
    docs: Sequence[TokenizedReview],
    ratings: Sequence[float],
    nb,
    svm,
    midpoint: float = 5.0,
) -> CascadeResult:
    """Three-stage polarity split of reviews.

    1. NB label agreeing with the rating side (``> midpoint`` positive) is final.
    2. Otherwise the SVM votes; NB/SVM agreement is final.
    3. Remaining conflicts follow the rating side.

    ``nb`` needs ``predict(doc) -> PolarityPrediction`` and ``svm`` needs
    ``predict_label(doc) -> str``; the SVM is only consulted for stage-2 reviews.
    """
    if len(docs) != len(ratings):
        raise ValueError(f"{len(docs)} reviews but {len(ratings)} ratings")
    nb_labels = []
    positive, negative, remaining = [], [], []
    for i, doc in enumerate(docs):
        label = nb.predict(doc).label
        nb_labels.append(label)
        rating_positive = ratings[i] > midpoint
        if label == POSITIVE and rating_positive:
            positive.append(i)
        elif label == NEGATIVE and not rating_positive:
            negative.append(i)
        else:
            remaining.append(i)
    stage = [1] * len(docs)
    svm_labels = {}
    for i in remaining:
        svm_label = svm.predict_label(docs[i])
        svm_labels[i] = svm_label
        if nb_labels[i] == svm_label:
            stage[i] = 2
            (positive if svm_label == POSITIVE else negative).append(i)
        else:
            stage[i] = 3
            (positive if ratings[i] > midpoint else negative).append(i)
    return CascadeResult(
        positive=tuple(sorted(positive)),
        negative=tuple(sorted(negative)),
        stage=tuple(stage),
        nb_labels=tuple(nb_labels),
        svm_labels=svm_labels,
    )


def classify_fine_grained(model, doc: TokenizedReview) -> FineGrainedLabel:
    if tuple(model.labels) != FINE_LABELS:
        raise ModelError(f"model classes {list(model.labels)} are not the five intensity labels")
    return FineGrainedLabel(model.predict(doc).label)


def sentiment_score(pred: PolarityPrediction) -> float:
    """Orientation score: the larger of the two polarity posteriors."""
    if len(pred.probabilities) != 2:
        raise ValueError("sentiment score needs a binary prediction")
    return float(max(pred.probabilities))


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class ClassifierMetrics:
    labels: tuple[str, ...]
    per_class: Mapping[str, ClassMetrics]
    macro: ClassMetrics
    weighted: ClassMetrics
    accuracy: float
    confusion: np.ndarray  # rows gold, columns predicted

    def format(self) -> str:
        width = max(12, max(len(l) for l in self.labels) + 2)
        lines = [f"{'':<{width}}{'precision':>10}{'recall':>10}{'f1':>10}{'support':>10}"]
        rows = [(l, self.per_class[l]) for l in self.labels]
        rows += [("macro avg", self.macro), ("weighted avg", self.weighted)]
        for name, m in rows:
            lines.append(f"{name:<{width}}{m.precision:>10.4f}{m.recall:>10.4f}{m.f1:>10.4f}{m.support:>10d}")
        lines.append(f"{'accuracy':<{width}}{self.accuracy:>40.4f}")
        return "\n".join(lines)


def _ratio(num: float, den: float) -> float:
    return num / den if den else 0.0


def evaluate_classifier(preds: Sequence[str], gold: Sequence[str], labels: Optional[Sequence[str]] = None) -> ClassifierMetrics:
    """Per-class and averaged precision/recall/F1, accuracy and confusion matrix.

    Undefined ratios (no predictions or no gold items for a class) count as 0.
    """
    if len(preds) != len(gold):
        raise ValueError("predictions and gold labels differ in length")
    if not preds:
        raise ValueError("cannot evaluate an empty prediction list")
    labels = tuple(labels) if labels is not None else canonical_order(set(preds) | set(gold))
    pos = {l: i for i, l in enumerate(labels)}
    confusion = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for p, g in zip(preds, gold):
        confusion[pos[g], pos[p]] += 1
    per_class = {}
    for l, i in pos.items():
        tp = confusion[i, i]
        precision = _ratio(tp, confusion[:, i].sum())
        recall = _ratio(tp, confusion[i, :].sum())
        f1 = _ratio(2 * precision * recall, precision + recall)
        per_class[l] = ClassMetrics(precision, recall, f1, int(confusion[i, :].sum()))
    total = int(confusion.sum())
    supports = np.array([per_class[l].support for l in labels], dtype=float)

    def avg(attr, weights):
        vals = np.array([getattr(per_class[l], attr) for l in labels])
        return float(np.average(vals, weights=weights)) if weights.sum() else 0.0

    ones = np.ones(len(labels))
    macro = ClassMetrics(avg("precision", ones), avg("recall", ones), avg("f1", ones), total)
    weighted = ClassMetrics(avg("precision", supports), avg("recall", supports), avg("f1", supports), total)
    return ClassifierMetrics(
        labels=labels,
        per_class=per_class,
        macro=macro,
        weighted=weighted,
        accuracy=float(np.trace(confusion)) / total,
        confusion=confusion,
    )


# ---------------------------------------------------------------------------
# externally computed posteriors
# ---------------------------------------------------------------------------


class ExternalPredictions:
    """Posteriors computed elsewhere (e.g. a fine-tuned transformer), keyed by review id.

    Behaves like a model: ``predict(doc)`` looks the doc up by ``review_id``.
    """

    def __init__(self, predictions: Mapping[str, PolarityPrediction], labels: Sequence[str]):
        self.labels = tuple(labels)
        self._predictions = dict(predictions)

    def __len__(self):
        return len(self._predictions)

    def predict(self, doc: TokenizedReview) -> PolarityPrediction:
        try:
            return self._predictions[doc.review_id]
        except KeyError:
            raise KeyError(f"no external prediction for review {doc.review_id!r}") from None

    def predict_label(self, doc: TokenizedReview) -> str:
        return self.predict(doc).label


def load_external_probabilities(path, labels: Sequence[str] = POLARITY_LABELS) -> ExternalPredictions:
    """Read ``review_id p_1 ... p_C`` lines, columns in ``labels`` order."""
    labels = tuple(labels)
    out = {}
    with open(Path(path), encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            parts = raw.split()
            if not parts:
                continue
            rid, comps = parts[0], parts[1:]
            if len(comps) != len(labels):
                raise ValueError(f"line {line_no}: expected {len(labels)} probabilities, got {len(comps)}")
            try:
                probs = tuple(float(c) for c in comps)
            except ValueError:
                raise ValueError(f"line {line_no}: non-numeric probability") from None
            if any(not (0.0 <= p <= 1.0) for p in probs) or abs(math.fsum(probs) - 1.0) > 1e-6:
                raise ValueError(f"line {line_no}: probabilities must lie in [0,1] and sum to 1")
            out[rid] = PolarityPrediction(labels, probs)
    return ExternalPredictions(out, labels)


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------


def model_to_dict(model) -> dict:
    if isinstance(model, NaiveBayesModel):
        body = {
            "kind": "naive_bayes",
            "labels": list(model.labels),
            "alpha": model.alpha,
            "log_prior": [float(x) for x in model.log_prior],
            "log_likelihood": [[float(x) for x in row] for row in model.log_likelihood],
        }
        vocab = model.vocabulary
    elif isinstance(model, LinearSvmModel):
        body = {
            "kind": "linear_svm",
            "labels": list(model.labels),
            "lam": model.lam,
            "epochs": model.epochs,
            "seed": model.seed,
            "bias": model.bias,
            "weighting": model.weighting,
            "loss_history": list(model.loss_history),
            "weights": [float(x) for x in model.weights],
        }
        vocab = model.vocabulary
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    if vocab is None:
        raise ModelError("only models with an attached vocabulary can be saved")
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        **body,
        "vocabulary_hash": vocab.digest,
        "vocabulary": vocab.to_dict(),
    }


def model_from_dict(d: Mapping, expected_vocabulary: Optional[Vocabulary] = None):
    if d.get("format") != MODEL_FORMAT:
        raise ModelError("not a repute model file")
    if d.get("version") != MODEL_VERSION:
        raise ModelError(f"unsupported model version {d.get('version')!r}")
    vocab = Vocabulary.from_dict(d["vocabulary"])
    if vocab.digest != d["vocabulary_hash"]:
        raise ModelError("vocabulary hash mismatch: model file is corrupt or was edited")
    if expected_vocabulary is not None and expected_vocabulary.digest != vocab.digest:
        raise ModelError("model was trained against a different vocabulary")
    kind = d.get("kind")
    if kind == "naive_bayes":
        return NaiveBayesModel(
            labels=tuple(d["labels"]),
            log_prior=np.array(d["log_prior"], dtype=float),
            log_likelihood=np.array(d["log_likelihood"], dtype=float),
            vocabulary=vocab,
            alpha=float(d["alpha"]),
        )
    if kind == "linear_svm":
        return LinearSvmModel(
            weights=np.array(d["weights"], dtype=float),
            bias=float(d["bias"]),
            labels=tuple(d["labels"]),  # type: ignore[arg-type]
            lam=float(d["lam"]),
            epochs=int(d["epochs"]),
            seed=int(d["seed"]),
            loss_history=tuple(d["loss_history"]),
            vocabulary=vocab,
            weighting=d["weighting"],
        )
    raise ModelError(f"unknown model kind {kind!r}")


def save_model(model, path):
    text = json.dumps(model_to_dict(model), separators=(",", ":"))
    Path(path).write_text(text + "\n", encoding="utf-8")


def load_model(path, expected_vocabulary: Optional[Vocabulary] = None):
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ModelError(f"{path}: unreadable model file ({exc.msg})") from None
    return model_from_dict(d, expected_vocabulary)
