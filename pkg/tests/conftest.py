import csv
import random
from pathlib import Path

import numpy as np
import pytest

from repute.corpus import FIELDS, Review, ReviewDataset, preprocess
from repute.sentiment import (
    FINE_LABELS,
    NEGATIVE,
    POLARITY_LABELS,
    POSITIVE,
    ExternalPredictions,
    PolarityPrediction,
    train_nb,
    train_svm_on_docs,
)

POSITIVE_WORDS = ["great", "wonderful", "excellent", "brilliant", "superb", "delightful", "loved"]
NEGATIVE_WORDS = ["awful", "terrible", "boring", "dreadful", "horrible", "wasted", "hated"]
FILLER = ["film", "movie", "plot", "acting", "scene", "director", "story", "cast"]


def polarity_corpus(n_per_class=30, seed=7):
    """Synthetic labelled texts: each doc mixes filler with words of its polarity."""
    rng = random.Random(seed)
    pairs = []
    for i in range(2 * n_per_class):
        label = POSITIVE if i % 2 == 0 else NEGATIVE
        words = POSITIVE_WORDS if label == POSITIVE else NEGATIVE_WORDS
        text = " ".join(rng.sample(FILLER, 3) + rng.sample(words, 2))
        pairs.append((text, label))
    return pairs


FINE_WORDS = {
    "strongly_negative": ["abysmal", "atrocious", "unwatchable"],
    "weakly_negative": ["dull", "flat", "forgettable"],
    "neutral": ["average", "ordinary", "standard"],
    "weakly_positive": ["pleasant", "decent", "nice"],
    "strongly_positive": ["masterpiece", "stunning", "magnificent"],
}


def fine_corpus(n_per_class=12, seed=11):
    rng = random.Random(seed)
    pairs = []
    for i in range(n_per_class):
        for label in FINE_LABELS:
            text = " ".join(rng.sample(FILLER, 2) + rng.sample(FINE_WORDS[label], 2))
            pairs.append((text, label))
    return pairs


def docs_of(pairs):
    return [preprocess(t, review_id=str(i)) for i, (t, _) in enumerate(pairs)]


@pytest.fixture(scope="session")
def polarity_models():
    pairs = polarity_corpus()
    docs = docs_of(pairs)
    labels = [l for _, l in pairs]
    return train_nb(docs, labels), train_svm_on_docs(docs, labels, epochs=20, seed=0)


@pytest.fixture(scope="session")
def fine_model():
    pairs = fine_corpus()
    return train_nb(docs_of(pairs), [l for _, l in pairs], label_set=FINE_LABELS)


def write_csv(path: Path, rows, header=FIELDS):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([row.get(h, "") for h in header])
    return path


def make_dataset(ratings, texts=None, votes=None, years=None, scale_max=10, entity_id="e", **kw):
    n = len(ratings)
    texts = texts or [f"review number {i}" for i in range(n)]
    votes = votes or [0] * n
    years = years or [2020] * n
    reviews = tuple(
        Review(id=f"r{i + 1}", text=texts[i], rating=ratings[i], helpful_votes=votes[i], posting_year=years[i])
        for i in range(n)
    )
    return ReviewDataset(entity_id=entity_id, scale_max=scale_max, reviews=reviews, **kw)


def polar_predictions(p_positive):
    """ExternalPredictions from review id -> positive posterior."""
    return ExternalPredictions(
        {rid: PolarityPrediction(POLARITY_LABELS, (1 - p, p)) for rid, p in p_positive.items()}, POLARITY_LABELS
    )


def fine_predictions(labels):
    """ExternalPredictions putting 0.9 on the given fine label of each review."""
    out = {}
    for rid, label in labels.items():
        probs = tuple(0.9 if l == label else 0.025 for l in FINE_LABELS)
        out[rid] = PolarityPrediction(FINE_LABELS, probs)
    return ExternalPredictions(out, FINE_LABELS)


def vector_table(rows):
    return {rid: np.asarray(v, dtype=float) for rid, v in rows.items()}


# acceptance verdicts, printed once at the end of the run
ACCEPTANCE_RESULTS: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_RESULTS:
            terminalreporter.write_line(line)
