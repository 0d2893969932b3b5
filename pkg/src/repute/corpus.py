"""Review datasets: the in-memory model, file ingestion and text preprocessing.

Two on-disk layouts are understood, both carrying the same columns
(``id,text,rating,helpful_votes,date,user_id,user_review_count,
user_helpful_votes,gold_label``):

* comma-separated text with a header row (any extension except the JSON ones);
* one JSON object per line (``.jsonl`` / ``.ndjson``).

Absent optional values are empty strings (CSV) or empty/missing keys (JSONL).
"""

from __future__ import annotations

import csv
import json
import math
import re
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

from nltk.stem.porter import PorterStemmer

from .stopwords import ENGLISH_STOPWORDS

FIELDS = (
    "id",
    "text",
    "rating",
    "helpful_votes",
    "date",
    "user_id",
    "user_review_count",
    "user_helpful_votes",
    "gold_label",
)
REQUIRED_FIELDS = ("id", "text", "rating")
JSONL_SUFFIXES = (".jsonl", ".ndjson")


class DatasetError(ValueError):
    """Base class for dataset ingestion failures."""


class ParseError(DatasetError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class ValidationError(DatasetError):
    pass


@dataclass(frozen=True)
class Review:
    id: str
    text: str
    rating: Optional[float]
    helpful_votes: int = 0
    posting_year: Optional[int] = None
    user_id: str = ""
    user_review_count: Optional[int] = None
    user_helpful_votes: Optional[int] = None
    gold_label: Optional[str] = None


@dataclass(frozen=True)
class ReviewDataset:
    entity_id: str
    scale_max: int
    reviews: tuple[Review, ...]
    current_year: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "reviews", tuple(self.reviews))

    def __len__(self) -> int:
        return len(self.reviews)

    @property
    def ratings(self) -> list[Optional[float]]:
        return [r.rating for r in self.reviews]


@dataclass(frozen=True)
class TokenizedReview:
    review_id: str
    tokens: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))


@dataclass(frozen=True)
class PreprocessOptions:
    remove_stopwords: bool = True
    stem: bool = True
    stopwords: frozenset = field(default=ENGLISH_STOPWORDS, repr=False)


# ---------------------------------------------------------------------------
# ingestion
# ---------------------------------------------------------------------------

_YEAR_RE = re.compile(r"^\s*(\d{4})(?:-\d{1,2}(?:-\d{1,2})?(?:[T ].*)?)?\s*$")


def parse_year(value: str) -> Optional[int]:
    """Accept a bare year or an ISO date (``2019-06-01``) and keep the year."""
    value = value.strip()
    if not value:
        return None
    m = _YEAR_RE.match(value)
    if not m:
        raise ValueError(f"unrecognised date {value!r}")
    return int(m.group(1))


def _opt_int(value: str, name: str) -> Optional[int]:
    value = value.strip()
    if not value:
        return None
    try:
        number = float(value)
    except ValueError:
        raise ValueError(f"{name} is not a number: {value!r}") from None
    if not number.is_integer():
        raise ValueError(f"{name} must be an integer: {value!r}")
    return int(number)


def _opt_float(value: str, name: str) -> Optional[float]:
    value = value.strip()
    if not value:
        return None
    try:
        number = float(value)
    except ValueError:
        raise ValueError(f"{name} is not a number: {value!r}") from None
    if not math.isfinite(number):
        raise ValueError(f"{name} is not finite: {value!r}")
    return number


def _as_text(value) -> str:
    if value is None:
        return ""
    return str(value)


def _build_review(record: Mapping[str, str], line: int) -> Review:
    try:
        helpful = _opt_int(record.get("helpful_votes", ""), "helpful_votes")
        review = Review(
            id=record.get("id", "").strip(),
            text=record.get("text", ""),
            rating=_opt_float(record.get("rating", ""), "rating"),
            helpful_votes=0 if helpful is None else helpful,
            posting_year=parse_year(record.get("date", "")),
            user_id=record.get("user_id", "").strip(),
            user_review_count=_opt_int(record.get("user_review_count", ""), "user_review_count"),
            user_helpful_votes=_opt_int(record.get("user_helpful_votes", ""), "user_helpful_votes"),
            gold_label=record.get("gold_label", "").strip() or None,
        )
    except ValueError as exc:
        raise ParseError(line, str(exc)) from None
    if not review.id:
        raise ParseError(line, "empty review id")
    return review


def _validate(reviews: Sequence[Review], lines: Sequence[int], scale_max: int):
    if not reviews:
        raise ValidationError("no reviews")
    seen = set()
    for review, line in zip(reviews, lines):
        where = f"row {line} (id={review.id!r})"
        if review.id in seen:
            raise ValidationError(f"{where}: duplicate review id")
        seen.add(review.id)
        if review.rating is not None and not 1 <= review.rating <= scale_max:
            raise ValidationError(f"{where}: rating {review.rating:g} outside [1, {scale_max}]")
        if review.helpful_votes < 0:
            raise ValidationError(f"{where}: negative helpful_votes")
        if review.user_review_count is not None and review.user_review_count < 1:
            raise ValidationError(f"{where}: user_review_count must be >= 1")
        if review.user_helpful_votes is not None and review.user_helpful_votes < 0:
            raise ValidationError(f"{where}: negative user_helpful_votes")


def _read_csv(path: Path, schema: Mapping[str, str]):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            return [], []
        except csv.Error as exc:
            raise ParseError(1, str(exc)) from None
        header = [h.strip() for h in header]
        if header and header[0].startswith("\ufeff"):
            header[0] = header[0][1:]
        position = {name: i for i, name in enumerate(header)}
        columns = {}
        for canonical in FIELDS:
            column = schema.get(canonical, canonical)
            if column in position:
                columns[canonical] = position[column]
        missing = [f for f in REQUIRED_FIELDS if f not in columns]
        if missing:
            raise ParseError(1, f"header lacks required column(s): {', '.join(missing)}")
        records, lines = [], []
        while True:
            try:
                row = next(reader)
            except StopIteration:
                break
            except csv.Error as exc:
                raise ParseError(reader.line_num, str(exc)) from None
            line = reader.line_num
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(header):
                raise ParseError(line, f"expected {len(header)} fields, got {len(row)}")
            records.append({name: row[i] for name, i in columns.items()})
            lines.append(line)
    return records, lines


def _read_jsonl(path: Path, schema: Mapping[str, str]):
    records, lines = [], []
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise ParseError(line_no, f"invalid JSON: {exc.msg}") from None
            if not isinstance(obj, dict):
                raise ParseError(line_no, "record is not an object")
            record = {}
            for canonical in FIELDS:
                key = schema.get(canonical, canonical)
                if key in obj:
                    record[canonical] = _as_text(obj[key])
            missing = [f for f in REQUIRED_FIELDS if f not in record]
            if missing:
                raise ParseError(line_no, f"missing field(s): {', '.join(missing)}")
            records.append(record)
            lines.append(line_no)
    return records, lines


def load_dataset(
    path,
    schema: Optional[Mapping[str, str]] = None,
    scale_max: int = 10,
    current_year: Optional[int] = None,
    entity_id: Optional[str] = None,
) -> ReviewDataset:
    """Read a review file into a :class:`ReviewDataset`.

    ``schema`` maps canonical field names to the column (or JSON key) names used
    in the file; unmapped fields are looked up under their canonical name.
    The entity id defaults to the file stem.
    """
    path = Path(path)
    if scale_max not in (5, 10):
        raise ValidationError(f"scale_max must be 5 or 10, got {scale_max}")
    schema = dict(schema or {})
    if path.suffix.lower() in JSONL_SUFFIXES:
        records, lines = _read_jsonl(path, schema)
    else:
        records, lines = _read_csv(path, schema)
    reviews = [_build_review(rec, line) for rec, line in zip(records, lines)]
    _validate(reviews, lines, scale_max)
    return ReviewDataset(
        entity_id=entity_id or path.stem,
        scale_max=scale_max,
        reviews=tuple(reviews),
        current_year=current_year,
    )


def _fmt_number(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return str(int(value)) if value.is_integer() else repr(value)
    return str(value)


def review_record(review: Review) -> dict[str, str]:
    return {
        "id": review.id,
        "text": review.text,
        "rating": _fmt_number(review.rating),
        "helpful_votes": str(review.helpful_votes),
        "date": "" if review.posting_year is None else str(review.posting_year),
        "user_id": review.user_id,
        "user_review_count": _fmt_number(review.user_review_count),
        "user_helpful_votes": _fmt_number(review.user_helpful_votes),
        "gold_label": review.gold_label or "",
    }


def write_dataset(ds: ReviewDataset, path, extra_columns: Optional[Sequence[Mapping[str, str]]] = None):
    """Serialize ``ds`` in the format implied by the file extension.

    ``extra_columns`` optionally carries one mapping per review whose keys are
    appended after the canonical columns (used by ``classify`` output).
    """
    path = Path(path)
    rows = []
    for i, review in enumerate(ds.reviews):
        row = review_record(review)
        if extra_columns is not None:
            row.update({k: str(v) for k, v in extra_columns[i].items()})
        rows.append(row)
    header = list(FIELDS)
    if extra_columns:
        for key in extra_columns[0]:
            if key not in header:
                header.append(key)
    if path.suffix.lower() in JSONL_SUFFIXES:
        with open(path, "w", encoding="utf-8") as fh:
            for row in rows:
                fh.write(json.dumps({k: row.get(k, "") for k in header}, ensure_ascii=False) + "\n")
    else:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([row.get(k, "") for k in header])


def impute_missing_ratings(ds: ReviewDataset) -> ReviewDataset:
    """Fill absent ratings with the mean of the present ones."""
    present = [r.rating for r in ds.reviews if r.rating is not None]
    if not present:
        raise ValidationError("cannot impute: every rating is absent")
    if len(present) == len(ds.reviews):
        return ds
    mean = math.fsum(present) / len(present)
    mean = min(max(mean, min(present)), max(present))
    reviews = tuple(r if r.rating is not None else replace(r, rating=mean) for r in ds.reviews)
    return replace(ds, reviews=reviews)


def require_ratings(ds: ReviewDataset) -> list[float]:
    missing = [r.id for r in ds.reviews if r.rating is None]
    if missing:
        raise ValidationError(
            f"{len(missing)} review(s) without a rating (first: {missing[0]!r}); impute them first"
        )
    return [float(r.rating) for r in ds.reviews]


# ---------------------------------------------------------------------------
# preprocessing
# ---------------------------------------------------------------------------

_APOSTROPHES = re.compile(r"['’`]")
_WORD = re.compile(r"[a-z]+")
_stemmer = PorterStemmer()


@lru_cache(maxsize=200_000)
def stem(word: str) -> str:
    """Porter stem iterated to a fixed point, so stems are stable under re-stemming."""
    for _ in range(16):
        nxt = _stemmer.stem(word)
        if nxt == word:
            break
        word = nxt
    return word


def tokenize(text: str) -> list[str]:
    """Lowercase, delete apostrophes, and keep maximal runs of ASCII letters.

    Digits, punctuation and whitespace all act as separators, so the result
    never contains numeric or punctuation-only tokens.
    """
    return _WORD.findall(_APOSTROPHES.sub("", text.lower()))


def preprocess(text: str, opts: Optional[PreprocessOptions] = None, review_id: str = "") -> TokenizedReview:
    opts = opts or PreprocessOptions()
    tokens = tokenize(text)
    if opts.remove_stopwords:
        tokens = [t for t in tokens if t not in opts.stopwords]
    if opts.stem:
        tokens = [stem(t) for t in tokens]
        if opts.remove_stopwords:
            # stems may coincide with stopwords; filtering again keeps preprocess idempotent
            tokens = [t for t in tokens if t not in opts.stopwords]
    return TokenizedReview(review_id=review_id, tokens=tuple(tokens))


def tokenize_reviews(reviews: Iterable[Review], opts: Optional[PreprocessOptions] = None) -> list[TokenizedReview]:
    return [preprocess(r.text, opts, review_id=r.id) for r in reviews]


# ---------------------------------------------------------------------------
# labelled corpora
# ---------------------------------------------------------------------------

SST5_LABELS = (
    "strongly_negative",
    "weakly_negative",
    "neutral",
    "weakly_positive",
    "strongly_positive",
)


def load_labeled_corpus(path, schema: Optional[Mapping[str, str]] = None) -> list[tuple[str, str]]:
    """Return ``(text, label)`` pairs from a review file whose gold_label is set."""
    path = Path(path)
    schema = dict(schema or {})
    if path.suffix.lower() in JSONL_SUFFIXES:
        records, lines = _read_jsonl_loose(path)
    else:
        records, lines = _read_csv_loose(path)
    text_key = schema.get("text", "text")
    label_key = schema.get("gold_label", "gold_label")
    pairs = []
    for record, line in zip(records, lines):
        label = _as_text(record.get(label_key, "")).strip()
        if not label:
            raise ValidationError(f"row {line}: missing gold label (corpus must be labelled)")
        pairs.append((_as_text(record.get(text_key, "")), label))
    if not pairs:
        raise ValidationError("no labelled examples")
    return pairs


def _read_csv_loose(path: Path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        records, lines = [], []
        for row in reader:
            records.append(row)
            lines.append(reader.line_num)
    return records, lines


def _read_jsonl_loose(path: Path):
    records, lines = [], []
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            if raw.strip():
                try:
                    records.append(json.loads(raw))
                except json.JSONDecodeError as exc:
                    raise ParseError(line_no, f"invalid JSON: {exc.msg}") from None
                lines.append(line_no)
    return records, lines


_FASTTEXT = re.compile(r"^__label__(\d)\s+(.*)$")
_PTB_ROOT = re.compile(r"^\((\d)\s")


def _ptb_leaves(tree: str) -> str:
    # leaves are the tokens not preceded by "(": "(3 (2 It) (4 works))" -> "It works"
    words = re.findall(r"\(\d ([^()]+)\)", tree)
    return " ".join(words)


def _parse_sst_line(raw: str, line_no: int, path: Path) -> tuple[str, str]:
    raw = raw.strip()
    m = _FASTTEXT.match(raw)
    if m:
        label, text = int(m.group(1)), m.group(2)
        # fastText dumps number classes 1..5
        return text, SST5_LABELS[label - 1]
    if _PTB_ROOT.match(raw):
        return _ptb_leaves(raw), SST5_LABELS[int(raw[1])]
    if raw.startswith("{"):
        obj = json.loads(raw)
        return obj["text"], SST5_LABELS[int(obj["label"])]
    if "\t" in raw:
        first, second = raw.split("\t", 1)
        if first.strip().isdigit():
            return second, SST5_LABELS[int(first)]
        return first, SST5_LABELS[int(second)]
    raise ParseError(line_no, f"{path.name}: unrecognised SST-5 line")


def _find_split(directory: Path, split: str) -> Optional[Path]:
    candidates = [
        f"{split}.txt", f"{split}.jsonl", f"{split}.tsv",
        f"sst_{split}.txt", f"sst5_{split}.txt", f"stsa.fine.{split}",
    ]
    for name in candidates:
        p = directory / name
        if p.exists():
            return p
    for p in sorted(directory.glob(f"*{split}*")):
        if p.is_file():
            return p
    return None


def load_sst5(directory, split: str) -> list[tuple[str, str]]:
    """Load one SST-5 split (``train``/``dev``/``test``) from a local copy.

    Recognised line formats: PTB trees (``trainDevTestTrees_PTB``), fastText
    (``__label__N text``), JSON lines with ``text``/``label`` and TSV.
    Labels come back as the five fine-grained class names.
    """
    directory = Path(directory)
    path = _find_split(directory, split)
    if path is None:
        raise FileNotFoundError(f"no SST-5 {split!r} split under {directory}")
    out = []
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            if raw.strip():
                out.append(_parse_sst_line(raw, line_no, path))
    return out
