"""Report artifacts: structured JSON, a fixed-layout text summary and an SVG pie chart."""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from decimal import ROUND_HALF_UP, Decimal
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence
from xml.sax.saxutils import escape

import jsonschema

from .reputation import CategoryDistribution, RankedReview, ReputationResult

COMPONENT_KEYS = ("H", "T", "S", "C")

# one colour per category position, most negative first
PALETTE = ("#c0392b", "#e67e22", "#95a5a6", "#7dcea0", "#1e8449")


class ReportError(ValueError):
    pass


@dataclass(frozen=True)
class ReputationReport:
    result: ReputationResult
    config: Mapping[str, Any] = field(default_factory=dict)
    entity_name: Optional[str] = None
    generated_at: Optional[str] = None


def generation_timestamp(explicit: Optional[str] = None) -> Optional[str]:
    """``explicit`` if given, else ``$SOURCE_DATE_EPOCH`` as UTC ISO-8601, else ``None``.

    The wall clock is never read, so reruns stay byte-identical.
    """
    if explicit:
        return explicit
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch:
        return datetime.fromtimestamp(int(epoch), tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
    return None


# ---------------------------------------------------------------------------
# structured report
# ---------------------------------------------------------------------------


@lru_cache(maxsize=1)
def report_schema() -> dict:
    text = resources.files("repute").joinpath("schemas/report.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def _review_dict(r: RankedReview) -> dict:
    return {
        "review_id": r.review_id,
        "text": r.text,
        "rating": r.rating,
        "review_score": r.review_score,
        "components": {k: r.components.get(k) for k in COMPONENT_KEYS},
        "polarity": r.polarity,
        "helpful_votes": r.helpful_votes,
        "posting_year": r.posting_year,
        "position": r.position,
    }


def _review_from_dict(d: Mapping) -> RankedReview:
    return RankedReview(
        review_id=d["review_id"],
        polarity=d.get("polarity"),
        review_score=d["review_score"],
        helpful_votes=d.get("helpful_votes", 0),
        posting_year=d.get("posting_year"),
        position=d.get("position", 0),
        text=d["text"],
        rating=d["rating"],
        components=dict(d["components"]),
    )


def report_to_dict(report: ReputationReport) -> dict:
    res = report.result
    cats = res.categories
    return {
        "entity_id": res.entity_id,
        "entity_name": report.entity_name,
        "pipeline": res.pipeline,
        "reputation": res.reputation,
        "scale_max": res.scale_max,
        "categories": [
            {"label": l, "count": c, "percent": p} for l, c, p in zip(cats.labels, cats.counts, cats.percents)
        ],
        "top_positive": [_review_dict(r) for r in res.top_positive],
        "top_negative": [_review_dict(r) for r in res.top_negative],
        "details": _plain(res.details),
        "config": _plain(report.config),
        "generated_at": report.generated_at,
    }


def report_from_dict(d: Mapping) -> ReputationReport:
    jsonschema.validate(d, report_schema())
    cats = d["categories"]
    result = ReputationResult(
        entity_id=d["entity_id"],
        pipeline=d["pipeline"],
        reputation=d["reputation"],
        scale_max=d["scale_max"],
        categories=CategoryDistribution(
            labels=tuple(c["label"] for c in cats),
            counts=tuple(c["count"] for c in cats),
            percents=tuple(c["percent"] for c in cats),
        ),
        top_positive=tuple(_review_from_dict(r) for r in d["top_positive"]),
        top_negative=tuple(_review_from_dict(r) for r in d["top_negative"]),
        details=d.get("details", {}),
    )
    return ReputationReport(
        result=result,
        config=d["config"],
        entity_name=d.get("entity_name"),
        generated_at=d.get("generated_at"),
    )


def _plain(value):
    """Coerce mappings, tuples and numpy scalars into JSON-native values."""
    if isinstance(value, Mapping):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if hasattr(value, "item") and not isinstance(value, (str, bytes)):
        return value.item()
    if isinstance(value, float) and not math.isfinite(value):
        raise ReportError(f"non-finite value {value!r} cannot be written")
    return value


def dumps_structured(report: ReputationReport) -> str:
    d = report_to_dict(report)
    jsonschema.validate(d, report_schema())
    return json.dumps(d, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def emit_structured(report: ReputationReport, path) -> Path:
    path = Path(path)
    text = dumps_structured(report)
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise ReportError(f"cannot write {path}: {exc.strerror}") from None
    return path


def load_structured(path) -> ReputationReport:
    return report_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


# ---------------------------------------------------------------------------
# text summary
# ---------------------------------------------------------------------------


def round_half_away(value: float, places: int) -> str:
    """Format ``value`` with ``places`` decimals, rounding halves away from zero.

    Rounding works on the shortest decimal repr of the float, so 2.675 shows as
    2.68 even though its binary value is slightly below the half.
    """
    quantum = Decimal(1).scaleb(-places)
    return str(Decimal(repr(float(value))).quantize(quantum, rounding=ROUND_HALF_UP))


def _one_line(text: str, width: int = 72) -> str:
    flat = " ".join(text.split())
    return flat if len(flat) <= width else flat[: width - 3] + "..."


def _review_lines(reviews: Sequence[RankedReview]) -> list[str]:
    if not reviews:
        return ["  (none)"]
    lines = []
    for rank, r in enumerate(reviews, start=1):
        rating = "n/a" if r.rating is None else round_half_away(r.rating, 2)
        lines.append(f"  {rank}. {r.review_id}  RS {round_half_away(r.review_score, 4)}  rating {rating}")
        if r.text:
            lines.append(f"     {_one_line(r.text)}")
    return lines


def emit_text_summary(report: ReputationReport, k: Optional[int] = None) -> str:
    """Fixed-layout plain-text summary; ``k`` caps each review list (0 omits them)."""
    res = report.result
    k = max(len(res.top_positive), len(res.top_negative)) if k is None else k
    if k < 0:
        raise ReportError("k must be nonnegative")
    name = report.entity_name or res.entity_id
    lines = [
        f"Reputation report: {name}",
        f"Pipeline: {res.pipeline}",
        f"Reputation: {round_half_away(res.reputation, 2)} / {res.scale_max}",
        "",
        "Opinion categories:",
    ]
    cats = res.categories
    width = max(len(l) for l in cats.labels)
    for label, count, pct in zip(cats.labels, cats.counts, cats.percents):
        lines.append(f"  {label:<{width}}  {count:>6}  {round_half_away(pct, 2):>6}%")
    if k > 0:
        lines += ["", "Top positive reviews:"] + _review_lines(res.top_positive[:k])
        lines += ["", "Top negative reviews:"] + _review_lines(res.top_negative[:k])
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# SVG pie chart
# ---------------------------------------------------------------------------


def _fmt(x: float) -> str:
    text = f"{x:.4f}".rstrip("0").rstrip(".")
    return "0" if text in ("-0", "") else text


def slice_angles(dist: CategoryDistribution) -> list[tuple[str, float, float, float]]:
    """``(label, percent, start_deg, end_deg)`` for every nonzero category.

    Angles run clockwise from 12 o'clock; the last slice closes exactly at 360.
    """
    total = math.fsum(dist.percents)
    if total == 0 or all(c == 0 for c in dist.counts):
        raise ReportError("cannot draw a pie chart of an all-zero distribution")
    if abs(total - 100.0) > 0.01:
        raise ReportError(f"percentages sum to {total:.4f}, expected 100")
    nonzero = [(l, p) for l, p in zip(dist.labels, dist.percents) if p > 0]
    out = []
    start = 0.0
    for i, (label, pct) in enumerate(nonzero):
        end = 360.0 if i == len(nonzero) - 1 else start + pct * 3.6
        out.append((label, pct, start, end))
        start = end
    return out


def _point(cx: float, cy: float, r: float, deg: float) -> tuple[float, float]:
    rad = math.radians(deg)
    return cx + r * math.sin(rad), cy - r * math.cos(rad)


def render_pie_svg(dist: CategoryDistribution, title: Optional[str] = None) -> str:
    slices = slice_angles(dist)
    colour = {label: PALETTE[i % len(PALETTE)] for i, label in enumerate(dist.labels)}
    cx, cy, r = 150.0, 170.0, 120.0
    width, height = 480, 320
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
    ]
    if title:
        parts.append(f'  <text x="{width / 2:g}" y="24" text-anchor="middle" font-family="sans-serif" '
                     f'font-size="16">{escape(title)}</text>')
    for label, pct, start, end in slices:
        attrs = (f'fill="{colour[label]}" stroke="#ffffff" stroke-width="1" class="slice" '
                 f'data-label="{escape(label)}" data-percent="{_fmt(pct)}" '
                 f'data-start="{_fmt(start)}" data-end="{_fmt(end)}"')
        if end - start >= 360.0 - 1e-9:
            parts.append(f'  <circle cx="{_fmt(cx)}" cy="{_fmt(cy)}" r="{_fmt(r)}" {attrs}/>')
            continue
        x0, y0 = _point(cx, cy, r, start)
        x1, y1 = _point(cx, cy, r, end)
        large = 1 if end - start > 180.0 else 0
        d = (f"M {_fmt(cx)} {_fmt(cy)} L {_fmt(x0)} {_fmt(y0)} "
             f"A {_fmt(r)} {_fmt(r)} 0 {large} 1 {_fmt(x1)} {_fmt(y1)} Z")
        parts.append(f'  <path d="{d}" {attrs}/>')
    y = 60
    for label, count, pct in zip(dist.labels, dist.counts, dist.percents):
        parts.append(f'  <rect x="300" y="{y}" width="14" height="14" fill="{colour[label]}"/>')
        parts.append(f'  <text x="320" y="{y + 12}" font-family="sans-serif" font-size="13" class="legend">'
                     f'{escape(label)}: {round_half_away(pct, 2)}%</text>')
        y += 24
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_pie_svg(dist: CategoryDistribution, path, title: Optional[str] = None) -> Path:
    path = Path(path)
    svg = render_pie_svg(dist, title)
    try:
        path.write_text(svg, encoding="utf-8")
    except OSError as exc:
        raise ReportError(f"cannot write {path}: {exc.strerror}") from None
    return path
