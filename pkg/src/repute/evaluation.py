"""Reputation error metrics and the fusion-threshold sweep harness."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .config import CASCADE_FUSION, PipelineConfig
from .corpus import ReviewDataset
from .pipelines import Models, aggregate_cascade, prepare_cascade, run_pipeline


class SweepError(RuntimeError):
    pass


def absolute_error(ground_truth: float, rep: float) -> float:
    return abs(ground_truth - rep)


def squared_error(ground_truth: float, rep: float) -> float:
    d = ground_truth - rep
    return d * d


def _mean(values: Sequence[float], what: str) -> float:
    if len(values) == 0:
        raise ValueError(f"cannot average an empty {what}")
    return math.fsum(values) / len(values)


def maer_per_entity(errors: Sequence[float]) -> float:
    """Mean absolute error of one entity over the threshold grid."""
    return _mean(errors, "threshold grid")


def maer_per_threshold(errors: Sequence[float]) -> float:
    """Mean absolute error over entities at one threshold."""
    return _mean(errors, "entity set")


def default_grid() -> tuple[float, ...]:
    """0.05, 0.10, ..., 0.95: 19 points, computed from integers to avoid drift."""
    return tuple(i / 100 for i in range(5, 100, 5))


@dataclass(frozen=True)
class SweepResult:
    grid: tuple[float, ...]
    entity_ids: tuple[str, ...]
    ground_truth: tuple[float, ...]
    reputations: np.ndarray          # entities x grid
    group_counts: Optional[np.ndarray]  # entities x grid, cascade-fusion only

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.grid, self.grid[1:])):
            raise ValueError("sweep grid must be strictly increasing")

    @property
    def errors(self) -> np.ndarray:
        return np.abs(np.asarray(self.ground_truth)[:, None] - self.reputations)

    @property
    def maer_by_entity(self) -> tuple[float, ...]:
        return tuple(maer_per_entity(row) for row in self.errors)

    @property
    def maer_by_threshold(self) -> tuple[float, ...]:
        return tuple(maer_per_threshold(col) for col in self.errors.T)

    @property
    def best_threshold(self) -> float:
        """Grid point with the smallest MAER (earliest on ties)."""
        return self.grid[int(np.argmin(self.maer_by_threshold))]


def t0_sweep(
    entities: Sequence[tuple[ReviewDataset, float]],
    cfg: PipelineConfig,
    models: Models,
    grid: Optional[Sequence[float]] = None,
) -> SweepResult:
    """Run the configured pipeline at every grid threshold for every entity.

    Only cascade-fusion consumes t0; other pipelines produce one constant row
    per entity. Pipeline failures are re-raised naming the entity and t0.
    """
    grid = tuple(default_grid() if grid is None else grid)
    if not grid:
        raise ValueError("empty threshold grid")
    if not entities:
        raise ValueError("no entities to sweep")
    reps = np.zeros((len(entities), len(grid)))
    counts = np.zeros((len(entities), len(grid)), dtype=int) if cfg.pipeline == CASCADE_FUSION else None
    for e, (ds, _) in enumerate(entities):
        state = None
        if cfg.pipeline == CASCADE_FUSION:
            try:
                state = prepare_cascade(ds, cfg, models)
            except Exception as exc:
                raise SweepError(f"entity {ds.entity_id}: {exc}") from exc
        for j, t0 in enumerate(grid):
            try:
                if state is not None:
                    result = aggregate_cascade(state, cfg, t0)
                    counts[e, j] = result.details["group_count"]
                else:
                    result = run_pipeline(ds, replace(cfg, t0=t0), models)
            except Exception as exc:
                raise SweepError(f"entity {ds.entity_id}, t0={t0:g}: {exc}") from exc
            reps[e, j] = result.reputation
    return SweepResult(
        grid=grid,
        entity_ids=tuple(ds.entity_id for ds, _ in entities),
        ground_truth=tuple(float(gt) for _, gt in entities),
        reputations=reps,
        group_counts=counts,
    )


def load_ground_truth(path) -> dict[str, float]:
    """Read a ``entity_id,ground_truth`` table."""
    out: dict[str, float] = {}
    with open(Path(path), newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if not reader.fieldnames or not {"entity_id", "ground_truth"} <= set(reader.fieldnames):
            raise ValueError(f"{path}: expected columns entity_id,ground_truth")
        for line_no, row in enumerate(reader, start=2):
            try:
                value = float(row["ground_truth"])
            except (TypeError, ValueError):
                raise ValueError(f"{path}: line {line_no}: bad ground truth {row['ground_truth']!r}") from None
            if row["entity_id"] in out:
                raise ValueError(f"{path}: line {line_no}: duplicate entity {row['entity_id']!r}")
            out[row["entity_id"]] = value
    return out


def write_sweep_table(result: SweepResult, path):
    """One row per (entity, t0), then per-entity MAER, per-t0 MAER and the grand mean.

    Summary rows put ``all`` in the aggregated-over column and leave the
    reputation cell empty.
    """
    errors = result.errors
    with open(Path(path), "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["entity", "t0", "reputation", "abs_error"])
        for e, eid in enumerate(result.entity_ids):
            for j, t0 in enumerate(result.grid):
                writer.writerow([eid, repr(t0), repr(float(result.reputations[e, j])), repr(float(errors[e, j]))])
        for eid, maer in zip(result.entity_ids, result.maer_by_entity):
            writer.writerow([eid, "all", "", repr(maer)])
        for t0, maer in zip(result.grid, result.maer_by_threshold):
            writer.writerow(["all", repr(t0), "", repr(maer)])
        writer.writerow(["all", "all", "", repr(math.fsum(errors.ravel()) / errors.size)])
