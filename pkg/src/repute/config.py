"""Pipeline configuration: defaults, INI-style config files and flag overrides.

File layout::

    [general]
    pipeline = credibility
    scale_max = 10

    [credibility]
    weights = 0.4, 0.35, 0.25

Keys in ``[general]`` apply to every pipeline; a section named after the
selected pipeline overrides them. Sections for other pipelines are ignored.
"""

from __future__ import annotations

import configparser
import logging
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping, Optional

from .scoring import (
    DEFAULT_CREDIBILITY,
    HELPFULNESS_FLOOR_UNIFORM,
    HELPFULNESS_FLOOR_WEIGHTED,
    ScoreWeights,
)

log = logging.getLogger(__name__)

CASCADE_FUSION = "cascade-fusion"
FINE_GRAINED = "fine-grained"
ATTRIBUTE_AGGREGATION = "attribute-aggregation"
CREDIBILITY = "credibility"
PIPELINES = (CASCADE_FUSION, FINE_GRAINED, ATTRIBUTE_AGGREGATION, CREDIBILITY)
DEFAULT_PIPELINE = ATTRIBUTE_AGGREGATION
CONFIG_ENV = "REPUTE_CONFIG"


class ConfigError(ValueError):
    pass


# keys every pipeline reads, plus training options used by `train`
_COMMON = {
    "pipeline", "scale_max", "top_k", "remove_stopwords", "stem", "entity_name",
    "ngram", "min_df", "nb_alpha", "svm_lam", "svm_epochs", "seed",
}
RELEVANT_KEYS = {
    CASCADE_FUSION: _COMMON | {"t0", "lsa_rank", "linkage", "nb_model", "svm_model", "vectors", "midpoint"},
    FINE_GRAINED: _COMMON | {"lsa_rank", "vectors", "fine_model", "impute_ratings"},
    ATTRIBUTE_AGGREGATION: _COMMON | {"current_year", "floor_h", "nb_model", "probabilities"},
    CREDIBILITY: _COMMON | {
        "current_year", "floor_h", "weights", "default_credibility", "nb_model", "probabilities",
    },
}


@dataclass(frozen=True)
class PipelineConfig:
    pipeline: str = DEFAULT_PIPELINE
    t0: float = 0.95
    scale_max: int = 10
    current_year: Optional[int] = None
    floor_h: Optional[float] = None  # None: 0.75 uniform / 0.8 weighted
    weights: ScoreWeights = field(default_factory=ScoreWeights)
    default_credibility: float = DEFAULT_CREDIBILITY
    top_k: int = 1
    lsa_rank: Optional[int] = None
    linkage: str = "member"
    midpoint: Optional[float] = None  # None: 5 on the 10-point scale, 3 on the 5-point scale
    impute_ratings: bool = True
    remove_stopwords: bool = True
    stem: bool = True
    ngram: tuple[int, ...] = (1,)
    min_df: int = 1
    nb_alpha: float = 1.0
    svm_lam: float = 1e-4
    svm_epochs: int = 10
    seed: int = 0
    nb_model: Optional[str] = None
    svm_model: Optional[str] = None
    fine_model: Optional[str] = None
    probabilities: Optional[str] = None
    vectors: Optional[str] = None
    entity_name: Optional[str] = None

    def __post_init__(self):
        if self.pipeline not in PIPELINES:
            raise ConfigError(f"pipeline must be one of {', '.join(PIPELINES)}; got {self.pipeline!r}")
        if not 0.0 <= self.t0 <= 1.0:
            raise ConfigError(f"t0 must lie in [0, 1], got {self.t0}")
        if self.scale_max not in (5, 10):
            raise ConfigError(f"scale_max must be 5 or 10, got {self.scale_max}")
        if self.floor_h is not None and not 0.0 <= self.floor_h <= 1.0:
            raise ConfigError("floor_h must lie in [0, 1]")
        if not 0.0 <= self.default_credibility <= 1.0:
            raise ConfigError("default_credibility must lie in [0, 1]")
        if self.top_k < 0:
            raise ConfigError("top_k must be nonnegative")
        if self.lsa_rank is not None and self.lsa_rank < 1:
            raise ConfigError("lsa_rank must be >= 1")
        if self.linkage not in ("member", "seed"):
            raise ConfigError("linkage must be 'member' or 'seed'")
        if not self.ngram or min(self.ngram) < 1:
            raise ConfigError("ngram orders must be >= 1")
        if self.min_df < 1 or self.nb_alpha <= 0 or self.svm_lam < 0 or self.svm_epochs < 1:
            raise ConfigError("training options out of range")

    @property
    def effective_floor_h(self) -> float:
        if self.floor_h is not None:
            return self.floor_h
        return HELPFULNESS_FLOOR_WEIGHTED if self.pipeline == CREDIBILITY else HELPFULNESS_FLOOR_UNIFORM

    @property
    def effective_midpoint(self) -> float:
        if self.midpoint is not None:
            return self.midpoint
        return 5.0 if self.scale_max == 10 else 3.0

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["weights"] = list(self.weights.as_tuple())
        d["ngram"] = list(self.ngram)
        d["floor_h"] = self.effective_floor_h
        d["midpoint"] = self.effective_midpoint
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "PipelineConfig":
        return build_config({}, dict(d), warn=False)


_FIELD_TYPES = {f.name: str(f.type) for f in fields(PipelineConfig)}
_BOOL = {"1": True, "true": True, "yes": True, "on": True, "0": False, "false": False, "no": False, "off": False}


def _coerce(key: str, value: Any) -> Any:
    if key not in _FIELD_TYPES:
        raise ConfigError(f"unknown config key {key!r}")
    if value is None or isinstance(value, ScoreWeights):
        return value
    kind = _FIELD_TYPES[key]
    base = kind.removeprefix("Optional[").removesuffix("]")
    text = value.strip() if isinstance(value, str) else value
    try:
        if key == "weights":
            if isinstance(text, str):
                return ScoreWeights.parse(text)
            return ScoreWeights(*text)
        if key == "ngram":
            if isinstance(text, str):
                return tuple(int(p) for p in text.replace(" ", "").split(",") if p)
            return tuple(int(p) for p in text)
        if isinstance(text, str) and text == "" and kind.startswith("Optional"):
            return None
        if base == "bool":
            if isinstance(text, bool):
                return text
            return _BOOL[str(text).lower()]
        if base == "int":
            as_float = float(text)
            if as_float != int(as_float):
                raise ValueError
            return int(as_float)
        if base == "float":
            return float(text)
        return str(text)
    except (ValueError, KeyError, TypeError):
        raise ConfigError(f"bad value for {key}: {value!r}") from None


def read_config_file(path) -> tuple[dict[str, str], dict[str, dict[str, str]]]:
    """Return ``(general, per_pipeline_sections)`` as raw strings."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(Path(path), encoding="utf-8") as fh:
            parser.read_file(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    general = dict(parser["general"]) if parser.has_section("general") else {}
    sections = {}
    for name in parser.sections():
        if name == "general":
            continue
        if name not in PIPELINES:
            raise ConfigError(f"{path}: unknown section [{name}]")
        sections[name] = dict(parser[name])
    return general, sections


def build_config(
    file_values: Mapping[str, Any],
    overrides: Mapping[str, Any],
    sections: Optional[Mapping[str, Mapping[str, Any]]] = None,
    warn: bool = True,
) -> PipelineConfig:
    """Merge general file values, the selected pipeline's section and overrides.

    Explicitly set keys that the selected pipeline does not read are logged
    as warnings and otherwise ignored.
    """
    overrides = {k: v for k, v in overrides.items() if v is not None}
    pipeline = overrides.get("pipeline") or file_values.get("pipeline") or DEFAULT_PIPELINE
    pipeline = str(pipeline).strip()
    merged: dict[str, Any] = dict(file_values)
    if sections and pipeline in sections:
        merged.update(sections[pipeline])
    merged.update(overrides)
    merged["pipeline"] = pipeline
    values = {k: _coerce(k, v) for k, v in merged.items()}
    cfg = PipelineConfig(**values)
    irrelevant = sorted(set(merged) - RELEVANT_KEYS[cfg.pipeline])
    for key in irrelevant if warn else ():
        log.warning("config key %r is ignored by the %s pipeline", key, cfg.pipeline)
    return cfg


def load_config(path: Optional[str], overrides: Optional[Mapping[str, Any]] = None) -> PipelineConfig:
    """Config from ``path`` (or ``$REPUTE_CONFIG``) with ``overrides`` applied on top."""
    path = path or os.environ.get(CONFIG_ENV) or None
    general, sections = ({}, {}) if path is None else read_config_file(path)
    return build_config(general, overrides or {}, sections)


def with_overrides(cfg: PipelineConfig, **changes) -> PipelineConfig:
    return replace(cfg, **changes)
