"""Pipeline configuration: TOML file, ``--set`` overrides, schema validation.

Defaults match the reference experimental setup: theta = 500 sub-corpus
sentences per tuple, BM25 thresholds delta = 0.9 and phi = 100, M = 30
negatives per positive, and selection thresholds {penalty 0.5, positive 0.7,
negative 0.3}.  ``--threads`` is an execution parameter, not configuration:
it never enters the config hash or the manifests.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError
from .selection import SelectorConfig, TruePieThresholds
from .validation import (check_nonnegative, check_positive, check_positive_int,
                         check_ratios, check_unit_interval)


@dataclass
class PathsConfig:
    kg_file: str = ""
    labels_file: str = ""
    corpus_general: str = ""
    corpus_reliable: str = ""
    run_dir: str = "runs/default"


@dataclass
class SplitConfig:
    ratios: Tuple[float, float, float] = (0.8, 0.1, 0.1)
    sub_ratio: float = 1.0
    nested: bool = False
    eval_relations: Tuple[str, ...] = ()
    min_label_coverage: float = 0.0


@dataclass
class MiningConfig:
    theta: int = 500
    min_phrase_count: int = 5
    pmi_floor: float = 1.0
    min_support: int = 3
    max_window: int = 10


@dataclass
class SelectionConfig:
    quality_floor: float = 0.3
    middle_band_floor: float = 0.5
    max_candidates: int = 20
    max_iterations: int = 10
    penalty_multiplier: float = 0.5
    penalty: float = 0.5
    positive: float = 0.7
    negative: float = 0.3
    seed_prompts: Dict[str, str] = field(default_factory=dict)

    def selector(self) -> SelectorConfig:
        return SelectorConfig(
            quality_floor=self.quality_floor,
            middle_band_floor=self.middle_band_floor,
            max_candidates=self.max_candidates,
            max_iterations=self.max_iterations,
            penalty_multiplier=self.penalty_multiplier,
            thresholds=TruePieThresholds(penalty=self.penalty,
                                         positive=self.positive,
                                         negative=self.negative))


@dataclass
class RetrievalSection:
    delta: float = 0.9
    phi: int = 100
    k1: float = 1.2
    b: float = 0.75
    deterministic_support: bool = False
    use_support: bool = True


@dataclass
class KgeConfig:
    dim: int = 32
    epochs: int = 100
    learning_rate: float = 0.01
    margin: float = 1.0


@dataclass
class NegativesConfig:
    m_ratio: int = 30
    kge_fraction: float = 0.5
    m_as_pos_neg_ratio: bool = False
    recall_x: int = 30
    recall_x_per_ratio: Dict[str, int] = field(default_factory=dict)

    def resolve_x(self, sub_ratio: float) -> int:
        key = f"{sub_ratio:g}"
        return int(self.recall_x_per_ratio.get(key, self.recall_x))


@dataclass
class OptimizeConfig:
    enabled: bool = True
    heldout_fraction: float = 0.1
    epochs: int = 100
    learning_rate: float = 0.5


@dataclass
class TrainConfig:
    epochs: int = 200
    learning_rate: float = 1.0
    weight_decay: float = 0.01


@dataclass
class EvalConfig:
    n_values: Tuple[int, ...] = (5, 10)
    threshold: float = 0.5
    directions: str = "both"  # both | tail | head


@dataclass
class ScorerConfig:
    mode: str = "reference"  # reference | remote
    url: str = ""
    timeout: float = 120.0


@dataclass
class PipelineConfig:
    paths: PathsConfig = field(default_factory=PathsConfig)
    split: SplitConfig = field(default_factory=SplitConfig)
    mining: MiningConfig = field(default_factory=MiningConfig)
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    retrieval: RetrievalSection = field(default_factory=RetrievalSection)
    kge: KgeConfig = field(default_factory=KgeConfig)
    negatives: NegativesConfig = field(default_factory=NegativesConfig)
    optimize: OptimizeConfig = field(default_factory=OptimizeConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    scorer: ScorerConfig = field(default_factory=ScorerConfig)
    seed: int = 55

    def validate(self) -> "PipelineConfig":
        check_ratios(self.split.ratios, "split.ratios")
        check_unit_interval(self.split.sub_ratio, "split.sub_ratio", open_left=True)
        check_positive_int(self.mining.theta, "mining.theta")
        check_positive_int(self.mining.min_support, "mining.min_support")
        check_positive_int(self.mining.max_window, "mining.max_window")
        check_positive_int(self.mining.min_phrase_count, "mining.min_phrase_count")
        check_unit_interval(self.selection.quality_floor, "selection.quality_floor")
        self.selection.selector().thresholds.validate()
        check_nonnegative(self.retrieval.delta, "retrieval.delta")
        check_positive_int(self.retrieval.phi, "retrieval.phi")
        check_positive(self.retrieval.k1, "retrieval.k1")
        check_unit_interval(self.retrieval.b, "retrieval.b")
        check_positive_int(self.kge.dim, "kge.dim")
        check_positive_int(self.negatives.m_ratio, "negatives.m_ratio")
        check_unit_interval(self.negatives.kge_fraction, "negatives.kge_fraction")
        check_positive_int(self.negatives.recall_x, "negatives.recall_x")
        check_unit_interval(self.optimize.heldout_fraction,
                            "optimize.heldout_fraction", open_left=True,
                            open_right=True)
        if not (0.0 < self.eval.threshold < 1.0):
            raise ConfigError("eval.threshold must lie in (0, 1)")
        if self.eval.directions not in ("both", "tail", "head"):
            raise ConfigError("eval.directions must be both, tail, or head")
        if self.scorer.mode not in ("reference", "remote"):
            raise ConfigError("scorer.mode must be reference or remote")
        if self.scorer.mode == "remote" and not self.scorer.url:
            raise ConfigError("scorer.mode=remote requires scorer.url")
        return self

    # -- serialization ------------------------------------------------------
    def to_dict(self) -> dict:
        def convert(value):
            if dataclasses.is_dataclass(value):
                return {f.name: convert(getattr(value, f.name))
                        for f in dataclasses.fields(value)}
            if isinstance(value, tuple):
                return [convert(v) for v in value]
            if isinstance(value, dict):
                return {k: convert(v) for k, v in value.items()}
            return value
        return convert(self)

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def resolve_path(self, value: str, base: Path) -> Path:
        path = Path(value)
        return path if path.is_absolute() else base / path


_SECTION_TYPES = {
    "paths": PathsConfig,
    "split": SplitConfig,
    "mining": MiningConfig,
    "selection": SelectionConfig,
    "retrieval": RetrievalSection,
    "kge": KgeConfig,
    "negatives": NegativesConfig,
    "optimize": OptimizeConfig,
    "train": TrainConfig,
    "eval": EvalConfig,
    "scorer": ScorerConfig,
}


def _coerce(value: Any, target_type: Any, key: str) -> Any:
    origin = getattr(target_type, "__origin__", None)
    if origin is tuple:
        if isinstance(value, str):
            value = [v.strip() for v in value.split(",") if v.strip()]
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{key}: expected a list, got {value!r}")
        args = target_type.__args__
        item_type = args[0]
        return tuple(_coerce(v, item_type, key) for v in value)
    if origin is dict:
        if not isinstance(value, dict):
            raise ConfigError(f"{key}: expected a table, got {value!r}")
        return dict(value)
    if target_type is bool:
        if isinstance(value, bool):
            return value
        if isinstance(value, str):
            if value.lower() in ("true", "1", "yes"):
                return True
            if value.lower() in ("false", "0", "no"):
                return False
        raise ConfigError(f"{key}: expected a boolean, got {value!r}")
    if target_type is int:
        if isinstance(value, bool) or not isinstance(value, (int, str)):
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
        try:
            return int(value)
        except ValueError:
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
    if target_type is float:
        if isinstance(value, bool) or not isinstance(value, (int, float, str)):
            raise ConfigError(f"{key}: expected a number, got {value!r}")
        try:
            return float(value)
        except ValueError:
            raise ConfigError(f"{key}: expected a number, got {value!r}")
    if target_type is str:
        return str(value)
    return value


def _apply_section(section_obj: Any, data: Dict[str, Any], section: str) -> None:
    fields = {f.name: f for f in dataclasses.fields(section_obj)}
    for key, value in data.items():
        if key not in fields:
            raise ConfigError(f"unknown config key {section}.{key}")
        hints = fields[key].type
        current = getattr(section_obj, key)
        target = type(current) if not isinstance(current, tuple) else None
        if target in (int, float, bool, str) and not isinstance(current, tuple):
            setattr(section_obj, key, _coerce(value, target, f"{section}.{key}"))
        elif isinstance(current, tuple):
            # Infer element type from the dataclass default.
            elem = type(current[0]) if current else str
            if isinstance(value, str):
                value = [v.strip() for v in value.split(",") if v.strip()]
            if not isinstance(value, (list, tuple)):
                raise ConfigError(f"{section}.{key}: expected a list")
            setattr(section_obj, key,
                    tuple(_coerce(v, elem, f"{section}.{key}") for v in value))
        elif isinstance(current, dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{section}.{key}: expected a table")
            setattr(section_obj, key, dict(value))
        else:
            setattr(section_obj, key, value)


def load_config(path: Path) -> PipelineConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}")
    config = PipelineConfig()
    for section, payload in data.items():
        if section == "seed":
            config.seed = _coerce(payload, int, "seed")
            continue
        if section not in _SECTION_TYPES:
            raise ConfigError(f"unknown config section [{section}]")
        if not isinstance(payload, dict):
            raise ConfigError(f"section [{section}] must be a table")
        _apply_section(getattr(config, section), payload, section)
    return config.validate()


def apply_overrides(config: PipelineConfig, overrides: List[str]) -> PipelineConfig:
    """Apply ``--set section.key=value`` overrides."""
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects section.key=value, got {item!r}")
        key, value = item.split("=", 1)
        key = key.strip()
        if key == "seed":
            config.seed = _coerce(value, int, "seed")
            continue
        if "." not in key:
            raise ConfigError(f"--set key must be section.key, got {key!r}")
        section, name = key.split(".", 1)
        if section not in _SECTION_TYPES:
            raise ConfigError(f"unknown config section {section!r}")
        _apply_section(getattr(config, section), {name: value}, section)
    return config.validate()
