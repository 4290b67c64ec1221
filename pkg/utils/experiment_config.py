"""
Experiment configuration files
==============================

A config is a JSON document validated by pydantic, e.g.

    {
      "ensemble": {"N": 4, "J": 2, "signals": [[3, 1, 0, 0], [1, 1, 0, 0]]},
      "model": {"family": "general", "cap_common": 4, "cap_innovation": 2},
      "allocations": [[2, 1], [1, 2]],
      "trials": 200,
      "base_seed": 7,
      "mode": "known"
    }

Either "ensemble" (a fixed X) or "generator" (a fresh random X per trial,
drawn from the model) must be given. Allocations are an explicit list, a
sweep box, or both.
"""

import json
from itertools import product
from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from utils.ensemble_model import EnsembleModel, LocationMatrix, ModelFamily, SignalEnsemble
from utils.errors import ConfigError

UINT64_MAX = 2 ** 64 - 1


class EnsembleSpec(BaseModel):
    model_config = ConfigDict(extra='forbid')

    N: int = Field(ge=1)
    J: int = Field(ge=1)
    signals: List[List[float]]

    @model_validator(mode='after')
    def _check_shape(self):
        if len(self.signals) != self.J or any(len(row) != self.N for row in self.signals):
            raise ValueError(f"signals must be {self.J} rows of length {self.N}")
        return self

    def to_ensemble(self) -> SignalEnsemble:
        return SignalEnsemble.from_json_dict(self.model_dump())


class GeneratorSpec(BaseModel):
    model_config = ConfigDict(extra='forbid')

    N: int = Field(ge=1)
    J: int = Field(ge=1)


class ModelSpec(BaseModel):
    model_config = ConfigDict(extra='forbid')

    family: ModelFamily = ModelFamily.GENERAL
    cap_common: int = Field(ge=0)
    cap_innovation: int = Field(ge=0)
    min_overlap: int = Field(default=0, ge=0)


class LocationSpec(BaseModel):
    """0-indexed columns, as in every JSON file"""
    model_config = ConfigDict(extra='forbid')

    N: int = Field(ge=1)
    common: List[int] = []
    innovations: List[List[int]]

    def to_location_matrix(self) -> LocationMatrix:
        return LocationMatrix.from_json_dict(self.model_dump())


class SweepSpec(BaseModel):
    """Every allocation with low[j] <= M_j <= high[j]"""
    model_config = ConfigDict(extra='forbid')

    low: List[int]
    high: List[int]

    @model_validator(mode='after')
    def _check_box(self):
        if len(self.low) != len(self.high):
            raise ValueError("low and high must have the same length")
        if any(lo < 0 or lo > hi for lo, hi in zip(self.low, self.high)):
            raise ValueError("need 0 <= low[j] <= high[j] for every sensor")
        return self

    def expand(self) -> List[Tuple[int, ...]]:
        return list(product(*(range(lo, hi + 1) for lo, hi in zip(self.low, self.high))))


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra='forbid')

    name: str = "experiment"
    ensemble: Optional[EnsembleSpec] = None
    generator: Optional[GeneratorSpec] = None
    model: ModelSpec
    location: Optional[LocationSpec] = None
    allocations: List[List[int]] = []
    sweep: Optional[SweepSpec] = None
    trials: int = Field(default=1, ge=1)
    base_seed: int = Field(default=0, ge=0, le=UINT64_MAX)
    mode: Literal['known', 'unknown', 'bounds-only'] = 'known'
    tol: Optional[float] = Field(default=None, gt=0)
    record_timing: bool = False
    assert_guarantees: bool = False

    @model_validator(mode='after')
    def _check_consistency(self):
        if (self.ensemble is None) == (self.generator is None):
            raise ValueError("give exactly one of 'ensemble' or 'generator'")
        if not self.allocations and self.sweep is None:
            raise ValueError("give 'allocations' and/or 'sweep'; at least one allocation is needed")
        J = self.J
        for i, allocation in enumerate(self.allocations):
            if len(allocation) != J:
                raise ValueError(f"allocations[{i}] has {len(allocation)} entries, expected J={J}")
            if any(m < 0 for m in allocation):
                raise ValueError(f"allocations[{i}] has a negative entry")
        if self.sweep is not None and len(self.sweep.low) != J:
            raise ValueError(f"sweep covers {len(self.sweep.low)} sensors, expected J={J}")
        if self.location is not None:
            if self.generator is not None:
                raise ValueError("'location' only applies to a fixed 'ensemble'")
            if self.location.N != self.N or len(self.location.innovations) != J:
                raise ValueError(f"location must have N={self.N} and {J} innovation blocks")
        try:
            self.ensemble_model()
        except ValidationError as e:
            raise ValueError(f"model: {e.errors()[0]['msg']}") from e
        return self

    @property
    def N(self) -> int:
        return (self.ensemble or self.generator).N

    @property
    def J(self) -> int:
        return (self.ensemble or self.generator).J

    def ensemble_model(self) -> EnsembleModel:
        return EnsembleModel(N=self.N, J=self.J, **self.model.model_dump())

    def allocation_list(self) -> List[Tuple[int, ...]]:
        allocations = [tuple(a) for a in self.allocations]
        if self.sweep is not None:
            allocations.extend(a for a in self.sweep.expand() if a not in allocations)
        return allocations

    def with_overrides(self, **overrides) -> 'ExperimentConfig':
        """Command-line values win over the file; None means 'not given'"""
        data = self.model_dump()
        data.update({k: v for k, v in overrides.items() if v is not None})
        return validate_config(data)


def _format_validation_error(e: ValidationError) -> str:
    lines = []
    for err in e.errors():
        where = '.'.join(str(p) for p in err['loc']) or '<root>'
        lines.append(f"  {where}: {err['msg']}")
    return "\n".join(lines)


def validate_config(data: dict) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError("Invalid experiment configuration:\n" + _format_validation_error(e)) from e
    except (ValueError, TypeError) as e:
        raise ConfigError(f"Invalid experiment configuration: {e}") from e


def load_experiment_config(path: str) -> ExperimentConfig:
    try:
        with open(path, 'r', encoding='utf-8') as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"Cannot read config {path}: {e}") from e

    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}:{e.lineno}:{e.colno}: {e.msg}") from e

    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    try:
        return validate_config(data)
    except ConfigError as e:
        raise ConfigError(f"{path}: {e}") from e
