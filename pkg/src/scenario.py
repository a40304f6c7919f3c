#!/usr/bin/env python3
"""
Scenario Models
Validated scenario files (YAML, JSON or TOML) for simulation runs
"""

import json
import logging
from pathlib import Path
from typing import List, Literal, Optional, Union

import toml
import yaml
from pydantic import BaseModel, Field, PrivateAttr, ValidationError, field_validator, model_validator

from src.adversary import AdversaryModel, Strategy, StrategyKind
from src.errors import InputError
from src.lfre import Variant
from src.settings import setting

logger = logging.getLogger(__name__)


# ===== MODELS =====

class StrategySection(BaseModel):
    kind: StrategyKind = StrategyKind.SILENT
    value: float = 1000.0
    range: float = Field(100.0, ge=0)
    gain: float = 1.0
    magnitude: float = 50.0
    offsets: dict[int, float] = Field(default_factory=dict)

    def to_strategy(self) -> Strategy:
        return Strategy(self.kind, self.value, self.range, self.gain, self.magnitude, dict(self.offsets))


class SpoofSection(BaseModel):
    target: int = Field(ge=0)
    replicas: int = Field(0, ge=0)


class AdversarySection(BaseModel):
    model: AdversaryModel = AdversaryModel.F_LOCAL
    f: Optional[int] = Field(None, ge=0)
    color: Optional[int] = Field(None, ge=0)
    members: Union[Literal['auto'], List[int]] = Field(default_factory=list)
    strategy: StrategySection = Field(default_factory=StrategySection)
    spoof: Optional[SpoofSection] = None

    @field_validator('members')
    @classmethod
    def members_are_nodes(cls, members):
        if isinstance(members, list) and any(m < 0 for m in members):
            raise ValueError("member ids must be non-negative")
        return members


class LfreSection(BaseModel):
    variant: Variant = Variant.F_LOCAL
    f: int = Field(1, ge=0)
    observer_pole: Optional[float] = Field(None, gt=-1.0, lt=1.0)
    medag_validation_trials: int = Field(0, ge=0)


class OutputSection(BaseModel):
    directory: Optional[str] = None
    trace: str = "trace.csv"
    summary: str = "summary.json"
    medag: Optional[str] = "medag.txt"
    workbook: Optional[str] = None


class Scenario(BaseModel):
    name: str = "scenario"
    network: str
    model: str
    seed: int = 0
    horizon: int = Field(default_factory=lambda: setting('simulation', 'horizon'), ge=1)
    threshold: float = Field(default_factory=lambda: setting('simulation', 'threshold'), gt=0)
    divergence_limit: float = Field(default_factory=lambda: setting('simulation', 'divergence_limit'), gt=0)
    adversary: AdversarySection = Field(default_factory=AdversarySection)
    lfre: LfreSection = Field(default_factory=LfreSection)
    output: OutputSection = Field(default_factory=OutputSection)

    _base_dir: Path = PrivateAttr(default_factory=Path.cwd)

    @model_validator(mode='after')
    def adversary_matches_filter(self):
        if self.adversary.model == AdversaryModel.F_LOCAL and self.adversary.f is None:
            self.adversary.f = self.lfre.f
        return self

    def resolve(self, ref: str) -> Path:
        path = Path(ref)
        return path if path.is_absolute() else self._base_dir / path

    @property
    def network_path(self) -> Path:
        return self.resolve(self.network)

    @property
    def model_path(self) -> Path:
        return self.resolve(self.model)

    def check_files(self) -> None:
        for label, path in (('network', self.network_path), ('model', self.model_path)):
            if not path.is_file():
                raise InputError(f"scenario '{self.name}': {label} file {path} not found")


# ===== LOADING =====

def _read_mapping(path: Path) -> dict:
    with open(path, 'r') as f:
        text = f.read()
    try:
        if path.suffix == '.toml':
            data = toml.loads(text)
        elif path.suffix == '.json':
            data = json.loads(text)
        else:
            data = yaml.safe_load(text)
    except (ValueError, yaml.YAMLError, toml.TomlDecodeError) as e:
        raise InputError(f"{path}: cannot parse scenario file: {e}")
    if not isinstance(data, dict):
        raise InputError(f"{path}: scenario file must contain a mapping")
    return data


def scenario_from_dict(data: dict, base_dir: Union[str, Path, None] = None) -> Scenario:
    try:
        scenario = Scenario.model_validate(data)
    except ValidationError as e:
        raise InputError(f"invalid scenario: {e}")
    scenario._base_dir = Path(base_dir) if base_dir else Path.cwd()
    scenario.check_files()
    return scenario


def load_scenario(path: Union[str, Path]) -> Scenario:
    """Parse and validate a scenario; file refs resolve against its directory"""
    path = Path(path)
    if not path.is_file():
        raise InputError(f"scenario file {path} not found")
    scenario = scenario_from_dict(_read_mapping(path), path.resolve().parent)
    logger.info("[SCENARIO] loaded '%s' from %s", scenario.name, path)
    return scenario
