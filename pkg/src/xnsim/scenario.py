"""Scenario files: YAML in, validated ScenarioSpecs out.

A scenario file holds optional file-wide defaults plus a list of
scenarios. Per-scenario settings win over file-wide ones; the ``model``
sections are merged key by key (nested sections too), so a scenario
only states what it changes:

    master_seed: 42
    runs: 100
    horizon: 3652
    model:
      decay_rate: 5.0e-4
      noise:
        sigma: 0.01
    scenarios:
      - id: pool250m
        model:
          initial_pool: 250.0e6
      - id: pool500m
        model:
          initial_pool: 500.0e6

Unknown keys anywhere are rejected. YAML 1.1 reads a bare ``off`` as a
boolean, so ``kind: off`` arrives as False; the loader folds that back
into the string "off" before validation.

``resolved_config`` turns specs back into a fully-explicit document
(every default spelled out). The output is valid input: loading it
reproduces the same specs exactly.
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path
from typing import Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .errors import ConfigurationError
from .kernel import ScenarioSpec
from .model import (
    FeeSpec,
    ModelParams,
    NoiseSpec,
    PriceProxySpec,
    RetuneSpec,
    validate_params,
)

__all__ = [
    "load_scenarios",
    "parse_scenarios",
    "resolved_config",
    "params_to_dict",
]


def _fold_yaml_bool(value):
    # YAML 1.1: bare off/on/no/yes parse as booleans
    if value is False:
        return "off"
    if value is True:
        return "on"
    return value


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class RetuneModel(_Strict):
    kind: str = "saturating"
    beta_min: float = RetuneSpec.beta_min
    beta_max: float = RetuneSpec.beta_max
    half_saturation: float = RetuneSpec.half_saturation
    value: Optional[float] = None
    table: Optional[tuple[tuple[float, float], ...]] = None

    @field_validator("kind", mode="before")
    @classmethod
    def _kind_bool(cls, v):
        return _fold_yaml_bool(v)


class FeeModel(_Strict):
    kind: str = "off"
    rate: float = FeeSpec.rate

    @field_validator("kind", mode="before")
    @classmethod
    def _kind_bool(cls, v):
        return _fold_yaml_bool(v)


class NoiseModel(_Strict):
    kind: str = NoiseSpec.kind
    sigma: float = NoiseSpec.sigma

    @field_validator("kind", mode="before")
    @classmethod
    def _kind_bool(cls, v):
        return _fold_yaml_bool(v)


class PriceModel(_Strict):
    base_price: float = PriceProxySpec.base_price
    elasticity: float = PriceProxySpec.elasticity


class ModelSection(_Strict):
    initial_pool: float = ModelParams.initial_pool
    decay_rate: float = ModelParams.decay_rate
    initial_apps: float = ModelParams.initial_apps
    initial_growth: float = ModelParams.initial_growth
    revenue_per_app: float = ModelParams.revenue_per_app
    retune_every: int = ModelParams.retune_every
    treasury_initial: float = ModelParams.treasury_initial
    stepping: str = ModelParams.stepping
    retune: RetuneModel = Field(default_factory=RetuneModel)
    fees: FeeModel = Field(default_factory=FeeModel)
    noise: NoiseModel = Field(default_factory=NoiseModel)
    price: Optional[PriceModel] = None

    def to_params(self) -> ModelParams:
        retune = RetuneSpec(
            kind=self.retune.kind,
            beta_min=self.retune.beta_min,
            beta_max=self.retune.beta_max,
            half_saturation=self.retune.half_saturation,
            value=self.retune.value,
            table=None
            if self.retune.table is None
            else tuple((float(a), float(b)) for a, b in self.retune.table),
        )
        price = (
            None
            if self.price is None
            else PriceProxySpec(
                base_price=self.price.base_price, elasticity=self.price.elasticity
            )
        )
        return ModelParams(
            initial_pool=self.initial_pool,
            decay_rate=self.decay_rate,
            initial_apps=self.initial_apps,
            initial_growth=self.initial_growth,
            revenue_per_app=self.revenue_per_app,
            retune_every=self.retune_every,
            treasury_initial=self.treasury_initial,
            stepping=self.stepping,
            retune=retune,
            fees=FeeSpec(kind=self.fees.kind, rate=self.fees.rate),
            noise=NoiseSpec(kind=self.noise.kind, sigma=self.noise.sigma),
            price=price,
        )


class ScenarioSection(_Strict):
    id: str = Field(min_length=1)
    horizon: Optional[int] = None
    runs: Optional[int] = None
    master_seed: Optional[int] = None
    model: dict = Field(default_factory=dict)


class ScenarioFileModel(_Strict):
    horizon: Optional[int] = None
    runs: Optional[int] = None
    master_seed: Optional[int] = None
    model: dict = Field(default_factory=dict)
    scenarios: list[ScenarioSection] = Field(min_length=1)


def _deep_merge(base: dict, override: dict) -> dict:
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def parse_scenarios(text: str, source: str = "<string>") -> list[ScenarioSpec]:
    """Parse scenario-file text into validated specs.

    Raises ConfigurationError for YAML syntax errors, unknown keys,
    wrong types, duplicate ids, or semantically invalid parameters.
    """
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"{source}: not valid YAML: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigurationError(
            f"{source}: scenario file must be a mapping with a 'scenarios' list"
        )
    try:
        doc = ScenarioFileModel.model_validate(data)
    except ValidationError as exc:
        raise ConfigurationError(f"{source}: invalid scenario file: {exc}") from None

    specs: list[ScenarioSpec] = []
    seen: set[str] = set()
    for section in doc.scenarios:
        if section.id in seen:
            raise ConfigurationError(f"{source}: duplicate scenario id {section.id!r}")
        seen.add(section.id)
        merged = _deep_merge(doc.model, section.model)
        try:
            model_section = ModelSection.model_validate(merged)
        except ValidationError as exc:
            raise ConfigurationError(
                f"{source}: scenario {section.id!r} has an invalid model section: {exc}"
            ) from None
        params = model_section.to_params()
        issues = validate_params(params)
        if issues:
            raise ConfigurationError(
                f"{source}: scenario {section.id!r}: " + "; ".join(issues)
            )
        horizon = section.horizon if section.horizon is not None else doc.horizon
        runs = section.runs if section.runs is not None else doc.runs
        seed = section.master_seed if section.master_seed is not None else doc.master_seed
        kwargs = {}
        if horizon is not None:
            kwargs["horizon"] = horizon
        if runs is not None:
            kwargs["runs"] = runs
        if seed is not None:
            kwargs["master_seed"] = seed
        specs.append(ScenarioSpec(scenario_id=section.id, params=params, **kwargs))
    return specs


def load_scenarios(path) -> list[ScenarioSpec]:
    """Load and validate a scenario file from disk."""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read scenario file {p}: {exc}") from None
    return parse_scenarios(text, source=str(p))


def params_to_dict(params: ModelParams) -> dict:
    """Fully-explicit, JSON-safe form of a parameter set."""
    r = params.retune
    out = {
        "initial_pool": params.initial_pool,
        "decay_rate": params.decay_rate,
        "initial_apps": params.initial_apps,
        "initial_growth": params.initial_growth,
        "revenue_per_app": params.revenue_per_app,
        "retune_every": params.retune_every,
        "treasury_initial": params.treasury_initial,
        "stepping": params.stepping,
        "retune": {
            "kind": r.kind,
            "beta_min": r.beta_min,
            "beta_max": r.beta_max,
            "half_saturation": r.half_saturation,
            "value": r.value,
            "table": None if r.table is None else [list(pair) for pair in r.table],
        },
        "fees": {"kind": params.fees.kind, "rate": params.fees.rate},
        "noise": {"kind": params.noise.kind, "sigma": params.noise.sigma},
        "price": None
        if params.price is None
        else {
            "base_price": params.price.base_price,
            "elasticity": params.price.elasticity,
        },
    }
    return out


def resolved_config(specs) -> dict:
    """Specs as a fully-explicit scenario document.

    The result is itself a loadable scenario file (JSON is YAML), and
    loading it reproduces the input specs exactly.
    """
    return {
        "scenarios": [
            {
                "id": s.scenario_id,
                "horizon": s.horizon,
                "runs": s.runs,
                "master_seed": s.master_seed,
                "model": params_to_dict(s.params),
            }
            for s in specs
        ]
    }


def resolved_config_json(specs) -> str:
    return json.dumps(resolved_config(specs), indent=2, sort_keys=True) + "\n"


def apply_overrides(
    specs,
    runs: Optional[int] = None,
    horizon: Optional[int] = None,
    master_seed: Optional[int] = None,
) -> list[ScenarioSpec]:
    """Command-line overrides, applied uniformly to every spec."""
    out = []
    for spec in specs:
        changes = {}
        if runs is not None:
            changes["runs"] = runs
        if horizon is not None:
            changes["horizon"] = horizon
        if master_seed is not None:
            changes["master_seed"] = master_seed
        out.append(dataclasses.replace(spec, **changes) if changes else spec)
    return out
