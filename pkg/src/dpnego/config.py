"""Configuration loading: the shipped defaults plus user-file overrides."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

from .contracts import (
    Catalog,
    ContractPreset,
    FeatureKind,
    PurposeKind,
    RequestMode,
    ResolutionKind,
)
from .explain import ExplainConfig
from .ingest import CityProfile, EcosystemConfig
from .negotiation import EngineConfig, EpsMinRule
from .release import DpConfig
from .scoring import TrustConfig


@dataclass(frozen=True)
class TssConfig:
    k: int = 3
    n: int = 5
    prime: int = 2**256 - 2**32 - 977


@dataclass
class AppConfig:
    """Everything the library and the experiment runners need, assembled from
    one declarative document."""

    catalog: Catalog
    trust: TrustConfig
    engine: EngineConfig
    explain: ExplainConfig
    dp: DpConfig
    tss: TssConfig
    presets: dict[str, ContractPreset]
    ecosystem: EcosystemConfig
    cities: dict[str, CityProfile]
    experiments: dict[str, Any]
    raw: dict[str, Any] = field(default_factory=dict)


def _deep_merge(base: dict, override: dict) -> dict:
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def default_document() -> dict:
    text = resources.files("dpnego").joinpath("default_config.json").read_text()
    return json.loads(text)


def _build_catalog(doc: dict) -> Catalog:
    return Catalog(
        alphas={FeatureKind(k): float(v) for k, v in doc["alphas"].items()},
        attenuations={ResolutionKind(k): float(v) for k, v in doc["attenuations"].items()},
        purpose_scores={PurposeKind(k): float(v) for k, v in doc["purpose_scores"].items()},
    )


def build_engine_config(doc: dict) -> EngineConfig:
    rules = tuple(
        EpsMinRule(float(r["band_max"]), str(r["purpose"]), float(r["value"]))
        for r in doc.get("eps_min_rules", [])
    )
    return EngineConfig(
        lambdas=tuple(float(x) for x in doc["lambdas"]),
        objective=doc["objective"],
        eps_max=float(doc["eps_max"]),
        grid_step=float(doc["grid_step"]),
        eps_min_default=float(doc["eps_min_default"]),
        eps_min_rules=rules,
        counter_factor=float(doc["counter_factor"]),
        trusted_min_trust=float(doc["trusted_min_trust"]),
        trusted_max_sensitivity=float(doc["trusted_max_sensitivity"]),
        safety_factor=float(doc["safety_factor"]),
        safety_mode=doc["safety_mode"],
    )


def _build_presets(doc: dict) -> dict[str, ContractPreset]:
    presets = {}
    for name, p in doc.items():
        presets[name] = ContractPreset(
            name=name,
            features=tuple(FeatureKind(f) for f in p["features"]),
            resolution=ResolutionKind(p["resolution"]),
            window_hours=int(p["window_hours"]),
            epsilon=float(p["epsilon"]),
            purpose=PurposeKind(p["purpose"]),
            mode=RequestMode(p["mode"]),
        )
    return presets


def from_document(doc: dict) -> AppConfig:
    trust_doc = doc["trust"]
    eco_doc = doc["ecosystem"]
    return AppConfig(
        catalog=_build_catalog(doc["catalog"]),
        trust=TrustConfig(
            beta=tuple(float(b) for b in trust_doc["beta"]),
            n_sat=int(trust_doc["n_sat"]),
            half_life_events=int(trust_doc["half_life_events"]),
        ),
        engine=build_engine_config(doc["engine"]),
        explain=ExplainConfig(
            pu_lambdas=tuple(float(x) for x in doc["explain"]["pu_lambdas"]),
            high_consumption_threshold=float(
                doc["explain"]["high_consumption_threshold"]
            ),
        ),
        dp=DpConfig(
            gaussian_delta=float(doc["dp"]["gaussian_delta"]),
            max_plan_steps=int(doc["dp"]["max_plan_steps"]),
            default_output_cap=int(doc["dp"]["default_output_cap"]),
        ),
        tss=TssConfig(
            k=int(doc["tss"]["k"]),
            n=int(doc["tss"]["n"]),
            prime=int(doc["tss"]["prime_hex"], 16),
        ),
        presets=_build_presets(doc["presets"]),
        ecosystem=EcosystemConfig(
            n_prosumers=int(eco_doc["n_prosumers"]),
            days=int(eco_doc["days"]),
            initial_budget=float(eco_doc["initial_budget"]),
        ),
        cities={
            name: CityProfile(
                name=name,
                base_kw=float(c["base_kw"]),
                seasonal_amp_kw=float(c["seasonal_amp_kw"]),
                diurnal_amp_kw=float(c["diurnal_amp_kw"]),
                noise_sd_kw=float(c["noise_sd_kw"]),
            )
            for name, c in doc["cities"].items()
        },
        experiments=doc["experiments"],
        raw=doc,
    )


def load_config(path: str | Path | None = None) -> AppConfig:
    """Build the application config; a user file deep-merges over defaults."""
    doc = default_document()
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            doc = _deep_merge(doc, json.load(fh))
    return from_document(doc)
