"""Run configuration files and command-line overrides

A run configuration is a JSON document:

    {
      "campaign": {"n_d": 2, "metric": "grassmann", "rank_policy": "tolerance", ...},
      "model": {"kind": "synthetic_transition", "n_f": 40, "m_f": 30, ...},
      "output_dir": "runs/transition"
    }

`--set key=value` overrides a campaign field, or a model field with a
`model.` prefix. Values are read as JSON when they parse, as strings otherwise.
"""

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

from src.config import OUTPUT_DIR, RUN_CONFIG_JSON, env_seed
from src.errors import ConfigError, DomainError
from src.grassmann import MetricKind
from src.models import ModelSpec
from src.refinement import CampaignConfig
from src.snapshot import RankPolicy

CAMPAIGN_FIELDS = {f.name for f in dataclasses.fields(CampaignConfig)}
MODEL_FIELDS = {f.name for f in dataclasses.fields(ModelSpec)}


@dataclass
class RunConfig:
    campaign: CampaignConfig = field(default_factory=CampaignConfig)
    model: ModelSpec = field(default_factory=ModelSpec)
    output_dir: Path = OUTPUT_DIR

    def validate(self) -> "RunConfig":
        self.campaign.validate()
        self.model.validate()
        if self.model.n_d != self.campaign.n_d:
            raise ConfigError(
                f"model has {self.model.n_d} parameter dimensions, campaign has {self.campaign.n_d}",
                key="model.n_d",
            )
        return self

    def to_dict(self) -> Dict:
        return {
            "campaign": self.campaign.to_dict(),
            "model": self.model.to_dict(),
            "output_dir": str(self.output_dir),
        }


def parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def parse_rank_policy(value: Any) -> RankPolicy:
    if isinstance(value, RankPolicy):
        return value
    if isinstance(value, int) and not isinstance(value, bool):
        return RankPolicy.global_(value)
    try:
        return RankPolicy.parse(str(value))
    except DomainError as e:
        raise ConfigError(str(e), key="rank_policy")


def _campaign_from_dict(data: Dict) -> CampaignConfig:
    unknown = set(data) - CAMPAIGN_FIELDS
    if unknown:
        key = sorted(unknown)[0]
        raise ConfigError("unknown campaign setting", key=key)
    values = dict(data)
    if "rank_policy" in values:
        values["rank_policy"] = parse_rank_policy(values["rank_policy"])
    if "metric" in values:
        try:
            values["metric"] = MetricKind.parse(values["metric"])
        except DomainError as e:
            raise ConfigError(str(e), key="metric")
    for key in ("alpha", "theta_ref"):
        if key in values and not isinstance(values[key], (int, float)):
            raise ConfigError(f"must be a number, got {values[key]!r}", key=key)
    return CampaignConfig(**values)


def _model_from_dict(data: Dict) -> ModelSpec:
    unknown = set(data) - MODEL_FIELDS
    if unknown:
        raise ConfigError("unknown model setting", key=f"model.{sorted(unknown)[0]}")
    return ModelSpec(**data)


def apply_overrides(data: Dict, overrides: Sequence[str]) -> Dict:
    """Apply `key=value` overrides to a raw configuration dictionary"""
    data = {
        "campaign": dict(data.get("campaign", {})),
        "model": dict(data.get("model", {})),
        "output_dir": data.get("output_dir"),
    }
    for override in overrides:
        key, sep, text = override.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"override '{override}' is not of the form key=value", key=key or override)
        value = parse_value(text.strip())
        if key.startswith("model."):
            name = key[len("model."):]
            if name not in MODEL_FIELDS:
                raise ConfigError("unknown model setting", key=key)
            data["model"][name] = value
        elif key == "output_dir":
            data["output_dir"] = value
        elif key in CAMPAIGN_FIELDS:
            data["campaign"][key] = value
        else:
            raise ConfigError("unknown setting", key=key)
    return data


def run_config_from_dict(
    data: Dict, overrides: Sequence[str] = (), use_env_seed: bool = True
) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object", key="<root>")
    unknown = set(data) - {"campaign", "model", "output_dir"}
    if unknown:
        raise ConfigError("unknown section", key=sorted(unknown)[0])
    data = apply_overrides(data, overrides)

    campaign_data = data["campaign"]
    model_data = data["model"]
    # n_d may be given in either section
    if "n_d" in model_data and "n_d" not in campaign_data:
        campaign_data["n_d"] = model_data["n_d"]
    elif "n_d" in campaign_data and "n_d" not in model_data:
        model_data["n_d"] = campaign_data["n_d"]

    seed = env_seed() if use_env_seed else None
    if seed is not None:
        campaign_data["seed"] = seed

    try:
        campaign = _campaign_from_dict(campaign_data)
        model = _model_from_dict(model_data)
    except TypeError as e:
        raise ConfigError(str(e), key="<root>")

    output_dir = Path(data["output_dir"]) if data.get("output_dir") else OUTPUT_DIR
    if not output_dir.is_absolute():
        output_dir = OUTPUT_DIR / output_dir
    return RunConfig(campaign, model, output_dir).validate()


def load_run_config(path: Path, overrides: Sequence[str] = ()) -> RunConfig:
    """
    Load, override and validate a run configuration file

    Raises:
        ConfigError: unreadable file, bad JSON, or an invalid setting
    """
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"file not found: {path}", key="<file>")
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON in {path}: {e}", key="<file>")
    return run_config_from_dict(data, overrides)


def save_run_config(config: RunConfig, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(config.to_dict(), f, indent=2)
    return path


def load_saved_run_config(results_dir: Path) -> Optional[RunConfig]:
    """The run_config.json a finished run left in its results directory, if any"""
    path = Path(results_dir) / RUN_CONFIG_JSON
    if not path.exists():
        return None
    with open(path, "r", encoding="utf-8") as f:
        data = json.load(f)
    config = run_config_from_dict(data, use_env_seed=False)
    config.output_dir = Path(results_dir)
    return config
