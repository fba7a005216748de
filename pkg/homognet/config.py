import os
from pathlib import Path
from typing import TypeVar

from pydantic import BaseModel, Field


ENV_PREFIX = "HOMOGNET"
T = TypeVar("T", bound=BaseModel)


def _get_family_overrides(prefix: str) -> dict[str, str]:
    """Family implementation overrides, e.g.
    HOMOGNET_FAMILY_TWO_LAYER_RELU=mypkg.relu.FastReluFamilyService"""
    prefix = f"{prefix}_FAMILY_"
    overrides = {}
    for key, value in os.environ.items():
        if key.startswith(prefix) and value:
            kind = key[len(prefix) :].lower().replace("_", "-")
            overrides[kind] = value
    return overrides


class HomogNetConfig(BaseModel):
    seed: int = Field(
        default=0,
        description="Seed used when neither the run config nor a flag sets one",
    )
    threads: int = Field(
        default=1,
        ge=1,
        description="Default cap on worker threads for sweeps",
    )
    output_dir: Path = Field(
        default=Path("homognet-out"),
        description="Directory receiving result files when --out is not given",
    )
    log_level: str = "INFO"
    families: dict[str, str] = Field(
        default_factory=dict,
        description=(
            "Family kind to fully qualified FamilyService subclass. Kinds not "
            "listed use the built in implementation."
        ),
    )


def from_env(config_type: type[T], prefix: str) -> T:
    """Build ``config_type`` from ``<PREFIX>_<FIELD>`` variables, leaving unset
    fields at their defaults. Pydantic does the string coercion."""
    values: dict[str, object] = {}
    for name in config_type.model_fields:
        raw = os.getenv(f"{prefix}_{name.upper()}")
        if raw:
            values[name] = raw
    if "families" in config_type.model_fields:
        values["families"] = _get_family_overrides(prefix)
    return config_type.model_validate(values)


_global_config: HomogNetConfig | None = None


def get_global_config() -> HomogNetConfig:
    """Get the process wide config, reading the environment the first time"""
    global _global_config
    if _global_config is None:
        _global_config = from_env(HomogNetConfig, ENV_PREFIX)
    return _global_config
