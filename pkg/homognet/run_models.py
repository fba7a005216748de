from datetime import datetime

from pydantic import BaseModel, ConfigDict, Field

from homognet.experiments.experiment_models import ExperimentConfig
from homognet.model.model_models import ParallelModel


class RunManifest(BaseModel):
    """Record of one command line run, written after every other output."""

    run_id: str
    command: str
    config: ExperimentConfig = Field(description="Fully resolved run config")
    outputs: list[str] = Field(description="Every file the run wrote")
    started_at: datetime
    finished_at: datetime
    wall_clock_seconds: float
    versions: dict[str, str]
    seed: int


class ModelFile(BaseModel):
    """Trained model together with the config that reproduces its data."""

    model_config = ConfigDict(frozen=True)

    config: ExperimentConfig
    model: ParallelModel


class ErrorRecord(BaseModel):
    error: str
    message: str
    exit_code: int
