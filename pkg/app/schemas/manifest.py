from datetime import datetime
from typing import Any, Dict, List

from pydantic import BaseModel, ConfigDict, Field


class RunManifest(BaseModel):
    """Written next to every run's artifacts so the run can be repeated."""

    command: str = Field(..., description="Subcommand that produced the run")
    config: Dict[str, Any] = Field(..., description="Validated config echo")
    version: str = Field(..., description="Tool version")
    started_at: datetime
    finished_at: datetime
    elapsed_seconds: float = Field(..., ge=0)
    artifacts: List[str] = Field(default_factory=list, description="Files written")
    warnings: List[str] = Field(
        default_factory=list, description="Validity warnings raised during the run"
    )
    exit_code: int = Field(0, description="Exit status of the run")

    model_config = ConfigDict(extra="forbid")
