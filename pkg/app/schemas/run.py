import json
from pathlib import Path
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.exceptions import ConfigurationError
from app.physics.code_akl import MODEL_CASES, MODELS

COMMANDS = (
    "vev",
    "gram",
    "akl",
    "evolve",
    "scaling",
    "spin-spectrum",
    "spin-akl",
    "count",
    "hagedorn",
    "casimir",
)


class RunConfigBase(BaseModel):
    model_config = ConfigDict(extra="forbid")

    output_dir: Optional[str] = Field(
        None, description="Artifact directory (defaults to settings.OUTPUT_DIR)"
    )
    seed: int = Field(0, ge=0, description="Seed recorded for sampled checks")


class ModelMixin(BaseModel):
    model: Literal["A", "B", "C"] = Field(..., description="Code model tag")
    length: Optional[int] = Field(
        None, ge=2, description="Model C / spin code parameter L"
    )

    @model_validator(mode="after")
    def validate_length(self):
        if getattr(self, "model", None) == "C" and self.length is None:
            raise ValueError("Model C needs the code parameter length (L >= 2)")
        return self


class CaseMixin(ModelMixin):
    case: str = Field(..., description="Bath case: case1, case2, case3-singlet, ...")
    cutoff: int = Field(..., ge=0, description="Letter cutoff of the error catalogue")

    @model_validator(mode="after")
    def validate_case(self):
        if self.model not in MODELS or self.case not in MODEL_CASES[self.model]:
            raise ValueError(
                f"Case {self.case!r} does not apply to model {self.model}"
            )
        return self


class TimeGrid(BaseModel):
    model_config = ConfigDict(extra="forbid")

    t_max: float = Field(..., gt=0, description="Final time")
    points: int = Field(101, ge=2, description="Number of sample times")

    def times(self) -> List[float]:
        step = self.t_max / (self.points - 1)
        return [k * step for k in range(self.points)]


class VevConfig(RunConfigBase):
    product: List[str] = Field(
        ..., min_length=1, description="Monomials in text syntax, leftmost acts last"
    )
    species: Optional[List[str]] = Field(None, description="Declared alphabet")
    n_values: List[int] = Field(
        default_factory=list, description="N values to evaluate and cross-check"
    )
    oracle: bool = Field(False, description="Cross-check with the Fock oracle")
    oracle_cutoff: int = Field(2, ge=1, description="Per-mode occupation cutoff")

    @field_validator("n_values")
    @classmethod
    def validate_n_values(cls, v):
        if any(n < 1 for n in v):
            raise ValueError("N values must be >= 1")
        return v


class GramConfig(RunConfigBase, ModelMixin):
    n: Optional[int] = Field(None, ge=2, description="Working N for the float Gram")


class AklConfig(RunConfigBase, CaseMixin):
    coupling_base: float = Field(0.5, gt=0, lt=1, description="Per-letter coupling base")
    workers: Optional[int] = Field(None, ge=1, description="Contraction processes")
    n: Optional[int] = Field(None, ge=2, description="N for the decay prediction")
    beta: Optional[float] = Field(None, gt=0, description="Inverse temperature")
    omega: float = Field(1.0, gt=0, description="Oscillator frequency")
    time_grid: Optional[TimeGrid] = None

    @model_validator(mode="after")
    def validate_prediction(self):
        wanted = [self.n is not None, self.beta is not None, self.time_grid is not None]
        if any(wanted) and not all(wanted):
            raise ValueError("A decay prediction needs n, beta and time_grid together")
        return self


class EvolveConfig(RunConfigBase, CaseMixin):
    n: int = Field(..., ge=2, description="Matrix rank N")
    beta: float = Field(..., gt=0, description="Inverse temperature")
    omega: float = Field(1.0, gt=0, description="Oscillator frequency")
    penalty: Optional[float] = Field(
        None, gt=0, description="Penalty J (model B defaults to 2 omega ln N)"
    )
    level_max: Optional[int] = Field(None, ge=1, description="Sector truncation level")
    delta: Optional[float] = Field(None, gt=0, description="Memory threshold")
    time_grid: TimeGrid


class ScalingConfig(RunConfigBase, CaseMixin):
    ns: List[int] = Field(..., min_length=3, description="Matrix ranks N")
    beta: float = Field(..., gt=0, description="Inverse temperature")
    omega: float = Field(1.0, gt=0, description="Oscillator frequency")
    penalty: Optional[float] = Field(
        None, gt=0, description="Penalty J (model B defaults to 2 omega ln N)"
    )
    level_max: Optional[int] = Field(None, ge=1, description="Sector truncation level")
    delta: Optional[float] = Field(None, gt=0, description="Memory threshold")
    time_grid: TimeGrid

    @field_validator("ns")
    @classmethod
    def validate_ns(cls, v):
        if any(n < 2 for n in v) or len(set(v)) != len(v):
            raise ValueError("N values must be distinct and >= 2")
        return sorted(v)


class SpinSpectrumConfig(RunConfigBase):
    n: int = Field(..., ge=2, description="Grid size N")
    quanta_max: int = Field(..., ge=0, description="Largest raised-spin sector")
    coupling: float = Field(1.0, gt=0, description="Penalty coupling J")
    h: float = Field(1.0, ge=0, description="H0 weight")
    length: Optional[int] = Field(None, ge=0, description="L fixing S_tot = 2L - N^2/2")
    low_fraction: float = Field(0.5, gt=0, description="Low cluster threshold / J")


class SpinAklConfig(RunConfigBase):
    ns: List[int] = Field(..., min_length=1, description="Grid sizes N")
    length: int = Field(..., ge=2, description="Spin code parameter L")
    orders: List[int] = Field([1], min_length=1, description="Error orders n")
    residuals: bool = Field(True, description="Report the three-quanta residuals")

    @field_validator("orders", "ns")
    @classmethod
    def validate_positive(cls, v):
        if any(x < 1 for x in v):
            raise ValueError("Values must be >= 1")
        return v


class CountConfig(RunConfigBase):
    n_max: int = Field(..., ge=0, description="Highest level counted")
    basis: bool = Field(True, description="Also enumerate the singlet bases")


class HagedornConfig(RunConfigBase):
    degeneracy: str = Field(..., description='"2^n", "partition", "single-trace:k" or "1,2,5"')
    omega: float = Field(1.0, gt=0, description="Level spacing")
    temperature: float = Field(..., gt=0, description="Temperature T")
    q: float = Field(0.0, ge=0, description="Power of n in the summand")
    cutoff: int = Field(400, ge=1, description="Last level summed")


class CasimirConfig(RunConfigBase):
    n: int = Field(..., ge=2, description="Matrix rank N")
    omega: float = Field(1.0, gt=0, description="Oscillator frequency")
    temperature: float = Field(..., gt=0, description="Temperature T")
    penalty: Optional[float] = Field(
        None, gt=0, description="Penalty J (defaults to 2 T ln N)"
    )
    cutoff: int = Field(200, ge=1, description="Last level summed")


RUN_CONFIGS = {
    "vev": VevConfig,
    "gram": GramConfig,
    "akl": AklConfig,
    "evolve": EvolveConfig,
    "scaling": ScalingConfig,
    "spin-spectrum": SpinSpectrumConfig,
    "spin-akl": SpinAklConfig,
    "count": CountConfig,
    "hagedorn": HagedornConfig,
    "casimir": CasimirConfig,
}


def load_run_config(command: str, path: Path) -> RunConfigBase:
    """Read and validate a JSON config; raises pydantic ValidationError."""
    if command not in RUN_CONFIGS:
        raise ConfigurationError(f"Unknown command {command!r}")
    try:
        payload = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"Cannot read config {path}: {exc}") from exc
    return RUN_CONFIGS[command].model_validate(payload)
