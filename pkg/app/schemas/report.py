from typing import Dict, List, Optional

from pydantic import BaseModel, Field


class SeriesTerm(BaseModel):
    power: str = Field(..., description="Exponent of N as a rational string")
    coefficient: str = Field(..., description="Exact coefficient")


class VevReport(BaseModel):
    product: List[str]
    terms: List[SeriesTerm]
    leading_power: Optional[str] = None
    values: Dict[int, str] = Field(
        default_factory=dict, description="Exact value at each requested N"
    )
    oracle: Dict[int, str] = Field(
        default_factory=dict, description="Fock oracle value at each requested N"
    )
    oracle_agrees: Optional[bool] = None


class GramReport(BaseModel):
    model: str
    labels: List[str]
    states: List[str]
    orthonormalization: str
    gram: List[List[str]] = Field(..., description="Exact Gram series")
    logical_overlap: List[List[str]]
    gram_at_n: Optional[List[List[float]]] = None


class AklReport(BaseModel):
    model: str
    case: str
    cutoff: int
    labels: List[str]
    energies: List[int]
    f: List[List[str]]
    g: List[List[List[List[str]]]]
    e: List[List[List[str]]]
    identity_like: List[str]
    violations: List[str]
    classes: Dict[str, str]
    level_counts: Dict[int, int]
    density_exponent: Optional[float] = None
    exceptional: List[str] = Field(default_factory=list)
    predicted_information: Optional[List[float]] = None
    first_class_rate: Optional[float] = None
    second_class_rate: Optional[float] = None


class TrajectoryReport(BaseModel):
    n: int
    memory_time: float
    extrapolated: bool
    early_slope: float
    tail_fraction: float


class PowerLawReport(BaseModel):
    exponent: float
    stderr: float
    band: List[float]


class ScalingSummary(BaseModel):
    model: str
    case: str
    beta: float
    delta: float
    points: List[TrajectoryReport]
    memory_fit: Optional[PowerLawReport] = None
    slope_fit: Optional[PowerLawReport] = None
    ground_multiplier: Optional[float] = None


class SpinAklRowReport(BaseModel):
    order: int
    off_diagonal: List[float]
    diagonal_difference: List[float]
    off_coefficient: float
    diagonal_coefficient: float
    reference: float
    relative_deviation: float
    diagonal_consistent_with_zero: bool


class EigenResidualReport(BaseModel):
    n: int
    label: str
    stated: float
    rayleigh: float
    residual: float
    is_eigenstate: bool


class SpinAklSummary(BaseModel):
    length: int
    ns: List[int]
    overlaps: List[float]
    overlap_exponent: Optional[float] = None
    rows: List[SpinAklRowReport]
    cross_terms: Dict[str, float]
    identity_values: List[List[float]]
    residuals: List[EigenResidualReport] = Field(default_factory=list)


class HagedornReport(BaseModel):
    degeneracy: str
    omega: float
    temperature: float
    q: float
    cutoff: int
    value: float
    log_value: float
    divergent: bool
    tail_ratio: float
    critical_temperature: Optional[float] = None


class CasimirReport(BaseModel):
    n: int
    omega: float
    temperature: float
    penalty: float
    expectation: float
    bound: float
    per_oscillator_ratio: float
    below_bound: bool
    nonsinglet_multiplier: float
