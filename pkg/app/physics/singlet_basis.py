"""
Gauge-singlet state bases and the spectral counting built on them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Literal, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy.special import logsumexp
from sympy import divisors, totient
from sympy.functions.combinatorial.numbers import partition
from sympy.utilities.iterables import necklaces, partitions

from app.config import settings
from app.exceptions import DimensionLimitError, PreconditionError
from app.models.trace import Letter, TraceMonomial, TraceWord
from app.utils.logger import get_logger

logger = get_logger(__name__)

ONE_MATRIX = "one-matrix"
CASE1 = "case1"
CASE2 = "case2"
BASIS_MODELS = (ONE_MATRIX, CASE1, CASE2)

MODEL_SPECIES = {
    ONE_MATRIX: ("a",),
    CASE1: ("a1", "a2"),
    CASE2: ("a1", "a2"),
}


@dataclass(frozen=True)
class SingletState:
    """A multi-trace creation state on the vacuum, unit-normalized in N."""

    defining: TraceMonomial
    energy: int
    model: str = ONE_MATRIX

    def __post_init__(self):
        if not self.defining.is_creation_only():
            raise PreconditionError(
                f"Singlet state {self.defining.render()} must be creation-only"
            )
        if self.energy != self.defining.letter_count:
            raise PreconditionError(
                f"Energy {self.energy} differs from letter count "
                f"{self.defining.letter_count}"
            )

    @classmethod
    def of(cls, monomial: TraceMonomial, model: str = ONE_MATRIX) -> "SingletState":
        return cls(monomial, monomial.letter_count, model)

    @classmethod
    def vacuum(cls, model: str = ONE_MATRIX) -> "SingletState":
        return cls(TraceMonomial.identity(), 0, model)

    def sort_key(self) -> tuple:
        words = sorted(w.canonical() for w in self.defining.factors)
        return (self.energy, tuple(words))

    def render(self) -> str:
        return self.defining.render()


def _creation_word(species: Sequence[str]) -> TraceWord:
    return TraceWord(tuple(Letter(s, True) for s in species))


def _state(words: Sequence[Sequence[str]], model: str) -> SingletState:
    factors = tuple(_creation_word(w) for w in words)
    monomial = TraceMonomial(factors).unit_normalized()
    return SingletState.of(monomial, model)


def _partitions(n: int) -> Iterator[list[int]]:
    """Partitions of n as descending part lists; the empty partition for n = 0."""
    if n == 0:
        yield []
        return
    for p in partitions(n):
        parts: list[int] = []
        for size, mult in sorted(p.items(), reverse=True):
            parts.extend([size] * mult)
        yield parts


def _necklace_words(length: int, species: Sequence[str]) -> list[tuple[str, ...]]:
    return [
        tuple(species[i] for i in neck)
        for neck in necklaces(length, len(species))
    ]


def _multisets(
    items: list[tuple[str, ...]], total: int, start: int = 0
) -> Iterator[list[tuple[str, ...]]]:
    if total == 0:
        yield []
        return
    for idx in range(start, len(items)):
        size = len(items[idx])
        if size <= total:
            for rest in _multisets(items, total - size, idx):
                yield [items[idx]] + rest


def _level(model: str, n: int) -> Iterator[list[tuple[str, ...]]]:
    if model == ONE_MATRIX:
        for parts in _partitions(n):
            yield [("a",) * k for k in parts]
    elif model == CASE1:
        for k in range(n, -1, -1):
            for first in _partitions(k):
                for second in _partitions(n - k):
                    yield [("a1",) * p for p in first] + [("a2",) * p for p in second]
    elif model == CASE2:
        words = [
            w
            for length in range(1, n + 1)
            for w in _necklace_words(length, MODEL_SPECIES[CASE2])
        ]
        yield from _multisets(words, n)
    else:
        raise PreconditionError(
            f"Unknown basis model {model!r}; expected one of {BASIS_MODELS}"
        )


def enumerate_basis(model: str, n_max: int) -> list[SingletState]:
    """
    All singlet states of `model` with energy at most `n_max`.

    Ordered by energy, then by the lexicographically minimal rotations of
    the factors.
    """
    if n_max < 0:
        raise PreconditionError(f"Energy cutoff must be >= 0 (got {n_max})")
    limit = settings.BASIS_SIZE_LIMIT
    states: list[SingletState] = []
    for n in range(n_max + 1):
        level = [_state(words, model) for words in _level(model, n)]
        level.sort(key=SingletState.sort_key)
        states.extend(level)
        if len(states) > limit:
            logger.warning(f"Basis for {model} up to level {n_max} exceeds {limit}")
            raise DimensionLimitError(f"{model} basis", len(states), limit)
    logger.debug(f"Enumerated {len(states)} {model} states up to level {n_max}")
    return states


def partition_count(n: int) -> int:
    if n < 0:
        raise PreconditionError(f"Partition count needs n >= 0 (got {n})")
    return int(partition(n))


def necklace_count(k: int, n: int) -> int:
    """Cyclic words of length n over k letters, by Burnside's lemma."""
    if k < 1 or n < 1:
        raise PreconditionError(f"Necklace count needs k, n >= 1 (got {k}, {n})")
    return sum(int(totient(d)) * k ** (n // d) for d in divisors(n)) // n


class DegeneracyModel(BaseModel):
    """
    Level degeneracy d_n used by the thermal sums.

    kinds: "partition" (p(n)), "single-trace" (necklaces over `species`
    letters), "exponential" (base**n) and "custom" (explicit table).
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["partition", "single-trace", "exponential", "custom"] = Field(
        ..., description="Degeneracy family"
    )
    species: int = Field(2, ge=1, description="Letters for single-trace counting")
    base: float = Field(2.0, gt=0, description="Growth base for the exponential kind")
    table: tuple[float, ...] = Field(
        (), description="Custom d_0, d_1, ... values (each >= 1)"
    )

    @field_validator("table")
    @classmethod
    def validate_table(cls, value: tuple[float, ...]) -> tuple[float, ...]:
        if any(d < 1 for d in value):
            raise ValueError("Custom degeneracies must be >= 1")
        return value

    @model_validator(mode="after")
    def validate_custom(self) -> "DegeneracyModel":
        if self.kind == "custom" and not self.table:
            raise ValueError("Custom degeneracy needs a nonempty table")
        return self

    @classmethod
    def parse(cls, text: str) -> "DegeneracyModel":
        """
        Read a command-line spelling: "partition", "single-trace:3",
        "2^n" (or "b^n"), or a comma separated table "1,2,5,10".
        """
        spelled = text.strip()
        if spelled == "partition":
            return cls(kind="partition")
        if spelled.startswith("single-trace"):
            _, _, k = spelled.partition(":")
            return cls(kind="single-trace", species=int(k or 2))
        if spelled.endswith("^n"):
            return cls(kind="exponential", base=float(spelled[:-2]))
        try:
            table = tuple(float(v) for v in spelled.split(","))
        except ValueError as exc:
            raise PreconditionError(f"Unknown degeneracy spelling {text!r}") from exc
        return cls(kind="custom", table=table)

    def log_degeneracy(self, n: int) -> float:
        if n < 0:
            raise PreconditionError(f"Degeneracy level must be >= 0 (got {n})")
        if self.kind == "exponential":
            return n * math.log(self.base)
        return math.log(self.degeneracy(n))

    def degeneracy(self, n: int) -> float:
        if self.kind == "partition":
            return float(partition_count(n))
        if self.kind == "single-trace":
            return 1.0 if n == 0 else float(necklace_count(self.species, n))
        if self.kind == "exponential":
            return self.base**n
        if n >= len(self.table):
            raise PreconditionError(
                f"Custom degeneracy table has no entry for level {n}"
            )
        return float(self.table[n])


def growth_exponent(degeneracy: DegeneracyModel, n_max: int = 20) -> float:
    """Slope of log d_n against n (the error-density exponent)."""
    levels = np.arange(1, n_max + 1)
    logs = np.array([degeneracy.log_degeneracy(int(n)) for n in levels])
    slope, _ = np.polyfit(levels, logs, 1)
    return float(slope)


@dataclass(frozen=True)
class HagedornResult:
    value: float
    log_value: float
    divergent: bool
    tail_ratio: float


def hagedorn_sum(
    q: float,
    beta: float,
    omega: float,
    degeneracy: DegeneracyModel,
    cutoff: int,
) -> HagedornResult:
    """
    Partial sum of n^q d_n e^{-n beta omega} for n = 1..cutoff.

    Divergence is flagged when the term ratio stays above one over the last
    quartile of the terms.
    """
    if cutoff < 1:
        raise PreconditionError(f"Hagedorn sum needs cutoff >= 1 (got {cutoff})")
    levels = np.arange(1, cutoff + 1)
    log_terms = np.array(
        [
            q * math.log(n) + degeneracy.log_degeneracy(int(n)) - n * beta * omega
            for n in levels
        ]
    )
    log_value = float(logsumexp(log_terms))
    value = math.exp(log_value) if log_value < 700 else math.inf
    log_ratios = np.diff(log_terms)
    tail = log_ratios[-max(1, len(log_ratios) // 4):] if len(log_ratios) else np.array([0.0])
    divergent = bool(len(log_ratios) and np.all(tail > 0))
    logger.debug(
        f"Hagedorn sum q={q} beta={beta} cutoff={cutoff}: log value {log_value:.6g}, "
        f"divergent={divergent}"
    )
    return HagedornResult(
        value=value,
        log_value=log_value,
        divergent=divergent,
        tail_ratio=float(np.exp(tail[-1])),
    )


def hagedorn_temperature(degeneracy: DegeneracyModel, omega: float) -> float:
    """T_c = omega / ln(base) for exponential degeneracy."""
    if degeneracy.kind != "exponential" or degeneracy.base <= 1:
        raise PreconditionError("Hagedorn temperature needs exponential growth base > 1")
    return omega / math.log(degeneracy.base)


@dataclass(frozen=True)
class CasimirBound:
    expectation: float
    bound: float
    per_oscillator_ratio: float


def casimir_thermal_bound(
    j: float, omega: float, t: float, n: int, cutoff: int = 200
) -> CasimirBound:
    """
    Thermal expectation of the Casimir penalty with d_m = N^{2m}, against the
    bound sum_m m J e^{-m omega / T}.

    per_oscillator_ratio is (expectation / N^2) / (J / N^2).
    """
    if t <= 0 or n < 2 or j <= 0:
        raise PreconditionError(
            f"Casimir bound needs T > 0, N >= 2, J > 0 (got T={t}, N={n}, J={j})"
        )
    limit = j / (2 * math.log(n))
    if t > limit * (1 + 1e-12):
        raise PreconditionError(
            f"Temperature {t} exceeds J / (2 ln N) = {limit:.6g}; the bound does not apply"
        )
    m = np.arange(1, cutoff + 1, dtype=float)
    log_weights = 2 * m * math.log(n) - m * (j + omega) / t
    expectation = float(np.sum(m * j * np.exp(log_weights)))
    bound = float(np.sum(m * j * np.exp(-m * omega / t)))
    return CasimirBound(
        expectation=expectation,
        bound=bound,
        per_oscillator_ratio=expectation / j,
    )
