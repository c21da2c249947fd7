"""
Codes, error catalogues and approximate Knill-Laflamme data.

Every matrix element is an exact vev of raw trace monomials; irrational
normalizations (1/sqrt(k), Gram square roots) live in sympy scales and in
LargeNSeries, so f, e and g are literal Laurent coefficients.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np
import sympy
from sympy.utilities.iterables import multiset_permutations

from app.config import settings
from app.exceptions import (
    DegenerateGramError,
    NormalizationError,
    PreconditionError,
)
from app.models.series import LargeNSeries, to_sympy
from app.models.trace import Letter, TraceMonomial, TraceWord, canonical_rotation
from app.physics.singlet_basis import CASE2 as BASIS_CASE2
from app.physics.singlet_basis import SingletState, enumerate_basis
from app.physics.trace_algebra import vev, vev_many
from app.utils.logger import get_logger

logger = get_logger(__name__)

MODEL_A = "A"
MODEL_B = "B"
MODEL_C = "C"
MODELS = (MODEL_A, MODEL_B, MODEL_C)

CASE1 = "case1"
CASE2 = "case2"
CASE3_SINGLET = "case3-singlet"
CASE3_NONSINGLET = "case3-nonsinglet-aggregate"
CASES = (CASE1, CASE2, CASE3_SINGLET, CASE3_NONSINGLET)

HALF_INVERSE = Fraction(-1, 2)

MODEL_SPECIES = {MODEL_A: ("a1", "a2"), MODEL_B: ("a1", "a2"), MODEL_C: ("a",)}
MODEL_CASES = {
    MODEL_A: (CASE1, CASE2),
    MODEL_B: (CASE1, CASE2),
    MODEL_C: (CASE3_SINGLET, CASE3_NONSINGLET),
}


@dataclass(frozen=True)
class TraceCombination:
    """Real linear combination sum_k scale_k * monomial_k."""

    terms: tuple[tuple[TraceMonomial, sympy.Expr], ...]

    @classmethod
    def of(cls, monomial: TraceMonomial, scale: object = 1) -> "TraceCombination":
        return cls(((monomial, to_sympy(scale)),))  # type: ignore[arg-type]

    def conj(self) -> "TraceCombination":
        return TraceCombination(tuple((m.conj(), s) for m, s in self.terms))

    def times(self, other: "TraceCombination") -> "TraceCombination":
        return TraceCombination(
            tuple(
                (m1.times(m2), s1 * s2)
                for (m1, s1), (m2, s2) in itertools.product(self.terms, other.terms)
            )
        )

    @property
    def energy(self) -> int:
        energies = {m.energy for m, _ in self.terms}
        if len(energies) != 1:
            raise PreconditionError("Combination mixes terms of different energy")
        return energies.pop()

    @property
    def letter_count(self) -> int:
        return max(m.letter_count for m, _ in self.terms)

    def render(self) -> str:
        return " + ".join(f"({s}) {m.render()}" for m, s in self.terms)


@dataclass(frozen=True)
class ErrorOperator:
    label: str
    operator: TraceCombination
    energy: int
    letters: int
    coupling: float = 1.0

    @classmethod
    def single(
        cls, label: str, monomial: TraceMonomial, scale: object = 1, coupling: float = 1.0
    ) -> "ErrorOperator":
        return cls(
            label,
            TraceCombination.of(monomial, scale),
            monomial.energy,
            monomial.letter_count,
            coupling,
        )

    def times(self, other: "ErrorOperator") -> "ErrorOperator":
        """Product self * other; only for factors that need no reordering."""
        return ErrorOperator(
            f"{self.label}*{other.label}",
            self.operator.times(other.operator),
            self.energy + other.energy,
            self.letters + other.letters,
            self.coupling * other.coupling,
        )


@dataclass(frozen=True)
class ErrorSet:
    model: str
    case: str
    cutoff: int
    entries: tuple[ErrorOperator, ...]
    coupling_base: float = 1.0

    @property
    def labels(self) -> list[str]:
        return [e.label for e in self.entries]

    @property
    def nonsinglet_aggregate(self) -> bool:
        return self.case == CASE3_NONSINGLET

    def level_counts(self) -> dict[int, int]:
        return dict(sorted(Counter(e.letters for e in self.entries).items()))

    def density_exponent(self) -> float | None:
        """Slope of log(count) against letter level; None with fewer than two levels."""
        counts = self.level_counts()
        if len(counts) < 2:
            return None
        levels = np.array(list(counts), dtype=float)
        logs = np.log(np.array(list(counts.values()), dtype=float))
        slope, _ = np.polyfit(levels, logs, 1)
        return float(slope)


@dataclass
class CodeSpec:
    """
    Logical code: raw states with their exact Gram series and the matrix T
    with logical_k = sum_i T[k][i] raw_i.
    """

    model: str
    labels: tuple[str, ...]
    raw_states: tuple[TraceCombination, ...]
    orthonormalization: str
    gram: list[list[LargeNSeries]]
    transform: list[list[LargeNSeries]]
    parameters: dict = field(default_factory=dict)

    @property
    def d(self) -> int:
        return len(self.raw_states)

    @property
    def species(self) -> tuple[str, ...]:
        return MODEL_SPECIES[self.model]

    def overlap(self, i: int, j: int) -> LargeNSeries:
        return self.gram[i][j]

    def logical_overlap(self, k: int, l: int) -> LargeNSeries:
        return to_logical(self, self.gram)[k][l]

    def singlet_states(self) -> list[SingletState]:
        return [
            SingletState.of(m, self.model)
            for combo in self.raw_states
            for m, _ in combo.terms
        ]

    def gram_at(self, n: int) -> np.ndarray:
        """Float Gram matrix at a working N, refusing near-singular ones."""
        matrix = np.array(
            [[self.gram[i][j].evaluate(n) for j in range(self.d)] for i in range(self.d)]
        )
        smallest = float(np.min(np.linalg.eigvalsh(matrix)))
        if smallest < settings.GRAM_FLOOR:
            raise DegenerateGramError(
                f"Gram matrix of model {self.model} is degenerate at N={n} "
                f"(smallest eigenvalue {smallest:.3g})"
            )
        return matrix


_element_cache: dict[tuple[TraceMonomial, ...], LargeNSeries] = {}


def _element(product: tuple[TraceMonomial, ...]) -> LargeNSeries:
    cached = _element_cache.get(product)
    if cached is None:
        if len(_element_cache) > settings.CONTRACTION_CACHE_SIZE:
            _element_cache.clear()
        cached = LargeNSeries.from_amplitude(vev(product))
        _element_cache[product] = cached
    return cached


def prefetch(
    products: Iterable[tuple[TraceMonomial, ...]], workers: int | None = None
) -> None:
    """Warm the element cache, in parallel when workers > 1."""
    n_process = workers if workers is not None else settings.WORKERS
    pending = [p for p in dict.fromkeys(products) if p not in _element_cache]
    if n_process <= 1 or len(pending) < 2:
        return
    for product, amplitude in zip(pending, vev_many(pending, n_process)):
        _element_cache[product] = LargeNSeries.from_amplitude(amplitude)


def _expansion(
    bra: TraceCombination, ops: Sequence[TraceCombination], ket: TraceCombination
) -> Iterable[tuple[tuple[TraceMonomial, ...], sympy.Expr]]:
    conj_bra = bra.conj()
    for choice in itertools.product(conj_bra.terms, *(op.terms for op in ops), ket.terms):
        scale = sympy.Integer(1)
        for _, s in choice:
            scale = scale * s
        yield tuple(m for m, _ in choice), scale


def combination_element(
    bra: TraceCombination,
    ops: Sequence[TraceCombination],
    ket: TraceCombination,
) -> LargeNSeries:
    """<bra| ops[0] ops[1] ... |ket> for combinations, as an exact series."""
    total = LargeNSeries()
    for product, scale in _expansion(bra, ops, ket):
        total = total + _element(product) * scale
    return total


def raw_matrix(
    code: CodeSpec, ops: Sequence[TraceCombination]
) -> list[list[LargeNSeries]]:
    return [
        [combination_element(bra, ops, ket) for ket in code.raw_states]
        for bra in code.raw_states
    ]


def to_logical(
    code: CodeSpec, matrix: list[list[LargeNSeries]]
) -> list[list[LargeNSeries]]:
    t = code.transform
    d = code.d
    result = []
    for k in range(d):
        row = []
        for l in range(d):
            acc = LargeNSeries()
            for i in range(d):
                if t[k][i].is_zero():
                    continue
                for j in range(d):
                    if t[l][j].is_zero() or matrix[i][j].is_zero():
                        continue
                    acc = acc + t[k][i] * t[l][j] * matrix[i][j]
            row.append(acc)
        result.append(row)
    return result


def logical_matrix(
    code: CodeSpec, ops: Sequence[TraceCombination]
) -> list[list[LargeNSeries]]:
    """<k~| ops |l~> in the orthonormalized logical basis."""
    return to_logical(code, raw_matrix(code, ops))


def _gram_schmidt(gram: list[list[LargeNSeries]]) -> list[list[LargeNSeries]]:
    d = len(gram)
    rows: list[list[LargeNSeries]] = []
    for k in range(d):
        coeffs = [LargeNSeries.constant(1 if i == k else 0) for i in range(d)]
        for row in rows:
            projection = LargeNSeries()
            for i in range(d):
                if not row[i].is_zero():
                    projection = projection + row[i] * gram[i][k]
            coeffs = [coeffs[i] - projection * row[i] for i in range(d)]
        norm2 = LargeNSeries()
        for i in range(d):
            for j in range(d):
                if not coeffs[i].is_zero() and not coeffs[j].is_zero():
                    norm2 = norm2 + coeffs[i] * coeffs[j] * gram[i][j]
        if norm2.is_zero():
            raise DegenerateGramError(f"Logical state {k} lies in the span of earlier states")
        scale = norm2.power(HALF_INVERSE)
        rows.append([c * scale for c in coeffs])
    return rows


def _symmetric_pair(gram: list[list[LargeNSeries]]) -> list[list[LargeNSeries]]:
    """(|1> +- |2>) of the individually normalized states, each renormalized."""
    if len(gram) != 2:
        raise PreconditionError("Symmetric orthonormalization is defined for two states")
    n0 = gram[0][0].power(HALF_INVERSE)
    n1 = gram[1][1].power(HALF_INVERSE)
    s = gram[0][1] * n0 * n1
    plus = (LargeNSeries.constant(2) + s * 2).power(HALF_INVERSE)
    minus = (LargeNSeries.constant(2) - s * 2).power(HALF_INVERSE)
    return [[n0 * plus, n1 * plus], [n0 * minus, -(n1 * minus)]]


def _creation(species: str, power: int) -> TraceWord:
    return TraceWord(tuple(Letter(species, True) for _ in range(power)))


def _state_combination(words: Sequence[TraceWord], scale: object = 1) -> TraceCombination:
    return TraceCombination.of(TraceMonomial(tuple(words)).unit_normalized(), scale)


def build_code(
    model: str,
    length: int | None = None,
    working_n: int | None = None,
) -> CodeSpec:
    """
    Logical qubit of a model with exact Gram data.

    Args:
        model: "A" (two distant oscillators), "B" (coupled oscillators, ground
            space) or "C" (global-symmetry model).
        length: trace length L of model C (>= 2).
        working_n: when given, the Gram matrix is checked for invertibility there.
    """
    if model == MODEL_A:
        raw = (
            _state_combination([TraceWord.of("a1+", "a1+", "a2+", "a2+")]),
            _state_combination(
                [TraceWord.of("a1+", "a2+"), TraceWord.of("a1+", "a2+")],
                1 / sympy.sqrt(2),
            ),
        )
        labels, scheme, params = ("up", "down"), "gram-schmidt", {}
    elif model == MODEL_B:
        raw = (
            _state_combination([_creation("a1", 1)]),
            _state_combination([_creation("a2", 1)]),
        )
        labels, scheme, params = ("up", "down"), "gram-schmidt", {}
    elif model == MODEL_C:
        if length is None or length < 2:
            raise PreconditionError(f"Model C needs an integer L >= 2 (got {length})")
        raw = (
            _state_combination([_creation("a", length), _creation("a", length)]),
            _state_combination([_creation("a", length + 1), _creation("a", length - 1)]),
        )
        labels, scheme, params = ("up", "down"), "symmetric", {"L": length}
    else:
        raise PreconditionError(f"Unknown model {model!r}; expected one of {MODELS}")

    gram = [
        [combination_element(bra, (), ket) for ket in raw] for bra in raw
    ]
    transform = _symmetric_pair(gram) if scheme == "symmetric" else _gram_schmidt(gram)
    code = CodeSpec(model, labels, raw, scheme, gram, transform, params)
    if working_n is not None:
        code.gram_at(working_n)
    logger.info(f"Built model {model} code {params} with {scheme} orthonormalization")
    return code


def _pure_scale(species_counts: Mapping[Letter, int]) -> sympy.Expr:
    """1/sqrt(k) for a single-species pure word of length k."""
    if len(species_counts) == 1:
        (count,) = species_counts.values()
        return 1 / sympy.sqrt(count)
    return sympy.Integer(1)


def _p_sum(counts: Mapping[Letter, int]) -> list[tuple[TraceWord, int]]:
    """Distinct linear arrangements of the letters, grouped by cyclic class."""
    letters = sorted(l for l, k in counts.items() for _ in range(k))
    classes: Counter = Counter()
    for arrangement in multiset_permutations(letters):
        classes[canonical_rotation(arrangement)] += 1
    return [(TraceWord(rep), mult) for rep, mult in sorted(classes.items())]


def _factor_label(counts: Mapping[Letter, int]) -> str:
    parts = []
    for letter, k in sorted(counts.items(), key=lambda kv: (not kv[0].dagger, kv[0].species)):
        parts.append(letter.render() if k == 1 else f"{letter.render()}^{k}")
    return "P{" + " ".join(parts) + "}"


def error_from_factors(
    factors: Sequence[Mapping[Letter, int]],
    coupling: float = 1.0,
) -> ErrorOperator:
    """
    Normal-ordered product of P-summed traces divided by N^(letters/2).

    Pure single-species factors Tr(a+^k) or Tr(a^k) carry 1/sqrt(k).
    """
    expansions = [_p_sum(f) for f in factors]
    scale = sympy.Integer(1)
    all_letters: list[Letter] = []
    for f in factors:
        if len({l.dagger for l in f}) == 1:
            scale = scale * _pure_scale(f)
        all_letters.extend(l for l, k in f.items() for _ in range(k))
    pure = len({l.dagger for l in all_letters}) == 1
    terms = []
    for choice in itertools.product(*expansions):
        multiplicity = 1
        for _, mult in choice:
            multiplicity *= mult
        monomial = TraceMonomial(
            tuple(word for word, _ in choice),
            normal_ordered=not pure,
            coefficient=multiplicity,
        ).unit_normalized()
        terms.append((monomial, scale))
    energy = sum(1 if l.dagger else -1 for l in all_letters)
    label = "*".join(_factor_label(f) for f in factors)
    return ErrorOperator(label, TraceCombination(tuple(terms)), energy, len(all_letters), coupling)


def power_error(n: int, species: str = "a1") -> ErrorOperator:
    """E_n = Tr(a+^n) / (sqrt(n) N^(n/2))."""
    monomial = TraceMonomial((_creation(species, n),)).unit_normalized()
    return ErrorOperator.single(f"E_{n}[{species}]", monomial, 1 / sympy.sqrt(n))


def decay_mode(species: str = "a1") -> ErrorOperator:
    """E_{0,2} = Tr(a^2) / (sqrt(2) N)."""
    monomial = TraceMonomial((TraceWord.of(species, species),)).unit_normalized()
    return ErrorOperator.single(f"E_0,2[{species}]", monomial, 1 / sympy.sqrt(2))


def number_error(n: int, species: str = "a1") -> ErrorOperator:
    """Z_n = :Tr(P{a+^n a^n}): / N^n."""
    error = error_from_factors([{Letter(species, True): n, Letter(species): n}])
    return ErrorOperator(f"Z_{n}[{species}]", error.operator, 0, 2 * n)


def mixed_error(n: int, m: int) -> ErrorOperator:
    """E_(n,m) = Tr(a1+^n a2+^m) / N^((n+m)/2), with 1/sqrt(n) when m = 0."""
    if n < 0 or m < 0 or n + m == 0:
        raise PreconditionError(f"E_(n,m) needs n, m >= 0 and n + m >= 1 (got {n}, {m})")
    word = TraceWord(
        tuple([Letter("a1", True)] * n + [Letter("a2", True)] * m)
    )
    scale = 1 / sympy.sqrt(word.symmetry_order())
    monomial = TraceMonomial((word,)).unit_normalized()
    return ErrorOperator.single(f"E_({n},{m})", monomial, scale)


def _factor_shapes(species: Sequence[str], max_letters: int) -> list[dict[Letter, int]]:
    shapes = []
    for s in species:
        for creators in range(max_letters + 1):
            for annihilators in range(max_letters + 1 - creators):
                if creators + annihilators == 0:
                    continue
                shape = {}
                if creators:
                    shape[Letter(s, True)] = creators
                if annihilators:
                    shape[Letter(s)] = annihilators
                shapes.append(shape)
    return shapes


def _letters(shape: Mapping[Letter, int]) -> int:
    return sum(shape.values())


def _excluded_for_model_c(shape: Mapping[Letter, int], length: int) -> bool:
    if len(shape) != 1:
        return False
    (count,) = shape.values()
    return count in (length - 1, length, length + 1)


def generate_errors(
    model: str,
    case: str,
    cutoff: int,
    length: int | None = None,
    coupling_base: float = 0.5,
) -> ErrorSet:
    """
    Deterministic catalogue of error operators with at most `cutoff` letters.

    case1: normal-ordered products of single-species traces; case2: single
    traces mixing both species; case3-singlet: multi-trace singlets of model C
    without Tr(a+^L), Tr(a+^(L+-1)) factors and with coupling base^letters;
    case3-nonsinglet-aggregate: no monomials, the leakage channel is added by
    the simulator.
    """
    if model not in MODELS:
        raise PreconditionError(f"Unknown model {model!r}; expected one of {MODELS}")
    if case not in MODEL_CASES[model]:
        raise PreconditionError(
            f"Case {case!r} does not apply to model {model}; use one of {MODEL_CASES[model]}"
        )
    if cutoff < 0:
        raise PreconditionError(f"Error cutoff must be >= 0 (got {cutoff})")
    species = MODEL_SPECIES[model]
    entries: list[ErrorOperator] = []
    if cutoff == 0 or case == CASE3_NONSINGLET:
        return ErrorSet(model, case, cutoff, (), coupling_base)

    if case == CASE2:
        for total in range(1, cutoff + 1):
            for counts in _compositions(total, 4):
                shape = {
                    letter: k
                    for letter, k in zip(
                        (Letter("a1", True), Letter("a2", True), Letter("a1"), Letter("a2")),
                        counts,
                    )
                    if k
                }
                entries.append(error_from_factors([shape]))
    else:
        if case == CASE3_SINGLET and (length is None or length < 2):
            raise PreconditionError("case3-singlet errors need the model C length L >= 2")
        shapes = _factor_shapes(species, cutoff)
        if case == CASE3_SINGLET:
            shapes = [s for s in shapes if not _excluded_for_model_c(s, length)]  # type: ignore[arg-type]
        for count in range(1, cutoff + 1):
            for combo in itertools.combinations_with_replacement(range(len(shapes)), count):
                chosen = [shapes[i] for i in combo]
                letters = sum(_letters(s) for s in chosen)
                if letters > cutoff:
                    continue
                coupling = coupling_base**letters if case == CASE3_SINGLET else 1.0
                entries.append(error_from_factors(chosen, coupling))
    entries.sort(key=lambda e: (e.letters, e.label))
    logger.info(f"Generated {len(entries)} {case} errors for model {model} up to {cutoff} letters")
    return ErrorSet(model, case, cutoff, tuple(entries), coupling_base)


def _compositions(total: int, parts: int) -> list[tuple[int, ...]]:
    if parts == 1:
        return [(total,)]
    return [
        (first,) + rest
        for first in range(total, -1, -1)
        for rest in _compositions(total - first, parts - 1)
    ]


def exceptional_errors(errors: ErrorSet) -> list[ErrorOperator]:
    """Single-trace errors holding exactly one annihilation letter."""
    result = []
    for error in errors.entries:
        annihilators = error.letters - (error.letters + error.energy) // 2
        if annihilators == 1 and all(len(m.factors) == 1 for m, _ in error.operator.terms):
            result.append(error)
    return result


@dataclass(frozen=True)
class AncillaCheck:
    first: int
    second: int
    compared: int
    mismatches: list[str]

    @property
    def holds(self) -> bool:
        return not self.mismatches


def ancilla_projection_check(first: int = 2, second: int = 2) -> AncillaCheck:
    """
    A logical operation routed through an ancilla species c:
    Tr(a2+^m c) Tr(a1+^k c+)|0> against Tr(a1+^k a2+^m)|0>, compared on every
    two-species singlet state of the same level.
    """
    if first < 1 or second < 1:
        raise PreconditionError("Ancilla check needs k, m >= 1")
    relay = (
        TraceMonomial((TraceWord.of(*(["a2+"] * second + ["c"])),)),
        TraceMonomial((TraceWord.of(*(["a1+"] * first + ["c+"])),)),
    )
    direct = TraceMonomial((TraceWord.of(*(["a1+"] * first + ["a2+"] * second)),))
    level = [
        s for s in enumerate_basis(BASIS_CASE2, first + second) if s.energy == first + second
    ]
    mismatches = []
    for state in level:
        bra = state.defining.conj()
        if vev((bra,) + relay) != vev((bra, direct)):
            mismatches.append(state.render())
    logger.debug(
        f"Ancilla relay k={first} m={second}: {len(mismatches)} of {len(level)} states differ"
    )
    return AncillaCheck(first, second, len(level), mismatches)


def _value(expr: sympy.Expr) -> float:
    return float(sympy.N(expr))


@dataclass
class KLData:
    """
    Extracted aKL coefficients in the logical basis.

    f[a][b]: N^0 coefficient of <0~|E_a+ E_b|0~>; g[a][b][i][j]: N^-2
    coefficient of <i~|E_a+ E_b|j~>; e[a][i][j]: N^-1 coefficient of <i~|E_a|j~>.
    """

    labels: list[str]
    energies: list[int]
    couplings: list[float]
    d: int
    f: list[list[sympy.Expr]]
    g: list[list[list[list[sympy.Expr]]]]
    e: list[list[list[sympy.Expr]]]
    leading_action: list[list[list[sympy.Expr]]]
    identity_like: list[int]
    violations: list[str]

    def f_array(self) -> np.ndarray:
        return np.array([[_value(x) for x in row] for row in self.f])

    def g_array(self) -> np.ndarray:
        size = len(self.labels)
        out = np.zeros((size, size, self.d, self.d))
        for a in range(size):
            for b in range(size):
                for i in range(self.d):
                    for j in range(self.d):
                        out[a, b, i, j] = _value(self.g[a][b][i][j])
        return out

    def to_report(self) -> dict:
        return {
            "labels": self.labels,
            "energies": self.energies,
            "f": [[str(x) for x in row] for row in self.f],
            "g": [
                [[[str(x) for x in r] for r in block] for block in row]
                for row in self.g
            ],
            "e": [[[str(x) for x in r] for r in block] for block in self.e],
            "identity_like": [self.labels[i] for i in self.identity_like],
            "violations": self.violations,
        }


def _is_identity(matrix: list[list[sympy.Expr]]) -> bool:
    d = len(matrix)
    diagonal = {sympy.simplify(matrix[i][i] - matrix[0][0]) == 0 for i in range(d)}
    off = all(matrix[i][j] == 0 for i in range(d) for j in range(d) if i != j)
    return diagonal == {True} and off


def _coefficients(matrix: list[list[LargeNSeries]], power: int) -> list[list[sympy.Expr]]:
    return [[entry.coefficient(power) for entry in row] for row in matrix]


def kl_matrices(
    code: CodeSpec, errors: ErrorSet | Sequence[ErrorOperator], workers: int | None = None
) -> KLData:
    """
    Exact <i~|E_a+ E_b|j~> and <i~|E_a|j~> for every error pair, with their
    N^0, N^-1 and N^-2 coefficients extracted.
    """
    entries = list(errors.entries if isinstance(errors, ErrorSet) else errors)
    size, d = len(entries), code.d
    energies = [e.energy for e in entries]
    zero = sympy.Integer(0)
    f = [[zero] * size for _ in range(size)]
    g = [[[[zero] * d for _ in range(d)] for _ in range(size)] for _ in range(size)]
    e = [[[zero] * d for _ in range(d)] for _ in range(size)]
    leading = [[[zero] * d for _ in range(d)] for _ in range(size)]
    violations: list[str] = []

    pairs = [(a, b) for a in range(size) for b in range(size) if energies[a] == energies[b]]
    products = [
        product
        for a, b in pairs
        for bra in code.raw_states
        for ket in code.raw_states
        for product, _ in _expansion(
            bra, (entries[a].operator.conj(), entries[b].operator), ket
        )
    ]
    prefetch(products, workers)
    logger.info(f"Evaluating {len(pairs)} error pairs on model {code.model}")

    for a, b in pairs:
        matrix = logical_matrix(code, (entries[a].operator.conj(), entries[b].operator))
        for row in matrix:
            for entry in row:
                if entry.leading_power is not None and entry.leading_power > 0:
                    raise NormalizationError(
                        f"<E_a+ E_b> for {entries[a].label}, {entries[b].label} grows as "
                        f"N^{entry.leading_power}"
                    )
        order0 = _coefficients(matrix, 0)
        f[a][b] = order0[0][0]
        if not _is_identity(order0) and any(x != 0 for row in order0 for x in row):
            violations.append(
                f"f not proportional to identity for ({entries[a].label}, {entries[b].label})"
            )
        for i in range(d):
            for j in range(d):
                g[a][b][i][j] = matrix[i][j].coefficient(-2)

    identity_like: list[int] = []
    for a, error in enumerate(entries):
        if error.energy != 0:
            continue
        action = logical_matrix(code, (error.operator,))
        order0 = _coefficients(action, 0)
        order1 = _coefficients(action, -1)
        for i in range(d):
            for j in range(d):
                leading[a][i][j] = order0[i][j]
                e[a][i][j] = order1[i][j]
        nonzero = any(x != 0 for m in (order0, order1) for row in m for x in row)
        if nonzero and _is_identity(order0) and _is_identity(order1):
            identity_like.append(a)
        elif any(x != 0 for row in order0 for x in row):
            violations.append(f"O(1) logical action of {error.label}")

    for message in violations:
        logger.warning(message)
    return KLData(
        labels=[x.label for x in entries],
        energies=energies,
        couplings=[x.coupling for x in entries],
        d=d,
        f=f,
        g=g,
        e=e,
        leading_action=leading,
        identity_like=identity_like,
        violations=violations,
    )


@dataclass
class ErrorBlock:
    """Errors of one energy, rotated to diagonalize their f block."""

    energy: int
    members: list[int]
    eigenvalues: np.ndarray
    rotation: np.ndarray
    first: list[int]
    second: list[int]
    g: np.ndarray
    c: np.ndarray
    delta: np.ndarray
    h: np.ndarray


@dataclass
class ErrorClassification:
    d: int
    labels: list[str]
    energies: list[int]
    blocks: list[ErrorBlock]
    identity_like: list[int]
    classes: dict[str, str]
    first_weights: dict[str, float] = field(default_factory=dict)

    @property
    def first_class_count(self) -> int:
        return sum(len(b.first) for b in self.blocks)

    @property
    def second_class_count(self) -> int:
        return sum(len(b.second) for b in self.blocks)

    def class_of(self, label: str) -> str:
        return self.classes[label]

    @property
    def mixed(self) -> list[str]:
        return [label for label, kind in self.classes.items() if kind == "mixed"]


def classify_errors(kl: KLData, tolerance: float | None = None) -> ErrorClassification:
    """
    Diagonalize f per energy block; eigenvalues above tolerance * max are
    first class, the rest second class. Identity-like errors are set aside.

    A label's class is read off its projection onto the rotated channels:
    "first" or "second" when all of its weight lies in one class, "mixed"
    otherwise. `first_weights` holds the first-class share per label.
    """
    tol = tolerance if tolerance is not None else settings.CLASS_TOLERANCE
    f_all = kl.f_array()
    g_all = kl.g_array()
    active = [a for a in range(len(kl.labels)) if a not in kl.identity_like]
    scale = max((abs(f_all[a, a]) for a in active), default=0.0)
    threshold = tol * scale if scale > 0 else tol

    classes = {kl.labels[a]: "identity" for a in kl.identity_like}
    first_weights: dict[str, float] = {}

    blocks: list[ErrorBlock] = []
    d = kl.d
    for energy in sorted({kl.energies[a] for a in active}):
        members = [a for a in active if kl.energies[a] == energy]
        f_block = f_all[np.ix_(members, members)]
        f_block = (f_block + f_block.T) / 2
        eigenvalues, rotation = np.linalg.eigh(f_block)
        first = [k for k, w in enumerate(eigenvalues) if w > threshold]
        second = [k for k, w in enumerate(eigenvalues) if w <= threshold]
        for row, a in enumerate(members):
            weight = float(np.sum(rotation[row, first] ** 2))
            first_weights[kl.labels[a]] = weight
            if weight >= 1 - tol:
                classes[kl.labels[a]] = "first"
            elif weight <= tol:
                classes[kl.labels[a]] = "second"
            else:
                classes[kl.labels[a]] = "mixed"
        g_block = g_all[np.ix_(members, members)]
        g_rot = np.einsum("ak,bl,abij->klij", rotation, rotation, g_block)
        m = len(members)
        c = np.einsum("klii->kl", g_rot) / d
        delta = np.stack([g_rot[:, :, i, i] - c for i in range(d)])
        h = g_rot.copy()
        for i in range(d):
            h[:, :, i, i] = 0.0
        blocks.append(
            ErrorBlock(
                energy=energy,
                members=members,
                eigenvalues=eigenvalues,
                rotation=rotation,
                first=first,
                second=second,
                g=g_rot,
                c=c if m else np.zeros((0, 0)),
                delta=delta,
                h=h,
            )
        )
    logger.info(
        f"Classified {len(active)} errors: "
        f"{sum(len(b.first) for b in blocks)} first class, "
        f"{sum(len(b.second) for b in blocks)} second class, "
        f"{len(kl.identity_like)} identity-like"
    )
    return ErrorClassification(
        d=d,
        labels=kl.labels,
        energies=kl.energies,
        blocks=blocks,
        identity_like=list(kl.identity_like),
        classes=classes,
        first_weights=first_weights,
    )


def matrix_entropy(matrix: np.ndarray) -> float:
    """-Tr(M ln M) over eigenvalues above the floor."""
    if matrix.size == 0:
        return 0.0
    values = np.linalg.eigvalsh((matrix + matrix.T) / 2)
    values = values[values > settings.EIGENVALUE_FLOOR]
    return float(-np.sum(values * np.log(values)))


@dataclass
class DecayPrediction:
    times: np.ndarray
    information: np.ndarray
    first_class_rate: float
    second_class_rate: float
    k1_bound: np.ndarray
    k2_bound: np.ndarray
    initial: float


def _rotated_rates(block: ErrorBlock, labels: list[str], rates: Mapping[str, float]) -> np.ndarray:
    member_rates = np.array([rates[labels[a]] for a in block.members])
    return (block.rotation**2).T @ member_rates


def predict_decay(
    classification: ErrorClassification,
    rates: Mapping[str, float],
    times: Sequence[float],
    n: int,
    d: int | None = None,
    q: float = 1.0,
) -> DecayPrediction:
    """
    Early-time mutual information 2 ln d - K(t) from the classified errors,
    plus the finite-time weight bounds K1(t) and K2(t).
    """
    d = d or classification.d
    missing = [
        classification.labels[a]
        for b in classification.blocks
        for a in b.members
        if classification.labels[a] not in rates
    ]
    if missing:
        raise PreconditionError(f"No rate supplied for errors {missing}")
    if any(r < 0 for r in rates.values()):
        raise PreconditionError("Rates must be nonnegative")
    t = np.asarray(times, dtype=float)

    second_rate = 0.0
    first_rate = 0.0
    k1_linear = 0.0
    k1_square = 0.0
    k2_slope = 0.0
    for block in classification.blocks:
        lam = _rotated_rates(block, classification.labels, rates)
        level = abs(block.energy)
        if block.second:
            idx = block.second
            size = len(idx)
            full = np.zeros((size * d, size * d))
            for p, sigma in enumerate(idx):
                for r, nu in enumerate(idx):
                    full[p * d:(p + 1) * d, r * d:(r + 1) * d] = block.g[sigma, nu]
            summed = sum(block.g[np.ix_(idx, idx)][:, :, i, i] for i in range(d)) / d
            lam_block = float(np.mean(lam[idx]))
            loss = matrix_entropy(summed) - matrix_entropy(full) / d
            second_rate += lam_block * loss / n**2
            bound = float(np.max(np.abs(full))) if full.size else 0.0
            rank = int(np.linalg.matrix_rank(full, tol=settings.GRAM_FLOOR)) if full.size else 0
            k2_slope += lam_block * bound * rank * math.log(d) / n**2
        if block.first:
            idx = block.first
            inverse = np.diag(1.0 / block.eigenvalues[idx])
            total = 0.0
            for i in range(d):
                delta = block.delta[i][np.ix_(idx, idx)]
                total += float(np.trace(delta @ inverse @ delta))
                for j in range(d):
                    if i != j:
                        h = block.h[np.ix_(idx, idx)][:, :, i, j]
                        total += float(np.trace(h @ inverse @ h.T))
            lam_block = float(np.mean(lam[idx]))
            first_rate += lam_block * total / (2 * d * n**4)
            k1_linear += float(np.sum(lam[idx])) * level**q
            k1_square += float(np.sum(lam[idx])) * level ** (2 * q)

    initial = 2 * math.log(d)
    information = np.maximum(initial - (first_rate + second_rate) * t, 0.0)
    k1 = (2 * (k1_linear * t) ** 2 + k1_square * t) / n**4
    k2 = k2_slope * t
    logger.debug(
        f"Decay prediction at N={n}: second-class rate {second_rate:.4g}, "
        f"first-class rate {first_rate:.4g}"
    )
    return DecayPrediction(
        times=t,
        information=information,
        first_class_rate=first_rate,
        second_class_rate=second_rate,
        k1_bound=k1,
        k2_bound=k2,
        initial=initial,
    )
