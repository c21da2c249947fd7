"""
The qubit analogue of the matrix oscillator: N^2 spin-1/2 sites on an N x N
grid, trace-raised states, the pseudo-generator penalty and its spectra.

Site (r, c) is bit r * N + c of a configuration mask; a set bit is a raised
spin. (S+)_{rc} raises site (r, c) and (S-)_{rc} lowers site (c, r), so that
S- is the adjoint of S+ as a matrix and Tr(S+ S-) counts raised spins.
"""

from __future__ import annotations

import itertools
import math
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np
from scipy import sparse
from scipy.linalg import eigh
from scipy.sparse.linalg import eigsh

from app.config import settings
from app.exceptions import DimensionLimitError, PreconditionError
from app.physics.lindblad_sim import fit_power_law, nonsinglet_multiplier
from app.physics.singlet_basis import partition_count
from app.utils.logger import get_logger

logger = get_logger(__name__)

RAISE = "+"
LOWER = "-"
SZ = "z"
SPIN_KINDS = (RAISE, LOWER, SZ)

DENSE_LIMIT = 3_000
RESIDUAL_MAX_N = 4
HALF = Fraction(1, 2)


def site(n: int, row: int, col: int) -> int:
    return row * n + col


def raised_count(config: int) -> int:
    return bin(config).count("1")


@dataclass
class SpinConfigState:
    """
    Sparse exact state: configuration mask -> rational amplitude.
    """

    n: int
    amplitudes: dict[int, Fraction] = field(default_factory=dict)

    @classmethod
    def vacuum(cls, n: int) -> "SpinConfigState":
        if n < 1:
            raise PreconditionError(f"Spin grid needs N >= 1 (got {n})")
        return cls(n, {0: Fraction(1)})

    @property
    def sites(self) -> int:
        return self.n * self.n

    def is_zero(self) -> bool:
        return not any(self.amplitudes.values())

    def quanta(self) -> set[int]:
        return {raised_count(c) for c, a in self.amplitudes.items() if a}

    def _check(self, other: "SpinConfigState") -> None:
        if other.n != self.n:
            raise PreconditionError(
                f"Cannot combine spin states on N={self.n} and N={other.n}"
            )

    def __add__(self, other: "SpinConfigState") -> "SpinConfigState":
        self._check(other)
        total: dict[int, Fraction] = defaultdict(Fraction)
        for source in (self.amplitudes, other.amplitudes):
            for config, amp in source.items():
                total[config] += amp
        return SpinConfigState(self.n, {c: a for c, a in total.items() if a})

    def __sub__(self, other: "SpinConfigState") -> "SpinConfigState":
        return self + other.scale(-1)

    def scale(self, factor: Fraction | int) -> "SpinConfigState":
        factor = Fraction(factor)
        if factor == 0:
            return SpinConfigState(self.n)
        return SpinConfigState(
            self.n, {c: a * factor for c, a in self.amplitudes.items()}
        )

    def inner(self, other: "SpinConfigState") -> Fraction:
        """<self|other>; amplitudes are real."""
        self._check(other)
        small, large = sorted((self.amplitudes, other.amplitudes), key=len)
        return sum(
            (a * large[c] for c, a in small.items() if c in large), Fraction(0)
        )

    def norm_squared(self) -> Fraction:
        return sum((a * a for a in self.amplitudes.values()), Fraction(0))

    def to_vector(self, index: Mapping[int, int]) -> np.ndarray:
        vector = np.zeros(len(index))
        for config, amp in self.amplitudes.items():
            vector[index[config]] = float(amp)
        return vector


@dataclass(frozen=True)
class SpinLetter:
    """One spin operator with matrix-index variables (row, col)."""

    kind: str
    row: int
    col: int

    def __post_init__(self):
        if self.kind not in SPIN_KINDS:
            raise PreconditionError(
                f"Unknown spin letter {self.kind!r}; expected one of {SPIN_KINDS}"
            )


@dataclass(frozen=True)
class SpinOperatorSpec:
    """
    coefficient * sum over all index variables of the ordered letter product.
    The rightmost letter acts first.
    """

    letters: tuple[SpinLetter, ...]
    coefficient: Fraction = Fraction(1)

    @classmethod
    def trace(cls, word: str, coefficient: Fraction | int = 1) -> "SpinOperatorSpec":
        """Tr of a word over "+", "-" and "z", e.g. "++" for Tr(S+^2)."""
        if not word:
            raise PreconditionError("A spin trace word needs at least one letter")
        size = len(word)
        return cls(
            tuple(SpinLetter(kind, k, (k + 1) % size) for k, kind in enumerate(word)),
            Fraction(coefficient),
        )

    @classmethod
    def raising_power(cls, power: int) -> "SpinOperatorSpec":
        return cls.trace(RAISE * power)

    @property
    def variables(self) -> int:
        return 1 + max(max(l.row, l.col) for l in self.letters)

    def render(self) -> str:
        body = " ".join(f"S{l.kind}[{l.row},{l.col}]" for l in self.letters)
        return f"{self.coefficient} * sum({body})"


def diagonal_cube() -> SpinOperatorSpec:
    """sum_i (S+^2)_ii (S+)_ii."""
    return SpinOperatorSpec(
        (
            SpinLetter(RAISE, 0, 1),
            SpinLetter(RAISE, 1, 0),
            SpinLetter(RAISE, 0, 0),
        )
    )


def diagonal_square() -> SpinOperatorSpec:
    """sum_i (S+)_ii (S+)_ii, which vanishes for spin-1/2."""
    return SpinOperatorSpec((SpinLetter(RAISE, 0, 0), SpinLetter(RAISE, 0, 0)))


def _act(
    kind: str, target: int, config: int, budget: int
) -> tuple[int, Fraction] | None:
    bit = 1 << target
    if kind == RAISE:
        if config & bit:
            return None
        raised = config | bit
        count = raised_count(raised)
        if count > budget:
            raise DimensionLimitError("spin quanta", count, budget)
        return raised, Fraction(1)
    if kind == LOWER:
        if not config & bit:
            return None
        return config & ~bit, Fraction(1)
    return config, HALF if config & bit else -HALF


def _letter_site(letter: SpinLetter, values: Sequence[int], n: int) -> int:
    row, col = values[letter.row], values[letter.col]
    if letter.kind == LOWER:
        return site(n, col, row)
    return site(n, row, col)


def apply_trace_operator(
    operator: SpinOperatorSpec | str,
    state: SpinConfigState,
    budget: int | None = None,
) -> SpinConfigState:
    """
    Exact sparse action of an index-summed spin word.

    Index variables are assigned right to left as letters are applied, so
    branches that revisit a raised site are pruned as soon as they vanish.
    """
    spec = (
        SpinOperatorSpec.trace(operator) if isinstance(operator, str) else operator
    )
    limit = budget if budget is not None else settings.SPIN_QUANTA_BUDGET
    n = state.n
    letters = list(reversed(spec.letters))
    result: dict[int, Fraction] = defaultdict(Fraction)

    def walk(depth: int, values: list[int | None], config: int, amp: Fraction):
        if depth == len(letters):
            result[config] += amp
            return
        letter = letters[depth]
        free = [v for v in (letter.row, letter.col) if values[v] is None]
        free = list(dict.fromkeys(free))
        for choice in itertools.product(range(n), repeat=len(free)):
            for var, value in zip(free, choice):
                values[var] = value
            acted = _act(letter.kind, _letter_site(letter, values, n), config, limit)
            if acted is not None:
                walk(depth + 1, values, acted[0], amp * acted[1])
        for var in free:
            values[var] = None

    for config, amp in state.amplitudes.items():
        if amp:
            walk(0, [None] * spec.variables, config, amp * spec.coefficient)
    return SpinConfigState(n, {c: a for c, a in result.items() if a})


def apply_product(
    operators: Sequence[SpinOperatorSpec | str],
    state: SpinConfigState,
    budget: int | None = None,
) -> SpinConfigState:
    """Apply O_1 O_2 ... O_k, rightmost first."""
    for operator in reversed(operators):
        state = apply_trace_operator(operator, state, budget)
        if state.is_zero():
            break
    return state


def trace_state(n: int, powers: Sequence[int], budget: int | None = None) -> SpinConfigState:
    """Tr(S+^p1) Tr(S+^p2) ... |0>; a zero power is the factor N."""
    state = SpinConfigState.vacuum(n)
    words = [RAISE * p for p in powers if p > 0]
    zeros = sum(1 for p in powers if p == 0)
    return apply_product(words, state, budget).scale(n**zeros)


@lru_cache(maxsize=200_000)
def _generator_action(n: int, i: int, j: int, config: int) -> tuple[tuple[int, int], ...]:
    """G~^j_i = sum_k s+_(k,j) s-_(k,i) - s+_(i,k) s-_(j,k) on one configuration."""
    out: dict[int, int] = defaultdict(int)

    def hop(source: int, target: int, sign: int) -> None:
        if not config >> source & 1:
            return
        lowered = config & ~(1 << source)
        if lowered >> target & 1:
            return
        out[lowered | 1 << target] += sign

    for k in range(n):
        hop(site(n, k, i), site(n, k, j), 1)
        hop(site(n, j, k), site(n, i, k), -1)
    return tuple((c, a) for c, a in out.items() if a)


def pseudo_generator(i: int, j: int, state: SpinConfigState) -> SpinConfigState:
    """Apply the pseudo-generator G~^j_i."""
    result: dict[int, Fraction] = defaultdict(Fraction)
    for config, amp in state.amplitudes.items():
        for target, coeff in _generator_action(state.n, i, j, config):
            result[target] += amp * coeff
    return SpinConfigState(state.n, {c: a for c, a in result.items() if a})


@lru_cache(maxsize=100_000)
def _casimir_action(n: int, config: int) -> tuple[tuple[int, int], ...]:
    """N * H_G on one configuration, with integer entries."""
    out: dict[int, int] = defaultdict(int)
    for i in range(n):
        for j in range(n):
            for middle, first in _generator_action(n, i, j, config):
                for target, second in _generator_action(n, j, i, middle):
                    out[target] += first * second
    return tuple((c, a) for c, a in out.items() if a)


@dataclass(frozen=True)
class PenaltyHamiltonians:
    """
    H0 = (sum S^z - S_tot)^2 and H_G = (1/N) sum_ij G~^j_i G~^i_j as exact
    appliers on sparse states.
    """

    n: int
    s_tot: Fraction

    @property
    def target_quanta(self) -> Fraction:
        return self.s_tot + Fraction(self.n * self.n, 2)

    def h0(self, state: SpinConfigState) -> SpinConfigState:
        amplitudes = {
            c: a * (raised_count(c) - self.target_quanta) ** 2
            for c, a in state.amplitudes.items()
        }
        return SpinConfigState(state.n, {c: a for c, a in amplitudes.items() if a})

    def hg(self, state: SpinConfigState) -> SpinConfigState:
        result: dict[int, Fraction] = defaultdict(Fraction)
        for config, amp in state.amplitudes.items():
            for target, coeff in _casimir_action(self.n, config):
                result[target] += amp * coeff
        scale = Fraction(1, self.n)
        return SpinConfigState(
            state.n, {c: a * scale for c, a in result.items() if a}
        )

    def system(
        self, state: SpinConfigState, h: Fraction | int = 1, coupling: Fraction | int = 1
    ) -> SpinConfigState:
        """H_S = h H0 + J H_G."""
        return self.h0(state).scale(h) + self.hg(state).scale(coupling)


def build_penalty_hamiltonians(
    n: int, length: int | None = None, s_tot: Fraction | None = None
) -> PenaltyHamiltonians:
    """
    Either `length` (L, with S_tot = 2L - N^2/2) or `s_tot` fixes the H0 offset;
    the default puts the minimum of H0 at zero quanta.
    """
    if n < 2:
        raise PreconditionError(f"Penalty Hamiltonians need N >= 2 (got {n})")
    if length is not None and s_tot is not None:
        raise PreconditionError("Give either L or S_tot, not both")
    if length is not None:
        s_tot = Fraction(2 * length) - Fraction(n * n, 2)
    if s_tot is None:
        s_tot = -Fraction(n * n, 2)
    s_tot = Fraction(s_tot)
    if abs(s_tot) > Fraction(n * n, 2):
        raise PreconditionError(f"S_tot={s_tot} outside [-N^2/2, N^2/2]")
    return PenaltyHamiltonians(n, s_tot)


# three-quanta states and their stated H_G eigenvalues, in units of J
PSI_LABELS = ("psi1", "psi2", "psi3", "psi4")


def three_quanta_states(n: int) -> dict[str, SpinConfigState]:
    one, two = trace_state(n, [1, 1, 1]), trace_state(n, [2, 1])
    cube = trace_state(n, [3])
    diagonal = apply_trace_operator(diagonal_cube(), SpinConfigState.vacuum(n))
    return {
        "psi1": cube,
        "psi2": one - two.scale(3),
        "psi3": two + one.scale(1 + Fraction(2, n)) - diagonal.scale(Fraction(19, 2 * n)),
        "psi4": diagonal - two.scale(Fraction(1, n)),
    }


def stated_eigenvalues(n: int) -> dict[str, Fraction]:
    return {
        "psi1": Fraction(0),
        "psi2": Fraction(0),
        "psi3": Fraction(7, 2 * n),
        "psi4": Fraction(1),
    }


@dataclass(frozen=True)
class EigenResidual:
    label: str
    stated: Fraction
    rayleigh: Fraction
    residual: float

    @property
    def is_eigenstate(self) -> bool:
        return self.residual < 1e-10


def eigen_residuals(n: int, coupling: float = 1.0) -> list[EigenResidual]:
    """
    Rayleigh quotient and relative residual |H_G psi - E psi| / |psi| for the
    four three-quanta states. Energies are in units of the coupling J.
    """
    hamiltonians = build_penalty_hamiltonians(n)
    stated = stated_eigenvalues(n)
    report = []
    for label, psi in three_quanta_states(n).items():
        norm = psi.norm_squared()
        image = hamiltonians.hg(psi)
        rayleigh = psi.inner(image) / norm
        remainder = image - psi.scale(rayleigh)
        residual = math.sqrt(remainder.norm_squared() / norm)
        logger.debug(
            f"N={n} {label}: Rayleigh {float(rayleigh) * coupling:.6g} J, "
            f"stated {float(stated[label]) * coupling:.6g} J, residual {residual:.3g}"
        )
        report.append(
            EigenResidual(label, stated[label], rayleigh, residual * coupling)
        )
    return report


@dataclass(frozen=True)
class ClosureIdentity:
    n: int
    leading: int
    diagonal: int
    holds: bool
    diagonal_vanishes: bool


def closure_identity(n: int) -> ClosureIdentity:
    """
    Tr(S-^2) Tr(S+^2) Tr(S+^2)|0> against
    (4N^2 - 4N - 8) Tr(S+^2)|0> + 32 sum_i S+_ii S+_ii |0>.

    For spin-1/2 sites (S+)^2 = 0, so the coefficient-32 state is identically
    zero and only the leading coefficient is tested by `holds`.
    `diagonal_vanishes` records that the diagonal state is empty.
    """
    vacuum = SpinConfigState.vacuum(n)
    lhs = apply_product(["--", "++", "++"], vacuum)
    leading = 4 * n * n - 4 * n - 8
    diagonal = apply_trace_operator(diagonal_square(), vacuum)
    rhs = trace_state(n, [2]).scale(leading) + diagonal.scale(32)
    return ClosureIdentity(n, leading, 32, (lhs - rhs).is_zero(), diagonal.is_zero())


def _single(kind: str, target: int, state: dict[int, Fraction], budget: int) -> dict[int, Fraction]:
    out: dict[int, Fraction] = defaultdict(Fraction)
    for config, amp in state.items():
        acted = _act(kind, target, config, budget)
        if acted is not None:
            out[acted[0]] += amp * acted[1]
    return out


def _generator_dict(n: int, i: int, j: int, state: dict[int, Fraction]) -> dict[int, Fraction]:
    out: dict[int, Fraction] = defaultdict(Fraction)
    for config, amp in state.items():
        for target, coeff in _generator_action(n, i, j, config):
            out[target] += amp * coeff
    return out


def _combine(*terms: tuple[int, dict[int, Fraction]]) -> dict[int, Fraction]:
    out: dict[int, Fraction] = defaultdict(Fraction)
    for weight, state in terms:
        for config, amp in state.items():
            out[config] += weight * amp
    return {c: a for c, a in out.items() if a}


@dataclass(frozen=True)
class AlgebraCheck:
    n: int
    checked: int
    mismatches: int

    @property
    def holds(self) -> bool:
        return self.mismatches == 0


def check_pseudo_generator_algebra(n: int) -> AlgebraCheck:
    """
    Verify on every configuration of the N x N grid:

        [G~^j_i, s+_(q,p)] = 2 (d_jq s+_(i,p) - d_ip s+_(q,j)) S^z_(q,p)
        [G~^j_i, s-_(q,p)] = -2 S^z_(q,p) (d_iq s-_(j,p) - d_jp s-_(q,i))
    """
    sites = n * n
    limit = settings.SPIN_SECTOR_LIMIT
    work = 2**sites * n**4
    if work > limit * 100:
        raise DimensionLimitError("pseudo-generator algebra check", work, limit * 100)
    checked = mismatches = 0
    for config in range(2**sites):
        basis = {config: Fraction(1)}
        for i, j, q, p in itertools.product(range(n), repeat=4):
            target = site(n, q, p)
            for kind in (RAISE, LOWER):
                after = _generator_dict(n, i, j, _single(kind, target, basis, sites))
                before = _single(kind, target, _generator_dict(n, i, j, basis), sites)
                lhs = _combine((1, after), (-1, before))
                if kind == RAISE:
                    sz = _single(SZ, target, basis, sites)
                    rhs = _combine(
                        (2 * (j == q), _single(RAISE, site(n, i, p), sz, sites)),
                        (-2 * (i == p), _single(RAISE, site(n, q, j), sz, sites)),
                    )
                else:
                    rhs = _combine(
                        (-2 * (i == q), _single(SZ, target, _single(LOWER, site(n, j, p), basis, sites), sites)),
                        (2 * (j == p), _single(SZ, target, _single(LOWER, site(n, q, i), basis, sites), sites)),
                    )
                checked += 1
                if lhs != rhs:
                    mismatches += 1
    logger.info(f"Pseudo-generator algebra at N={n}: {mismatches} of {checked} differ")
    return AlgebraCheck(n, checked, mismatches)


@dataclass(frozen=True)
class SpinCode:
    """
    Logical pair Tr(S+^L)^2 |0> and Tr(S+^(L+1)) Tr(S+^(L-1)) |0>, kept
    unnormalized with their exact Gram matrix.
    """

    n: int
    length: int
    states: tuple[SpinConfigState, SpinConfigState]
    gram: tuple[tuple[Fraction, Fraction], tuple[Fraction, Fraction]]

    @property
    def quanta(self) -> int:
        return 2 * self.length

    @property
    def s_tot(self) -> Fraction:
        return Fraction(2 * self.length) - Fraction(self.n * self.n, 2)

    @property
    def overlap(self) -> float:
        """<1~|2~> between the unit-normalized states."""
        return float(self.gram[0][1]) / math.sqrt(
            float(self.gram[0][0]) * float(self.gram[1][1])
        )

    @property
    def transform(self) -> np.ndarray:
        """Columns hold the up and down states on the unnormalized pair."""
        overlap = self.overlap
        unit = np.diag([1 / math.sqrt(float(self.gram[k][k])) for k in range(2)])
        mix = np.array([[1.0, 1.0], [1.0, -1.0]])
        scale = np.diag(
            [1 / math.sqrt(2 * (1 + overlap)), 1 / math.sqrt(2 * (1 - overlap))]
        )
        return unit @ mix @ scale

    def logical(self, raw: np.ndarray) -> np.ndarray:
        """Raw matrix on the unnormalized pair -> up/down basis."""
        c = self.transform
        return c.T @ raw @ c


def spin_code(n: int, length: int, budget: int | None = None) -> SpinCode:
    if length < 2:
        raise PreconditionError(
            f"Spin code needs L >= 2 so that L - 1 >= 1 (got {length})"
        )
    limit = budget if budget is not None else settings.SPIN_QUANTA_BUDGET
    if 2 * length > limit:
        raise DimensionLimitError("spin code quanta", 2 * length, limit)
    first = trace_state(n, [length, length], limit)
    second = trace_state(n, [length + 1, length - 1], limit)
    if first.is_zero() or second.is_zero():
        raise PreconditionError(
            f"Spin code states vanish at N={n}, L={length}; the grid is too small"
        )
    gram = (
        (first.norm_squared(), first.inner(second)),
        (second.inner(first), second.norm_squared()),
    )
    if gram[0][0] * gram[1][1] == gram[0][1] ** 2:
        raise PreconditionError(f"Spin code states coincide at N={n}, L={length}")
    code = SpinCode(n, length, (first, second), gram)
    logger.debug(f"Spin code N={n} L={length}: overlap {code.overlap:.6g}")
    return code


@dataclass(frozen=True)
class OverlapScaling:
    length: int
    ns: list[int]
    overlaps: list[float]
    exponent: float | None


def overlap_scaling(length: int, ns: Sequence[int]) -> OverlapScaling:
    """Measured <1~|2~> across N with the fitted power of N."""
    overlaps = [spin_code(n, length).overlap for n in ns]
    exponent = None
    if len(ns) >= 3 and all(o > 0 for o in overlaps):
        exponent = fit_power_law(ns, overlaps).exponent
    return OverlapScaling(length, list(ns), overlaps, exponent)


def _raw_products(
    code: SpinCode, left: str | None, right: str | None
) -> np.ndarray:
    """<v_a| left^dagger right |v_b> for raising words (None is the identity)."""
    images = []
    for word in (left, right):
        images.append(
            [
                apply_trace_operator(word, state, code.quanta + len(word))
                if word
                else state
                for state in code.states
            ]
        )
    return np.array(
        [[float(a.inner(b)) for b in images[1]] for a in images[0]]
    )


def _fit_inverse_square(ns: Sequence[int], values: Sequence[float]) -> float:
    """Coefficient c of c / N^2 + d / N^4 by least squares."""
    scaled = np.array(values) * np.array(ns, float) ** 2
    if len(ns) < 2:
        return float(scaled[0])
    slope_intercept = np.polyfit(1 / np.array(ns, float) ** 2, scaled, 1)
    return float(slope_intercept[1])


@dataclass
class SpinAklRow:
    order: int
    ns: list[int]
    off_diagonal: list[float]
    diagonal_difference: list[float]
    off_coefficient: float
    diagonal_coefficient: float

    @property
    def reference(self) -> float:
        return 2.0 * self.order

    @property
    def relative_deviation(self) -> float:
        return abs(self.off_coefficient - self.reference) / self.reference

    @property
    def diagonal_consistent_with_zero(self) -> bool:
        return abs(self.diagonal_coefficient) < 0.1 * self.reference


@dataclass
class SpinAklReport:
    length: int
    ns: list[int]
    rows: list[SpinAklRow]
    cross_terms: dict[str, float]
    identity_values: list[tuple[int, float, float]]


def spin_akl(ns: Sequence[int], length: int, orders: Sequence[int]) -> SpinAklReport:
    """
    Knill-Laflamme elements of E_n = Tr(S+^n) / (sqrt(n) N^(n/2)) on the spin
    code, with the N^-2 coefficients fitted across `ns`.
    """
    if not ns or not orders or min(orders) < 1:
        raise PreconditionError("spin_akl needs N values and orders n >= 1")
    ns = sorted(ns)
    codes = {n: spin_code(n, length) for n in ns}
    rows = []
    for order in orders:
        off, diag = [], []
        word = RAISE * order
        for n in ns:
            code = codes[n]
            norm = 1 / (order * n**order)
            logical = code.logical(_raw_products(code, word, word) * norm)
            off.append(float(logical[0, 1]))
            diag.append(float(logical[0, 0] - logical[1, 1]))
        rows.append(
            SpinAklRow(
                order,
                list(ns),
                off,
                diag,
                _fit_inverse_square(ns, off),
                _fit_inverse_square(ns, diag),
            )
        )
    cross: dict[str, float] = {}
    for m, k in itertools.combinations(sorted(set(orders)), 2):
        code = codes[ns[0]]
        # raising different numbers of quanta lands in orthogonal sectors
        raw = _raw_products(code, RAISE * m, RAISE * k)
        cross[f"{m},{k}"] = float(np.max(np.abs(raw)))
    identity = []
    for n in ns:
        code = codes[n]
        counted = np.array(
            [
                [
                    float(a.inner(apply_trace_operator("+-", b, code.quanta)))
                    for b in code.states
                ]
                for a in code.states
            ]
        )
        logical = code.logical(counted) / n
        identity.append((n, float(logical[0, 0]), float(logical[1, 1])))
    logger.info(
        f"Spin aKL L={length} N={ns}: "
        + ", ".join(f"n={r.order} c={r.off_coefficient:.4g}" for r in rows)
    )
    return SpinAklReport(length, list(ns), rows, cross, identity)


def sector_configurations(n: int, quanta: int) -> list[int]:
    sites = n * n
    if quanta < 0 or quanta > sites:
        raise PreconditionError(f"Quanta {quanta} outside [0, {sites}]")
    size = math.comb(sites, quanta)
    limit = settings.SPIN_SECTOR_LIMIT
    if size > limit:
        logger.warning(f"Spin sector N={n} q={quanta} has {size} configurations")
        raise DimensionLimitError("spin sector", size, limit)
    return [sum(1 << s for s in chosen) for chosen in itertools.combinations(range(sites), quanta)]


def casimir_matrix(n: int, configs: Sequence[int]) -> sparse.csr_matrix:
    """H_G restricted to a fixed-quanta sector."""
    index = {c: k for k, c in enumerate(configs)}
    rows, cols, data = [], [], []
    for col, config in enumerate(configs):
        for target, coeff in _casimir_action(n, config):
            rows.append(index[target])
            cols.append(col)
            data.append(coeff / n)
    size = len(configs)
    return sparse.coo_matrix((data, (rows, cols)), shape=(size, size)).tocsr()


@dataclass(frozen=True)
class SpinLevel:
    quanta: int
    energy: float
    multiplicity: int
    low: bool


@dataclass
class SpinSpectrum:
    n: int
    coupling: float
    h: float
    levels: list[SpinLevel]
    low_counts: dict[int, int]
    partition_counts: dict[int, int]
    splitting_constant: float

    def matches_partitions(self) -> bool:
        return all(
            self.low_counts[q] == self.partition_counts[q] for q in self.low_counts
        )


def _eigenvalues(matrix: sparse.csr_matrix, count: int) -> np.ndarray:
    size = matrix.shape[0]
    if size <= DENSE_LIMIT:
        return eigh(matrix.toarray(), eigvals_only=True)
    k = min(count, size - 2)
    return np.sort(eigsh(matrix, k=k, which="SA", return_eigenvectors=False))


def _clusters(values: np.ndarray, tolerance: float) -> list[tuple[float, int]]:
    clusters: list[list[float]] = []
    for value in np.sort(values):
        if clusters and value - clusters[-1][-1] <= tolerance:
            clusters[-1].append(float(value))
        else:
            clusters.append([float(value)])
    return [(float(np.mean(c)), len(c)) for c in clusters]


def low_spectrum(
    n: int,
    quanta_max: int,
    coupling: float = 1.0,
    h: float = 1.0,
    length: int | None = None,
    low_fraction: float = 0.5,
    count: int = 40,
) -> SpinSpectrum:
    """
    Spectrum of H_S = h H0 + J H_G in each sector of 0..quanta_max raised
    spins. Levels below low_fraction * J above the sector's H0 offset form the
    low cluster, compared with the partition count of the quanta number.
    """
    if coupling <= 0 or h < 0:
        raise PreconditionError("low_spectrum needs J > 0 and h >= 0")
    hamiltonians = build_penalty_hamiltonians(n, length=length)
    tolerance = 1e-8 * max(1.0, coupling)
    levels: list[SpinLevel] = []
    low_counts: dict[int, int] = {}
    splittings: list[float] = []
    for quanta in range(quanta_max + 1):
        configs = sector_configurations(n, quanta)
        offset = h * float((quanta - hamiltonians.target_quanta) ** 2)
        values = coupling * _eigenvalues(casimir_matrix(n, configs), count) + offset
        low_count = 0
        low_energies = []
        for energy, multiplicity in _clusters(values, tolerance):
            low = energy - offset < low_fraction * coupling
            levels.append(SpinLevel(quanta, energy, multiplicity, low))
            if low:
                low_count += multiplicity
                low_energies.append(energy)
        low_counts[quanta] = low_count
        if len(low_energies) > 1:
            splittings.append(max(low_energies) - min(low_energies))
        logger.debug(
            f"Spin sector N={n} q={quanta}: {len(configs)} states, {low_count} low"
        )
    constant = max(splittings) * n / coupling if splittings else 0.0
    return SpinSpectrum(
        n,
        coupling,
        h,
        levels,
        low_counts,
        {q: partition_count(q) for q in low_counts},
        constant,
    )


@dataclass(frozen=True)
class PenaltySuppression:
    n: int
    temperature: float
    penalty: float
    multiplier: float


def penalty_suppression(n: int, temperature: float) -> PenaltySuppression:
    """Non-singlet weight N^2 e^{-J/T} at the penalty J = 2 T ln N."""
    if n < 2 or temperature <= 0:
        raise PreconditionError("Penalty suppression needs N >= 2 and T > 0")
    penalty = 2 * temperature * math.log(n)
    return PenaltySuppression(
        n, temperature, penalty, nonsinglet_multiplier(n, penalty, temperature)
    )
