"""
Brute-force oracle on the literal N^2-mode Fock space.

States are expanded on unnormalized occupation vectors (a+)^n |0>, so that
a+ |n> = |n+1> and a |n> = n |n-1> have integer entries and every
vacuum expectation value stays an exact integer before the N-power
normalization is divided out.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence, Union

import numpy as np
from scipy import sparse

from app.config import settings
from app.exceptions import (
    CutoffOverflowError,
    DimensionLimitError,
    PreconditionError,
)
from app.models.trace import Letter, TraceMonomial, TraceWord
from app.utils.logger import get_logger

logger = get_logger(__name__)


@dataclass
class FockSpace:
    """
    Truncated Fock space of `len(species)` N x N matrix oscillators.

    Args:
        n: matrix rank N (>= 1).
        species: declared species names, in mode order.
        cutoff: maximal occupation per mode.
    """

    n: int
    species: tuple[str, ...] = ("a",)
    cutoff: int = 2
    _modes: dict = field(default_factory=dict, init=False, repr=False)
    _occupations: np.ndarray | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        self.species = tuple(self.species)
        if self.n < 1 or self.cutoff < 1 or not self.species:
            raise PreconditionError(
                f"FockSpace needs N >= 1, cutoff >= 1 and a species (got N={self.n}, "
                f"cutoff={self.cutoff}, species={self.species})"
            )
        limit = settings.FOCK_DIMENSION_LIMIT
        if self.dimension > limit:
            logger.warning(f"Refusing Fock space of dimension {self.dimension}")
            raise DimensionLimitError("Fock space", self.dimension, limit)
        logger.debug(
            f"Fock space N={self.n} species={self.species} cutoff={self.cutoff} "
            f"dimension={self.dimension}"
        )

    @property
    def mode_count(self) -> int:
        return len(self.species) * self.n * self.n

    @property
    def dimension(self) -> int:
        return (self.cutoff + 1) ** self.mode_count

    def mode_index(self, species: str, row: int, col: int) -> int:
        if species not in self.species:
            raise PreconditionError(
                f"Species {species!r} not declared in {self.species}"
            )
        return self.species.index(species) * self.n * self.n + row * self.n + col

    def occupation(self, mode: int) -> np.ndarray:
        """Occupation of `mode` for every basis index."""
        stride = (self.cutoff + 1) ** mode
        return (np.arange(self.dimension, dtype=np.int64) // stride) % (
            self.cutoff + 1
        )

    def mode_operator(self, mode: int, dagger: bool) -> sparse.csr_matrix:
        """Unnormalized raising (dagger) or lowering operator of a single mode."""
        key = (mode, dagger)
        cached = self._modes.get(key)
        if cached is not None:
            return cached
        stride = (self.cutoff + 1) ** mode
        occ = self.occupation(mode)
        index = np.arange(self.dimension, dtype=np.int64)
        if dagger:
            mask = occ < self.cutoff
            rows, cols = index[mask] + stride, index[mask]
            data = np.ones(rows.size, dtype=np.int64)
        else:
            mask = occ > 0
            rows, cols = index[mask] - stride, index[mask]
            data = occ[mask]
        operator = sparse.coo_matrix(
            (data, (rows, cols)), shape=(self.dimension, self.dimension)
        ).tocsr()
        self._modes[key] = operator
        return operator

    def letter_mode(self, letter: Letter, row: int, col: int) -> int:
        """(a+)_{row,col} is the adjoint of a_{col,row}."""
        if letter.dagger:
            return self.mode_index(letter.species, col, row)
        return self.mode_index(letter.species, row, col)

    def vacuum(self) -> np.ndarray:
        state = np.zeros(self.dimension, dtype=np.int64)
        state[0] = 1
        return state


def build_trace_operator(word: TraceWord, space: FockSpace) -> sparse.csr_matrix:
    """Sum over matrix indices of the mode-operator product tracing `word`."""
    n = space.n
    letters = word.letters
    blocks = {
        (i, j): space.mode_operator(space.letter_mode(letters[0], i, j), letters[0].dagger)
        for i in range(n)
        for j in range(n)
    }
    for letter in letters[1:]:
        grown = {}
        for i in range(n):
            for j in range(n):
                total = None
                for m in range(n):
                    term = blocks[(i, m)] @ space.mode_operator(
                        space.letter_mode(letter, m, j), letter.dagger
                    )
                    total = term if total is None else total + term
                grown[(i, j)] = total
        blocks = grown
    result = blocks[(0, 0)]
    for i in range(1, n):
        result = result + blocks[(i, i)]
    return result.tocsr()


class _Applier:
    """Applies operators to integer state vectors, checking the truncation."""

    def __init__(self, space: FockSpace):
        self.space = space
        self._top: dict[int, np.ndarray] = {}

    def letter(self, letter: Letter, row: int, col: int, state: np.ndarray) -> np.ndarray:
        mode = self.space.letter_mode(letter, row, col)
        if letter.dagger:
            top = self._top.get(mode)
            if top is None:
                top = self.space.occupation(mode) == self.space.cutoff
                self._top[mode] = top
            if np.any(state[top]):
                raise CutoffOverflowError(
                    f"Raising mode {mode} beyond cutoff {self.space.cutoff}; "
                    f"increase the per-mode cutoff"
                )
        return self.space.mode_operator(mode, letter.dagger) @ state

    def word(self, word: TraceWord, state: np.ndarray) -> np.ndarray:
        n = self.space.n
        letters = word.letters
        # partial[(i, first)] = X_{i, .} ... X_{., first} |state>, built right to left
        last = letters[-1]
        partial = {
            (i, first): self.letter(last, i, first, state)
            for i in range(n)
            for first in range(n)
        }
        for letter in reversed(letters[:-1]):
            grown = {}
            for i in range(n):
                for first in range(n):
                    total = np.zeros_like(state)
                    for m in range(n):
                        vec = partial[(m, first)]
                        if vec.any():
                            total = total + self.letter(letter, i, m, vec)
                    grown[(i, first)] = total
            partial = grown
        result = np.zeros_like(state)
        for i in range(n):
            result = result + partial[(i, i)]
        return result

    def normal_ordered(self, monomial: TraceMonomial, state: np.ndarray) -> np.ndarray:
        """Explicit index sum with annihilators applied before creators."""
        n = self.space.n
        slots: list[tuple[Letter, int, int]] = []
        for word in monomial.factors:
            start = len(slots)
            for offset, letter in enumerate(word.letters):
                slots.append((letter, start + offset, start + (offset + 1) % len(word)))
        result = np.zeros_like(state)
        for indices in itertools.product(range(n), repeat=len(slots)):
            ops = [(letter, indices[r], indices[c]) for letter, r, c in slots]
            vec = state
            for letter, row, col in [o for o in ops if not o[0].dagger]:
                vec = self.letter(letter, row, col, vec)
                if not vec.any():
                    break
            else:
                for letter, row, col in [o for o in ops if o[0].dagger]:
                    vec = self.letter(letter, row, col, vec)
                result = result + vec
        return result

    def monomial(self, monomial: TraceMonomial, state: np.ndarray) -> np.ndarray:
        if monomial.normal_ordered:
            return self.normal_ordered(monomial, state)
        for word in reversed(monomial.factors):
            state = self.word(word, state)
        return state


def oracle_vev(
    product: Union[TraceMonomial, Sequence[TraceMonomial]],
    n: int,
    cutoff: int = 2,
    species: Sequence[str] | None = None,
) -> Fraction:
    """
    <0| M_1 ... M_k |0> at a concrete N by explicit matrix action.

    The vacuum component of the unnormalized final vector is exactly the
    expectation value, since |0> is the only unit-norm basis vector there.
    """
    monomials = (product,) if isinstance(product, TraceMonomial) else tuple(product)
    declared = tuple(species) if species is not None else tuple(
        sorted({s for m in monomials for s in m.species()})
    ) or ("a",)
    for monomial in monomials:
        monomial.check_alphabet(declared)
    power = sum((m.normalization_power for m in monomials), Fraction(0))
    if power.denominator != 1:
        raise PreconditionError(
            f"Total normalization N^{power} is not an integer power"
        )
    coefficient = Fraction(1)
    for m in monomials:
        coefficient *= m.coefficient
    space = FockSpace(n, declared, cutoff)
    applier = _Applier(space)
    state = space.vacuum()
    for monomial in reversed(monomials):
        state = applier.monomial(monomial, state)
        if not state.any():
            return Fraction(0)
    return coefficient * Fraction(int(state[0])) / Fraction(n) ** int(power)
