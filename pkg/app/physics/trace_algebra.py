"""
Exact vacuum expectation values of products of trace operators.

Contractions are evaluated by a memoized recursion on residual trace words:
contracting an annihilator with a creator either joins two traces,
Tr(a R) Tr(a+ S) -> Tr(S R), or splits one, Tr(a B a+ C) -> Tr(C) Tr(B),
and every empty trace contributes a factor N. Each complete pairing is
therefore weighted by N^(closed index loops).
"""

from __future__ import annotations

import multiprocessing
from collections import Counter
from fractions import Fraction
from typing import Iterable, Sequence, Union

from app.config import settings
from app.exceptions import EnumerationBudgetError, PreconditionError
from app.models.amplitude import ExactAmplitude
from app.models.trace import TraceMonomial, TraceWord, canonical_rotation
from app.utils.logger import get_logger

logger = get_logger(__name__)

# Slot layout: (species, dagger, rank, group). `group` >= 0 marks a
# normal-ordered monomial; letters of one group never contract together.
Slot = tuple
Word = tuple
State = tuple

Product = Union[TraceMonomial, Sequence[TraceMonomial]]


class WickContractor:
    """
    Memoized contraction engine.

    The memo is keyed by the canonical residual state, so it can be shared
    between calls; the budget counter is reset for every top-level call.
    """

    def __init__(self, budget: int | None = None, cache_size: int | None = None):
        self.budget = budget if budget is not None else settings.ENUMERATION_BUDGET
        self.cache_size = (
            cache_size
            if cache_size is not None
            else settings.CONTRACTION_CACHE_SIZE
        )
        self._memo: dict[State, tuple[tuple[int, int], ...]] = {}
        self._steps = 0

    @property
    def steps(self) -> int:
        return self._steps

    def clear(self) -> None:
        self._memo.clear()

    def contract(self, words: Iterable[Word]) -> dict[int, int]:
        """
        Sum over all admissible pairings of the given slot words.
        Returns {loop power: number of pairings}.
        """
        self._steps = 0
        if len(self._memo) > self.cache_size:
            logger.debug(f"Contraction memo reached {len(self._memo)} entries, clearing")
            self._memo.clear()
        loops, state = _normalize(tuple(words))
        return {power + loops: count for power, count in self._contract(state)}

    def _tick(self) -> None:
        self._steps += 1
        if self._steps > self.budget:
            logger.warning(
                f"Contraction aborted after {self.budget} pairing steps"
            )
            raise EnumerationBudgetError(self.budget)

    def _contract(self, state: State) -> tuple[tuple[int, int], ...]:
        if not state:
            return ((0, 1),)
        cached = self._memo.get(state)
        if cached is not None:
            return cached

        position = _first_annihilator(state)
        if position is None:
            self._memo[state] = ()
            return ()
        wi, li = position
        word = state[wi]
        rotated = word[li:] + word[:li]
        x, rest = rotated[0], rotated[1:]
        others = state[:wi] + state[wi + 1:]

        totals: Counter = Counter()

        # split: the creator sits in the same trace
        for k, y in enumerate(rest):
            if _allowed(x, y):
                self._tick()
                loops, child = _normalize(others + (rest[k + 1:], rest[:k]))
                for power, count in self._contract(child):
                    totals[power + loops] += count

        # join: the creator sits in another trace
        for oj, other in enumerate(others):
            for k, y in enumerate(other):
                if _allowed(x, y):
                    self._tick()
                    joined = other[k + 1:] + other[:k] + rest
                    remaining = others[:oj] + others[oj + 1:]
                    loops, child = _normalize(remaining + (joined,))
                    for power, count in self._contract(child):
                        totals[power + loops] += count

        result = tuple(sorted((p, c) for p, c in totals.items() if c))
        self._memo[state] = result
        return result


def _allowed(x: Slot, y: Slot) -> bool:
    return (
        y[1]
        and x[0] == y[0]
        and x[2] < y[2]
        and (x[3] < 0 or x[3] != y[3])
    )


def _first_annihilator(state: State) -> tuple[int, int] | None:
    for wi, word in enumerate(state):
        for li, slot in enumerate(word):
            if not slot[1]:
                return wi, li
    return None


def _normalize(words: tuple[Word, ...]) -> tuple[int, State]:
    """Drop empty traces (each worth one N) and canonicalize the rest."""
    loops = 0
    kept = []
    for word in words:
        if not word:
            loops += 1
        else:
            kept.append(canonical_rotation(word))
    return loops, tuple(sorted(kept))


_default_contractor: WickContractor | None = None


def default_contractor() -> WickContractor:
    global _default_contractor
    if (
        _default_contractor is None
        or _default_contractor.budget != settings.ENUMERATION_BUDGET
    ):
        _default_contractor = WickContractor()
    return _default_contractor


def _as_product(product: Product) -> tuple[TraceMonomial, ...]:
    if isinstance(product, TraceMonomial):
        return (product,)
    return tuple(product)


def species_balanced(product: Sequence[TraceMonomial]) -> bool:
    balance: Counter = Counter()
    for monomial in product:
        balance.update(monomial.species_balance())
    return all(v == 0 for v in balance.values())


def slot_words(product: Sequence[TraceMonomial]) -> list[Word]:
    """
    Lay the product out as slot words carrying the ordering constraints.

    Within a plain monomial a letter's rank is its written position; in a
    normal-ordered monomial all creators rank before all annihilators. When
    every annihilator already stands left of every creator the ranks carry
    no information and are erased, which lets the memo share rotated states.
    """
    words: list[list[list]] = []
    for m_index, monomial in enumerate(product):
        position = 0
        group = m_index if monomial.normal_ordered else -1
        for factor in monomial.factors:
            slots = []
            for letter in factor.letters:
                if monomial.normal_ordered:
                    rank = (m_index, 1 if not letter.dagger else 0)
                else:
                    rank = (m_index, 2 + position)
                slots.append([letter.species, letter.dagger, rank, group])
                position += 1
            words.append(slots)
    ann = [s[2] for w in words for s in w if not s[1]]
    cre = [s[2] for w in words for s in w if s[1]]
    if ann and cre and max(ann) < min(cre):
        for w in words:
            for s in w:
                s[2] = (1,) if s[1] else (0,)
                s[3] = -1
    return [tuple(tuple(s) for s in w) for w in words]


def vev(
    product: Product,
    alphabet: Iterable[str] | None = None,
    contractor: WickContractor | None = None,
) -> ExactAmplitude:
    """
    Exact vacuum expectation value <0| M_1 M_2 ... M_k |0>.

    Args:
        product: ordered monomials (leftmost acts last).
        alphabet: declared species; undeclared letters raise AlphabetError.
        contractor: engine to use; defaults to the shared module engine.
    Returns:
        ExactAmplitude: polynomial in N including coefficients and N-powers.
    """
    monomials = _as_product(product)
    if alphabet is not None:
        declared = list(alphabet)
        for monomial in monomials:
            monomial.check_alphabet(declared)
    coefficient = Fraction(1)
    power = Fraction(0)
    for monomial in monomials:
        coefficient *= monomial.coefficient
        power -= monomial.normalization_power
    if coefficient == 0 or not species_balanced(monomials):
        return ExactAmplitude.zero()
    engine = contractor or default_contractor()
    counts = engine.contract(slot_words(monomials))
    return ExactAmplitude({p: c * coefficient for p, c in counts.items()}).shift(
        power
    )


def _vev_task(product: tuple[TraceMonomial, ...]) -> dict[str, str]:
    return vev(product).to_json()


def vev_many(
    products: Sequence[Product], workers: int | None = None
) -> list[ExactAmplitude]:
    """Evaluate independent vevs, in a process pool when workers > 1."""
    n_process = workers if workers is not None else settings.WORKERS
    items = [_as_product(p) for p in products]
    if n_process <= 1 or len(items) < 2:
        return [vev(p) for p in items]
    n_process = min(n_process, multiprocessing.cpu_count())
    logger.info(f"Dispatching {len(items)} contractions to {n_process} processes")
    with multiprocessing.Pool(n_process, maxtasksperchild=1000) as pool:
        results = pool.map(_vev_task, items)
    return [ExactAmplitude.from_json(r) for r in results]


def conj(monomial: TraceMonomial) -> TraceMonomial:
    return monomial.conj()


def inner_product(state_a: TraceMonomial, state_b: TraceMonomial) -> ExactAmplitude:
    """<0| conj(A) B |0> for creation-only monomials A and B."""
    for state in (state_a, state_b):
        if not state.is_creation_only():
            raise PreconditionError(
                f"State {state.render()} must be built from creation letters only"
            )
    return vev((state_a.conj(), state_b))


def matrix_element(
    bra: TraceMonomial,
    op: Product,
    ket: TraceMonomial,
) -> ExactAmplitude:
    """<bra| op |ket> with op a monomial or an ordered product of monomials."""
    return vev((bra.conj(),) + _as_product(op) + (ket,))


def norm_squared(state: TraceMonomial) -> ExactAmplitude:
    return inner_product(state, state)


def power_word(species: str, annihilators: int, creators: int) -> TraceMonomial:
    """Tr(a^n a+^m) written with all annihilators first; identity*N if empty."""
    tokens = [species] * annihilators + [f"{species}+"] * creators
    if not tokens:
        return TraceMonomial.identity()
    return TraceMonomial((TraceWord.of(*tokens),))


def commutator_defect(
    n1: int,
    m1: int,
    n2: int,
    m2: int,
    bra: TraceMonomial,
    ket: TraceMonomial,
    species: str = "a",
) -> tuple[ExactAmplitude, ExactAmplitude]:
    """
    Compare <bra|[Tr(a^n1 a+^m1), Tr(a^n2 a+^m2)]|ket> with the single-contraction
    rule (n1 m2 - n2 m1) <bra|Tr(a^(n1+n2-1) a+^(m1+m2-1))|ket>.

    Returns:
        (defect, rule term) as exact amplitudes.
    """
    if n1 + m1 == 0 or n2 + m2 == 0:
        raise PreconditionError("Both commutator words need at least one letter")
    first = power_word(species, n1, m1)
    second = power_word(species, n2, m2)
    commutator = matrix_element(bra, (first, second), ket) - matrix_element(
        bra, (second, first), ket
    )
    weight = n1 * m2 - n2 * m1
    rest_n, rest_m = n1 + n2 - 1, m1 + m2 - 1
    if rest_n < 0 or rest_m < 0:
        rule = ExactAmplitude.zero()
    else:
        rule = matrix_element(bra, power_word(species, rest_n, rest_m), ket)
        if rest_n + rest_m == 0:
            rule = rule.shift(1)
        rule = rule * weight
    return commutator - rule, rule


def connected_four_point(
    a_i: TraceMonomial,
    a_k: TraceMonomial,
    a_l: TraceMonomial,
    a_j: TraceMonomial,
) -> ExactAmplitude:
    """
    Connected part of <0|O_i O_k O_l+ O_j+|0> for creation monomials A, with
    O = conj(A): the full vev minus both factorized pairings.
    """
    full = vev((a_i.conj(), a_k.conj(), a_l, a_j))
    factorized = inner_product(a_i, a_j) * inner_product(
        a_k, a_l
    ) + inner_product(a_i, a_l) * inner_product(a_k, a_j)
    return full - factorized
