from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Iterable, Sequence

from app.exceptions import AlphabetError

SPECIES_PATTERN = re.compile(r"^[A-Za-z][A-Za-z0-9_]*$")
LETTER_PATTERN = re.compile(r"([A-Za-z][A-Za-z0-9_]*)(\+|†)?")
FACTOR_PATTERN = re.compile(r"Tr\(([^()]*)\)(?:\^(\d+))?")
NORM_PATTERN = re.compile(r"/\s*N(?:\^\{?([0-9]+(?:/[0-9]+)?)\}?)?\s*$")


@dataclass(frozen=True, order=True)
class Letter:
    species: str
    dagger: bool = False

    def __post_init__(self):
        if not SPECIES_PATTERN.match(self.species):
            raise AlphabetError(f"Invalid species name: {self.species!r}")

    def conj(self) -> "Letter":
        return Letter(self.species, not self.dagger)

    def render(self) -> str:
        return f"{self.species}+" if self.dagger else self.species


def canonical_rotation(items: Sequence) -> tuple:
    """Lexicographically minimal rotation of a cyclic sequence."""
    items = tuple(items)
    if not items:
        return items
    return min(items[k:] + items[:k] for k in range(len(items)))


@dataclass(frozen=True)
class TraceWord:
    """
    A single trace of a word in creation/annihilation letters.

    Letters are kept in written order. Pure words (all creators or all
    annihilators) are compared up to rotation; mixed words are compared as
    written because rotating them changes the operator unless it is normal
    ordered.
    """

    letters: tuple[Letter, ...]

    def __post_init__(self):
        if not self.letters:
            raise AlphabetError("A trace word needs at least one letter")
        object.__setattr__(self, "letters", tuple(self.letters))

    @classmethod
    def of(cls, *letters: str) -> "TraceWord":
        """Build from compact tokens such as "a1+" or "a2"."""
        return cls(tuple(_parse_letter(token) for token in letters))

    def __len__(self) -> int:
        return len(self.letters)

    def is_pure(self) -> bool:
        return len({letter.dagger for letter in self.letters}) == 1

    def is_creation(self) -> bool:
        return all(letter.dagger for letter in self.letters)

    def is_annihilation(self) -> bool:
        return not any(letter.dagger for letter in self.letters)

    def canonical(self) -> tuple[Letter, ...]:
        return canonical_rotation(self.letters)

    def key(self, cyclic: bool | None = None) -> tuple[Letter, ...]:
        if cyclic is None:
            cyclic = self.is_pure()
        return self.canonical() if cyclic else self.letters

    def rotated(self, shift: int) -> "TraceWord":
        shift %= len(self.letters)
        return TraceWord(self.letters[shift:] + self.letters[:shift])

    def conj(self) -> "TraceWord":
        return TraceWord(tuple(l.conj() for l in reversed(self.letters)))

    def symmetry_order(self) -> int:
        """Number of rotations mapping the word onto itself."""
        n = len(self.letters)
        return sum(
            1 for k in range(n) if self.letters[k:] + self.letters[:k] == self.letters
        )

    def species(self) -> set[str]:
        return {letter.species for letter in self.letters}

    def render(self) -> str:
        return "Tr(" + " ".join(l.render() for l in self.letters) + ")"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TraceWord):
            return NotImplemented
        return self.key() == other.key()

    def __hash__(self) -> int:
        return hash(self.key())


@dataclass(frozen=True)
class TraceMonomial:
    """
    Rational multiple of an ordered product of traces, divided by a power of N.

    An empty product is the identity operator (acting on |0> it is the vacuum).
    """

    factors: tuple[TraceWord, ...] = ()
    normal_ordered: bool = False
    normalization_power: Fraction = Fraction(0)
    coefficient: Fraction = Fraction(1)

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))
        object.__setattr__(
            self, "normalization_power", Fraction(self.normalization_power)
        )
        object.__setattr__(self, "coefficient", Fraction(self.coefficient))

    @classmethod
    def identity(cls) -> "TraceMonomial":
        return cls()

    @classmethod
    def from_words(
        cls,
        words: Iterable[Sequence[str]],
        unit: bool = True,
        normal_ordered: bool = False,
    ) -> "TraceMonomial":
        """
        Build from token lists, e.g. [["a1+", "a1+"], ["a2+"]].
        With unit=True the N^{letters/2} normalization is applied.
        """
        factors = tuple(TraceWord.of(*word) for word in words)
        monomial = cls(factors, normal_ordered=normal_ordered)
        return monomial.unit_normalized() if unit else monomial

    @property
    def letters(self) -> tuple[Letter, ...]:
        return tuple(l for word in self.factors for l in word.letters)

    @property
    def letter_count(self) -> int:
        return sum(len(word) for word in self.factors)

    @property
    def energy(self) -> int:
        """Net number of quanta created (creators minus annihilators)."""
        return sum(1 if l.dagger else -1 for l in self.letters)

    def species_balance(self) -> Counter:
        balance: Counter = Counter()
        for l in self.letters:
            balance[l.species] += 1 if l.dagger else -1
        return balance

    def species(self) -> set[str]:
        return {l.species for l in self.letters}

    def is_creation_only(self) -> bool:
        return all(l.dagger for l in self.letters)

    def is_annihilation_only(self) -> bool:
        return not any(l.dagger for l in self.letters)

    def check_alphabet(self, alphabet: Iterable[str]) -> None:
        allowed = set(alphabet)
        unknown = self.species() - allowed
        if unknown:
            raise AlphabetError(
                f"Species {sorted(unknown)} not declared in alphabet {sorted(allowed)}"
            )

    def unit_normalized(self) -> "TraceMonomial":
        return replace(
            self, normalization_power=Fraction(self.letter_count, 2)
        )

    def scaled(self, factor: Fraction | int) -> "TraceMonomial":
        return replace(self, coefficient=self.coefficient * Fraction(factor))

    def conj(self) -> "TraceMonomial":
        """Hermitian conjugate: reverse the factor order, conjugate each word."""
        return replace(
            self, factors=tuple(word.conj() for word in reversed(self.factors))
        )

    def times(self, other: "TraceMonomial") -> "TraceMonomial":
        """Operator product self * other (self acts last)."""
        if self.normal_ordered or other.normal_ordered:
            if self.factors and other.factors:
                raise AlphabetError(
                    "Products of normal-ordered monomials are not normal ordered; "
                    "pass them to vev as separate factors"
                )
        return TraceMonomial(
            self.factors + other.factors,
            normal_ordered=self.normal_ordered or other.normal_ordered,
            normalization_power=self.normalization_power
            + other.normalization_power,
            coefficient=self.coefficient * other.coefficient,
        )

    def _key(self) -> tuple:
        commuting = self.normal_ordered or all(
            w.is_creation() for w in self.factors
        ) or all(w.is_annihilation() for w in self.factors)
        if commuting:
            words = tuple(sorted(w.key(cyclic=True) for w in self.factors))
        else:
            words = tuple(w.key() for w in self.factors)
        return (words, self.normal_ordered, self.normalization_power, self.coefficient)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TraceMonomial):
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self) -> int:
        return hash(self._key())

    def render(self) -> str:
        if not self.factors:
            body = "1"
        else:
            body = " * ".join(word.render() for word in self.factors)
            if self.normal_ordered:
                body = f":{body}:"
        if self.coefficient != 1:
            body = f"{self.coefficient} * {body}"
        if self.normalization_power:
            p = self.normalization_power
            body += " / N" if p == 1 else f" / N^{{{p}}}"
        return body

    def __str__(self) -> str:
        return self.render()


def _parse_letter(token: str) -> Letter:
    match = LETTER_PATTERN.fullmatch(token.strip())
    if not match:
        raise AlphabetError(f"Cannot parse letter {token!r}")
    return Letter(match.group(1), match.group(2) is not None)


def parse_monomial(
    text: str, alphabet: Iterable[str] | None = None
) -> TraceMonomial:
    """
    Parse the text syntax, e.g. "Tr(a1+ a1+) * Tr(a2+) / N^{3/2}".

    Optional pieces: a leading rational coefficient ("3/2 * Tr(...)"),
    ":...:" around the trace product for normal ordering, "Tr(...)^k"
    repetition, and "1" for the identity.
    """
    source = text.strip()
    if not source:
        raise AlphabetError("Empty monomial text")
    power = Fraction(0)
    norm = NORM_PATTERN.search(source)
    if norm:
        power = Fraction(norm.group(1)) if norm.group(1) else Fraction(1)
        source = source[: norm.start()].strip()
    coefficient = Fraction(1)
    head = re.match(r"^(-?\d+(?:/\d+)?)\s*\*\s*", source)
    if head:
        coefficient = Fraction(head.group(1))
        source = source[head.end():].strip()
    normal_ordered = False
    if source.startswith(":") and source.endswith(":"):
        normal_ordered = True
        source = source[1:-1].strip()
    factors: list[TraceWord] = []
    if source not in ("1", ""):
        position = 0
        for match in FACTOR_PATTERN.finditer(source):
            gap = source[position: match.start()].strip()
            if gap not in ("", "*"):
                raise AlphabetError(f"Unexpected text {gap!r} in {text!r}")
            position = match.end()
            tokens = [
                m.group(0)
                for m in LETTER_PATTERN.finditer(match.group(1))
            ]
            word = TraceWord(tuple(_parse_letter(t) for t in tokens))
            factors.extend([word] * int(match.group(2) or 1))
        if source[position:].strip() or not factors:
            raise AlphabetError(f"Cannot parse monomial {text!r}")
    monomial = TraceMonomial(
        tuple(factors),
        normal_ordered=normal_ordered,
        normalization_power=power,
        coefficient=coefficient,
    )
    if alphabet is not None:
        monomial.check_alphabet(alphabet)
    return monomial
