from __future__ import annotations

from fractions import Fraction
from typing import Iterator, Mapping, Union

Number = Union[int, Fraction]


def as_power(value: Union[int, str, Fraction]) -> Fraction:
    """Normalize a power of N given as int, Fraction or "p/q" string."""
    return Fraction(value)


class ExactAmplitude:
    """
    Exact Laurent polynomial in N with rational coefficients.

    Powers are rationals so that half-integer normalizations such as
    N^{-3/2} stay exact; amplitudes of balanced products only ever carry
    integer powers.
    """

    __slots__ = ("_terms",)

    def __init__(self, terms: Mapping[Number, Number] | None = None):
        cleaned: dict[Fraction, Fraction] = {}
        for power, coeff in (terms or {}).items():
            coeff = Fraction(coeff)
            if coeff:
                key = as_power(power)
                cleaned[key] = cleaned.get(key, Fraction(0)) + coeff
        self._terms = {p: c for p, c in cleaned.items() if c}

    @classmethod
    def zero(cls) -> "ExactAmplitude":
        return cls()

    @classmethod
    def constant(cls, value: Number) -> "ExactAmplitude":
        return cls({0: value})

    @classmethod
    def monomial(cls, power: Number, coeff: Number = 1) -> "ExactAmplitude":
        return cls({power: coeff})

    @classmethod
    def from_counts(cls, counts: Mapping[int, int]) -> "ExactAmplitude":
        """Build N^k weighted pairing counts {k: count}."""
        return cls({k: v for k, v in counts.items()})

    @property
    def terms(self) -> dict[Fraction, Fraction]:
        return dict(self._terms)

    def __iter__(self) -> Iterator[tuple[Fraction, Fraction]]:
        return iter(sorted(self._terms.items(), reverse=True))

    def is_zero(self) -> bool:
        return not self._terms

    def coefficient(self, power: Number) -> Fraction:
        return self._terms.get(as_power(power), Fraction(0))

    @property
    def leading_power(self) -> Fraction | None:
        if not self._terms:
            return None
        return max(self._terms)

    @property
    def leading_coefficient(self) -> Fraction:
        if not self._terms:
            return Fraction(0)
        return self._terms[max(self._terms)]

    def relative_coefficient(self, offset: Number) -> Fraction:
        """Coefficient at leading_power + offset (offset is usually negative)."""
        lead = self.leading_power
        if lead is None:
            return Fraction(0)
        return self.coefficient(lead + as_power(offset))

    def has_integer_powers(self) -> bool:
        return all(p.denominator == 1 for p in self._terms)

    def shift(self, power: Number) -> "ExactAmplitude":
        """Multiply by N^power."""
        step = as_power(power)
        return ExactAmplitude({p + step: c for p, c in self._terms.items()})

    def __add__(self, other: object) -> "ExactAmplitude":
        if isinstance(other, (int, Fraction)):
            other = ExactAmplitude.constant(other)
        if not isinstance(other, ExactAmplitude):
            return NotImplemented
        merged = dict(self._terms)
        for p, c in other._terms.items():
            merged[p] = merged.get(p, Fraction(0)) + c
        return ExactAmplitude(merged)

    __radd__ = __add__

    def __neg__(self) -> "ExactAmplitude":
        return ExactAmplitude({p: -c for p, c in self._terms.items()})

    def __sub__(self, other: object) -> "ExactAmplitude":
        if isinstance(other, (int, Fraction)):
            other = ExactAmplitude.constant(other)
        if not isinstance(other, ExactAmplitude):
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other: object) -> "ExactAmplitude":
        return (-self) + other

    def __mul__(self, other: object) -> "ExactAmplitude":
        if isinstance(other, (int, Fraction)):
            return ExactAmplitude(
                {p: c * other for p, c in self._terms.items()}
            )
        if not isinstance(other, ExactAmplitude):
            return NotImplemented
        product: dict[Fraction, Fraction] = {}
        for p1, c1 in self._terms.items():
            for p2, c2 in other._terms.items():
                product[p1 + p2] = product.get(p1 + p2, Fraction(0)) + c1 * c2
        return ExactAmplitude(product)

    __rmul__ = __mul__

    def __truediv__(self, other: object) -> "ExactAmplitude":
        if isinstance(other, (int, Fraction)):
            if other == 0:
                raise ZeroDivisionError("Division of an amplitude by zero")
            return self * (1 / Fraction(other))
        return NotImplemented

    def evaluate(self, n: int) -> Fraction | float:
        """
        Evaluate at a concrete N. Exact when every power is an integer.
        """
        if self.has_integer_powers():
            total = Fraction(0)
            for p, c in self._terms.items():
                total += c * Fraction(n) ** int(p)
            return total
        return float(
            sum(float(c) * float(n) ** float(p) for p, c in self._terms.items())
        )

    def to_json(self) -> dict[str, str]:
        """Serialize as {"power": "coefficient"} with fraction strings."""
        return {str(p): str(c) for p, c in self}

    @classmethod
    def from_json(cls, data: Mapping[str, str]) -> "ExactAmplitude":
        return cls({Fraction(p): Fraction(c) for p, c in data.items()})

    def __eq__(self, other: object) -> bool:
        if isinstance(other, (int, Fraction)):
            other = ExactAmplitude.constant(other)
        if not isinstance(other, ExactAmplitude):
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self) -> int:
        return hash(frozenset(self._terms.items()))

    def __repr__(self) -> str:
        if not self._terms:
            return "0"
        parts = []
        for p, c in self:
            if p == 0:
                parts.append(f"{c}")
            elif p == 1:
                parts.append(f"{c}*N")
            else:
                parts.append(f"{c}*N^{p}")
        return " + ".join(parts)
