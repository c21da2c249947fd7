from __future__ import annotations

import math
from fractions import Fraction
from typing import Mapping, Union

import sympy

from app.config import settings
from app.exceptions import PreconditionError
from app.models.amplitude import ExactAmplitude

Scalar = Union[int, Fraction, sympy.Expr]


def to_sympy(value: Scalar) -> sympy.Expr:
    if isinstance(value, Fraction):
        return sympy.Rational(value.numerator, value.denominator)
    return sympy.sympify(value)


def _tidy(expr: sympy.Expr) -> sympy.Expr:
    return sympy.radsimp(sympy.expand(expr))


class LargeNSeries:
    """
    Truncated expansion sum_p c_p N^p with symbolic (radical) coefficients.

    `precision` is the lowest power whose coefficient is known exactly; None
    means the series is exact. Square roots and inverses of normalization
    amplitudes are expanded binomially, which is where truncation enters.
    """

    __slots__ = ("_terms", "precision")

    def __init__(
        self,
        terms: Mapping[Union[int, Fraction], Scalar] | None = None,
        precision: Fraction | None = None,
    ):
        self.precision = precision
        cleaned: dict[Fraction, sympy.Expr] = {}
        for power, coeff in (terms or {}).items():
            key = Fraction(power)
            if precision is not None and key < precision:
                continue
            cleaned[key] = cleaned.get(key, sympy.Integer(0)) + to_sympy(coeff)
        self._terms = {}
        for p, c in cleaned.items():
            c = _tidy(c)
            if c != 0:
                self._terms[p] = c

    @classmethod
    def from_amplitude(cls, amplitude: ExactAmplitude) -> "LargeNSeries":
        return cls(amplitude.terms)

    @classmethod
    def constant(cls, value: Scalar) -> "LargeNSeries":
        return cls({0: value})

    @property
    def terms(self) -> dict[Fraction, sympy.Expr]:
        return dict(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    @property
    def leading_power(self) -> Fraction | None:
        return max(self._terms) if self._terms else None

    @property
    def leading_coefficient(self) -> sympy.Expr:
        if not self._terms:
            return sympy.Integer(0)
        return self._terms[max(self._terms)]

    def coefficient(self, power: Union[int, Fraction]) -> sympy.Expr:
        key = Fraction(power)
        if self.precision is not None and key < self.precision:
            raise PreconditionError(
                f"Coefficient of N^{key} requested below series precision "
                f"N^{self.precision}"
            )
        return self._terms.get(key, sympy.Integer(0))

    def vanishes_through(self, power: Union[int, Fraction]) -> bool:
        """True when every coefficient at powers >= `power` is zero."""
        return all(p < Fraction(power) for p in self._terms) and (
            self.precision is None or self.precision <= Fraction(power)
        )

    def _combine_precision(self, other: "LargeNSeries") -> Fraction | None:
        if self.precision is None:
            return other.precision
        if other.precision is None:
            return self.precision
        return max(self.precision, other.precision)

    def __add__(self, other: object) -> "LargeNSeries":
        if isinstance(other, ExactAmplitude):
            other = LargeNSeries.from_amplitude(other)
        elif not isinstance(other, LargeNSeries):
            other = LargeNSeries.constant(other)  # type: ignore[arg-type]
        merged = dict(self._terms)
        for p, c in other._terms.items():
            merged[p] = merged.get(p, sympy.Integer(0)) + c
        return LargeNSeries(merged, self._combine_precision(other))

    __radd__ = __add__

    def __neg__(self) -> "LargeNSeries":
        return LargeNSeries(
            {p: -c for p, c in self._terms.items()}, self.precision
        )

    def __sub__(self, other: object) -> "LargeNSeries":
        if isinstance(other, ExactAmplitude):
            other = LargeNSeries.from_amplitude(other)
        elif not isinstance(other, LargeNSeries):
            other = LargeNSeries.constant(other)  # type: ignore[arg-type]
        return self + (-other)

    def __mul__(self, other: object) -> "LargeNSeries":
        if isinstance(other, ExactAmplitude):
            other = LargeNSeries.from_amplitude(other)
        if not isinstance(other, LargeNSeries):
            factor = to_sympy(other)  # type: ignore[arg-type]
            return LargeNSeries(
                {p: c * factor for p, c in self._terms.items()},
                self.precision,
            )
        precision = None
        if self._terms and other._terms:
            bounds = []
            if self.precision is not None:
                bounds.append(self.precision + other.leading_power)
            if other.precision is not None:
                bounds.append(other.precision + self.leading_power)
            precision = min(bounds) if bounds else None
        product: dict[Fraction, sympy.Expr] = {}
        for p1, c1 in self._terms.items():
            for p2, c2 in other._terms.items():
                if precision is not None and p1 + p2 < precision:
                    continue
                product[p1 + p2] = product.get(p1 + p2, sympy.Integer(0)) + (
                    c1 * c2
                )
        return LargeNSeries(product, precision)

    __rmul__ = __mul__

    def __truediv__(self, other: object) -> "LargeNSeries":
        if isinstance(other, ExactAmplitude):
            other = LargeNSeries.from_amplitude(other)
        if isinstance(other, LargeNSeries):
            return self * other.power(-1)
        return self * (1 / to_sympy(other))  # type: ignore[arg-type]

    def power(
        self, exponent: Union[int, Fraction], depth: int | None = None
    ) -> "LargeNSeries":
        """
        Raise to a rational power by binomial expansion around the leading term.

        Args:
            exponent: rational exponent, e.g. -1 or Fraction(-1, 2).
            depth: relative depth in powers of N kept for exact inputs;
                defaults to settings.SERIES_ORDER.
        """
        if not self._terms:
            raise ZeroDivisionError("Power of an empty series")
        alpha = Fraction(exponent)
        lead = self.leading_power
        head = self.leading_coefficient
        if self.precision is not None:
            rel_depth = lead - self.precision
        else:
            rel_depth = Fraction(
                depth if depth is not None else settings.SERIES_ORDER
            )
        # u = series / (head * N^lead) - 1, only negative relative powers
        u = {
            p - lead: c / head for p, c in self._terms.items() if p != lead
        }
        alpha_sym = to_sympy(alpha)
        result: dict[Fraction, sympy.Expr] = {Fraction(0): sympy.Integer(1)}
        if u:
            gap = -max(u)
            max_k = int(math.ceil(rel_depth / gap)) if gap > 0 else 0
            u_power: dict[Fraction, sympy.Expr] = {Fraction(0): sympy.Integer(1)}
            for k in range(1, max_k + 1):
                nxt: dict[Fraction, sympy.Expr] = {}
                for p1, c1 in u_power.items():
                    for p2, c2 in u.items():
                        if p1 + p2 < -rel_depth:
                            continue
                        nxt[p1 + p2] = nxt.get(p1 + p2, sympy.Integer(0)) + (
                            c1 * c2
                        )
                u_power = nxt
                if not u_power:
                    break
                weight = sympy.binomial(alpha_sym, k)
                for p, c in u_power.items():
                    result[p] = result.get(p, sympy.Integer(0)) + weight * c
        scale = sympy.Pow(head, alpha_sym)
        new_lead = alpha * lead
        return LargeNSeries(
            {new_lead + p: scale * c for p, c in result.items()},
            new_lead - rel_depth,
        )

    def sqrt(self) -> "LargeNSeries":
        return self.power(Fraction(1, 2))

    def inverse(self) -> "LargeNSeries":
        return self.power(-1)

    def evaluate(self, n: float) -> float:
        return float(
            sum(float(c) * float(n) ** float(p) for p, c in self._terms.items())
        )

    def to_json(self) -> dict[str, str]:
        return {
            str(p): str(c) for p, c in sorted(self._terms.items(), reverse=True)
        }

    def __repr__(self) -> str:
        if not self._terms:
            return "0"
        body = " + ".join(
            f"({c})*N^{p}" for p, c in sorted(self._terms.items(), reverse=True)
        )
        if self.precision is not None:
            body += f" + (terms below N^{self.precision})"
        return body
