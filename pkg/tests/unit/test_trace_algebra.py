from fractions import Fraction

import pytest

from app.exceptions import AlphabetError, EnumerationBudgetError, PreconditionError
from app.models.amplitude import ExactAmplitude
from app.models.trace import TraceMonomial, TraceWord, parse_monomial
from app.physics.trace_algebra import (
    WickContractor,
    commutator_defect,
    connected_four_point,
    inner_product,
    matrix_element,
    norm_squared,
    power_word,
    slot_words,
    vev,
    vev_many,
)


def tr(text: str) -> TraceMonomial:
    return parse_monomial(text)


class TestVacuumExpectationValues:
    """Exact polynomials for small trace products."""

    def test_single_letter_pair(self):
        assert vev((tr("Tr(a)"), tr("Tr(a+)"))) == ExactAmplitude.monomial(1)

    def test_two_letter_pair(self):
        result = vev((tr("Tr(a a)"), tr("Tr(a+ a+)")))
        assert result == ExactAmplitude.monomial(2, 2)

    def test_double_trace_against_single_trace(self):
        result = vev((tr("Tr(a)^2"), tr("Tr(a+ a+)")))
        assert result == ExactAmplitude.monomial(1, 2)

    def test_unbalanced_product_vanishes(self):
        assert vev((tr("Tr(a a)"), tr("Tr(a+ a+ a+)"))).is_zero()

    def test_annihilator_on_vacuum_vanishes(self):
        assert vev((tr("Tr(a+)"), tr("Tr(a)"))).is_zero()

    def test_normalization_and_coefficient(self):
        result = vev((tr("3 * Tr(a a) / N"), tr("Tr(a+ a+) / N")))
        assert result == ExactAmplitude.constant(6)

    @pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
    def test_single_trace_norm_leading_term(self, n):
        state = power_word("a", 0, n)
        result = norm_squared(state)
        assert result.leading_power == n
        assert result.leading_coefficient == n
        # corrections come in steps of N^-2
        assert result.coefficient(n - 1) == 0

    def test_species_do_not_mix(self):
        assert vev((tr("Tr(a1)"), tr("Tr(a2+)"))).is_zero()
        assert vev((tr("Tr(a1)"), tr("Tr(a1+)"))) == ExactAmplitude.monomial(1)

    def test_normal_ordered_number_operator(self):
        result = vev((tr("Tr(a)"), tr(":Tr(a+ a):"), tr("Tr(a+)")))
        assert result == ExactAmplitude.monomial(1)

    def test_undeclared_species_rejected(self):
        with pytest.raises(AlphabetError) as exc_info:
            vev((tr("Tr(b)"), tr("Tr(b+)")), alphabet=["a"])
        assert "not declared" in str(exc_info.value)

    def test_identity_product(self):
        assert vev((TraceMonomial.identity(),)) == ExactAmplitude.constant(1)


class TestWickContractor:
    """Budget handling and memo reuse."""

    def test_budget_exhaustion(self):
        engine = WickContractor(budget=5)
        with pytest.raises(EnumerationBudgetError) as exc_info:
            vev((tr("Tr(a a a a a a)"), tr("Tr(a+ a+ a+ a+ a+ a+)")), contractor=engine)
        assert exc_info.value.budget == 5
        assert exc_info.value.exit_code == 3

    def test_memo_shared_between_calls(self):
        engine = WickContractor()
        product = (tr("Tr(a a a)"), tr("Tr(a+ a+ a+)"))
        first = vev(product, contractor=engine)
        steps = engine.steps
        second = vev(product, contractor=engine)
        assert first == second
        assert engine.steps < steps

    def test_memo_cleared_above_cache_size(self):
        engine = WickContractor(cache_size=0)
        vev((tr("Tr(a a)"), tr("Tr(a+ a+)")), contractor=engine)
        vev((tr("Tr(a)"), tr("Tr(a+)")), contractor=engine)
        assert engine.steps > 0

    def test_separated_product_erases_ranks(self):
        words = slot_words((tr("Tr(a)"), tr("Tr(a+)")))
        assert words == [(("a", False, (0,), -1),), (("a", True, (1,), -1),)]


class TestInnerProducts:
    def test_inner_product_requires_creation_states(self):
        with pytest.raises(PreconditionError) as exc_info:
            inner_product(tr("Tr(a)"), tr("Tr(a+)"))
        assert "creation letters" in str(exc_info.value)

    def test_inner_product_is_symmetric(self):
        a, b = tr("Tr(a+)^2"), tr("Tr(a+ a+)")
        assert inner_product(a, b) == inner_product(b, a)
        assert inner_product(a, b) == ExactAmplitude.monomial(1, 2)

    def test_matrix_element_of_number_operator(self):
        ket = TraceMonomial.from_words([["a+", "a+"]])
        number = tr(":Tr(a+ a):")
        result = matrix_element(ket, number, ket)
        assert result == ExactAmplitude.constant(4)

    def test_power_word_empty_is_identity(self):
        assert power_word("a", 0, 0) == TraceMonomial.identity()
        assert power_word("a", 1, 2) == TraceMonomial((TraceWord.of("a", "a+", "a+"),))

    def test_vev_many_matches_serial(self):
        products = [
            (tr("Tr(a)"), tr("Tr(a+)")),
            (tr("Tr(a a)"), tr("Tr(a+ a+)")),
        ]
        assert vev_many(products, workers=1) == [vev(p) for p in products]


class TestCommutatorRule:
    """Single-contraction rule for commutators of power words."""

    def test_exact_when_second_word_is_single_creator(self):
        defect, rule = commutator_defect(
            2, 0, 0, 1, bra=tr("Tr(a+)"), ket=tr("Tr(a+ a+)")
        )
        assert defect.is_zero()
        assert not rule.is_zero()

    def test_exact_when_second_word_is_single_annihilator(self):
        defect, _ = commutator_defect(
            0, 2, 1, 0, bra=tr("Tr(a+ a+)"), ket=tr("Tr(a+)")
        )
        assert defect.is_zero()

    def test_empty_word_rejected(self):
        with pytest.raises(PreconditionError):
            commutator_defect(0, 0, 1, 0, tr("Tr(a+)"), tr("Tr(a+)"))


class TestConnectedCorrelator:
    def test_single_letter_traces_factorize(self):
        a = tr("Tr(a+)")
        assert connected_four_point(a, a, a, a).is_zero()

    def test_connected_part_is_subleading(self):
        a = TraceMonomial.from_words([["a+", "a+"]])
        connected = connected_four_point(a, a, a, a)
        full = vev((a.conj(), a.conj(), a, a))
        assert connected.leading_power < full.leading_power
        assert full.leading_coefficient == Fraction(8)
