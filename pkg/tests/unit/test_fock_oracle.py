from fractions import Fraction

import pytest

from app.exceptions import CutoffOverflowError, DimensionLimitError, PreconditionError
from app.models.trace import TraceWord, parse_monomial
from app.physics.fock_oracle import FockSpace, build_trace_operator, oracle_vev
from app.physics.trace_algebra import vev


def tr(text: str):
    return parse_monomial(text)


class TestFockSpace:
    """Mode layout and size guards."""

    def test_dimension(self):
        space = FockSpace(2, ("a",), cutoff=2)
        assert space.mode_count == 4
        assert space.dimension == 81

    def test_dagger_letter_uses_transposed_mode(self):
        space = FockSpace(2, ("a1", "a2"), cutoff=1)
        a = TraceWord.of("a2").letters[0]
        a_dag = TraceWord.of("a2+").letters[0]
        assert space.letter_mode(a, 0, 1) == 4 + 1
        assert space.letter_mode(a_dag, 0, 1) == 4 + 2

    def test_dimension_limit(self):
        with pytest.raises(DimensionLimitError) as exc_info:
            FockSpace(4, ("a",), cutoff=2)
        assert exc_info.value.what == "Fock space"
        assert exc_info.value.size == 3**16

    def test_invalid_rank(self):
        with pytest.raises(PreconditionError):
            FockSpace(0)

    def test_undeclared_species(self):
        space = FockSpace(1, ("a",), cutoff=1)
        with pytest.raises(PreconditionError):
            space.mode_index("b", 0, 0)


class TestOracleVev:
    """Literal matrix action at small N."""

    def test_single_letter_pair(self):
        assert oracle_vev((tr("Tr(a)"), tr("Tr(a+)")), n=3) == 3

    def test_two_letter_pair(self):
        assert oracle_vev((tr("Tr(a a)"), tr("Tr(a+ a+)")), n=3) == 18

    def test_double_trace(self):
        assert oracle_vev((tr("Tr(a)^2"), tr("Tr(a+ a+)")), n=2) == 4

    def test_normal_ordered(self):
        product = (tr("Tr(a)"), tr(":Tr(a+ a):"), tr("Tr(a+)"))
        assert oracle_vev(product, n=2) == 2

    def test_normalization_divided_out(self):
        product = (tr("Tr(a a) / N"), tr("Tr(a+ a+) / N"))
        assert oracle_vev(product, n=3) == Fraction(2)

    def test_cutoff_overflow(self):
        with pytest.raises(CutoffOverflowError) as exc_info:
            oracle_vev((tr("Tr(a)^2"), tr("Tr(a+)^2")), n=1, cutoff=1)
        assert exc_info.value.exit_code == 4

    def test_half_integer_normalization_rejected(self):
        with pytest.raises(PreconditionError):
            oracle_vev(tr("Tr(a+ a+) / N^{1/2}"), n=2)

    @pytest.mark.parametrize(
        "texts, n, cutoff",
        [
            (("Tr(a a a)", "Tr(a+ a+ a+)"), 2, 3),
            (("Tr(a)^2", "Tr(a+)^2"), 2, 2),
            (("Tr(a a)", "Tr(a+)", "Tr(a+)"), 3, 2),
        ],
    )
    def test_agrees_with_exact_contraction(self, texts, n, cutoff):
        product = tuple(tr(t) for t in texts)
        assert oracle_vev(product, n=n, cutoff=cutoff) == vev(product).evaluate(n)

    def test_two_species_agree_with_exact_contraction(self):
        product = (tr("Tr(a1 a2)"), tr("Tr(a2+ a1+)"))
        expected = vev(product).evaluate(2)
        assert oracle_vev(product, n=2, cutoff=1, species=("a1", "a2")) == expected


class TestTraceOperator:
    def test_sparse_trace_operator(self):
        space = FockSpace(2, ("a",), cutoff=1)
        create = build_trace_operator(TraceWord.of("a+"), space)
        destroy = build_trace_operator(TraceWord.of("a"), space)
        state = destroy @ (create @ space.vacuum())
        assert state[0] == 2
