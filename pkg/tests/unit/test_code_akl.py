import math
from dataclasses import replace
from fractions import Fraction

import numpy as np
import pytest
import sympy

from app.exceptions import PreconditionError
from app.physics.code_akl import (
    CASE1,
    CASE2,
    CASE3_NONSINGLET,
    MODEL_A,
    MODEL_B,
    MODEL_C,
    ancilla_projection_check,
    build_code,
    classify_errors,
    decay_mode,
    exceptional_errors,
    generate_errors,
    kl_matrices,
    logical_matrix,
    matrix_entropy,
    mixed_error,
    number_error,
    power_error,
    predict_decay,
)


def pair_matrix(code, first, second=None):
    second = second or first
    return logical_matrix(code, (first.operator.conj(), second.operator))


def same(expr, expected) -> bool:
    return sympy.simplify(expr - expected) == 0


class TestBuildCode:
    """Logical states and their Gram data."""

    def test_model_b_states_are_orthonormal(self, model_b_code):
        assert model_b_code.d == 2
        assert np.allclose(model_b_code.gram_at(10), np.eye(2))

    def test_model_a_gram_invertible(self, model_a_code):
        gram = model_a_code.gram_at(20)
        assert np.all(np.linalg.eigvalsh(gram) > 0)

    def test_logical_basis_is_orthonormal(self, model_a_code):
        identity = model_a_code.logical_overlap(0, 0)
        assert identity.coefficient(0) == 1
        assert model_a_code.logical_overlap(0, 1).vanishes_through(-2)

    @pytest.mark.parametrize("length", [2, 3, 4, 5])
    def test_model_c_overlap_leading_term(self, length):
        code = build_code(MODEL_C, length=length)
        half = Fraction(-1, 2)
        overlap = code.gram[0][1] * code.gram[0][0].power(half) * code.gram[1][1].power(half)
        assert overlap.leading_power == -2
        expected = length**2 * sympy.sqrt(length**2 - 1) / sympy.sqrt(2)
        assert same(overlap.leading_coefficient, expected)

    def test_model_c_needs_length(self):
        with pytest.raises(PreconditionError) as exc_info:
            build_code(MODEL_C)
        assert "L >= 2" in str(exc_info.value)

    def test_unknown_model(self):
        with pytest.raises(PreconditionError):
            build_code("D")


class TestModelA:
    """Phase and bit-flip coefficients of the distant-oscillator code."""

    @pytest.mark.parametrize("n", [1, 2])
    def test_phase_coefficients(self, model_a_code, n):
        matrix = pair_matrix(model_a_code, power_error(n))
        assert matrix[0][0].coefficient(0) == 1
        assert matrix[0][0].coefficient(-2) == 4 * n
        assert matrix[1][1].coefficient(-2) == 2 * n

    @pytest.mark.parametrize("n", [3, 4, 5])
    def test_phase_difference_beyond_two_letters(self, model_a_code, n):
        # only the adjacent a1+ a1+ pair of the up state feeds Tr(a+^2 a^2)
        matrix = pair_matrix(model_a_code, power_error(n))
        assert same(matrix[0][0].coefficient(0), 1)
        assert same(matrix[1][1].coefficient(0), 1)
        difference = matrix[0][0].coefficient(-2) - matrix[1][1].coefficient(-2)
        assert same(difference, n)

    @pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
    def test_bit_flip_suppressed(self, model_a_code, n):
        matrix = pair_matrix(model_a_code, power_error(n))
        assert matrix[0][1].vanishes_through(-2)
        assert matrix[1][0].vanishes_through(-2)

    def test_double_trace_phase_is_additive(self, model_a_code):
        error = power_error(1).times(power_error(2))
        matrix = pair_matrix(model_a_code, error)
        difference = matrix[0][0].coefficient(-2) - matrix[1][1].coefficient(-2)
        assert difference == 2 * 1 + 2 * 2

    def test_decay_mode_is_second_class(self, model_a_code):
        kl = kl_matrices(model_a_code, [decay_mode("a1")])
        classification = classify_errors(kl)
        assert classification.class_of("E_0,2[a1]") == "second"
        assert classification.second_class_count == 1

    def test_number_operator_is_identity_like(self, model_a_code):
        kl = kl_matrices(model_a_code, [number_error(1, "a1")])
        assert kl.identity_like == [0]
        assert kl.e[0][0][0] == kl.e[0][1][1] != 0
        assert classify_errors(kl).class_of(kl.labels[0]) == "identity"


class TestModelB:
    """Coupled-oscillator code in the logical basis."""

    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    @pytest.mark.parametrize("m", [2, 3, 4])
    def test_bit_flip(self, model_b_code, n, m):
        matrix = pair_matrix(model_b_code, mixed_error(n + 1, m - 1), mixed_error(n, m))
        assert matrix[1][0].coefficient(0) == 0
        assert same(matrix[1][0].coefficient(-2), (n + 1) * m)

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_bit_flip_into_pure_trace(self, model_b_code, n):
        # n+1 cyclic rotations of a1+^n against the 1/sqrt(n+1) of E_(n+1,0)
        matrix = pair_matrix(model_b_code, mixed_error(n + 1, 0), mixed_error(n, 1))
        assert matrix[1][0].coefficient(0) == 0
        assert same(matrix[1][0].coefficient(-2), n * sympy.sqrt(n + 1))

    @pytest.mark.parametrize("n", [2, 3, 4])
    @pytest.mark.parametrize("m", [2, 3, 4])
    def test_phase_difference(self, model_b_code, n, m):
        matrix = pair_matrix(model_b_code, mixed_error(n, m))
        assert matrix[0][0].coefficient(0) == matrix[1][1].coefficient(0) == 1
        difference = matrix[0][0].coefficient(-2) - matrix[1][1].coefficient(-2)
        assert same(difference, n**2 - m**2)

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_single_species_phase(self, model_b_code, n):
        matrix = pair_matrix(model_b_code, mixed_error(n, 0))
        difference = matrix[0][0].coefficient(-2) - matrix[1][1].coefficient(-2)
        assert same(difference, n * (n - 1))
        assert matrix[0][1].coefficient(-2) == 0

    def test_single_creator_has_no_logical_action(self, model_b_code):
        action = logical_matrix(model_b_code, (mixed_error(1, 0).operator,))
        assert all(entry.is_zero() for row in action for entry in row)

    def test_number_operator_not_identity_like(self, model_b_code):
        kl = kl_matrices(model_b_code, [number_error(1, "a1")])
        assert kl.identity_like == []

    def test_mixed_error_needs_letters(self):
        with pytest.raises(PreconditionError):
            mixed_error(0, 0)


class TestModelC:
    """Global-symmetry code in the symmetric (+/-) basis."""

    @pytest.mark.parametrize("length, n", [(3, 1), (4, 1), (5, 1), (5, 3)])
    def test_power_error_cross_term(self, length, n):
        # <+|M|-> is half the diagonal difference of the normalized raw states
        code = build_code(MODEL_C, length=length)
        matrix = pair_matrix(code, power_error(n, "a"))
        assert same(matrix[0][0].coefficient(0), 1)
        assert same(matrix[1][1].coefficient(0), 1)
        assert same(matrix[0][1].coefficient(-2), -n)

    @pytest.mark.parametrize("length", [4, 5])
    def test_two_letter_cross_term(self, length):
        # Tr(a^2) sends the down state onto Tr(a+^(L-1))^2, whose norm is doubled
        code = build_code(MODEL_C, length=length)
        matrix = pair_matrix(code, power_error(2, "a"))
        assert same(matrix[0][1].coefficient(-2), -(length**2 + 1))

    @pytest.mark.parametrize("length", [2, 3, 4])
    def test_number_operator_is_identity_like(self, length):
        code = build_code(MODEL_C, length=length)
        kl = kl_matrices(code, [number_error(1, "a")])
        assert kl.identity_like == [0]
        # the P-sum of {a+, a} is 2 Tr(a+ a), and both states hold 2L quanta
        assert same(kl.e[0][0][0], 4 * length)
        assert same(kl.e[0][1][1], 4 * length)
        assert same(kl.e[0][0][1], 0)


class TestGenerateErrors:
    """Deterministic error catalogues per case."""

    def test_case1_level_counts(self):
        errors = generate_errors(MODEL_A, CASE1, 2)
        assert errors.level_counts() == {1: 4, 2: 16}
        assert math.isclose(errors.density_exponent(), math.log(4))

    def test_case2_catalogue(self):
        errors = generate_errors(MODEL_B, CASE2, 2)
        assert len(errors.entries) == 14
        assert len(exceptional_errors(errors)) == 6

    def test_entries_sorted_by_letters(self):
        errors = generate_errors(MODEL_B, CASE1, 3)
        letters = [e.letters for e in errors.entries]
        assert letters == sorted(letters)

    def test_nonsinglet_aggregate_is_empty(self):
        errors = generate_errors(MODEL_C, CASE3_NONSINGLET, 4, length=2)
        assert errors.entries == ()
        assert errors.nonsinglet_aggregate

    def test_case_must_match_model(self):
        with pytest.raises(PreconditionError) as exc_info:
            generate_errors(MODEL_C, CASE1, 2, length=2)
        assert "does not apply" in str(exc_info.value)

    def test_negative_cutoff(self):
        with pytest.raises(PreconditionError):
            generate_errors(MODEL_A, CASE1, -1)


class TestAncillaRelay:
    @pytest.mark.parametrize("first, second", [(1, 1), (2, 2)])
    def test_relay_matches_direct_operation(self, first, second):
        check = ancilla_projection_check(first, second)
        assert check.compared > 0
        assert check.holds

    def test_relay_needs_letters(self):
        with pytest.raises(PreconditionError):
            ancilla_projection_check(0, 1)


class TestClassification:
    """Per-label classes follow the rotated channels."""

    def test_duplicated_error_is_mixed(self, model_a_code):
        error = power_error(1)
        copy = replace(error, label="E_1[a1] copy")
        classification = classify_errors(kl_matrices(model_a_code, [error, copy]))
        assert classification.first_class_count == 1
        assert classification.second_class_count == 1
        assert classification.class_of(error.label) == "mixed"
        assert classification.class_of(copy.label) == "mixed"
        assert math.isclose(classification.first_weights[error.label], 0.5)
        assert sorted(classification.mixed) == sorted([error.label, copy.label])

    def test_unmixed_errors_keep_their_class(self, model_a_code):
        errors = [power_error(1), decay_mode("a1")]
        classification = classify_errors(kl_matrices(model_a_code, errors))
        assert classification.class_of("E_1[a1]") == "first"
        assert classification.class_of("E_0,2[a1]") == "second"
        assert classification.first_weights["E_1[a1]"] == pytest.approx(1.0)
        assert classification.mixed == []

    def test_class_counts_ignore_input_order(self, model_a_code):
        errors = [power_error(1), replace(power_error(1), label="twin"), decay_mode("a1")]
        forward = classify_errors(kl_matrices(model_a_code, errors))
        backward = classify_errors(kl_matrices(model_a_code, errors[::-1]))
        assert forward.classes == backward.classes
        assert forward.first_class_count == backward.first_class_count


class TestDecayPrediction:
    def test_matrix_entropy(self):
        assert math.isclose(matrix_entropy(np.eye(2) / 2), math.log(2))
        assert matrix_entropy(np.zeros((0, 0))) == 0.0

    def test_information_starts_at_two_ln_two(self, model_a_code):
        classification = classify_errors(kl_matrices(model_a_code, [decay_mode("a1")]))
        prediction = predict_decay(
            classification, {"E_0,2[a1]": 0.1}, [0.0, 1.0, 2.0], n=10
        )
        assert math.isclose(prediction.information[0], 2 * math.log(2))

    def test_missing_rate(self, model_a_code):
        classification = classify_errors(kl_matrices(model_a_code, [decay_mode("a1")]))
        with pytest.raises(PreconditionError) as exc_info:
            predict_decay(classification, {}, [0.0], n=10)
        assert "E_0,2[a1]" in str(exc_info.value)
