import math

import pytest
from pydantic import ValidationError

from app.config import settings
from app.exceptions import DimensionLimitError, PreconditionError
from app.models.trace import parse_monomial
from app.physics.singlet_basis import (
    CASE1,
    CASE2,
    ONE_MATRIX,
    DegeneracyModel,
    SingletState,
    casimir_thermal_bound,
    enumerate_basis,
    growth_exponent,
    hagedorn_sum,
    hagedorn_temperature,
    necklace_count,
    partition_count,
)


def level_sizes(states):
    sizes = {}
    for state in states:
        sizes[state.energy] = sizes.get(state.energy, 0) + 1
    return sizes


class TestEnumerateBasis:
    """Multi-trace singlet states up to an energy cutoff."""

    def test_one_matrix_counts_are_partitions(self):
        states = enumerate_basis(ONE_MATRIX, 5)
        assert level_sizes(states) == {0: 1, 1: 1, 2: 2, 3: 3, 4: 5, 5: 7}

    def test_vacuum_first_and_energy_ordered(self):
        states = enumerate_basis(CASE2, 3)
        assert states[0].energy == 0
        assert states[0].defining.factors == ()
        energies = [s.energy for s in states]
        assert energies == sorted(energies)

    def test_case1_level_two(self):
        assert level_sizes(enumerate_basis(CASE1, 2))[2] == 5

    def test_case2_counts(self):
        assert level_sizes(enumerate_basis(CASE2, 4)) == {0: 1, 1: 2, 2: 6, 3: 14, 4: 34}

    def test_states_are_unit_normalized(self):
        for state in enumerate_basis(ONE_MATRIX, 3):
            assert state.defining.normalization_power * 2 == state.energy

    def test_states_are_distinct(self):
        states = enumerate_basis(CASE2, 4)
        assert len({s.defining for s in states}) == len(states)

    def test_negative_cutoff(self):
        with pytest.raises(PreconditionError):
            enumerate_basis(ONE_MATRIX, -1)

    def test_unknown_model(self):
        with pytest.raises(PreconditionError) as exc_info:
            enumerate_basis("three-matrix", 2)
        assert "three-matrix" in str(exc_info.value)

    def test_size_limit(self, monkeypatch):
        monkeypatch.setattr(settings, "BASIS_SIZE_LIMIT", 5)
        with pytest.raises(DimensionLimitError) as exc_info:
            enumerate_basis(ONE_MATRIX, 4)
        assert exc_info.value.limit == 5

    def test_state_must_be_creation_only(self):
        with pytest.raises(PreconditionError):
            SingletState.of(parse_monomial("Tr(a)"))


class TestCounting:
    @pytest.mark.parametrize("n, expected", [(0, 1), (1, 1), (2, 2), (3, 3), (4, 5), (5, 7)])
    def test_partition_count(self, n, expected):
        assert partition_count(n) == expected

    def test_necklace_count(self):
        assert necklace_count(2, 1) == 2
        assert necklace_count(2, 4) == 6
        assert necklace_count(3, 2) == 6

    def test_invalid_counts(self):
        with pytest.raises(PreconditionError):
            partition_count(-1)
        with pytest.raises(PreconditionError):
            necklace_count(0, 3)


class TestDegeneracyModel:
    """Command-line spellings and level counts."""

    def test_parse_exponential(self):
        model = DegeneracyModel.parse("2^n")
        assert model.kind == "exponential"
        assert model.degeneracy(3) == 8

    def test_parse_single_trace(self):
        model = DegeneracyModel.parse("single-trace:3")
        assert model.species == 3
        assert model.degeneracy(0) == 1
        assert model.degeneracy(2) == 6

    def test_parse_partition(self):
        assert DegeneracyModel.parse("partition").degeneracy(5) == 7

    def test_parse_table(self):
        model = DegeneracyModel.parse("1,2,5")
        assert model.kind == "custom"
        assert model.degeneracy(2) == 5
        with pytest.raises(PreconditionError):
            model.degeneracy(3)

    def test_parse_unknown(self):
        with pytest.raises(PreconditionError):
            DegeneracyModel.parse("lots")

    def test_table_below_one_rejected(self):
        with pytest.raises(ValidationError):
            DegeneracyModel.parse("1,0.5")

    def test_custom_needs_table(self):
        with pytest.raises(ValidationError):
            DegeneracyModel(kind="custom")

    def test_growth_exponent(self):
        exponent = growth_exponent(DegeneracyModel(kind="exponential", base=2.0))
        assert math.isclose(exponent, math.log(2), rel_tol=1e-9)


class TestHagedorn:
    """Convergence of thermal sums around the growth temperature."""

    def test_critical_temperature(self):
        model = DegeneracyModel.parse("2^n")
        assert math.isclose(hagedorn_temperature(model, 1.0), 1 / math.log(2))

    def test_critical_temperature_needs_exponential(self):
        with pytest.raises(PreconditionError):
            hagedorn_temperature(DegeneracyModel.parse("partition"), 1.0)

    def test_convergent_below_critical(self):
        model = DegeneracyModel.parse("2^n")
        t_c = hagedorn_temperature(model, 1.0)
        result = hagedorn_sum(0, 1 / (0.9 * t_c), 1.0, model, cutoff=400)
        assert not result.divergent
        assert result.tail_ratio < 1
        assert math.isfinite(result.value)

    def test_divergent_above_critical(self):
        model = DegeneracyModel.parse("2^n")
        t_c = hagedorn_temperature(model, 1.0)
        result = hagedorn_sum(0, 1 / (1.1 * t_c), 1.0, model, cutoff=400)
        assert result.divergent
        assert result.tail_ratio > 1

    def test_closed_form_for_flat_degeneracy(self):
        x = math.exp(-1.0)
        result = hagedorn_sum(2, 1.0, 1.0, DegeneracyModel.parse("1^n"), cutoff=400)
        assert math.isclose(result.value, x * (1 + x) / (1 - x) ** 3, rel_tol=1e-9)
        assert not result.divergent

    def test_cutoff_must_be_positive(self):
        with pytest.raises(PreconditionError):
            hagedorn_sum(0, 1.0, 1.0, DegeneracyModel.parse("2^n"), cutoff=0)


class TestCasimirBound:
    def test_boundary_temperature_value(self):
        n, omega, t = 100, 1.0, 0.5
        j = 2 * t * math.log(n)
        result = casimir_thermal_bound(j, omega, t, n)
        x = math.exp(-2)
        assert math.isclose(result.per_oscillator_ratio, x / (1 - x) ** 2, rel_tol=1e-9)
        assert result.expectation <= result.bound * (1 + 1e-9)

    def test_well_below_limit(self):
        result = casimir_thermal_bound(20.0, 1.0, 0.5, 10)
        assert 0 < result.expectation < result.bound

    def test_too_hot(self):
        with pytest.raises(PreconditionError) as exc_info:
            casimir_thermal_bound(1.0, 1.0, 1.0, 100)
        assert "J / (2 ln N)" in str(exc_info.value)

    def test_invalid_arguments(self):
        with pytest.raises(PreconditionError):
            casimir_thermal_bound(1.0, 1.0, 0.1, 1)
