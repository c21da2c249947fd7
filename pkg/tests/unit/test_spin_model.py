import math
from fractions import Fraction

import numpy as np
import pytest

from app.config import settings
from app.exceptions import DimensionLimitError, PreconditionError
from app.physics.spin_model import (
    SpinConfigState,
    SpinLetter,
    SpinOperatorSpec,
    apply_product,
    apply_trace_operator,
    build_penalty_hamiltonians,
    casimir_matrix,
    check_pseudo_generator_algebra,
    closure_identity,
    eigen_residuals,
    low_spectrum,
    overlap_scaling,
    penalty_suppression,
    pseudo_generator,
    sector_configurations,
    site,
    spin_akl,
    spin_code,
    trace_state,
)


class TestSpinStates:
    """Exact sparse action of trace words on the spin grid."""

    def test_single_trace_raises_diagonal(self):
        state = trace_state(2, [1])
        assert set(state.amplitudes) == {1 << site(2, 0, 0), 1 << site(2, 1, 1)}
        assert state.norm_squared() == 2

    def test_hard_core_truncation(self):
        assert trace_state(2, [1, 1]).norm_squared() == 4
        assert trace_state(2, [1, 1, 1]).is_zero()

    def test_zero_power_is_factor_n(self):
        assert trace_state(3, [0, 1]) == trace_state(3, [1]).scale(3)

    def test_number_operator(self):
        state = trace_state(3, [2])
        counted = apply_trace_operator("+-", state)
        assert counted == state.scale(2)

    def test_lowering_undoes_raising(self):
        vacuum = SpinConfigState.vacuum(2)
        assert apply_product(["-", "+"], vacuum) == vacuum.scale(2)

    def test_quanta_budget(self):
        with pytest.raises(DimensionLimitError) as exc_info:
            trace_state(2, [1, 1], budget=1)
        assert exc_info.value.what == "spin quanta"

    def test_mismatched_grids(self):
        with pytest.raises(PreconditionError):
            SpinConfigState.vacuum(2) + SpinConfigState.vacuum(3)

    def test_invalid_letters(self):
        with pytest.raises(PreconditionError):
            SpinLetter("x", 0, 1)
        with pytest.raises(PreconditionError):
            SpinOperatorSpec.trace("")


class TestPenaltyHamiltonians:
    """Pseudo-generator penalty and the three-quanta states."""

    def test_pseudo_generator_annihilates_singlet(self):
        state = trace_state(2, [1])
        for i in range(2):
            for j in range(2):
                assert pseudo_generator(i, j, state).is_zero()

    def test_h0_offset_from_length(self):
        hamiltonians = build_penalty_hamiltonians(3, length=2)
        assert hamiltonians.target_quanta == 4
        vacuum = SpinConfigState.vacuum(3)
        assert hamiltonians.h0(vacuum) == vacuum.scale(16)

    def test_two_quanta_zero_mode(self):
        hamiltonians = build_penalty_hamiltonians(3)
        state = trace_state(3, [2]) - trace_state(3, [1, 1])
        assert not state.is_zero()
        assert hamiltonians.hg(state).is_zero()

    def test_arguments_exclusive(self):
        with pytest.raises(PreconditionError):
            build_penalty_hamiltonians(2, length=1, s_tot=Fraction(0))
        with pytest.raises(PreconditionError):
            build_penalty_hamiltonians(1)

    def test_residuals_of_zero_modes(self):
        residuals = {r.label: r for r in eigen_residuals(3)}
        assert list(residuals) == ["psi1", "psi2", "psi3", "psi4"]
        for label in ("psi1", "psi2"):
            assert residuals[label].is_eigenstate
            assert residuals[label].rayleigh == 0
        assert residuals["psi4"].stated == 1
        assert residuals["psi3"].stated == Fraction(7, 6)

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_closure_identity(self, n):
        identity = closure_identity(n)
        assert identity.leading == 4 * n * n - 4 * n - 8
        assert identity.holds

    @pytest.mark.parametrize("n", [2, 3])
    def test_closure_diagonal_term_is_empty(self, n):
        """Test the coefficient-32 state vanishes on hard-core spins."""
        identity = closure_identity(n)
        assert identity.diagonal == 32
        assert identity.diagonal_vanishes
        lhs = apply_product(["--", "++", "++"], SpinConfigState.vacuum(n))
        assert (lhs - trace_state(n, [2]).scale(identity.leading)).is_zero()

    def test_generator_algebra(self):
        check = check_pseudo_generator_algebra(2)
        assert check.checked == 2**4 * 2**4 * 2
        assert check.holds


class TestSpinCode:
    def test_length_one_rejected(self):
        with pytest.raises(PreconditionError) as exc_info:
            spin_code(3, 1)
        assert "L >= 2" in str(exc_info.value)

    def test_quanta_above_budget(self):
        with pytest.raises(DimensionLimitError):
            spin_code(3, 5)

    def test_logical_basis_is_orthonormal(self):
        code = spin_code(3, 2)
        gram = [[float(x) for x in row] for row in code.gram]
        logical = code.logical(np.array(gram))
        assert np.allclose(logical, np.eye(2))
        assert code.s_tot == Fraction(4) - Fraction(9, 2)

    def test_overlap_scaling_needs_three_sizes_for_fit(self):
        scaling = overlap_scaling(2, [3, 4])
        assert len(scaling.overlaps) == 2
        assert scaling.exponent is None


class TestSpinAkl:
    """Error elements of Tr(S+^n) on the spin code."""

    def test_cross_terms_and_identity(self):
        report = spin_akl([3], 2, [1, 2])
        assert report.cross_terms == {"1,2": 0.0}
        for n, up, down in report.identity_values:
            assert math.isclose(up, 4 / n, rel_tol=1e-9)
            assert math.isclose(down, 4 / n, rel_tol=1e-9)
        assert [row.order for row in report.rows] == [1, 2]

    def test_orders_must_be_positive(self):
        with pytest.raises(PreconditionError):
            spin_akl([3], 2, [0])


class TestLowSpectrum:
    """Fixed-quanta sectors of the penalty Hamiltonian."""

    def test_sector_configurations(self):
        configs = sector_configurations(2, 2)
        assert len(configs) == 6
        assert all(bin(c).count("1") == 2 for c in configs)
        with pytest.raises(PreconditionError):
            sector_configurations(2, 5)

    def test_sector_limit(self, monkeypatch):
        monkeypatch.setattr(settings, "SPIN_SECTOR_LIMIT", 5)
        with pytest.raises(DimensionLimitError):
            sector_configurations(3, 2)

    def test_casimir_is_symmetric(self):
        matrix = casimir_matrix(2, sector_configurations(2, 2)).toarray()
        assert (abs(matrix - matrix.T) < 1e-12).all()

    def test_low_cluster_counts(self):
        spectrum = low_spectrum(3, 1)
        assert spectrum.low_counts == {0: 1, 1: 1}
        assert spectrum.matches_partitions()
        vacuum_levels = [level for level in spectrum.levels if level.quanta == 0]
        assert len(vacuum_levels) == 1
        assert vacuum_levels[0].energy == 0.0

    def test_single_quantum_gap(self):
        spectrum = low_spectrum(3, 1, h=0.0)
        energies = sorted(level.energy for level in spectrum.levels if level.quanta == 1)
        assert energies[0] == pytest.approx(0.0, abs=1e-9)
        assert energies[1] > 0.5

    def test_invalid_coupling(self):
        with pytest.raises(PreconditionError):
            low_spectrum(2, 1, coupling=0.0)


class TestPenaltySuppression:
    def test_multiplier_is_order_one(self):
        result = penalty_suppression(100, 0.5)
        assert math.isclose(result.penalty, math.log(100))
        assert math.isclose(result.multiplier, 1.0)

    def test_invalid_temperature(self):
        with pytest.raises(PreconditionError):
            penalty_suppression(10, 0.0)
