import math

import numpy as np
import pytest

from qsl.bounds import mt_ml_unified
from qsl.dynamics import ControlledHamiltonian, TimeGrid
from qsl.errors import DegeneracyError, InvalidInputError
from qsl.linalg import SIGMA_X, SIGMA_Z, DensityMatrix, HermitianOperator, Ket
from qsl.models import landau_zener, linear_ramp
from qsl.thermo import (bekenstein_rate, clausius_geometric_check, energy_cost_per_bit, holevo_learning,
                        landauer_product, lloyd_operation_rate, otto_engine_bounds, sigma_max, sta_cost_and_qsl,
                        two_point_work)


def sudden_quench() -> ControlledHamiltonian:
    """σ_z switched to σ_x in a vanishing time."""
    return ControlledHamiltonian(
        grid=TimeGrid(t_end=1e-12, steps=2),
        drift=HermitianOperator(matrix=np.zeros((2, 2))),
        control_terms=(HermitianOperator(matrix=SIGMA_Z), HermitianOperator(matrix=SIGMA_X)),
        control_signals=[[1.0, 0.0], [0.0, 1.0]])


class TestWorkStatistics:
    """Two-point-measurement work and entropy production."""

    def test_static_hamiltonian(self, make_hermitian):
        """Nothing happens without driving."""
        grid = TimeGrid(t_end=1.0, steps=20)
        stats = two_point_work(ControlledHamiltonian.constant(make_hermitian(3), grid), beta=0.7)
        assert stats.mean_work == pytest.approx(0.0, abs=1e-12)
        assert stats.delta_f == pytest.approx(0.0, abs=1e-12)
        assert stats.entropy_production == pytest.approx(0.0, abs=1e-12)
        assert stats.relative_entropy == pytest.approx(0.0, abs=1e-10)

    def test_entropy_production_is_relative_entropy(self, make_protocol):
        """β(⟨W⟩ − ΔF) = S(ρ_τ‖ρ_τ^eq) for random protocols."""
        grid = TimeGrid(t_end=1.0, steps=50)
        for _ in range(10):
            stats = two_point_work(make_protocol(3, grid, n_terms=2), beta=1.3)
            assert stats.entropy_production == pytest.approx(stats.relative_entropy, abs=1e-8)

    def test_clausius_inequality(self, make_protocol):
        """⟨Σ⟩ ≥ (8/π²) L²(ρ_τ, ρ_τ^eq)."""
        grid = TimeGrid(t_end=1.0, steps=50)
        for _ in range(10):
            sigma, bound = clausius_geometric_check(two_point_work(make_protocol(2, grid, n_terms=2), beta=2.0))
            assert sigma >= bound - 1e-10

    def test_jarzynski(self, make_protocol):
        """⟨e^(−βW)⟩ = e^(−βΔF) over the work distribution."""
        grid = TimeGrid(t_end=1.0, steps=50)
        stats = two_point_work(make_protocol(3, grid), beta=0.9)
        average = sum(p * math.exp(-stats.beta * w) for w, p in stats.work_distribution)
        assert average == pytest.approx(math.exp(-stats.beta * stats.delta_f), rel=1e-10)
        assert sum(p for _, p in stats.work_distribution) == pytest.approx(1.0)

    def test_sudden_quench(self):
        """Quenching σ_z to σ_x from a Gibbs state costs ⟨W⟩ = tanh β at no free-energy change."""
        stats = two_point_work(sudden_quench(), beta=1.0)
        assert stats.mean_work == pytest.approx(math.tanh(1.0), abs=1e-10)
        assert stats.delta_f == pytest.approx(0.0, abs=1e-12)
        assert stats.entropy_production == pytest.approx(math.tanh(1.0), abs=1e-10)
        assert stats.relative_entropy == pytest.approx(stats.entropy_production, abs=1e-8)

    def test_distribution_sorted(self, make_protocol):
        """Work values come in ascending order."""
        stats = two_point_work(make_protocol(2, TimeGrid(t_end=1.0, steps=10)), beta=1.0)
        works = [w for w, _ in stats.work_distribution]
        assert works == sorted(works)

    def test_beta_positive(self, make_protocol):
        """Only positive temperatures are supported."""
        with pytest.raises(InvalidInputError):
            two_point_work(make_protocol(2, TimeGrid(t_end=1.0, steps=10)), beta=0.0)


class TestRates:
    """Entropy-production and information rates."""

    def test_sigma_max_matches_unified_time(self):
        """σ_max = 2β⟨H_τ⟩/τ_unified at L = π/2."""
        h = HermitianOperator(matrix=np.diag([0.0, 1.0]))
        psi = Ket.of(1, 1)
        tau_unified = mt_ml_unified(h, psi)[2].tau_qsl
        rate = sigma_max(0.8, 0.3, (0.5, 0.5), math.pi / 2)
        assert rate == pytest.approx(2 * 0.8 * 0.3 / tau_unified)

    def test_sigma_max_linear_in_beta(self):
        """Doubling β doubles the rate."""
        assert sigma_max(2.0, 1.0, (0.4, 0.2), 0.7) == pytest.approx(2 * sigma_max(1.0, 1.0, (0.4, 0.2), 0.7))

    def test_sigma_max_degenerate_angle(self):
        """A vanishing angle leaves the rate unbounded; negative angles are invalid."""
        assert sigma_max(1.0, 1.0, (1.0, 1.0), 0.0) == math.inf
        with pytest.raises(InvalidInputError):
            sigma_max(1.0, 1.0, (1.0, 1.0), -0.1)

    def test_bekenstein(self):
        """π⟨H⟩/(ℏ ln 2) ≈ 4.5324 bits per unit time at unit energy."""
        assert bekenstein_rate(1.0) == pytest.approx(4.5324, abs=1e-4)

    def test_energy_per_bit_inverts_bekenstein(self):
        """The minimal energy for one bit per τ saturates the Bekenstein rate."""
        assert bekenstein_rate(energy_cost_per_bit(2.0)) == pytest.approx(0.5)

    def test_lloyd(self):
        """2⟨H⟩/(πℏ) operations per unit time."""
        assert lloyd_operation_rate(math.pi / 2) == pytest.approx(1.0)
        with pytest.raises(InvalidInputError):
            lloyd_operation_rate(-1.0)


class TestShortcutCost:
    """Cost of counterdiabatic driving."""

    @staticmethod
    def sweep(duration: float) -> ControlledHamiltonian:
        grid = TimeGrid(t_end=duration, steps=400)
        return landau_zener(1.0, linear_ramp(-5.0, 5.0, grid), grid)

    def test_total_cost_is_path_invariant(self):
        """Halving the duration doubles the peak cost and keeps its integral."""
        slow, fast = sta_cost_and_qsl(self.sweep(1.0), 0), sta_cost_and_qsl(self.sweep(0.5), 0)
        assert fast.total_cost == pytest.approx(slow.total_cost, rel=1e-10)
        assert fast.instantaneous_cost.max() == pytest.approx(2 * slow.instantaneous_cost.max(), rel=1e-10)

    def test_report_contents(self):
        """Energies follow the tracked level and the angle is a Bures angle."""
        report = sta_cost_and_qsl(self.sweep(1.0), 0)
        assert report.eigen_energies.shape == (401,)
        assert np.all(report.eigen_energies < 0)
        assert 0.0 <= report.angle <= math.pi / 2
        assert report.tau_qsl > 0.0
        assert report.duration == pytest.approx(1.0)

    def test_level_range(self):
        """The tracked level must exist."""
        with pytest.raises(InvalidInputError):
            sta_cost_and_qsl(self.sweep(1.0), 2)

    def test_level_crossing(self):
        """A closing gap has no shortcut."""
        grid = TimeGrid(t_end=1.0, steps=10)
        h0 = ControlledHamiltonian(grid=grid, drift=HermitianOperator(matrix=np.zeros((2, 2))),
                                   control_terms=(HermitianOperator(matrix=SIGMA_Z),),
                                   control_signals=linear_ramp(-1.0, 1.0, grid)[None, :])
        with pytest.raises(DegeneracyError):
            sta_cost_and_qsl(h0, 0)


class TestOttoEngine:
    """Superadiabatic Otto engine bounds."""

    def test_values(self):
        """Efficiency and power with and without the speed-limit replacement."""
        bounds = otto_engine_bounds(1.0, -3.0, 4.0, (0.5, 0.5), (math.pi / 4, math.pi / 4), (1.0, 1.0))
        assert bounds.tau_qsl == pytest.approx((math.pi / 2, math.pi / 2))
        assert bounds.eta_sa == pytest.approx(0.4)
        assert bounds.eta_qsl == pytest.approx(2.0 / 4.5)
        assert bounds.p_sa == pytest.approx(1.0)
        assert bounds.p_sa_qsl == pytest.approx(2.0 / math.pi)
        assert bounds.flags == []

    def test_free_strokes(self):
        """Strokes that move nowhere at no cost leave the power unbounded."""
        bounds = otto_engine_bounds(1.0, -3.0, 4.0, (0.0, 0.0), (0.0, 0.0), (1.0, 1.0))
        assert 'unbounded-power' in bounds.flags
        assert bounds.p_sa_qsl == math.inf

    def test_no_output(self):
        """An engine must deliver work."""
        with pytest.raises(InvalidInputError):
            otto_engine_bounds(3.0, -1.0, 4.0, (0.5, 0.5), (0.1, 0.1), (1.0, 1.0))


class TestHolevo:
    """Holevo information of projective measurements."""

    basis = [np.diag([1.0, 0.0]), np.diag([0.0, 1.0])]

    def test_maximally_mixed(self):
        """Rank-one projectors on the maximally mixed qubit extract ln 2."""
        chi, rate = holevo_learning(DensityMatrix.maximally_mixed(2), self.basis, tau_qsl=2.0, chi_change=math.log(2))
        assert chi == pytest.approx(math.log(2))
        assert rate == pytest.approx(math.log(2) / 2)

    def test_pure_state_teaches_nothing(self):
        """A pure state carries no Holevo information."""
        chi, _ = holevo_learning(DensityMatrix.pure(1, 1), self.basis, tau_qsl=1.0, chi_change=0.0)
        assert chi == pytest.approx(0.0, abs=1e-10)

    def test_coarse_measurement(self):
        """Projectors of higher rank leave the in-branch entropy."""
        rho = DensityMatrix.maximally_mixed(4)
        coarse = [np.diag([1.0, 1.0, 0.0, 0.0]), np.diag([0.0, 0.0, 1.0, 1.0])]
        chi, _ = holevo_learning(rho, coarse, tau_qsl=1.0, chi_change=0.0)
        assert chi == pytest.approx(math.log(2))

    def test_zero_time(self):
        """A vanishing speed-limit time gives an unbounded rate."""
        _, rate = holevo_learning(DensityMatrix.maximally_mixed(2), self.basis, tau_qsl=0.0, chi_change=0.1)
        assert rate == math.inf

    def test_projectors_validated(self):
        """Measurements must be complete sets of orthogonal projectors."""
        rho = DensityMatrix.maximally_mixed(2)
        with pytest.raises(InvalidInputError):
            holevo_learning(rho, [np.diag([1.0, 0.0])], tau_qsl=1.0, chi_change=0.0)
        with pytest.raises(InvalidInputError):
            holevo_learning(rho, [np.diag([2.0, 0.0]), np.diag([0.0, 1.0])], tau_qsl=1.0, chi_change=0.0)


class TestLandauer:
    """Heat-time product of bit erasure."""

    def test_saturation(self):
        """Q·τ = πℏ/2 saturates the limit, twice that does not."""
        assert landauer_product(math.pi / 2, 1.0).saturates
        report = landauer_product(math.pi, 1.0)
        assert not report.saturates
        assert report.quantum_limit == pytest.approx(math.pi / 2)

    def test_positive_inputs(self):
        """Heat and time must be positive."""
        with pytest.raises(InvalidInputError):
            landauer_product(0.0, 1.0)
