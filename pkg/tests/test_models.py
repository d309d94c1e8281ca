import math

import numpy as np
import pytest
import scipy.linalg

from qsl.bounds import geometric_qsl
from qsl.dynamics import ControlledHamiltonian, TimeGrid, evolve_lindblad, evolve_unitary
from qsl.errors import DegeneracyError, DomainError, InvalidInputError, PoleError
from qsl.linalg import SIGMA_X, SIGMA_Z, DensityMatrix, HermitianOperator, Ket, schatten_norm
from qsl.models import (DiracLandauParams, JcParams, LmgParams, PtQubitParams, collective_operators,
                        counterdiabatic_hamiltonian, counterdiabatic_term, dirac_landau_report, dirac_superluminal_field, eigenstate_speed,
                        jc_amplitude, jc_decay_rate, jc_excited_state, jc_generator, jc_lamb_shift, jc_poles,
                        jc_population, landau_zener, linear_ramp, lmg_initial_state, lmg_probe_hamiltonian,
                        lmg_probe_trajectory, lz_ground_state, pt_qubit_hamiltonian, pt_qubit_period,
                        pt_qubit_solution, tracking_fidelity)


def lz_sweep(steps: int = 2000, span: float = 5.0) -> ControlledHamiltonian:
    grid = TimeGrid(t_end=1.0, steps=steps)
    return landau_zener(1.0, linear_ramp(-span, span, grid), grid)


class TestLandauZener:
    """Landau-Zener Hamiltonians and their ground states."""

    def test_ground_state(self):
        """The ground state of ωσ_x + Γσ_z is an eigenvector at −√(ω² + Γ²)."""
        psi = lz_ground_state(1.0, 2.0).amplitudes
        h = SIGMA_X + 2.0 * SIGMA_Z
        assert np.allclose(h @ psi, -math.sqrt(5.0) * psi)
        assert abs(psi[0].imag) < 1e-15 and psi[0].real > 0.0

    def test_signal_length_checked(self, grid):
        """The Γ signal needs one sample per step."""
        with pytest.raises(InvalidInputError):
            landau_zener(1.0, np.zeros(grid.steps + 1), grid)

    def test_omega_positive(self, grid):
        """A vanishing gap is not a Landau-Zener problem."""
        with pytest.raises(InvalidInputError):
            landau_zener(0.0, np.zeros(grid.steps), grid)


class TestJaynesCummings:
    """Damped Jaynes-Cummings qubit."""

    def test_initially_excited(self):
        """c_0 = 1 in every regime."""
        for g0 in (1.0, 200.0):
            assert jc_population(JcParams(gamma0=g0, lam=50.0), 0.0) == pytest.approx(1.0)

    def test_lambda_alias(self):
        """The spectral width is accepted as `lambda` or `lam`."""
        assert JcParams(gamma0=1.0, **{'lambda': 50.0}) == JcParams(gamma0=1.0, lam=50.0)

    def test_weak_coupling_is_monotone(self):
        """Without poles the excited population decays monotonically."""
        params = JcParams(gamma0=1.0, lam=50.0)
        t = np.linspace(0.0, 2.0, 400)
        assert not params.strong_coupling
        assert jc_poles(params, 2.0).size == 0
        assert np.all(np.diff(jc_population(params, t)) < 0)

    def test_strong_coupling_poles(self):
        """In strong coupling the amplitude vanishes at the rate's poles."""
        params = JcParams(gamma0=200.0, lam=50.0)
        poles = jc_poles(params, 0.5)
        assert params.strong_coupling
        assert poles.size > 0
        assert np.allclose(jc_amplitude(params, poles), 0.0, atol=1e-10)
        with pytest.raises(PoleError):
            jc_decay_rate(params, poles[0])

    def test_rate_is_log_derivative(self):
        """γ_t = −d ln|c_t|²/dt, checked by central differences."""
        params = JcParams(gamma0=3.0, lam=5.0)
        t, h = 0.4, 1e-6
        fd = -(math.log(jc_population(params, t + h)) - math.log(jc_population(params, t - h))) / (2 * h)
        assert jc_decay_rate(params, t) == pytest.approx(fd, rel=1e-6)

    def test_no_lamb_shift_on_resonance(self):
        """The resonant Lorentzian reservoir has no Lamb shift."""
        assert np.allclose(jc_lamb_shift(JcParams(gamma0=1.0, lam=50.0), np.linspace(0, 1, 11)), 0.0)

    @pytest.mark.parametrize('gamma0', [1.0, 200.0])
    def test_master_equation_reproduces_amplitude(self, gamma0):
        """The exponential integrator with exact rate integrals gives |c_t|², even across poles."""
        params = JcParams(gamma0=gamma0, lam=50.0)
        grid = TimeGrid(t_end=0.5, steps=997)
        traj = evolve_lindblad(jc_generator(params, grid), jc_excited_state(), method='exponential')
        assert np.allclose(traj.states[:, 0, 0].real, jc_population(params, grid.times()), atol=1e-9)

    @pytest.mark.parametrize('gamma0', [1.0, 200.0])
    def test_coherence_follows_signed_amplitude(self, gamma0):
        """From (|e⟩ + |g⟩)/√2 the coherence is ½ c_t e^{−iω0t}, changing sign wherever c_t does."""
        params = JcParams(gamma0=gamma0, lam=50.0)
        grid = TimeGrid(t_end=0.5, steps=997)
        rho0 = DensityMatrix.from_ket(Ket.of(1, 1))
        traj = evolve_lindblad(jc_generator(params, grid), rho0, method='exponential')
        t = grid.times()
        c = np.real(jc_amplitude(params, t))
        assert np.allclose(traj.states[:, 0, 1], 0.5 * c * np.exp(-1j * params.omega0 * t), atol=1e-9)
        assert np.any(c < 0.0) == params.strong_coupling

    def test_negative_time_rejected(self):
        """Rates exist only forward in time."""
        with pytest.raises(InvalidInputError):
            jc_decay_rate(JcParams(gamma0=1.0, lam=1.0), -0.1)


class TestLmg:
    """Probe qubit in a Lipkin-Meshkov-Glick bath."""

    def test_collective_algebra(self):
        """[J_+, J_−] = 2J_z on the Dicke states."""
        jz, jp, jm = collective_operators(6)
        assert np.allclose(jp @ jm - jm @ jp, 2 * jz)

    def test_excitation_number_conserved(self):
        """σ_z/2 + J_z commutes with the full Hamiltonian."""
        params = LmgParams(n_spins=8, lam=0.7, gamma=0.3)
        jz, _, _ = collective_operators(8)
        number = np.kron(SIGMA_Z / 2, np.eye(9)) + np.kron(np.eye(2), jz)
        h = lmg_probe_hamiltonian(params).matrix
        assert np.allclose(h @ number, number @ h)

    def test_uncoupled_probe_is_frozen(self):
        """With γ = 0 the probe stays in |↓⟩."""
        params = LmgParams(n_spins=10, lam=0.5, gamma=0.0)
        traj = lmg_probe_trajectory(params, TimeGrid(t_end=1.0, steps=20))
        assert np.allclose(traj.states, np.diag([0.0, 1.0]))
        assert np.allclose(traj.generator_snapshots, 0.0)

    def test_reduced_states_are_valid(self):
        """Reduced probe states have unit trace and the initial state is a product."""
        params = LmgParams(n_spins=20, lam=1.2, gamma=0.05)
        assert lmg_initial_state(params).is_normalized
        traj = lmg_probe_trajectory(params, TimeGrid(t_end=1.0, steps=50))
        assert np.allclose(np.einsum('kii->k', traj.states).real, 1.0)
        assert np.allclose(traj.states[0], np.diag([0.0, 1.0]))

    def test_probe_follows_two_level_rabi_formula(self):
        """|↓, m0⟩ only couples to |↑, m0 − 1⟩: the probe flips with the Rabi formula of that pair."""
        params = LmgParams(n_spins=100, lam=1.1, gamma=0.05)
        grid = TimeGrid(t_end=1.0, steps=4000)
        j = 50.0
        m = j - np.arange(101)
        energies = -(params.lam / 100) * (2 * (j * (j + 1) - m ** 2) - 100) - 2 * m
        m0 = m[np.argmin(energies)]
        assert m0 == 45.0
        detuning = 2.0 + energies[np.argmin(energies)] - energies[np.argmin(energies) + 1]
        coupling = 2 * params.gamma * math.sqrt(j * (j + 1) - m0 * (m0 - 1))
        omega = math.sqrt(detuning ** 2 + 4 * coupling ** 2)
        flipped = 4 * coupling ** 2 / omega ** 2 * np.sin(omega * grid.times() / 2) ** 2

        traj = lmg_probe_trajectory(params, grid)
        assert np.allclose(traj.states[:, 0, 0].real, flipped, atol=1e-10)
        # operator-norm bound on a diagonal trajectory: τ·p(τ)/∫|ṗ| dt
        expected = flipped[-1] / np.sum(np.abs(np.diff(flipped)))
        assert geometric_qsl(traj, 'op').tau_qsl == pytest.approx(expected, rel=1e-4)
        # with the bare coupling the first full Rabi cycle comes later than λ = 1.1
        assert 0.15 < expected < 0.18

    def test_spin_count_bounded(self):
        """The Dicke space is capped."""
        with pytest.raises(ValueError):
            LmgParams(n_spins=401, lam=1.0, gamma=0.1)


class TestPtQubit:
    """PT-symmetric qubit."""

    params = PtQubitParams(r=1.0, theta=math.pi / 6, s=2.0)

    def test_closed_form_matches_exponential(self):
        """The analytic solution equals e^(−iHt)(1, 0)ᵀ."""
        t = 0.7
        expected = scipy.linalg.expm(-1j * pt_qubit_hamiltonian(self.params) * t) @ np.array([1.0, 0.0])
        assert np.allclose(pt_qubit_solution(self.params, t).amplitudes, expected)

    def test_periodic_norm(self):
        """After one period the state returns to |0⟩ up to phase."""
        psi = pt_qubit_solution(self.params, pt_qubit_period(self.params)).amplitudes
        assert np.allclose(np.abs(psi), [1.0, 0.0], atol=1e-12)

    def test_broken_phase(self):
        """No closed form is offered once PT symmetry breaks."""
        with pytest.raises(DomainError):
            pt_qubit_solution(PtQubitParams(r=3.0, theta=math.pi / 2, s=1.0), 0.1)

    def test_zero_coupling_rejected(self):
        """s = 0 is not a PT qubit."""
        with pytest.raises(ValueError):
            PtQubitParams(r=1.0, theta=0.3, s=0.0)


class TestCounterdiabatic:
    """Transitionless driving."""

    def test_term_at_avoided_crossing(self):
        """At Γ = 0 the field has norm ℏΓ̇/(2ω) and equals ℏ times the eigenstate speed."""
        h0 = lz_sweep(steps=2000, span=5.0)
        node = h0.grid.steps // 2
        h1 = counterdiabatic_term(h0, node)
        assert schatten_norm(h1.matrix, 'op') == pytest.approx(5.0, rel=1e-9)
        assert eigenstate_speed(h0, node, 0) == pytest.approx(5.0, rel=1e-9)

    def test_tracking(self):
        """A fast sweep loses the ground state bare but keeps it with the counterdiabatic field."""
        h0 = lz_sweep()
        start = np.linalg.eigh(h0.node_matrix(0))[1][:, 0]
        end = np.linalg.eigh(h0.node_matrix(h0.grid.steps))[1][:, 0]
        bare = evolve_unitary(h0, Ket(amplitudes=start))
        assert abs(np.vdot(end, bare.kets[-1])) ** 2 < 0.9
        assert tracking_fidelity(h0) > 1.0 - 1e-4

    def test_tracks_eigenstate_at_every_node(self):
        """Under H0 + H1 the state stays on the instantaneous ground state to 1e-6 in fidelity throughout."""
        h0 = lz_sweep(steps=4000)
        nodes = h0.node_matrices()
        start = np.linalg.eigh(nodes[0])[1][:, 0]
        traj = evolve_unitary(counterdiabatic_hamiltonian(h0), Ket(amplitudes=start))
        ground = np.linalg.eigh(nodes)[1][:, :, 0]
        overlaps = np.abs(np.einsum('ni,ni->n', ground.conj(), traj.kets)) ** 2
        assert overlaps.min() >= 1.0 - 1e-6
        assert tracking_fidelity(h0) >= 1.0 - 1e-6

    def test_degenerate_spectrum(self):
        """A level crossing has no counterdiabatic field."""
        grid = TimeGrid(t_end=1.0, steps=10)
        h0 = ControlledHamiltonian(grid=grid, drift=HermitianOperator(matrix=np.zeros((2, 2))),
                                   control_terms=(HermitianOperator(matrix=SIGMA_Z),),
                                   control_signals=linear_ramp(-1.0, 1.0, grid)[None, :])
        with pytest.raises(DegeneracyError) as info:
            counterdiabatic_term(h0, 5)
        assert info.value.levels == (0, 1)


class TestDirac:
    """Landau levels of a Dirac electron versus a Schrödinger one."""

    def test_strong_field_speed(self):
        """The Dirac mean speed saturates at 0.240783 c."""
        report = dirac_landau_report(DiracLandauParams(b_field=1e8))
        assert report.v_d == pytest.approx(0.240783, rel=1e-5)
        assert report.v_s_exceeds_c

    def test_superluminal_threshold(self):
        """The Schrödinger speed crosses c at B = 2πm²c²/(eℏ)."""
        params = DiracLandauParams(b_field=1.0, mass=2.0)
        b_star = dirac_superluminal_field(params)
        assert b_star == pytest.approx(8 * math.pi)
        below = dirac_landau_report(params.model_copy(update={'b_field': 0.99 * b_star}))
        above = dirac_landau_report(params.model_copy(update={'b_field': 1.01 * b_star}))
        assert not below.v_s_exceeds_c
        assert above.v_s_exceeds_c
        assert above.v_d < 1.0

    def test_weak_field_agreement(self):
        """At weak fields Dirac and Schrödinger cyclotron times coincide."""
        report = dirac_landau_report(DiracLandauParams(b_field=1e-6))
        assert report.tau_d == pytest.approx(report.tau_s, rel=1e-5)
