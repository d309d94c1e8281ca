"""Speed-limit experiments: static bounds, open-system sweeps, non-Hermitian and relativistic checks."""
import logging
import math
from typing import Literal, Optional

import numpy as np
import pydantic

from ..bounds import (first_orthogonality_time, fisher_qsl, geometric_qsl, mt_driven, mt_ml_unified, non_markovianity,
                      nonhermitian_qsl, purity_qsl, qfi_qsl, universal_qsl)
from ..dynamics import TimeGrid, evolve_lindblad, evolve_nonhermitian, evolve_unitary
from ..linalg import DensityMatrix, HermitianOperator, Ket, batched_schatten_norm
from ..models import (LMG_FIG3_COUPLING_SCALE, DiracLandauParams, JcParams, LmgParams, PtQubitParams,
                      dirac_landau_report, dirac_superluminal_field, jc_excited_state, jc_generator, jc_ground_state,
                      lmg_probe_trajectory, pt_qubit_hamiltonian, pt_qubit_period, pt_qubit_solution)
from ..sampling import random_ket, random_lindblad, random_protocol
from .base import BaseExperiment, ExperimentResult

logger = logging.getLogger(__name__)

VIOLATION_TOL = 1e-7


def _as_list(value):
    return [value] if isinstance(value, (int, float)) else value


def interior_maxima(samples: np.ndarray) -> int:
    """Number of strict interior local maxima of the finite part of a sampled curve."""
    v = samples[np.isfinite(samples)]
    if v.size < 3:
        return 0
    return int(np.sum((v[1:-1] > v[:-2]) & (v[1:-1] > v[2:])))


class BoundsExperiment(BaseExperiment):
    """
    Time-independent orthogonalization bounds for a state in a diagonal Hamiltonian.

    Args:
        energies: Spectrum of the Hamiltonian.
        amplitudes: Real amplitudes of the initial state in the energy basis; equal weights when omitted.
        samples: Resolution of the first-orthogonality scan.
    """
    tag = 'bounds'

    energies: list[float] = pydantic.Field(default=[0.0, 1.0], min_length=2)
    amplitudes: Optional[list[float]] = None
    samples: int = pydantic.Field(default=4096, ge=16)

    @pydantic.model_validator(mode='after')
    def _check_amplitudes(self):
        if self.amplitudes is not None:
            if len(self.amplitudes) != len(self.energies):
                raise ValueError("`amplitudes` must match `energies` in length")
            if not any(self.amplitudes):
                raise ValueError("`amplitudes` must not all vanish")
        return self

    def run(self) -> ExperimentResult:
        units = self.units
        hamiltonian = HermitianOperator(matrix=np.diag(self.energies).astype(complex))
        amps = self.amplitudes if self.amplitudes is not None else [1.0] * len(self.energies)
        psi = Ket.of(*amps)
        mt, ml, unified = mt_ml_unified(hamiltonian, psi, units=units)
        fisher = fisher_qsl(hamiltonian, psi, units=units)
        spread = max(self.energies) - min(self.energies)
        window = 4.0 * math.pi * units.hbar / spread if spread > 0 else 1.0
        t_orth = first_orthogonality_time(hamiltonian, psi, window, self.samples, units=units)
        self.notes.set('first_orthogonality_time', t_orth)
        rows = [(r.variant, r.tau_qsl) for r in (mt, ml, unified, fisher)]
        rows.append(('first-orthogonality', t_orth))
        return self.result(('variant', 'tau_qsl'), rows)


class JcSweepExperiment(BaseExperiment):
    """
    Operator-norm speed limit and non-Markovianity of the damped Jaynes-Cummings qubit over couplings.

    Args:
        gamma0: Coupling strengths γ0 to sweep.
        lam: Reservoir spectral width λ.
        tau: Evolution time.
        omega0: Qubit frequency.
        steps: Number of time steps.
        method: Lindblad integrator, 'exponential' or 'rk4'.
    """
    tag = 'jc-sweep'
    presets = ('jc-fig2',)

    gamma0: list[pydantic.PositiveFloat] = pydantic.Field(min_length=1)
    lam: pydantic.PositiveFloat = pydantic.Field(default=50.0, alias='lambda')
    tau: pydantic.PositiveFloat = 0.5
    omega0: pydantic.PositiveFloat = 1.0
    steps: int = pydantic.Field(default=20000, ge=2)
    method: Literal['exponential', 'rk4'] = 'exponential'

    @pydantic.field_validator('gamma0', mode='before')
    @classmethod
    def _listify(cls, value):
        return _as_list(value)

    def run(self) -> ExperimentResult:
        units = self.units
        grid = TimeGrid(t_end=self.tau, steps=self.steps)
        rows = []
        for g in sorted(self.gamma0):
            params = JcParams(omega0=self.omega0, gamma0=g, lam=self.lam)
            generator = jc_generator(params, grid, units=units)
            excited = evolve_lindblad(generator, jc_excited_state(), method=self.method, units=units)
            ground = evolve_lindblad(generator, jc_ground_state(), method=self.method, units=units)
            report = geometric_qsl(excited, 'op')
            measure = non_markovianity(excited, ground, pair_description='excited/ground')
            self.notes.set(f'v_qsl_maxima_gamma0_{g:g}', interior_maxima(report.v_samples))
            logger.info("gamma0=%g: tau_qsl=%.6g, N=%.6g", g, report.tau_qsl, measure.n_measure)
            rows.append((g, report.tau_qsl, measure.n_measure))
        return self.result(('gamma0', 'tau_qsl_op', 'n_measure'), rows)


class LmgScanExperiment(BaseExperiment):
    """
    Speed limit of a probe qubit coupled to an LMG bath across the order parameter λ.

    Args:
        n_spins: Number of bath spins.
        gamma: Probe-bath coupling.
        tau: Evolution time.
        lambda_min: Smallest λ of the scan.
        lambda_max: Largest λ of the scan.
        points: Number of λ values.
        steps: Number of time steps.
        coupling_scale: Extra prefactor on the probe-bath coupling; the default is the one of the
            `lmg-fig3` preset, 1 gives the bare coupling.
    """
    tag = 'lmg-scan'
    presets = ('lmg-fig3',)

    n_spins: int = pydantic.Field(default=100, ge=2)
    gamma: pydantic.NonNegativeFloat = 0.05
    tau: pydantic.PositiveFloat = 1.0
    lambda_min: pydantic.NonNegativeFloat = 0.0
    lambda_max: pydantic.NonNegativeFloat = 2.0
    points: int = pydantic.Field(default=41, ge=2)
    steps: int = pydantic.Field(default=400, ge=2)
    coupling_scale: float = LMG_FIG3_COUPLING_SCALE

    def run(self) -> ExperimentResult:
        if self.lambda_max <= self.lambda_min:
            raise ValueError("`lambda_max` must exceed `lambda_min`")
        grid = TimeGrid(t_end=self.tau, steps=self.steps)
        rows = []
        for lam in np.linspace(self.lambda_min, self.lambda_max, self.points):
            params = LmgParams(n_spins=self.n_spins, lam=float(lam), gamma=self.gamma, coupling_scale=self.coupling_scale)
            report = geometric_qsl(lmg_probe_trajectory(params, grid, units=self.units), 'op')
            logger.info("lambda=%.4f: tau_qsl=%.6g", lam, report.tau_qsl)
            rows.append((float(lam), report.tau_qsl))
        lam_min, tau_min = min(rows, key=lambda r: r[1])
        self.notes.set('lambda_at_minimum', lam_min)
        self.notes.set('tau_qsl_minimum', tau_min)
        return self.result(('lambda', 'tau_qsl'), rows)


class PtQubitExperiment(BaseExperiment):
    """
    PT-symmetric qubit: closed-form against propagated states and the non-Hermitian speed limit.

    Args:
        r: Diagonal magnitude.
        theta: Diagonal phase.
        s: Off-diagonal coupling.
        periods: Number of oscillation periods to propagate.
        steps: Number of time steps.
    """
    tag = 'pt-qubit'

    r: float = 1.0
    theta: float = math.pi / 6
    s: float = 2.0
    periods: pydantic.PositiveFloat = 1.0
    steps: int = pydantic.Field(default=2000, ge=2)

    def run(self) -> ExperimentResult:
        units = self.units
        params = PtQubitParams(r=self.r, theta=self.theta, s=self.s)
        h = pt_qubit_hamiltonian(params)
        grid = TimeGrid(t_end=self.periods * pt_qubit_period(params, units=units), steps=self.steps)
        traj, _ = evolve_nonhermitian(h, Ket.basis(2, 0), grid, units=units)
        exact = np.array([pt_qubit_solution(params, t, units=units).normalized().amplitudes for t in grid.times()])
        deviation = np.linalg.norm(traj.kets - exact, axis=1)
        report = nonhermitian_qsl(traj, h, units=units)
        self.notes.set('max_deviation', float(deviation.max()))
        self.notes.set('tau_qsl', report.tau_qsl)
        self.notes.set('min_margin', report.min_margin)
        self.notes.set('speed_exceeds_norm', 'speed-exceeds-norm' in report.flags)
        rows = [(float(t), float(dev), float(v), report.averaged_norm)
                for t, dev, v in zip(grid.times(), deviation, report.v_samples)]
        return self.result(('t', 'deviation', 'speed', 'norm_bound'), rows)


class DiracExperiment(BaseExperiment):
    """
    Mean speeds of Schrödinger and Dirac electrons in Landau levels over a range of fields.

    Args:
        b_min: Smallest magnetic field.
        b_max: Largest magnetic field.
        points: Number of log-spaced fields.
        mass: Particle mass.
        charge: Particle charge.
        light_speed: Speed of light.
    """
    tag = 'dirac'

    b_min: pydantic.PositiveFloat = 1e-2
    b_max: pydantic.PositiveFloat = 1e4
    points: int = pydantic.Field(default=25, ge=2)
    mass: pydantic.PositiveFloat = 1.0
    charge: pydantic.PositiveFloat = 1.0
    light_speed: pydantic.PositiveFloat = 1.0

    def run(self) -> ExperimentResult:
        if self.b_max <= self.b_min:
            raise ValueError("`b_max` must exceed `b_min`")
        rows = []
        base = DiracLandauParams(b_field=self.b_min, mass=self.mass, charge=self.charge, light_speed=self.light_speed)
        for b in np.geomspace(self.b_min, self.b_max, self.points):
            rep = dirac_landau_report(base.model_copy(update={'b_field': float(b)}), units=self.units)
            rows.append((float(b), rep.tau_s, rep.tau_d, rep.v_s, rep.v_d, int(rep.v_s_exceeds_c)))
        self.notes.set('superluminal_field', dirac_superluminal_field(base, units=self.units))
        return self.result(('b_field', 'tau_s', 'tau_d', 'v_s', 'v_d', 'v_s_exceeds_c'), rows)


class PropertySuiteExperiment(BaseExperiment):
    """
    Universality sweep: every bound must stay below the elapsed time on random driven and open systems.

    Args:
        instances: Number of random instances, alternating unitary and Lindblad dynamics.
        tau: Evolution time.
        steps: Number of time steps.
    """
    tag = 'property-suite'

    instances: int = pydantic.Field(default=1000, ge=1)
    tau: pydantic.PositiveFloat = 1.0
    steps: int = pydantic.Field(default=60, ge=2)

    def _slacks(self, k: int) -> dict[str, float]:
        units = self.units
        rng = np.random.default_rng([self.seed, k])
        d = int(rng.integers(2, 4))
        grid = TimeGrid(t_end=self.tau, steps=self.steps)
        psi0 = random_ket(rng, d)
        slacks = {}
        if k % 2 == 0:
            traj = evolve_unitary(random_protocol(rng, d, grid), psi0, units=units)
            slacks['MT-driven'] = self.tau - mt_driven(traj, units=units).tau_qsl
        else:
            generator = random_lindblad(rng, d, grid)
            traj = evolve_lindblad(generator, DensityMatrix.from_ket(psi0), units=units)
            for report in purity_qsl(generator, traj, units=units):
                slacks[report.variant] = self.tau - report.tau_qsl
        for norm in ('op', 'hs', 'tr'):
            slacks[f'geometric-{norm}'] = self.tau - geometric_qsl(traj, norm).tau_qsl
        slacks['QFI'] = self.tau - qfi_qsl(traj).tau_qsl
        for p in (1.0, 2.0, math.inf):
            slacks[f'universal-{p:g}'] = self.tau - universal_qsl(traj, p).tau_qsl
        op, hs, tr = (batched_schatten_norm(traj.generator_snapshots, p) for p in ('op', 'hs', 'tr'))
        slacks['norm-hierarchy'] = float(min(np.min(hs - op), np.min(tr - hs)))
        return slacks

    def run(self) -> ExperimentResult:
        totals: dict[str, list[float]] = {}
        for k in range(self.instances):
            for variant, slack in self._slacks(k).items():
                totals.setdefault(variant, []).append(slack)
        rows = []
        for variant in sorted(totals):
            values = np.array(totals[variant])
            violations = int(np.sum(values < -VIOLATION_TOL))
            if violations:
                logger.warning("%s: %d violations, worst slack %.3e", variant, violations, values.min())
            rows.append((variant, values.size, violations, float(values.min())))
        self.notes.set('total_violations', sum(r[2] for r in rows))
        return self.result(('variant', 'instances', 'violations', 'min_slack'), rows)
