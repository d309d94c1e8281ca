"""Minimal-time control experiments: the Landau-Zener threshold and the nonlinear two-mode scan."""
import logging
import math

import pydantic

from ..control import caneva_problem, caneva_qsl, empirical_threshold, nonlinear_tmin, threshold_scan, two_mode_problem
from ..models import lz_ground_state
from .base import BaseExperiment, ExperimentResult

logger = logging.getLogger(__name__)


def _as_list(value):
    return [value] if isinstance(value, (int, float)) else value


class LzThresholdExperiment(BaseExperiment):
    """
    Optimal-control threshold of the Landau-Zener transfer against its speed limit.

    Args:
        omega: Transverse coupling ω.
        gamma_end: Bias at the endpoints, fixing the initial and target ground states.
        durations: Transfer times to scan.
        steps: Number of piecewise-constant control steps.
        guess_amplitude: Narrows the initial-guess ramp to ±guess_amplitude; the ramp spans ∓gamma_end when omitted.
        bound: Control amplitude limit; the larger of the ramp amplitude and 10ω when omitted.
        max_iterations: Sweep budget per initial guess.
        n_guesses: Number of randomized initial guesses.
        fidelity_goal: Convergence threshold on the overlap modulus.
    """
    tag = 'lz-threshold'
    presets = ('lz-caneva',)

    omega: pydantic.PositiveFloat = 1.0
    gamma_end: pydantic.PositiveFloat = 500.0
    durations: list[pydantic.PositiveFloat] = pydantic.Field(
        default=[1.0, 1.2, 1.4, 1.5, 1.6, 1.7, 2.0], min_length=2)
    steps: int = pydantic.Field(default=200, ge=2)
    guess_amplitude: pydantic.PositiveFloat | None = None
    bound: pydantic.PositiveFloat | None = None
    max_iterations: int = pydantic.Field(default=5000, ge=1)
    n_guesses: int = pydantic.Field(default=20, ge=1)
    fidelity_goal: float = pydantic.Field(default=0.99, gt=0.0, le=1.0)

    @pydantic.field_validator('durations', mode='before')
    @classmethod
    def _listify(cls, value):
        return _as_list(value)

    def run(self) -> ExperimentResult:
        units = self.units
        durations = sorted(self.durations)
        template = caneva_problem(
            durations[0], omega=self.omega, gamma_end=self.gamma_end, steps=self.steps,
            guess_amplitude=self.guess_amplitude, bound=self.bound, max_iterations=self.max_iterations,
            n_guesses=self.n_guesses, fidelity_goal=self.fidelity_goal, seed=self.seed)
        qsl = caneva_qsl(self.omega, self.gamma_end, units=units)
        endpoint = abs(lz_ground_state(self.omega, -self.gamma_end).overlap(lz_ground_state(self.omega, self.gamma_end)))
        self.notes.set('tau_qsl', qsl.tau_qsl)
        self.notes.set('endpoint_fidelity', endpoint)
        points = threshold_scan(template, durations, units=units)
        self.notes.set('empirical_threshold', empirical_threshold(points))
        rows = [(p.duration, p.best_fidelity, int(p.converged), p.iterations) for p in points]
        return self.result(('duration', 'best_fidelity', 'converged', 'iterations'), rows)


class NonlinearTminExperiment(BaseExperiment):
    """
    Threshold scans of the nonlinear two-mode transfer for several interaction strengths.

    Args:
        kappa: Interaction strengths κ.
        delta_theta: Azimuth change of the transfer.
        omega0: Fixed coupling ω0.
        factors: Scan durations in units of the analytic minimal time.
        steps: Number of time steps.
        slices: Number of piecewise-constant control segments.
        bound: Control amplitude limit.
        max_iterations: Sweep budget per initial guess.
        n_guesses: Number of randomized initial guesses.
        fidelity_goal: Convergence threshold on the overlap modulus.
    """
    tag = 'nonlinear-tmin'

    kappa: list[float] = pydantic.Field(default=[0.0, 1.0, 5.0], min_length=1)
    delta_theta: pydantic.PositiveFloat = math.pi / 2
    omega0: pydantic.PositiveFloat = 1.0
    factors: list[pydantic.PositiveFloat] = pydantic.Field(default=[0.9, 0.95, 1.02, 1.05, 1.1], min_length=2)
    steps: int = pydantic.Field(default=160, ge=2)
    slices: int = pydantic.Field(default=16, ge=1)
    bound: pydantic.PositiveFloat = 10.0
    max_iterations: int = pydantic.Field(default=300, ge=1)
    n_guesses: int = pydantic.Field(default=4, ge=1)
    fidelity_goal: float = pydantic.Field(default=0.9999, gt=0.0, le=1.0)

    @pydantic.field_validator('kappa', 'factors', mode='before')
    @classmethod
    def _listify(cls, value):
        return _as_list(value)

    def run(self) -> ExperimentResult:
        units = self.units
        tmin = nonlinear_tmin(0.0, self.delta_theta, self.omega0, units=units)
        self.notes.set('tmin', tmin)
        durations = [f * tmin for f in sorted(self.factors)]
        rows = []
        for kappa in self.kappa:
            template = two_mode_problem(
                kappa, durations[0], delta_theta=self.delta_theta, omega0=self.omega0, steps=self.steps,
                slices=self.slices, bound=self.bound, max_iterations=self.max_iterations, n_guesses=self.n_guesses,
                fidelity_goal=self.fidelity_goal, seed=self.seed)
            points = threshold_scan(template, durations, units=units)
            threshold = empirical_threshold(points)
            self.notes.set(f'threshold_kappa_{kappa:g}', threshold)
            logger.info("kappa=%g: empirical threshold %s (analytic %.6g)", kappa, threshold, tmin)
            rows.extend((kappa, p.duration, p.best_fidelity, int(p.converged)) for p in points)
        return self.result(('kappa', 'duration', 'best_fidelity', 'converged'), rows)
