"""
Minimal-time control: a monotonic gradient optimizer over piecewise-constant controls,
duration-threshold scans and the analytic minimal-time formulas.
"""
import logging
import math
from typing import Optional

import numpy as np
import pydantic

from .bounds import QslReport, bhattacharyya_bound
from .dynamics import ControlledHamiltonian, TimeGrid, propagate_two_mode, step_propagators
from .errors import InvalidInputError, NumericalFailureError
from .linalg import SIGMA_X, SIGMA_Z, HermitianOperator, Ket
from .models import landau_zener, linear_ramp, lz_ground_state
from .units import DEFAULT_UNITS, UnitSystem

logger = logging.getLogger(__name__)

MIN_IMPROVEMENT = 1e-12
STEP_GROWTH = 1.5
STEP_SHRINK = 0.5


class ControlProblem(pydantic.BaseModel):
    """
    State-to-state transfer under a controlled Hamiltonian.

    The Hamiltonian's control signals are the template for the initial guesses; its grid fixes
    the duration. With `nonlinear_kappa` set, the Hamiltonian must have the two-mode form
    ω0 σ_x + Γ(t) σ_z and propagation switches to the nonlinear two-mode equation.

    Args:
        hamiltonian: Controlled Hamiltonian with template signals.
        initial: Initial state.
        target: Target state.
        control_bounds: Optional (min, max) per control term.
        max_iterations: Sweep budget per initial guess.
        fidelity_goal: Convergence threshold on |⟨ψ_τ|ψ_T⟩|.
        seed: Seed of the initial-guess noise.
        nonlinear_kappa: Interaction strength κ of the two-mode equation.
        n_guesses: Number of randomized initial guesses.
        noise_fraction: Noise amplitude relative to the largest template sample.
        control_slices: Number of piecewise-constant control segments; one per step when unset.
    """
    model_config = pydantic.ConfigDict(arbitrary_types_allowed=True, frozen=True)

    hamiltonian: ControlledHamiltonian
    initial: Ket
    target: Ket
    control_bounds: Optional[tuple[tuple[float, float], ...]] = None
    max_iterations: int = pydantic.Field(default=5000, ge=1)
    fidelity_goal: float = pydantic.Field(default=0.99, gt=0.0, le=1.0)
    seed: int = 0
    nonlinear_kappa: Optional[float] = None
    n_guesses: int = pydantic.Field(default=20, ge=1)
    noise_fraction: float = pydantic.Field(default=0.1, ge=0.0)
    control_slices: Optional[int] = pydantic.Field(default=None, ge=1)

    @pydantic.model_validator(mode='after')
    def _check_problem(self):
        d = self.hamiltonian.dimension
        for name in ('initial', 'target'):
            ket = getattr(self, name)
            if ket.dimension != d:
                raise InvalidInputError(f"`{name}` has dimension {ket.dimension}, Hamiltonian has {d}")
            if not ket.is_normalized:
                raise InvalidInputError(f"`{name}` must be normalized")
        n_terms = len(self.hamiltonian.control_terms)
        if n_terms == 0:
            raise InvalidInputError("control problem has no control terms")
        if self.control_bounds is not None and len(self.control_bounds) != n_terms:
            raise InvalidInputError(f"{len(self.control_bounds)} control bounds for {n_terms} controls")
        if self.control_slices is not None and self.control_slices > self.hamiltonian.grid.steps:
            raise InvalidInputError("more control slices than grid steps")
        if self.nonlinear_kappa is not None:
            drift = self.hamiltonian.drift.matrix
            terms = self.hamiltonian.control_terms
            if d != 2 or n_terms != 1 or not np.allclose(terms[0].matrix, SIGMA_Z) \
                    or not np.allclose(drift, drift[0, 1].real * SIGMA_X):
                raise InvalidInputError("nonlinear problems need the two-mode form ω0 σ_x + Γ(t) σ_z")
        return self

    @property
    def duration(self) -> float:
        return self.hamiltonian.grid.duration

    def with_duration(self, duration: float) -> "ControlProblem":
        return self.model_copy(update={'hamiltonian': self.hamiltonian.with_grid(self.hamiltonian.grid.with_duration(duration))})


class OptimizationResult(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(arbitrary_types_allowed=True, frozen=True)

    final_fidelity: float = pydantic.Field(ge=0.0, le=1.0 + 1e-12)
    iterations_used: int
    fidelity_trace: np.ndarray
    optimized_signals: np.ndarray
    converged: bool
    guesses_used: int = 1


class ThresholdPoint(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(frozen=True)

    duration: float
    best_fidelity: float
    converged: bool
    iterations: int


class _Objective:
    """Fidelity and its gradient with respect to the slice parameters of one problem."""

    def __init__(self, problem: ControlProblem, units: UnitSystem):
        self.problem = problem
        self.hbar = units.hbar
        self.units = units
        steps = problem.hamiltonian.grid.steps
        slices = problem.control_slices or steps
        self.slice_index = np.repeat(np.arange(slices), [len(a) for a in np.array_split(np.arange(steps), slices)])
        self.slices = slices
        self.terms = np.stack([t.matrix for t in problem.hamiltonian.control_terms])
        self.psi0 = problem.initial.amplitudes
        self.target = problem.target.amplitudes
        bounds = problem.control_bounds
        self.lower = np.array([b[0] for b in bounds])[:, None] if bounds else None
        self.upper = np.array([b[1] for b in bounds])[:, None] if bounds else None
        self.evaluations = 0
        self.template = self.reduce(problem.hamiltonian.signals)
        self.amplitude = float(np.abs(self.template).max()) or 1.0

    def guess(self, index: int) -> np.ndarray:
        """Template slices plus seeded uniform noise of `noise_fraction` times the largest template sample."""
        rng = np.random.default_rng([self.problem.seed, index])
        noise = rng.uniform(-1.0, 1.0, size=self.template.shape)
        return self.template + self.problem.noise_fraction * self.amplitude * noise

    def expand(self, params: np.ndarray) -> np.ndarray:
        return params[:, self.slice_index]

    def reduce(self, signals: np.ndarray) -> np.ndarray:
        counts = np.bincount(self.slice_index)
        return np.stack([np.bincount(self.slice_index, weights=row) / counts for row in signals])

    def clip(self, params: np.ndarray) -> np.ndarray:
        if self.lower is None:
            return params
        return np.clip(params, self.lower, self.upper)

    def _overlap(self, params: np.ndarray) -> tuple[complex, Optional[np.ndarray], Optional[np.ndarray]]:
        self.evaluations += 1
        signals = self.expand(params)
        problem = self.problem
        if problem.nonlinear_kappa is not None:
            grid = problem.hamiltonian.grid
            coupling = np.full(grid.steps, problem.hamiltonian.drift.matrix[0, 1].real)
            a, b = propagate_two_mode(problem.nonlinear_kappa, signals[0], coupling, tuple(self.psi0), grid.dt, self.hbar)
            return complex(np.vdot(self.target, np.array([a, b]))), None, None
        props = step_propagators(problem.hamiltonian.with_signals(signals), units=self.units)
        n = len(props)
        psi = np.empty((n + 1, len(self.psi0)), dtype=complex)
        psi[0] = self.psi0
        for j in range(n):
            psi[j + 1] = props[j] @ psi[j]
        return complex(np.vdot(self.target, psi[-1])), psi, props

    def fidelity(self, params: np.ndarray) -> float:
        overlap, _, _ = self._overlap(params)
        return abs(overlap)

    def gradient(self, params: np.ndarray, fidelity: float) -> np.ndarray:
        """Gradient of |overlap|²."""
        if self.problem.nonlinear_kappa is not None:
            return self._finite_difference_gradient(params, fidelity)
        overlap, psi, props = self._overlap(params)
        n = len(props)
        chi = np.empty_like(psi)
        chi[n] = self.target
        for j in range(n - 1, -1, -1):
            chi[j] = props[j].conj().T @ chi[j + 1]
        dt = self.problem.hamiltonian.grid.dt
        # ⟨χ_{j+1}|H_k|ψ_{j+1}⟩ for every control term and step
        elements = np.einsum('ni,kij,nj->kn', chi[1:].conj(), self.terms, psi[1:])
        step_grad = 2.0 * dt / self.hbar * np.imag(np.conj(overlap) * elements)
        return np.stack([np.bincount(self.slice_index, weights=row, minlength=self.slices) for row in step_grad])

    def _finite_difference_gradient(self, params: np.ndarray, fidelity: float) -> np.ndarray:
        base = fidelity ** 2
        eps = 1e-6 * max(1.0, float(np.abs(params).max()))
        grad = np.empty_like(params)
        for idx in np.ndindex(params.shape):
            shifted = params.copy()
            shifted[idx] += eps
            grad[idx] = (self.fidelity(shifted) ** 2 - base) / eps
        return grad


def _ascend(objective: _Objective, params: np.ndarray, amplitude: float) -> tuple[np.ndarray, float, list[float], int]:
    problem = objective.problem
    params = objective.clip(params)
    fidelity = objective.fidelity(params)
    trace = [fidelity]
    if fidelity >= problem.fidelity_goal:
        return params, fidelity, trace, 0
    step = None
    grad = None
    iteration = 0
    for iteration in range(1, problem.max_iterations + 1):
        if grad is None:
            grad = objective.gradient(params, fidelity)
        gmax = float(np.abs(grad).max())
        if not np.isfinite(gmax):
            raise NumericalFailureError(f"non-finite gradient at iteration {iteration}")
        if gmax < 1e-14:
            break
        if step is None:
            step = 0.1 * amplitude / gmax
        trial = objective.clip(params + step * grad)
        trial_fidelity = objective.fidelity(trial)
        if not np.isfinite(trial_fidelity):
            raise NumericalFailureError(f"non-finite fidelity at iteration {iteration}")
        if trial_fidelity > fidelity:
            improvement = trial_fidelity - fidelity
            params, fidelity, grad = trial, trial_fidelity, None
            step *= STEP_GROWTH
            trace.append(fidelity)
            logger.debug("iteration %d accepted, fidelity %.12f", iteration, fidelity)
            if fidelity >= problem.fidelity_goal or improvement < MIN_IMPROVEMENT:
                break
        else:
            step *= STEP_SHRINK
            trace.append(fidelity)
            logger.debug("iteration %d rejected, step shrunk to %.3e", iteration, step)
            if step * gmax < 1e-14 * amplitude:
                break
    return params, fidelity, trace, iteration


def optimize_control(problem: ControlProblem, *, units: UnitSystem = DEFAULT_UNITS) -> OptimizationResult:
    """
    Krotov-style monotonic optimization of the transfer fidelity |⟨ψ_τ|ψ_T⟩|.

    Every guess starts from the template signals plus seeded uniform noise; each sweep takes a
    gradient step that is accepted only if the fidelity increases (the step then grows) and
    halved otherwise. Stops on the fidelity goal, the iteration budget or stagnation.

    Args:
        problem: The control problem.
        units: Physical constants.

    Returns:
        The best result over the guesses; stops at the first converged guess.
    """
    objective = _Objective(problem, units)
    best = None
    guesses = 0
    for guess in range(problem.n_guesses):
        guesses += 1
        params, fidelity, trace, iterations = _ascend(objective, objective.guess(guess), objective.amplitude)
        logger.info("guess %d: fidelity %.6f after %d iterations", guess, fidelity, iterations)
        if best is None or fidelity > best[1]:
            best = (params, fidelity, trace, iterations)
        if fidelity >= problem.fidelity_goal:
            break
    params, fidelity, trace, iterations = best
    return OptimizationResult(
        final_fidelity=min(fidelity, 1.0),
        iterations_used=iterations,
        fidelity_trace=np.asarray(trace),
        optimized_signals=objective.expand(params),
        converged=fidelity >= problem.fidelity_goal,
        guesses_used=guesses)


def threshold_scan(
        problem_template: ControlProblem,
        durations: list[float],
        *,
        units: UnitSystem = DEFAULT_UNITS) -> list[ThresholdPoint]:
    """
    Run `optimize_control` for each duration with identical budgets and seeds.

    Args:
        problem_template: Problem whose grid is rescaled to every duration.
        durations: At least two durations in ascending order.
        units: Physical constants.
    """
    if len(durations) < 2:
        raise InvalidInputError("a threshold scan needs at least two durations")
    if any(b <= a for a, b in zip(durations, durations[1:])):
        raise InvalidInputError("durations must be strictly ascending")
    points = []
    for duration in durations:
        result = optimize_control(problem_template.with_duration(duration), units=units)
        logger.info("duration %.6g: best fidelity %.6f, converged %s", duration, result.final_fidelity, result.converged)
        points.append(ThresholdPoint(duration=duration, best_fidelity=result.final_fidelity,
                                     converged=result.converged, iterations=result.iterations_used))
    return points


def empirical_threshold(points: list[ThresholdPoint]) -> Optional[float]:
    """Smallest converged duration, or None."""
    converged = [p.duration for p in points if p.converged]
    return min(converged) if converged else None


def hegerfeldt_tmin(initial: Ket, target: Ket, omega: float, *, units: UnitSystem = DEFAULT_UNITS) -> float:
    """Minimal qubit transfer time with fixed coupling ω: arccos(|f0 i0| + |f1 i1|)·ℏ/ω."""
    if not omega > 0:
        raise InvalidInputError(f"`omega` must be positive, got {omega}")
    if initial.dimension != 2 or target.dimension != 2:
        raise InvalidInputError("minimal-time formula applies to qubits")
    i, f = initial.normalized().amplitudes, target.normalized().amplitudes
    overlap = float(np.sum(np.abs(f) * np.abs(i)))
    return units.hbar * math.acos(min(1.0, overlap)) / omega


def lz_excited_tmin(gamma: float, omega: float, *, units: UnitSystem = DEFAULT_UNITS) -> tuple[float, float]:
    """Returns (ℏ/√(γ² + ω²), πℏ/(2ω)): the true minimal time and the naive orthogonalization bound."""
    if not (gamma >= 0 and omega > 0):
        raise InvalidInputError("`gamma` must be nonnegative and `omega` positive")
    return units.hbar / math.hypot(gamma, omega), math.pi * units.hbar / (2.0 * omega)


def nonlinear_tmin(theta_i: float, theta_f: float, omega0: float, *, units: UnitSystem = DEFAULT_UNITS) -> float:
    """Unconstrained-control minimal time |θ_i − θ_f|ℏ/(2ω0), independent of κ."""
    if not omega0 > 0:
        raise InvalidInputError(f"`omega0` must be positive, got {omega0}")
    return units.hbar * abs(theta_i - theta_f) / (2.0 * omega0)


def caneva_qsl(omega: float, gamma_end: float, *, units: UnitSystem = DEFAULT_UNITS) -> QslReport:
    """
    Speed limit for the Landau-Zener transfer between the ground states at Γ = ∓γ_end,
    with ΔH taken in the initial state under the transverse drift ω σ_x.
    """
    initial, target = lz_ground_state(omega, -gamma_end), lz_ground_state(omega, gamma_end)
    return bhattacharyya_bound(HermitianOperator(matrix=omega * SIGMA_X), initial, target, units=units)


def caneva_problem(
        duration: float,
        omega: float = 1.0,
        gamma_end: float = 500.0,
        steps: int = 200,
        guess_amplitude: Optional[float] = None,
        bound: Optional[float] = None,
        **kwargs) -> ControlProblem:
    """
    Landau-Zener transfer from the ground state at Γ = −γ_end to the one at Γ = +γ_end.

    The initial guess ramps Γ between the endpoint values ∓γ_end, so the optimizer's seeded
    noise is 0.1·γ_end; `guess_amplitude` narrows the ramp to ±`guess_amplitude` instead.
    Controls are clipped to ±`bound`, by default the larger of the ramp amplitude and 10ω.
    """
    grid = TimeGrid(t_end=duration, steps=steps)
    amp = gamma_end if guess_amplitude is None else guess_amplitude
    limit = max(amp, 10.0 * omega) if bound is None else bound
    return ControlProblem(
        hamiltonian=landau_zener(omega, linear_ramp(-amp, amp, grid), grid),
        initial=lz_ground_state(omega, -gamma_end),
        target=lz_ground_state(omega, gamma_end),
        control_bounds=((-limit, limit),),
        **kwargs)


def two_mode_problem(
        kappa: float,
        duration: float,
        delta_theta: float = math.pi / 2,
        omega0: float = 1.0,
        steps: int = 160,
        slices: int = 16,
        bound: float = 10.0,
        **kwargs) -> ControlProblem:
    """
    Nonlinear two-mode transfer from |0⟩ to cos(Δθ/2)|0⟩ − i sin(Δθ/2)|1⟩ with fixed coupling ω0
    and the bias Γ as control. The initial guess ramps Γ from −κ z_i to −κ z_f, z = cos θ the
    population imbalance of the endpoints.
    """
    grid = TimeGrid(t_end=duration, steps=steps)
    kwargs.setdefault('fidelity_goal', 0.9999)
    hamiltonian = ControlledHamiltonian(
        grid=grid,
        drift=HermitianOperator(matrix=omega0 * SIGMA_X),
        control_terms=(HermitianOperator(matrix=SIGMA_Z),),
        control_signals=linear_ramp(-kappa, -kappa * math.cos(delta_theta), grid)[None, :])
    return ControlProblem(
        hamiltonian=hamiltonian,
        initial=Ket.basis(2, 0),
        target=Ket(amplitudes=np.array([math.cos(delta_theta / 2), -1j * math.sin(delta_theta / 2)])),
        control_bounds=((-bound, bound),),
        nonlinear_kappa=kappa,
        control_slices=slices,
        **kwargs)
