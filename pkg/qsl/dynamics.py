import logging
from typing import Callable, Literal, Optional

import numpy as np
import pydantic
import scipy.integrate
import scipy.linalg

from .errors import DivergenceError, IntegrationError, InvalidInputError, StepSizeError
from .linalg import (
    POSITIVITY_REPAIR_TOL, SIGMA_X, SIGMA_Z, DensityMatrix, HermitianOperator, Ket,
    as_square, dagger, hermitian_part,
)
from .units import DEFAULT_UNITS, UnitSystem

logger = logging.getLogger(__name__)

TRACE_DRIFT_LIMIT = 1e-8
NORM_DRIFT_LIMIT = 1e-6
DIVERGENCE_LIMIT = 1e100
COARSE_GRID_WARNING = 0.5


class TimeGrid(pydantic.BaseModel):
    """
    Uniform grid of `steps` intervals between `t_start` and `t_end`.
    """
    model_config = pydantic.ConfigDict(frozen=True)

    t_start: float = 0.0
    t_end: float
    steps: int = pydantic.Field(ge=2)

    @pydantic.model_validator(mode='after')
    def _check_span(self):
        if not (np.isfinite(self.t_start) and np.isfinite(self.t_end)):
            raise ValueError("grid endpoints must be finite")
        if self.t_end <= self.t_start:
            raise ValueError(f"t_end ({self.t_end}) must exceed t_start ({self.t_start})")
        return self

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start

    @property
    def dt(self) -> float:
        return self.duration / self.steps

    def times(self) -> np.ndarray:
        return np.linspace(self.t_start, self.t_end, self.steps + 1)

    def midpoints(self) -> np.ndarray:
        return self.t_start + (np.arange(self.steps) + 0.5) * self.dt

    def half_times(self) -> np.ndarray:
        """Nodes and step midpoints interleaved, 2·steps + 1 samples."""
        return np.linspace(self.t_start, self.t_end, 2 * self.steps + 1)

    def with_duration(self, duration: float) -> "TimeGrid":
        return TimeGrid(t_start=self.t_start, t_end=self.t_start + duration, steps=self.steps)

    def with_steps(self, steps: int) -> "TimeGrid":
        return TimeGrid(t_start=self.t_start, t_end=self.t_end, steps=steps)


def _node_steps(steps: int) -> np.ndarray:
    """Step acting at each node: the step that starts there, the last step for the final node."""
    return np.minimum(np.arange(steps + 1), steps - 1)


class ControlledHamiltonian(pydantic.BaseModel):
    """
    H(t) = drift + Σ_k u_k(t)·H_k on a time grid.

    Control signals are piecewise constant: `control_signals[k, j]` is the value of u_k
    on step j. Optional `step_corrections` (steps, d, d) add a per-step Hermitian term,
    which is how counterdiabatic fields ride along.
    """
    model_config = pydantic.ConfigDict(arbitrary_types_allowed=True, frozen=True)

    grid: TimeGrid
    drift: HermitianOperator
    control_terms: tuple[HermitianOperator, ...] = ()
    control_signals: Optional[np.ndarray] = None
    step_corrections: Optional[np.ndarray] = None

    @pydantic.field_validator('control_signals', mode='before')
    @classmethod
    def _coerce_signals(cls, value):
        if value is None:
            return None
        signals = np.atleast_2d(np.asarray(value, dtype=float))
        if not np.all(np.isfinite(signals)):
            raise InvalidInputError("control signals have non-finite samples")
        return signals

    @pydantic.model_validator(mode='after')
    def _check_shapes(self):
        d = self.drift.dimension
        for k, term in enumerate(self.control_terms):
            if term.dimension != d:
                raise InvalidInputError(f"control term {k} has dimension {term.dimension}, drift has {d}")
        n_terms = len(self.control_terms)
        signals = self.control_signals
        if n_terms and signals is None:
            raise InvalidInputError("control terms given without control signals")
        if signals is not None and signals.shape != (n_terms, self.grid.steps):
            raise InvalidInputError(
                f"control signals have shape {signals.shape}, expected ({n_terms}, {self.grid.steps})")
        if self.step_corrections is not None and self.step_corrections.shape != (self.grid.steps, d, d):
            raise InvalidInputError(f"step corrections have shape {self.step_corrections.shape}")
        return self

    @classmethod
    def constant(cls, hamiltonian: HermitianOperator, grid: TimeGrid) -> "ControlledHamiltonian":
        return cls(grid=grid, drift=hamiltonian)

    @classmethod
    def from_functions(
            cls,
            grid: TimeGrid,
            drift: HermitianOperator,
            control_terms: list[HermitianOperator],
            functions: list[Callable[[np.ndarray], np.ndarray]]) -> "ControlledHamiltonian":
        """Sample each control function at the step midpoints."""
        mids = grid.midpoints()
        signals = np.array([np.broadcast_to(f(mids), mids.shape) for f in functions], dtype=float)
        return cls(grid=grid, drift=drift, control_terms=tuple(control_terms), control_signals=signals)

    @property
    def dimension(self) -> int:
        return self.drift.dimension

    @property
    def signals(self) -> np.ndarray:
        if self.control_signals is None:
            return np.zeros((0, self.grid.steps))
        return self.control_signals

    def with_signals(self, signals: np.ndarray) -> "ControlledHamiltonian":
        return ControlledHamiltonian(
            grid=self.grid, drift=self.drift, control_terms=self.control_terms,
            control_signals=signals, step_corrections=self.step_corrections)

    def with_grid(self, grid: TimeGrid) -> "ControlledHamiltonian":
        """Same samples on another grid with the same number of steps."""
        return ControlledHamiltonian(
            grid=grid, drift=self.drift, control_terms=self.control_terms,
            control_signals=self.control_signals, step_corrections=self.step_corrections)

    def with_corrections(self, corrections: Optional[np.ndarray]) -> "ControlledHamiltonian":
        return ControlledHamiltonian(
            grid=self.grid, drift=self.drift, control_terms=self.control_terms,
            control_signals=self.control_signals, step_corrections=corrections)

    def _combine(self, signals: np.ndarray, base: Optional[np.ndarray]) -> np.ndarray:
        n = signals.shape[1]
        out = np.broadcast_to(self.drift.matrix if base is None else base, (n,) + self.drift.matrix.shape).copy()
        if self.control_terms:
            terms = np.stack([t.matrix for t in self.control_terms])
            out += np.einsum('kn,kij->nij', signals, terms)
        return out

    def step_matrices(self) -> np.ndarray:
        """Hamiltonian on every step, shape (steps, d, d)."""
        out = self._combine(self.signals, None)
        if self.step_corrections is not None:
            out = out + self.step_corrections
        return out

    def node_signals(self) -> np.ndarray:
        """Signals interpolated onto the nodes (linear through the step midpoints)."""
        u = self.signals
        if u.shape[0] == 0:
            return np.zeros((0, self.grid.steps + 1))
        first = 1.5 * u[:, :1] - 0.5 * u[:, 1:2]
        last = 1.5 * u[:, -1:] - 0.5 * u[:, -2:-1]
        return np.concatenate([first, 0.5 * (u[:, :-1] + u[:, 1:]), last], axis=1)

    def node_signal_derivatives(self) -> np.ndarray:
        u = self.signals
        if u.shape[0] == 0:
            return np.zeros((0, self.grid.steps + 1))
        interior = np.diff(u, axis=1) / self.grid.dt
        return np.concatenate([interior[:, :1], interior, interior[:, -1:]], axis=1)

    def node_matrices(self) -> np.ndarray:
        """H(t) at every node of the grid, without step corrections."""
        return self._combine(self.node_signals(), None)

    def node_hamiltonians(self) -> np.ndarray:
        """
        Full Hamiltonian, step corrections included, on every node: linear through the step
        midpoints, so node snapshots follow a smooth drive to second order in dt.
        """
        s = self.step_matrices()
        first = 1.5 * s[:1] - 0.5 * s[1:2]
        last = 1.5 * s[-1:] - 0.5 * s[-2:-1]
        return np.concatenate([first, 0.5 * (s[:-1] + s[1:]), last])

    def node_derivatives(self) -> np.ndarray:
        """dH/dt at every node."""
        return self._combine(self.node_signal_derivatives(), np.zeros_like(self.drift.matrix))

    def node_matrix(self, node: int) -> np.ndarray:
        return self.node_matrices()[node]

    def node_derivative(self, node: int) -> np.ndarray:
        return self.node_derivatives()[node]

    def step_matrix(self, step: int) -> np.ndarray:
        return self.step_matrices()[step]


class RateSchedule(pydantic.BaseModel):
    """
    A rate γ(t) sampled on the half-step grid (2·steps + 1 values: nodes and midpoints).
    `integrals` optionally holds the exact per-step integrals ∫γ dt.
    """
    model_config = pydantic.ConfigDict(arbitrary_types_allowed=True, frozen=True)

    values: np.ndarray
    integrals: Optional[np.ndarray] = None

    @pydantic.field_validator('values', 'integrals', mode='before')
    @classmethod
    def _finite(cls, value):
        if value is None:
            return None
        arr = np.asarray(value, dtype=float)
        if arr.ndim != 1 or not np.all(np.isfinite(arr)):
            raise InvalidInputError("rate samples must be a finite vector")
        return arr

    @pydantic.model_validator(mode='after')
    def _check_lengths(self):
        if self.values.size < 5 or self.values.size % 2 == 0:
            raise InvalidInputError(f"rate schedule needs 2·steps + 1 samples, got {self.values.size}")
        if self.integrals is not None and self.integrals.size != self.steps:
            raise InvalidInputError(f"rate integrals need {self.steps} entries, got {self.integrals.size}")
        return self

    @classmethod
    def constant(cls, value: float, grid: TimeGrid) -> "RateSchedule":
        return cls(values=np.full(2 * grid.steps + 1, float(value)), integrals=np.full(grid.steps, value * grid.dt))

    @classmethod
    def from_function(
            cls,
            rate: Callable[[np.ndarray], np.ndarray],
            grid: TimeGrid,
            antiderivative: Optional[Callable[[np.ndarray], np.ndarray]] = None) -> "RateSchedule":
        values = np.broadcast_to(rate(grid.half_times()), (2 * grid.steps + 1,))
        integrals = None
        if antiderivative is not None:
            integrals = np.diff(antiderivative(grid.times()))
        return cls(values=values, integrals=integrals)

    @property
    def steps(self) -> int:
        return (self.values.size - 1) // 2

    def node_values(self) -> np.ndarray:
        return self.values[::2]

    def step_integrals(self, dt: float) -> np.ndarray:
        if self.integrals is not None:
            return self.integrals
        v = self.values
        return dt / 6.0 * (v[:-2:2] + 4.0 * v[1:-1:2] + v[2::2])


class Channel(pydantic.BaseModel):
    """A jump operator A_k with its (possibly negative) rate γ_k(t)."""
    model_config = pydantic.ConfigDict(arbitrary_types_allowed=True, frozen=True)

    jump: np.ndarray
    rate: RateSchedule

    @pydantic.field_validator('jump', mode='before')
    @classmethod
    def _square(cls, value):
        return as_square(value, "jump")


class LindbladGenerator(pydantic.BaseModel):
    """
    Time-local generator

        L_t(ρ) = −(i/ℏ)[H_t, ρ] − (i/2)λ_t[S, ρ] + Σ_k γ_k(t)(A_k ρ A_k† − ½{A_k†A_k, ρ})

    with S the optional Lamb-shift operator. Negative rates are accepted.
    """
    model_config = pydantic.ConfigDict(arbitrary_types_allowed=True, frozen=True)

    hamiltonian: ControlledHamiltonian
    channels: tuple[Channel, ...] = ()
    lamb_shift_operator: Optional[HermitianOperator] = None
    lamb_shift_rate: Optional[RateSchedule] = None

    @pydantic.model_validator(mode='after')
    def _check_consistency(self):
        d, steps = self.hamiltonian.dimension, self.hamiltonian.grid.steps
        for k, channel in enumerate(self.channels):
            if channel.jump.shape != (d, d):
                raise InvalidInputError(f"jump operator {k} has shape {channel.jump.shape}, expected ({d}, {d})")
            if channel.rate.steps != steps:
                raise InvalidInputError(f"rate {k} is sampled for {channel.rate.steps} steps, grid has {steps}")
        if (self.lamb_shift_operator is None) != (self.lamb_shift_rate is None):
            raise InvalidInputError("Lamb shift needs both an operator and a rate")
        if self.lamb_shift_operator is not None:
            if self.lamb_shift_operator.dimension != d:
                raise InvalidInputError("Lamb-shift operator dimension mismatch")
            if self.lamb_shift_rate.steps != steps:
                raise InvalidInputError("Lamb-shift rate sampled on the wrong grid")
        return self

    @classmethod
    def unitary(cls, hamiltonian: ControlledHamiltonian) -> "LindbladGenerator":
        return cls(hamiltonian=hamiltonian)

    @property
    def grid(self) -> TimeGrid:
        return self.hamiltonian.grid

    @property
    def dimension(self) -> int:
        return self.hamiltonian.dimension

    def _rate_table(self) -> np.ndarray:
        if not self.channels:
            return np.zeros((0, 2 * self.grid.steps + 1))
        return np.stack([c.rate.values for c in self.channels])

    def _lamb_values(self) -> np.ndarray:
        if self.lamb_shift_rate is None:
            return np.zeros(2 * self.grid.steps + 1)
        return self.lamb_shift_rate.values

    def _lamb_matrix(self) -> np.ndarray:
        if self.lamb_shift_operator is None:
            return np.zeros((self.dimension, self.dimension), dtype=complex)
        return self.lamb_shift_operator.matrix

    def node_rates(self) -> np.ndarray:
        """Channel rates at the nodes, shape (channels, steps + 1)."""
        return self._rate_table()[:, ::2]

    def apply(self, hamiltonian: np.ndarray, rates: np.ndarray, lamb: float, rho: np.ndarray, *,
              units: UnitSystem = DEFAULT_UNITS) -> np.ndarray:
        """Evaluate L(ρ) for a frozen Hamiltonian, channel rates and Lamb-shift rate."""
        h = hamiltonian / units.hbar + 0.5 * lamb * self._lamb_matrix()
        out = -1j * (h @ rho - rho @ h)
        for rate, channel in zip(rates, self.channels):
            a = channel.jump
            ada = dagger(a) @ a
            out += rate * (a @ rho @ dagger(a) - 0.5 * (ada @ rho + rho @ ada))
        return out

    def superoperator(self, hamiltonian: np.ndarray, rates: np.ndarray, lamb: float, *,
                      units: UnitSystem = DEFAULT_UNITS) -> np.ndarray:
        """
        Liouville-space matrix of the generator, row-major vectorization:
        vec(AρB) = (A ⊗ Bᵀ) vec(ρ).
        """
        d = self.dimension
        eye = np.eye(d)
        h = hamiltonian / units.hbar + 0.5 * lamb * self._lamb_matrix()
        out = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
        for rate, channel in zip(rates, self.channels):
            a = channel.jump
            ada = dagger(a) @ a
            out += rate * (np.kron(a, a.conj()) - 0.5 * np.kron(ada, eye) - 0.5 * np.kron(eye, ada.T))
        return out

    def node_superoperators(self, *, units: UnitSystem = DEFAULT_UNITS) -> np.ndarray:
        """Liouville-space generator at every node, shape (steps + 1, d², d²)."""
        h_nodes = self.hamiltonian.node_hamiltonians()
        rates = self.node_rates()
        lamb = self._lamb_values()[::2]
        return np.stack([self.superoperator(h_nodes[k], rates[:, k], lamb[k], units=units)
                         for k in range(self.grid.steps + 1)])


class Trajectory(pydantic.BaseModel):
    """
    States on every node of a grid, with optional generator snapshots L(ρ_t),
    Hamiltonian snapshots and state vectors for pure-state propagations.
    """
    model_config = pydantic.ConfigDict(arbitrary_types_allowed=True, frozen=True)

    grid: TimeGrid
    states: np.ndarray
    generator_snapshots: Optional[np.ndarray] = None
    hamiltonian_snapshots: Optional[np.ndarray] = None
    kets: Optional[np.ndarray] = None

    @pydantic.model_validator(mode='after')
    def _check_lengths(self):
        n = self.grid.steps + 1
        if self.states.ndim != 3 or self.states.shape[0] != n or self.states.shape[1] != self.states.shape[2]:
            raise InvalidInputError(f"states have shape {self.states.shape}, expected ({n}, d, d)")
        d = self.states.shape[1]
        for name in ('generator_snapshots', 'hamiltonian_snapshots'):
            snaps = getattr(self, name)
            if snaps is not None and snaps.shape != (n, d, d):
                raise InvalidInputError(f"{name} have shape {snaps.shape}, expected ({n}, {d}, {d})")
        if self.kets is not None and self.kets.shape != (n, d):
            raise InvalidInputError(f"kets have shape {self.kets.shape}, expected ({n}, {d})")
        return self

    @property
    def dimension(self) -> int:
        return self.states.shape[1]

    @property
    def duration(self) -> float:
        return self.grid.duration

    def times(self) -> np.ndarray:
        return self.grid.times()

    def state(self, node: int) -> DensityMatrix:
        return DensityMatrix(matrix=self.states[node])

    @property
    def initial(self) -> DensityMatrix:
        return self.state(0)

    @property
    def final(self) -> DensityMatrix:
        return self.state(-1)

    def derivatives(self) -> np.ndarray:
        """dρ/dt per node: the generator snapshots when recorded, central differences otherwise."""
        if self.generator_snapshots is not None:
            return self.generator_snapshots
        return np.gradient(self.states, self.grid.dt, axis=0)


def _certify_states(states: np.ndarray) -> np.ndarray:
    """Symmetrize a stack of states and repair the eigenvalue band, failing on the first bad node."""
    states = hermitian_part(states)
    trace = np.real(np.einsum('kii->k', states))
    bad = np.flatnonzero(np.abs(trace - 1.0) > TRACE_DRIFT_LIMIT)
    if bad.size:
        raise IntegrationError(f"trace drifted to {trace[bad[0]]!r} at node {bad[0]}", step=int(bad[0]))
    states = states / trace[:, None, None]
    evals, evecs = np.linalg.eigh(states)
    lowest = evals[:, 0]
    bad = np.flatnonzero(lowest < -POSITIVITY_REPAIR_TOL)
    if bad.size:
        raise IntegrationError(
            f"state lost positivity (eigenvalue {lowest[bad[0]]:.3e}) at node {bad[0]}", step=int(bad[0]))
    repair = np.flatnonzero(lowest < 0.0)
    if repair.size:
        logger.warning("Repairing negative eigenvalues on %d nodes (worst %.3e)", repair.size, lowest.min())
        fixed = np.clip(evals[repair], 0.0, None)
        fixed /= fixed.sum(axis=1, keepdims=True)
        states[repair] = hermitian_part(np.einsum('kij,kj,klj->kil', evecs[repair], fixed, evecs[repair].conj()))
    return states


def _warn_coarse(generator_norm: float, dt: float, label: str):
    if generator_norm * dt > COARSE_GRID_WARNING:
        logger.warning("Coarse grid for %s: ‖generator‖·dt = %.3g exceeds %.1f", label, generator_norm * dt, COARSE_GRID_WARNING)


def step_propagators(hamiltonian: ControlledHamiltonian, *, units: UnitSystem = DEFAULT_UNITS) -> np.ndarray:
    """Exact exp(−i H_j dt/ℏ) for every step j, shape (steps, d, d)."""
    evals, evecs = np.linalg.eigh(hamiltonian.step_matrices())
    phases = np.exp(-1j * evals * hamiltonian.grid.dt / units.hbar)
    return np.einsum('kij,kj,klj->kil', evecs, phases, evecs.conj())


def propagator(hamiltonian: ControlledHamiltonian, *, units: UnitSystem = DEFAULT_UNITS) -> np.ndarray:
    """Total propagator U(τ) of the piecewise-constant Hamiltonian."""
    u = np.eye(hamiltonian.dimension, dtype=complex)
    for step in step_propagators(hamiltonian, units=units):
        u = step @ u
    return u


def evolve_unitary(
        hamiltonian: ControlledHamiltonian,
        initial: Ket | DensityMatrix,
        *,
        units: UnitSystem = DEFAULT_UNITS) -> Trajectory:
    """
    Propagate a ket or density matrix with the exact step propagators.

    Args:
        hamiltonian: Piecewise-constant Hamiltonian, carrying its grid.
        initial: Initial state.
        units: Physical constants.

    Returns:
        A trajectory with Hamiltonian and generator snapshots; kets are recorded
        when the initial state is a ket.
    """
    if initial.dimension != hamiltonian.dimension:
        raise InvalidInputError(f"dimension mismatch: Hamiltonian {hamiltonian.dimension}, state {initial.dimension}")
    grid = hamiltonian.grid
    h_steps = hamiltonian.step_matrices()
    _warn_coarse(float(np.max(np.abs(np.linalg.eigvalsh(h_steps)))) / units.hbar, grid.dt, "unitary propagation")
    props = step_propagators(hamiltonian, units=units)
    n, d = grid.steps + 1, hamiltonian.dimension
    kets = None
    if isinstance(initial, Ket):
        kets = np.empty((n, d), dtype=complex)
        kets[0] = initial.normalized().amplitudes
        for j, u in enumerate(props):
            psi = u @ kets[j]
            kets[j + 1] = psi / np.linalg.norm(psi)
        states = np.einsum('ki,kj->kij', kets, kets.conj())
    else:
        states = np.empty((n, d, d), dtype=complex)
        states[0] = initial.matrix
        for j, u in enumerate(props):
            states[j + 1] = u @ states[j] @ dagger(u)
    states = _certify_states(states)
    h_nodes = hamiltonian.node_hamiltonians()
    generator = -1j / units.hbar * (h_nodes @ states - states @ h_nodes)
    return Trajectory(grid=grid, states=states, generator_snapshots=generator, hamiltonian_snapshots=h_nodes, kets=kets)


def evolve_lindblad(
        generator: LindbladGenerator,
        initial: DensityMatrix,
        *,
        method: Literal['rk4', 'exponential'] = 'rk4',
        units: UnitSystem = DEFAULT_UNITS) -> Trajectory:
    """
    Propagate a density matrix under a time-local Lindblad generator.

    Args:
        generator: The generator, carrying its grid.
        initial: Initial density matrix.
        method: 'rk4' integrates with classical fourth-order Runge-Kutta using rates at the
            nodes and midpoints; 'exponential' exponentiates the step-integrated generator,
            which is exact for commuting or piecewise-constant generators.
        units: Physical constants.

    Returns:
        A trajectory with generator and Hamiltonian snapshots.
    """
    if initial.dimension != generator.dimension:
        raise InvalidInputError(f"dimension mismatch: generator {generator.dimension}, state {initial.dimension}")
    grid = generator.grid
    dt, steps, d = grid.dt, grid.steps, generator.dimension
    h_steps = generator.hamiltonian.step_matrices()
    rates = generator._rate_table()
    lamb = generator._lamb_values()
    scale = float(np.max(np.abs(np.linalg.eigvalsh(h_steps)))) / units.hbar
    if generator.channels:
        jump_norms = np.array([np.linalg.norm(c.jump, 2) ** 2 for c in generator.channels])
        scale += float(np.max(np.abs(rates).max(axis=1) * jump_norms))
    _warn_coarse(scale, dt, "Lindblad propagation")

    states = np.empty((steps + 1, d, d), dtype=complex)
    states[0] = initial.matrix
    rho = initial.matrix
    max_drift = 0.0
    if method == 'exponential':
        integrals = np.stack([c.rate.step_integrals(dt) for c in generator.channels]) if generator.channels \
            else np.zeros((0, steps))
        lamb_integrals = generator.lamb_shift_rate.step_integrals(dt) if generator.lamb_shift_rate is not None \
            else np.zeros(steps)
    elif method != 'rk4':
        raise InvalidInputError(f"unknown integration method {method!r}")

    for j in range(steps):
        h = h_steps[j]
        if method == 'rk4':
            r0, rm, r1 = rates[:, 2 * j], rates[:, 2 * j + 1], rates[:, 2 * j + 2]
            l0, lm, l1 = lamb[2 * j], lamb[2 * j + 1], lamb[2 * j + 2]
            k1 = generator.apply(h, r0, l0, rho, units=units)
            k2 = generator.apply(h, rm, lm, rho + 0.5 * dt * k1, units=units)
            k3 = generator.apply(h, rm, lm, rho + 0.5 * dt * k2, units=units)
            k4 = generator.apply(h, r1, l1, rho + dt * k3, units=units)
            rho = rho + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        else:
            # linear in (H, rates, λ): the step integral of the generator
            step_generator = generator.superoperator(dt * h, integrals[:, j], lamb_integrals[j], units=units)
            rho = (scipy.linalg.expm(step_generator) @ rho.reshape(-1)).reshape(d, d)
        rho = hermitian_part(rho)
        if not np.all(np.isfinite(rho)):
            raise IntegrationError(f"non-finite state after step {j}", step=j)
        trace = float(np.trace(rho).real)
        drift = abs(trace - 1.0)
        if drift > TRACE_DRIFT_LIMIT:
            raise IntegrationError(f"trace drift {drift:.3e} at step {j}", step=j)
        max_drift = max(max_drift, drift)
        rho = rho / trace
        states[j + 1] = rho
    logger.debug("Lindblad propagation over %d steps, max trace drift %.3e", steps, max_drift)

    states = _certify_states(states)
    h_nodes = generator.hamiltonian.node_hamiltonians()
    node_rates, node_lamb = rates[:, ::2], lamb[::2]
    snapshots = np.stack([generator.apply(h_nodes[k], node_rates[:, k], node_lamb[k], states[k], units=units)
                          for k in range(steps + 1)])
    return Trajectory(grid=grid, states=states, generator_snapshots=snapshots, hamiltonian_snapshots=h_nodes)


def evolve_nonhermitian(
        hamiltonian,
        initial: Ket,
        grid: TimeGrid,
        *,
        units: UnitSystem = DEFAULT_UNITS) -> tuple[Trajectory, np.ndarray]:
    """
    Propagate iℏ ψ̇ = Hψ for a general (non-Hermitian) constant matrix H.

    Args:
        hamiltonian: Square complex matrix.
        initial: Initial ket; its raw norm is carried along.
        grid: Time grid.
        units: Physical constants.

    Returns:
        The trajectory of normalized states (with kets and the generator of the
        normalized dynamics) and the raw norms per node.
    """
    h = as_square(hamiltonian, "hamiltonian")
    if initial.dimension != h.shape[0]:
        raise InvalidInputError(f"dimension mismatch: Hamiltonian {h.shape[0]}, state {initial.dimension}")
    step = scipy.linalg.expm(-1j * h * grid.dt / units.hbar)
    n = grid.steps + 1
    raw = np.empty((n, h.shape[0]), dtype=complex)
    raw[0] = initial.amplitudes
    for j in range(grid.steps):
        raw[j + 1] = step @ raw[j]
        norm = np.linalg.norm(raw[j + 1])
        if not np.isfinite(norm) or norm > DIVERGENCE_LIMIT:
            raise DivergenceError(f"raw norm diverged ({norm:.3e}) at step {j}")
        if norm < 1.0 / DIVERGENCE_LIMIT:
            raise DivergenceError(f"raw norm collapsed ({norm:.3e}) at step {j}")
    norms = np.linalg.norm(raw, axis=1)
    kets = raw / norms[:, None]
    states = np.einsum('ki,kj->kij', kets, kets.conj())
    h_rho = np.einsum('ij,kjl->kil', h, states)
    flow = -1j / units.hbar * (h_rho - dagger(h_rho))
    generator = flow - np.einsum('k,kij->kij', np.einsum('kii->k', flow), states)
    traj = Trajectory(grid=grid, states=_certify_states(states), generator_snapshots=generator, kets=kets)
    return traj, norms


class NonlinearTwoModeParams(pydantic.BaseModel):
    """
    Two-mode nonlinear Schrödinger system

        iℏ ψ̇ = [(Γ(t) + κ(|ψ1|² − |ψ2|²))σ_z + ω(t)σ_x] ψ

    with piecewise-constant bias Γ and coupling ω sampled per step.
    """
    model_config = pydantic.ConfigDict(arbitrary_types_allowed=True, frozen=True)

    kappa: float
    bias_signal: np.ndarray
    coupling_signal: np.ndarray

    @pydantic.field_validator('bias_signal', 'coupling_signal', mode='before')
    @classmethod
    def _finite(cls, value):
        arr = np.asarray(value, dtype=float)
        if arr.ndim != 1 or not np.all(np.isfinite(arr)):
            raise InvalidInputError("two-mode signals must be finite vectors")
        return arr

    @pydantic.model_validator(mode='after')
    def _same_length(self):
        if self.bias_signal.shape != self.coupling_signal.shape:
            raise InvalidInputError("bias and coupling signals differ in length")
        if not np.isfinite(self.kappa):
            raise InvalidInputError("kappa must be finite")
        return self


def _nonlinear_rhs(a: complex, b: complex, bias: float, coupling: float, kappa: float, hbar: float):
    g = bias + kappa * ((a * a.conjugate()).real - (b * b.conjugate()).real)
    return -1j * (g * a + coupling * b) / hbar, -1j * (coupling * a - g * b) / hbar


def propagate_two_mode(
        kappa: float,
        bias: np.ndarray,
        coupling: np.ndarray,
        psi0: tuple[complex, complex],
        dt: float,
        hbar: float,
        record: bool = False):
    """
    RK4 for the two-mode system on plain complex scalars, renormalizing after every step.

    Returns:
        The final amplitudes, or the array of amplitudes on every node when `record` is set.
    """
    a, b = complex(psi0[0]), complex(psi0[1])
    path = [(a, b)] if record else None
    max_drift = 0.0
    for j in range(len(bias)):
        g, w = float(bias[j]), float(coupling[j])
        k1a, k1b = _nonlinear_rhs(a, b, g, w, kappa, hbar)
        k2a, k2b = _nonlinear_rhs(a + 0.5 * dt * k1a, b + 0.5 * dt * k1b, g, w, kappa, hbar)
        k3a, k3b = _nonlinear_rhs(a + 0.5 * dt * k2a, b + 0.5 * dt * k2b, g, w, kappa, hbar)
        k4a, k4b = _nonlinear_rhs(a + dt * k3a, b + dt * k3b, g, w, kappa, hbar)
        a = a + dt / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a)
        b = b + dt / 6.0 * (k1b + 2.0 * k2b + 2.0 * k3b + k4b)
        norm = (abs(a) ** 2 + abs(b) ** 2) ** 0.5
        drift = abs(norm - 1.0)
        if not drift <= NORM_DRIFT_LIMIT:
            raise StepSizeError(f"norm drift {drift:.3e} at step {j}; refine the grid", step=j)
        max_drift = max(max_drift, drift)
        a, b = a / norm, b / norm
        if record:
            path.append((a, b))
    logger.debug("Two-mode propagation over %d steps, max norm drift %.3e", len(bias), max_drift)
    if record:
        return np.array(path, dtype=complex)
    return a, b


def evolve_nonlinear_two_mode(
        params: NonlinearTwoModeParams,
        initial: Ket,
        grid: TimeGrid,
        *,
        units: UnitSystem = DEFAULT_UNITS) -> Trajectory:
    """
    Propagate the nonlinear two-mode system with fixed-step RK4.

    Returns:
        A trajectory with kets, the state-dependent effective Hamiltonian and the
        generator −(i/ℏ)[H_eff, ρ] on every node.
    """
    if initial.dimension != 2:
        raise InvalidInputError(f"two-mode dynamics needs a qubit state, got dimension {initial.dimension}")
    if not initial.is_normalized:
        raise InvalidInputError("two-mode initial state must be normalized")
    if params.bias_signal.size != grid.steps:
        raise InvalidInputError(f"signals have {params.bias_signal.size} samples, grid has {grid.steps} steps")
    kets = propagate_two_mode(params.kappa, params.bias_signal, params.coupling_signal,
                              tuple(initial.amplitudes), grid.dt, units.hbar, record=True)
    states = np.einsum('ki,kj->kij', kets, kets.conj())
    node = _node_steps(grid.steps)
    imbalance = np.abs(kets[:, 0]) ** 2 - np.abs(kets[:, 1]) ** 2
    g = params.bias_signal[node] + params.kappa * imbalance
    h_nodes = g[:, None, None] * SIGMA_Z + params.coupling_signal[node][:, None, None] * SIGMA_X
    generator = -1j / units.hbar * (h_nodes @ states - states @ h_nodes)
    return Trajectory(grid=grid, states=_certify_states(states), generator_snapshots=generator,
                      hamiltonian_snapshots=h_nodes, kets=kets)


def trapezoid_mean(samples: np.ndarray, grid: TimeGrid) -> float:
    """Time average (1/τ)∫f dt of node samples by the trapezoid rule."""
    return float(scipy.integrate.trapezoid(samples, dx=grid.dt) / grid.duration)
