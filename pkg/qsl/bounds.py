import logging
import math
from typing import Literal, Optional

import numpy as np
import pydantic
import scipy.integrate
from scipy.optimize import brentq

from .dynamics import LindbladGenerator, Trajectory, trapezoid_mean
from .errors import InvalidInputError, PreconditionError
from .linalg import (
    NORM_ORDERS, DensityMatrix, HermitianOperator, Ket, NormOrder, State,
    as_square, batched_schatten_norm, bures_angle, dagger, energy_moments,
    pure_state_angles, schatten_norm, to_density, variances,
)
from .units import DEFAULT_UNITS, UnitSystem

logger = logging.getLogger(__name__)

ZERO_SPEED = 1e-12
ANGLE_SINGULARITY = 1e-6
QFI_SUPPORT_CUTOFF = 1e-12
ORTHOGONALITY_SCAN = 1e-4
ORTHOGONALITY_TOL = 1e-12
QUADRATURE_SLACK = 1e-4
DRIVEN_RESIDUAL_TOL = 1e-8

Variant = Literal[
    'MT', 'ML', 'unified', 'MT-driven', 'GLM', 'geometric-op', 'geometric-tr', 'geometric-hs',
    'QFI', 'purity-MT', 'purity-ML', 'universal-p', 'non-hermitian',
    'bhattacharyya', 'fisher', 'population',
]
BURES_VARIANTS = {'MT', 'ML', 'unified', 'MT-driven', 'GLM', 'geometric-op', 'geometric-tr', 'geometric-hs', 'QFI',
                  'non-hermitian', 'bhattacharyya', 'fisher'}


class QslReport(pydantic.BaseModel):
    """
    Outcome of one speed-limit evaluation.

    Args:
        variant: Which bound.
        tau_qsl: Lower bound on the evolution time; `inf` when nothing can evolve.
        angle: Distance travelled: a Bures angle, |Δ ln P| for purity bounds, a Schatten
            distance for the universal bounds.
        averaged_norm: The time-averaged speed (or energy scale) in the denominator.
        v_samples: Per-node speed-limit values where the variant defines them; NaN where unavailable.
        min_margin: Smallest v(t) − d(angle)/dt over interior nodes, when checked pointwise.
        flags: Advisory markers such as 'stationary' or 'trivial'.
    """
    model_config = pydantic.ConfigDict(arbitrary_types_allowed=True, frozen=True)

    variant: Variant
    tau_qsl: float
    angle: float
    averaged_norm: float
    v_samples: Optional[np.ndarray] = None
    min_margin: Optional[float] = None
    norm_order: Optional[float] = None
    flags: tuple[str, ...] = ()

    @pydantic.model_validator(mode='after')
    def _check_ranges(self):
        if not self.tau_qsl >= 0.0:
            raise ValueError(f"tau_qsl must be nonnegative, got {self.tau_qsl}")
        if self.variant in BURES_VARIANTS and not (0.0 <= self.angle <= math.pi / 2 + 1e-12):
            raise ValueError(f"Bures angle {self.angle} outside [0, π/2]")
        return self

    def row(self) -> dict:
        return {'variant': self.variant, 'tau_qsl': self.tau_qsl, 'angle': self.angle, 'averaged_norm': self.averaged_norm}


class NonMarkovianityReport(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(arbitrary_types_allowed=True, frozen=True)

    n_measure: float = pydantic.Field(ge=0.0)
    sigma_samples: np.ndarray
    pair_description: str = ""


def _ratio(angle: float, speed: float, flags: list[str]) -> float:
    """angle/speed with the 0/0 → 0 and x/0 → ∞ conventions."""
    if angle <= 0.0:
        if speed < ZERO_SPEED:
            flags.append('stationary')
        return 0.0
    if speed < ZERO_SPEED:
        flags.append('stationary')
        return math.inf
    return angle / speed


def _cap_at_duration(tau: float, duration: float, variant: str, flags: list[str]) -> float:
    """
    A trajectory bound evaluated with the trapezoid rule may overshoot the elapsed time by
    the quadrature error when the bound saturates; such overshoots are clamped to the
    duration. Larger excesses are returned unchanged for the caller to report.
    """
    if not math.isfinite(tau) or tau <= duration:
        return tau
    excess = (tau - duration) / duration
    if excess > QUADRATURE_SLACK:
        return tau
    logger.warning("%s bound exceeds the duration by %.3g (relative); clamping to τ = %.6g",
                   variant, excess, duration)
    flags.append('quadrature-clamped')
    return duration


def mt_time(std_dev: float, angle: float = math.pi / 2, *, units: UnitSystem = DEFAULT_UNITS) -> float:
    """Mandelstam-Tamm time ℏ·angle/ΔH."""
    return _ratio(units.hbar * angle, std_dev, [])


def ml_time(mean: float, angle: float = math.pi / 2, *, units: UnitSystem = DEFAULT_UNITS) -> float:
    """Margolus-Levitin time 2ℏ·angle²/(π⟨H⟩), which is πℏ/(2⟨H⟩) at angle π/2."""
    return _ratio(2.0 * units.hbar * angle * angle / math.pi, mean, [])


def _shifted_moments(hamiltonian: HermitianOperator, state: State, shift_ground: bool) -> tuple[float, float]:
    m = energy_moments(hamiltonian, state)
    mean = m.mean - m.ground_energy if shift_ground else m.mean
    return mean, m.std_dev


def mt_ml_unified(
        hamiltonian: HermitianOperator,
        state: State,
        shift_ground: bool = True,
        *,
        units: UnitSystem = DEFAULT_UNITS) -> tuple[QslReport, QslReport, QslReport]:
    """
    Orthogonalization-time bounds for a time-independent Hamiltonian.

    Args:
        hamiltonian: The Hamiltonian.
        state: Initial ket or density matrix.
        shift_ground: Measure the mean energy from the ground energy.
        units: Physical constants.

    Returns:
        (MT, ML, unified) reports; eigenstates yield `inf`.
    """
    mean, std = _shifted_moments(hamiltonian, state, shift_ground)
    angle = math.pi / 2
    mt_flags, ml_flags = [], []
    mt = _ratio(units.hbar * angle, std, mt_flags)
    ml = _ratio(2.0 * units.hbar * angle * angle / math.pi, mean, ml_flags)
    unified_flags = tuple(sorted(set(mt_flags + ml_flags)))
    return (
        QslReport(variant='MT', tau_qsl=mt, angle=angle, averaged_norm=std, flags=tuple(mt_flags)),
        QslReport(variant='ML', tau_qsl=ml, angle=angle, averaged_norm=mean, flags=tuple(ml_flags)),
        QslReport(variant='unified', tau_qsl=max(mt, ml), angle=angle, averaged_norm=max(std, mean), flags=unified_flags),
    )


def glm_bound(
        hamiltonian: HermitianOperator,
        rho0: State,
        rho_tau: State,
        shift_ground: bool = True,
        *,
        units: UnitSystem = DEFAULT_UNITS) -> QslReport:
    """
    Bound for reaching an arbitrary Bures angle L under a time-independent Hamiltonian:
    max(ℏL/ΔH, 2ℏL²/(π⟨H⟩)) with moments in ρ0.
    """
    angle = bures_angle(rho0, rho_tau)
    mean, std = _shifted_moments(hamiltonian, rho0, shift_ground)
    flags = []
    tau = max(_ratio(units.hbar * angle, std, flags), _ratio(2.0 * units.hbar * angle * angle / math.pi, mean, flags))
    return QslReport(variant='GLM', tau_qsl=tau, angle=angle, averaged_norm=std, flags=tuple(sorted(set(flags))))


def bhattacharyya_bound(
        hamiltonian: HermitianOperator,
        psi0: Ket,
        target: Ket,
        *,
        units: UnitSystem = DEFAULT_UNITS) -> QslReport:
    """Time to rotate ψ0 onto a target: ℏ·arccos|⟨ψ0|ψT⟩|/ΔH, ΔH taken in ψ0."""
    overlap = abs(psi0.normalized().overlap(target.normalized()))
    angle = math.acos(min(1.0, overlap))
    std = energy_moments(hamiltonian, psi0).std_dev
    flags = []
    tau = _ratio(units.hbar * angle, std, flags)
    return QslReport(variant='bhattacharyya', tau_qsl=tau, angle=angle, averaged_norm=std, flags=tuple(flags))


def _require_snapshots(traj: Trajectory, name: str) -> np.ndarray:
    snaps = getattr(traj, name)
    if snaps is None:
        raise PreconditionError(f"trajectory carries no {name.replace('_', ' ')}")
    return snaps


def _angles_from_initial(traj: Trajectory) -> np.ndarray:
    if traj.initial.is_pure():
        evals, evecs = np.linalg.eigh(traj.states[0])
        return pure_state_angles(evecs[:, -1], traj.states)
    rho0 = traj.initial
    return np.array([bures_angle(rho0, DensityMatrix(matrix=s)) for s in traj.states])


def _pointwise_margin(speeds: np.ndarray, distances: np.ndarray, dt: float, absolute: bool = False) -> float:
    """
    min over interior nodes of speed − d(distance)/dt, central differences, NaN speeds skipped.
    With `absolute` the rate enters as |d(distance)/dt|, for bounds on the magnitude of the change.
    """
    rates = np.gradient(distances, dt)[1:-1]
    if absolute:
        rates = np.abs(rates)
    margin = speeds[1:-1] - rates
    margin = margin[np.isfinite(margin)]
    return float(margin.min()) if margin.size else math.inf


def mt_driven(traj: Trajectory, *, units: UnitSystem = DEFAULT_UNITS) -> QslReport:
    """
    Mandelstam-Tamm bound for driven unitary dynamics: ℏL(ρ0, ρτ)/ΔE_τ with ΔE_τ the
    time-averaged instantaneous energy spread.

    Raises:
        InvalidInputError: The generator snapshots are not −i[H, ρ]/ℏ, i.e. the trajectory is not unitary.
    """
    h_nodes = _require_snapshots(traj, 'hamiltonian_snapshots')
    if traj.generator_snapshots is not None:
        unitary = -1j / units.hbar * (h_nodes @ traj.states - traj.states @ h_nodes)
        residual = float(np.max(np.abs(traj.generator_snapshots - unitary)))
        scale = max(float(np.max(np.abs(unitary))), 1.0)
        if residual > DRIVEN_RESIDUAL_TOL * scale:
            raise InvalidInputError(
                f"driven Mandelstam-Tamm bound needs unitary dynamics; generator deviates from −i[H, ρ]/ℏ by {residual:.3e}")
    spread = np.sqrt(variances(h_nodes, traj.states))
    energy = trapezoid_mean(spread, traj.grid)
    angle = bures_angle(traj.initial, traj.final)
    flags = []
    tau = _cap_at_duration(_ratio(units.hbar * angle, energy, flags), traj.duration, 'MT-driven', flags)
    return QslReport(variant='MT-driven', tau_qsl=tau, angle=angle, averaged_norm=energy,
                     v_samples=spread / units.hbar, flags=tuple(flags))


def geometric_qsl(traj: Trajectory, norm: Literal['op', 'tr', 'hs'] = 'op') -> QslReport:
    """
    Geometric bound sin²L(ρ0, ρτ)/Λ with Λ the time-averaged Schatten norm of the generator.

    Args:
        traj: Trajectory from a pure initial state, with generator snapshots.
        norm: 'op', 'tr' or 'hs'.

    Returns:
        The report; `v_samples` holds ‖L(ρ_t)‖/(2 cos L_t sin L_t) on interior nodes
        (NaN where L_t < 1e-6 or at the endpoints), `min_margin` the pointwise check.
    """
    if norm not in NORM_ORDERS:
        raise InvalidInputError(f"unknown norm {norm!r}, expected one of {sorted(NORM_ORDERS)}")
    if not traj.initial.is_pure():
        raise PreconditionError("geometric bounds need a pure initial state")
    snaps = _require_snapshots(traj, 'generator_snapshots')
    norms = batched_schatten_norm(snaps, norm)
    averaged = trapezoid_mean(norms, traj.grid)
    angles = _angles_from_initial(traj)
    angle = float(angles[-1])
    flags = []
    tau = _cap_at_duration(_ratio(math.sin(angle) ** 2, averaged, flags), traj.duration, f'geometric-{norm}', flags)

    denom = 2.0 * np.cos(angles) * np.sin(angles)
    v = np.full_like(norms, np.nan)
    ok = (angles >= ANGLE_SINGULARITY) & (denom > ZERO_SPEED)
    ok[0] = ok[-1] = False
    v[ok] = norms[ok] / denom[ok]
    if not ok.all():
        flags.append('endpoint-singular')
    margin = _pointwise_margin(v, angles, traj.grid.dt)
    return QslReport(variant=f'geometric-{norm}', tau_qsl=tau, angle=angle, averaged_norm=averaged,
                     v_samples=v, min_margin=margin, flags=tuple(flags))


def quantum_fisher_information(states: np.ndarray, derivatives: np.ndarray) -> np.ndarray:
    """
    F_Q = 2 Σ_{p_j + p_k > 1e-12} |⟨j|ρ̇|k⟩|²/(p_j + p_k) in the eigenbasis of each ρ.
    Inputs are stacks of shape (n, d, d).
    """
    p, vecs = np.linalg.eigh(states)
    rotated = np.einsum('kji,kjl,klm->kim', vecs.conj(), derivatives, vecs)
    total = p[:, :, None] + p[:, None, :]
    keep = total > QFI_SUPPORT_CUTOFF
    weights = np.where(keep, 1.0 / np.where(keep, total, 1.0), 0.0)
    return 2.0 * np.sum(np.abs(rotated) ** 2 * weights, axis=(1, 2))


def qfi_qsl(traj: Trajectory) -> QslReport:
    """
    Fisher-information bound L(ρ0, ρτ)/[(1/τ)∫½√F_Q dt], with ρ̇ from generator snapshots
    when recorded and central differences otherwise.
    """
    fisher = quantum_fisher_information(traj.states, traj.derivatives())
    speed = 0.5 * np.sqrt(np.clip(fisher, 0.0, None))
    averaged = trapezoid_mean(speed, traj.grid)
    angles = _angles_from_initial(traj)
    angle = float(angles[-1])
    flags = []
    tau = _cap_at_duration(_ratio(angle, averaged, flags), traj.duration, 'QFI', flags)
    margin = _pointwise_margin(speed, angles, traj.grid.dt)
    return QslReport(variant='QFI', tau_qsl=tau, angle=angle, averaged_norm=averaged,
                     v_samples=speed, min_margin=margin, flags=tuple(flags))


def static_fisher_information(hamiltonian: HermitianOperator, rho: State, *, units: UnitSystem = DEFAULT_UNITS) -> float:
    """F_Q = 2Σ(p_i − p_j)²/(p_i + p_j)|⟨i|H/ℏ|j⟩|² for the generator H of a time-independent evolution."""
    rho = to_density(rho)
    derivative = -1j / units.hbar * (hamiltonian.matrix @ rho.matrix - rho.matrix @ hamiltonian.matrix)
    return float(quantum_fisher_information(rho.matrix[None], derivative[None])[0])


def fisher_qsl(hamiltonian: HermitianOperator, rho: State, *, units: UnitSystem = DEFAULT_UNITS) -> QslReport:
    """Orthogonalization bound π/√F_Q, never below the Mandelstam-Tamm time."""
    fisher = static_fisher_information(hamiltonian, rho, units=units)
    speed = 0.5 * math.sqrt(max(fisher, 0.0))
    flags = []
    tau = _ratio(math.pi / 2, speed, flags)
    return QslReport(variant='fisher', tau_qsl=tau, angle=math.pi / 2, averaged_norm=speed, flags=tuple(flags))


def cramer_rao_variance(fisher: float, repetitions: int = 1) -> float:
    """Smallest achievable estimator variance 1/(M·F_Q)."""
    if repetitions < 1:
        raise InvalidInputError("`repetitions` must be at least 1")
    if fisher <= 0.0:
        return math.inf
    return 1.0 / (repetitions * fisher)


def purity_qsl(
        generator: LindbladGenerator,
        traj: Trajectory,
        *,
        units: UnitSystem = DEFAULT_UNITS) -> tuple[QslReport, QslReport]:
    """
    Purity-based bounds |ln P(τ) − ln P(0)| over two time-averaged rate scales:
    4Σ_k|γ_k(t)|‖A_k‖²_hs (MT type) and ‖𝓛_t + 𝓛_t†‖_op of the Liouville-space generator (ML type).

    Returns:
        (purity-MT, purity-ML); both zero and flagged 'trivial' when the purity is conserved.
    """
    purity = np.real(np.einsum('kij,kji->k', traj.states, traj.states))
    angle = abs(math.log(purity[-1]) - math.log(purity[0]))
    rates = generator.node_rates()
    if generator.channels:
        hs = np.array([np.linalg.norm(c.jump) ** 2 for c in generator.channels])
        mt_rate = 4.0 * np.sum(np.abs(rates) * hs[:, None], axis=0)
    else:
        mt_rate = np.zeros(traj.grid.steps + 1)
    sup = generator.node_superoperators(units=units)
    ml_rate = np.abs(np.linalg.eigvalsh(sup + dagger(sup))).max(axis=1)
    mt_avg, ml_avg = trapezoid_mean(mt_rate, traj.grid), trapezoid_mean(ml_rate, traj.grid)

    flags = ['trivial'] if angle < ZERO_SPEED else []
    tau_mt = 0.0 if flags else _ratio(angle, mt_avg, [])
    tau_ml = 0.0 if flags else _ratio(angle, ml_avg, [])
    ml_flags = list(flags)
    if tau_ml < tau_mt:
        logger.warning("Purity bound of ML type (%.6g) is looser than the MT type (%.6g)", tau_ml, tau_mt)
        ml_flags.append('ml-looser')
    return (
        QslReport(variant='purity-MT', tau_qsl=tau_mt, angle=angle, averaged_norm=mt_avg, flags=tuple(flags)),
        QslReport(variant='purity-ML', tau_qsl=tau_ml, angle=angle, averaged_norm=ml_avg, flags=tuple(ml_flags)),
    )


def universal_qsl(traj: Trajectory, p: NormOrder = 2.0) -> QslReport:
    """
    Schatten-p speed limit ℓ_p(ρ0, ρτ)/[(1/τ)∫‖L(ρ_t)‖_p dt], together with the pointwise check
    dℓ_p(ρ_t, ρ0)/dt ≤ ‖L(ρ_t)‖_p reported as `min_margin`.
    """
    order = float(NORM_ORDERS.get(p, p)) if isinstance(p, str) else float(p)
    snaps = _require_snapshots(traj, 'generator_snapshots')
    speeds = batched_schatten_norm(snaps, order)
    distances = batched_schatten_norm(traj.states - traj.states[0], order)
    averaged = trapezoid_mean(speeds, traj.grid)
    flags = [f'p={order:g}']
    tau = _cap_at_duration(_ratio(float(distances[-1]), averaged, flags), traj.duration, 'universal-p', flags)
    margin = _pointwise_margin(speeds, distances, traj.grid.dt)
    return QslReport(variant='universal-p', tau_qsl=tau, angle=float(distances[-1]), averaged_norm=averaged,
                     v_samples=speeds, min_margin=margin, norm_order=order, flags=tuple(flags))


def non_markovianity(traj1: Trajectory, traj2: Trajectory, pair_description: str = "") -> NonMarkovianityReport:
    """
    Information-backflow measure for one pair of initial states: σ(t) = dD/dt with D the trace
    distance, and N the integral of the positive part of σ.
    """
    if traj1.grid != traj2.grid:
        raise InvalidInputError("trajectories live on different grids")
    if traj1.dimension != traj2.dimension:
        raise InvalidInputError("trajectories have different dimensions")
    distance = 0.5 * batched_schatten_norm(traj1.states - traj2.states, 1.0)
    sigma = np.gradient(distance, traj1.grid.dt)
    measure = float(scipy.integrate.trapezoid(np.clip(sigma, 0.0, None), dx=traj1.grid.dt))
    return NonMarkovianityReport(n_measure=max(measure, 0.0), sigma_samples=sigma, pair_description=pair_description)


def population_qsl(traj: Trajectory, level: int = 0) -> QslReport:
    """
    Population form of the geometric operator-norm bound for an initially populated basis
    level: τ(1 − P_τ)/∫|Ṗ_t| dt, with Ṗ from the state differences.
    """
    populations = np.real(traj.states[:, level, level])
    if abs(populations[0] - 1.0) > 1e-8:
        raise PreconditionError(f"level {level} is not fully populated initially (P_0 = {populations[0]})")
    rate = np.abs(np.gradient(populations, traj.grid.dt))
    averaged = trapezoid_mean(rate, traj.grid)
    loss = 1.0 - float(populations[-1])
    flags = []
    tau = _cap_at_duration(_ratio(loss, averaged, flags), traj.duration, 'population', flags)
    angle = math.acos(math.sqrt(min(max(populations[-1], 0.0), 1.0)))
    return QslReport(variant='population', tau_qsl=tau, angle=angle, averaged_norm=averaged, flags=tuple(flags))


def non_markovian_qsl(tau: float, p_tau: float, n_measure: float) -> float:
    """τ(1 − P_τ)/(2N + 1 − P_τ): information backflow shortens the bound."""
    loss = 1.0 - p_tau
    denom = 2.0 * n_measure + loss
    if denom <= 0.0:
        return 0.0
    return tau * loss / denom


def nonhermitian_qsl(traj: Trajectory, hamiltonian, *, units: UnitSystem = DEFAULT_UNITS) -> QslReport:
    """
    Speed limit for non-Hermitian dynamics: |dL/dt| ≤ ‖𝓗‖_op/ℏ with 𝓗 = H − (tr H/N)I.

    `v_samples` holds the state speed √(⟨𝓗†𝓗⟩ − |⟨𝓗⟩|²)/ℏ in the normalized state, and
    `min_margin` the smallest gap between it and |dL/dt|.
    """
    h = as_square(hamiltonian, "hamiltonian")
    kets = traj.kets
    if kets is None:
        raise PreconditionError("non-Hermitian bound needs the normalized kets of the trajectory")
    n = h.shape[0]
    traceless = h - np.trace(h) / n * np.eye(n)
    op = schatten_norm(traceless, 'op') / units.hbar
    applied = kets @ traceless.T
    second = np.real(np.einsum('ki,ki->k', applied.conj(), applied))
    first = np.einsum('ki,ki->k', kets.conj(), applied)
    speed = np.sqrt(np.clip(second - np.abs(first) ** 2, 0.0, None)) / units.hbar
    overlaps = np.abs(kets @ kets[0].conj())
    angles = np.arccos(np.clip(overlaps, 0.0, 1.0))
    margin = _pointwise_margin(speed, angles, traj.grid.dt, absolute=True)
    rate_margin = float(np.min(op - speed))
    flags = []
    angle = float(angles[-1])
    tau = _ratio(angle, op, flags)
    if rate_margin < -1e-12 * max(op, 1.0):
        flags.append('speed-exceeds-norm')
    return QslReport(variant='non-hermitian', tau_qsl=tau, angle=angle, averaged_norm=op,
                     v_samples=speed, min_margin=margin, flags=tuple(flags))


def first_orthogonality_time(
        hamiltonian: HermitianOperator,
        psi0: Ket,
        t_max: float,
        samples: int = 4096,
        *,
        units: UnitSystem = DEFAULT_UNITS) -> float:
    """
    First time the survival probability |⟨ψ0|exp(−iHt/ℏ)|ψ0⟩|² vanishes on [0, t_max].

    Minima are located on a uniform sample grid and refined with Brent's method on dP/dt.

    Returns:
        The time, or NaN when the state never becomes orthogonal within `t_max`.
    """
    if not t_max > 0:
        raise InvalidInputError(f"`t_max` must be positive, got {t_max}")
    evals, evecs = hamiltonian.eigh()
    weights = np.abs(dagger(evecs) @ psi0.normalized().amplitudes) ** 2
    omegas = evals / units.hbar

    def amplitude(t: float) -> complex:
        return complex(np.sum(weights * np.exp(-1j * omegas * t)))

    def slope(t: float) -> float:
        phases = weights * np.exp(-1j * omegas * t)
        return 2.0 * float(np.real(np.conj(np.sum(phases)) * np.sum(-1j * omegas * phases)))

    times = np.linspace(0.0, t_max, samples + 1)
    survival = np.abs(np.exp(-1j * np.outer(times, omegas)) @ weights) ** 2
    for k in range(1, samples):
        if not (survival[k] <= survival[k - 1] and survival[k] <= survival[k + 1] and survival[k] < ORTHOGONALITY_SCAN):
            continue
        lo, hi = times[k - 1], times[k + 1]
        t = brentq(slope, lo, hi, xtol=1e-14) if slope(lo) < 0.0 < slope(hi) else times[k]
        if abs(amplitude(t)) ** 2 < ORTHOGONALITY_TOL:
            return float(t)
    return math.nan
