"""
Thermodynamic and information-theoretic uses of speed limits: two-point-measurement work
statistics, entropy-production rates, shortcut-to-adiabaticity cost, superadiabatic Otto
engine bounds, learning rates and the Landauer product.
"""
import logging
import math
from typing import Optional

import numpy as np
import pydantic
from scipy.integrate import trapezoid
from scipy.special import logsumexp

from .dynamics import ControlledHamiltonian, propagator
from .errors import InvalidInputError
from .linalg import (DensityMatrix, HermitianOperator, as_square, bures_angle, dagger, hermitian_part,
                     relative_entropy, schatten_norm, thermal_state, von_neumann_entropy)
from .models import counterdiabatic_term
from .units import DEFAULT_UNITS, UnitSystem

logger = logging.getLogger(__name__)

PROBABILITY_TOL = 1e-10
PROJECTOR_TOL = 1e-10
SATURATION_TOL = 0.01


class WorkStatistics(pydantic.BaseModel):
    """
    Two-point-measurement statistics of a unitary protocol started in a Gibbs state.

    `work_distribution` lists (W, probability) pairs for every transition between the
    eigenbases of the initial and final Hamiltonians, sorted by W.
    """
    model_config = pydantic.ConfigDict(arbitrary_types_allowed=True, frozen=True)

    mean_work: float
    delta_f: float
    entropy_production: float
    beta: float
    work_distribution: list[tuple[float, float]]
    relative_entropy: float
    rho_tau: DensityMatrix
    rho_eq: DensityMatrix

    @pydantic.model_validator(mode='after')
    def _check_statistics(self):
        total = sum(p for _, p in self.work_distribution)
        if abs(total - 1.0) > PROBABILITY_TOL:
            raise InvalidInputError(f"work probabilities sum to {total:.15g}")
        if self.entropy_production < -PROBABILITY_TOL:
            raise InvalidInputError(f"negative entropy production {self.entropy_production:.3e}")
        return self


def two_point_work(hamiltonian: ControlledHamiltonian, beta: float, *, units: UnitSystem = DEFAULT_UNITS) -> WorkStatistics:
    """
    Work distribution, mean work, free-energy change and entropy production of a driven protocol.

    H_0 and H_τ are the Hamiltonians of the first and last steps; the system starts in
    exp(−βH_0)/Z_0 and evolves under the exact total propagator.

    Args:
        hamiltonian: The protocol.
        beta: Inverse temperature in inverse energy units.
        units: Physical constants.

    Returns:
        The statistics, including S(ρ_τ‖ρ_τ^eq) for comparison with ⟨Σ⟩ = β(⟨W⟩ − ΔF).
    """
    if not beta > 0:
        raise InvalidInputError(f"`beta` must be positive, got {beta}")
    h_steps = hamiltonian.step_matrices()
    e0, v0 = np.linalg.eigh(h_steps[0])
    e1, v1 = np.linalg.eigh(h_steps[-1])
    u = propagator(hamiltonian, units=units)

    log_z0 = float(logsumexp(-beta * e0))
    log_z1 = float(logsumexp(-beta * e1))
    p0 = np.exp(-beta * e0 - log_z0)
    transitions = np.abs(dagger(v1) @ u @ v0) ** 2      # [m, n] = |⟨m|U|n⟩|²
    joint = transitions * p0[None, :]
    work = e1[:, None] - e0[None, :]

    order = np.argsort(work, axis=None, kind='stable')
    distribution = [(float(w), float(p)) for w, p in zip(work.ravel()[order], joint.ravel()[order])]
    mean_work = float(np.sum(work * joint))
    delta_f = -(log_z1 - log_z0) / beta
    sigma = beta * (mean_work - delta_f)

    rho0 = (v0 * p0) @ dagger(v0)
    rho_tau = DensityMatrix(matrix=hermitian_part(u @ rho0 @ dagger(u)))
    rho_eq = thermal_state(HermitianOperator.from_matrix(h_steps[-1]), beta)
    s_rel = relative_entropy(rho_tau, rho_eq)
    logger.debug("two-point work: <W>=%.6g, dF=%.6g, <Sigma>=%.6g, S(rho||eq)=%.6g", mean_work, delta_f, sigma, s_rel)
    return WorkStatistics(
        mean_work=mean_work,
        delta_f=delta_f,
        entropy_production=sigma,
        beta=beta,
        work_distribution=distribution,
        relative_entropy=s_rel,
        rho_tau=rho_tau,
        rho_eq=rho_eq)


def clausius_geometric_check(
        stats: WorkStatistics,
        rho_tau: Optional[DensityMatrix] = None,
        rho_eq: Optional[DensityMatrix] = None) -> tuple[float, float]:
    """Both sides of ⟨Σ⟩ ≥ (8/π²)·L²(ρ_τ, ρ_τ^eq); the states default to those carried by `stats`."""
    rho_tau = stats.rho_tau if rho_tau is None else rho_tau
    rho_eq = stats.rho_eq if rho_eq is None else rho_eq
    angle = bures_angle(rho_tau, rho_eq)
    return stats.entropy_production, 8.0 / math.pi ** 2 * angle ** 2


def sigma_max(
        beta: float,
        h_tau_mean: float,
        moments0: tuple[float, float],
        angle: float,
        *,
        units: UnitSystem = DEFAULT_UNITS) -> float:
    """
    Maximal entropy-production rate 2β⟨H_τ⟩·min(ΔH_0/(ℏL), π⟨H_0⟩/(2ℏL²)).

    Args:
        beta: Inverse temperature.
        h_tau_mean: ⟨H_τ⟩.
        moments0: (⟨H_0⟩, ΔH_0).
        angle: Bures angle L between the initial and final states.
        units: Physical constants.

    Returns:
        The rate; `inf` when L = 0.
    """
    if angle < 0:
        raise InvalidInputError(f"`angle` must be nonnegative, got {angle}")
    if angle == 0:
        logger.warning("zero Bures angle: entropy-production rate is unbounded")
        return float('inf')
    mean0, std0 = moments0
    hbar = units.hbar
    return 2.0 * beta * h_tau_mean * min(std0 / (hbar * angle), math.pi * mean0 / (2.0 * hbar * angle ** 2))


def bekenstein_rate(h_mean: float, *, units: UnitSystem = DEFAULT_UNITS) -> float:
    """Upper bound π⟨H⟩/(ℏ ln 2) on the information rate, in bits per unit time."""
    if h_mean < 0:
        raise InvalidInputError(f"`h_mean` must be nonnegative, got {h_mean}")
    return math.pi * h_mean / (units.hbar * math.log(2.0))


def lloyd_operation_rate(h_mean: float, *, units: UnitSystem = DEFAULT_UNITS) -> float:
    """Maximal number of orthogonalizing logic operations per unit time, 2⟨H⟩/(πℏ)."""
    if h_mean < 0:
        raise InvalidInputError(f"`h_mean` must be nonnegative, got {h_mean}")
    return 2.0 * h_mean / (math.pi * units.hbar)


def energy_cost_per_bit(tau_qsl: float, *, units: UnitSystem = DEFAULT_UNITS) -> float:
    """Minimal mean energy ℏ ln 2/(π τ) needed to process one bit within time τ."""
    if not tau_qsl > 0:
        raise InvalidInputError(f"`tau_qsl` must be positive, got {tau_qsl}")
    return units.hbar * math.log(2.0) / (math.pi * tau_qsl)


class StaCostReport(pydantic.BaseModel):
    """Cost of transitionless driving along one eigenlevel and the matching speed limit."""
    model_config = pydantic.ConfigDict(arbitrary_types_allowed=True, frozen=True)

    instantaneous_cost: np.ndarray
    total_cost: float
    tau_qsl: float
    eigen_energies: np.ndarray
    angle: float
    duration: float

    @pydantic.model_validator(mode='after')
    def _check_cost(self):
        if np.any(self.instantaneous_cost < 0):
            raise InvalidInputError("instantaneous cost must be nonnegative")
        if self.instantaneous_cost.shape != self.eigen_energies.shape:
            raise InvalidInputError("cost and energy samples must share the node grid")
        return self


def sta_cost_and_qsl(h0: ControlledHamiltonian, level: int, *, units: UnitSystem = DEFAULT_UNITS) -> StaCostReport:
    """
    Instantaneous cost ‖H1(t)‖_tr of the counterdiabatic field, its integral and the
    cost-aware speed limit ℏτ sin²L_τ / (2∫√(ε_n² + (∂_tC)²) dt).

    Args:
        h0: The reference protocol.
        level: Index of the tracked eigenlevel, counted from the ground state.
        units: Physical constants.

    Raises:
        DegeneracyError: the instantaneous spectrum closes along the protocol.
    """
    d = h0.dimension
    if not 0 <= level < d:
        raise InvalidInputError(f"`level` must be in [0, {d}), got {level}")
    grid = h0.grid
    nodes = grid.steps + 1
    cost = np.empty(nodes)
    energies = np.empty(nodes)
    for k in range(nodes):
        h1 = counterdiabatic_term(h0, k, units=units)
        cost[k] = schatten_norm(h1.matrix, 'tr')
        energies[k] = np.linalg.eigvalsh(h0.node_matrix(k))[level]
    times = grid.times()
    total = float(trapezoid(cost, times))

    first = np.linalg.eigh(h0.node_matrix(0))[1][:, level]
    last = np.linalg.eigh(h0.node_matrix(nodes - 1))[1][:, level]
    angle = float(np.arccos(np.clip(abs(np.vdot(first, last)), 0.0, 1.0)))
    denominator = 2.0 * float(trapezoid(np.sqrt(energies ** 2 + cost ** 2), times))
    tau_qsl = units.hbar * grid.duration * math.sin(angle) ** 2 / denominator if denominator > 0 else 0.0
    return StaCostReport(
        instantaneous_cost=cost,
        total_cost=total,
        tau_qsl=tau_qsl,
        eigen_energies=energies,
        angle=angle,
        duration=grid.duration)


class OttoBounds(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(frozen=True)

    eta_sa: float
    eta_qsl: float
    p_sa: float
    p_sa_qsl: float
    tau_qsl: tuple[float, float]
    flags: list[str] = []


def otto_engine_bounds(
        w1: float,
        w3: float,
        q2: float,
        sa_means: tuple[float, float],
        angles: tuple[float, float],
        taus: tuple[float, float],
        *,
        units: UnitSystem = DEFAULT_UNITS) -> OttoBounds:
    """
    Efficiency and power of a superadiabatic Otto engine and their speed-limit bounds.

    Strokes 1 and 3 are the driven compression and expansion; thermalization strokes are
    taken as instantaneous, so the cycle time is τ_1 + τ_3.

    Args:
        w1: Mean work of the compression stroke.
        w3: Mean work of the expansion stroke.
        q2: Heat absorbed on the hot isochore.
        sa_means: ⟨H_SA⟩ of the counterdiabatic fields on strokes 1 and 3.
        angles: Bures angles covered by strokes 1 and 3.
        taus: Durations of strokes 1 and 3.
        units: Physical constants.
    """
    output = -(w1 + w3)
    if output <= 0:
        raise InvalidInputError(f"engine produces no work: -(W1 + W3) = {output}")
    if any(t <= 0 for t in taus) or any(a < 0 for a in angles) or any(h < 0 for h in sa_means):
        raise InvalidInputError("stroke durations must be positive, angles and driving costs nonnegative")
    flags = []
    hbar = units.hbar
    tau_qsl = []
    for angle, h_sa in zip(angles, sa_means):
        if h_sa == 0:
            tau_qsl.append(float('inf') if angle > 0 else 0.0)
        else:
            tau_qsl.append(hbar * angle / h_sa)
    qsl_time = tau_qsl[0] + tau_qsl[1]
    if qsl_time == 0:
        flags.append('unbounded-power')
        p_qsl, driving = float('inf'), float('inf')
    else:
        p_qsl = output / qsl_time
        driving = hbar * (angles[0] + angles[1]) / qsl_time
    eta_sa = output / (q2 + sa_means[0] + sa_means[1])
    eta_qsl = output / (q2 + driving) if math.isfinite(driving) else 0.0
    return OttoBounds(
        eta_sa=eta_sa,
        eta_qsl=eta_qsl,
        p_sa=output / (taus[0] + taus[1]),
        p_sa_qsl=p_qsl,
        tau_qsl=(tau_qsl[0], tau_qsl[1]),
        flags=flags)


def _check_projectors(projectors: list[np.ndarray], d: int) -> list[np.ndarray]:
    mats = [as_square(p, "projector") for p in projectors]
    if not mats:
        raise InvalidInputError("no projectors given")
    for k, p in enumerate(mats):
        if p.shape != (d, d):
            raise InvalidInputError(f"projector {k} has shape {p.shape}, state has dimension {d}")
        if np.abs(p @ p - p).max() > PROJECTOR_TOL or np.abs(p - dagger(p)).max() > PROJECTOR_TOL:
            raise InvalidInputError(f"matrix {k} is not an orthogonal projector")
    for i in range(len(mats)):
        for j in range(i + 1, len(mats)):
            if np.abs(mats[i] @ mats[j]).max() > PROJECTOR_TOL:
                raise InvalidInputError(f"projectors {i} and {j} are not orthogonal")
    if np.abs(sum(mats) - np.eye(d)).max() > PROJECTOR_TOL:
        raise InvalidInputError("projectors do not sum to the identity")
    return mats


def holevo_learning(
        rho: DensityMatrix,
        projectors: list[np.ndarray],
        tau_qsl: float,
        chi_change: float) -> tuple[float, float]:
    """
    Holevo information χ = S(ρ) − Σ_n 𝔭_n S(Π_nρΠ_n/𝔭_n) of a projective measurement, and the
    learning-rate bound Δχ/τ_QSL.

    Returns:
        (χ, rate bound); the rate is `inf` for a vanishing speed-limit time.
    """
    mats = _check_projectors(projectors, rho.dimension)
    chi = von_neumann_entropy(rho)
    for p in mats:
        branch = p @ rho.matrix @ p
        weight = float(np.real(np.trace(branch)))
        if weight > PROBABILITY_TOL:
            chi -= weight * von_neumann_entropy(DensityMatrix(matrix=hermitian_part(branch / weight)))
    rate = abs(chi_change) / tau_qsl if tau_qsl > 0 else float('inf')
    return chi, rate


class LandauerReport(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(frozen=True)

    product: float
    quantum_limit: float
    saturates: bool


def landauer_product(q_heat: float, tau: float, *, units: UnitSystem = DEFAULT_UNITS) -> LandauerReport:
    """Compare Q·τ of a bit erasure with the quantum limit πℏ/2; saturation means within 1%."""
    if not (q_heat > 0 and tau > 0):
        raise InvalidInputError("heat and time must be positive")
    product = q_heat * tau
    limit = math.pi * units.hbar / 2.0
    return LandauerReport(product=product, quantum_limit=limit, saturates=abs(product - limit) <= SATURATION_TOL * limit)
