"""
Named physical models: Landau-Zener sweeps, the damped Jaynes-Cummings qubit, a probe
qubit coupled to a Lipkin-Meshkov-Glick bath, the PT-symmetric qubit, counterdiabatic
driving and the Dirac Landau-level speed calculator.
"""
import logging
import math

import numpy as np
import pydantic

from .dynamics import Channel, ControlledHamiltonian, LindbladGenerator, RateSchedule, TimeGrid, Trajectory, evolve_unitary
from .errors import DegeneracyError, DomainError, InvalidInputError, PoleError
from .linalg import SIGMA_X, SIGMA_Z, DensityMatrix, HermitianOperator, Ket, dagger, hermitian_part
from .units import DEFAULT_UNITS, UnitSystem

logger = logging.getLogger(__name__)

POLE_TOLERANCE = 1e-9
DEGENERACY_GAP = 1e-8
MAX_LMG_SPINS = 400

# qubit basis order is (excited, ground)
SIGMA_MINUS = np.array([[0, 0], [1, 0]], dtype=complex)
SIGMA_PLUS = dagger(SIGMA_MINUS)
EXCITED_PROJECTOR = SIGMA_PLUS @ SIGMA_MINUS

# probe-bath prefactor of the LMG figure preset: the first full probe Rabi cycle, where the
# speed-limit time vanishes, falls at λ ≤ 1.1 for N = 100 (at λ ≈ 1.19 with a unit prefactor)
LMG_FIG3_COUPLING_SCALE = 1.2

PRESETS: dict[str, dict[str, float]] = {
    'jc-fig2': {'lambda': 50.0, 'tau': 0.5, 'omega0': 1.0},
    'lmg-fig3': {'n_spins': 100, 'gamma': 0.05, 'tau': 1.0, 'coupling_scale': LMG_FIG3_COUPLING_SCALE},
    'lz-caneva': {'omega': 1.0, 'gamma_end': 500.0},
}


# Landau-Zener

def landau_zener(omega: float, gamma_signal, grid: TimeGrid) -> ControlledHamiltonian:
    """
    H(t) = ω σ_x + Γ(t) σ_z with drift ω σ_x and a single σ_z control.

    Args:
        omega: Fixed transverse coupling, positive.
        gamma_signal: Γ sampled on each step of `grid`.
        grid: Time grid.
    """
    if not omega > 0:
        raise InvalidInputError(f"`omega` must be positive, got {omega}")
    signal = np.asarray(gamma_signal, dtype=float)
    if signal.shape != (grid.steps,):
        raise InvalidInputError(f"Γ signal has {signal.size} samples, grid has {grid.steps} steps")
    return ControlledHamiltonian(
        grid=grid,
        drift=HermitianOperator(matrix=omega * SIGMA_X),
        control_terms=(HermitianOperator(matrix=SIGMA_Z),),
        control_signals=signal[None, :])


def lz_ground_state(omega: float, gamma: float) -> Ket:
    """Ground state of ω σ_x + Γ σ_z, phase fixed so the first nonzero component is real positive."""
    _, vecs = np.linalg.eigh(omega * SIGMA_X + gamma * SIGMA_Z)
    v = vecs[:, 0]
    pivot = v[np.argmax(np.abs(v) > 1e-12)]
    return Ket(amplitudes=v * abs(pivot) / pivot)


def linear_ramp(start: float, end: float, grid: TimeGrid) -> np.ndarray:
    """Linear interpolation from `start` to `end`, sampled at the step midpoints."""
    s = (grid.midpoints() - grid.t_start) / grid.duration
    return start + (end - start) * s


# damped Jaynes-Cummings

class JcParams(pydantic.BaseModel):
    """
    Qubit resonantly coupled to a Lorentzian reservoir.

    Args:
        omega0: Qubit frequency ω0.
        gamma0: Coupling strength γ0.
        lam: Spectral width λ (alias `lambda`).
    """
    model_config = pydantic.ConfigDict(frozen=True, populate_by_name=True)

    omega0: pydantic.PositiveFloat = 1.0
    gamma0: pydantic.PositiveFloat
    lam: pydantic.PositiveFloat = pydantic.Field(alias='lambda')

    @property
    def strong_coupling(self) -> bool:
        return self.lam < 2.0 * self.gamma0


def _jc_components(params: JcParams, t) -> tuple[np.ndarray, np.ndarray]:
    """
    Returns (c_t, s_t) with c_t the excited-state amplitude and
    s_t = e^{−λt/2} sinh(dt/2)/d, continued analytically for imaginary d.
    """
    t = np.asarray(t, dtype=float)
    lam, g0 = params.lam, params.gamma0
    d2 = lam * lam - 2.0 * g0 * lam
    if d2 > 0.0:
        d = math.sqrt(d2)
        grow, shrink = np.exp(0.5 * (d - lam) * t), np.exp(-0.5 * (d + lam) * t)
        cosh_part = 0.5 * (grow + shrink)
        s = 0.5 * (grow - shrink) / d
    elif d2 < 0.0:
        w = math.sqrt(-d2)
        decay = np.exp(-0.5 * lam * t)
        cosh_part = decay * np.cos(0.5 * w * t)
        s = decay * np.sin(0.5 * w * t) / w
    else:
        decay = np.exp(-0.5 * lam * t)
        cosh_part = decay
        s = 0.5 * t * decay
    return cosh_part + lam * s, s


def jc_amplitude(params: JcParams, t):
    """
    Excited-state amplitude c_t = e^{−λt/2}[cosh(dt/2) + (λ/d) sinh(dt/2)], d = √(λ² − 2γ0λ).
    Real for the resonant Lorentzian; trigonometric continuation when λ < 2γ0.
    """
    c, _ = _jc_components(params, t)
    return c if np.ndim(c) else complex(c)


def jc_amplitude_derivative(params: JcParams, t):
    _, s = _jc_components(params, t)
    dc = -params.gamma0 * params.lam * s
    return dc if np.ndim(dc) else complex(dc)


def jc_population(params: JcParams, t):
    """Excited population |c_t|² for an initially excited qubit."""
    c, _ = _jc_components(params, t)
    p = c * c
    return p if np.ndim(p) else float(p)


def jc_poles(params: JcParams, t_end: float) -> np.ndarray:
    """Zeros of c_t (poles of γ_t) in (0, t_end]; empty in the weak-coupling regime."""
    d2 = params.lam ** 2 - 2.0 * params.gamma0 * params.lam
    if d2 >= 0.0:
        return np.zeros(0)
    w = math.sqrt(-d2)
    offset = math.atan(w / params.lam)
    k_max = int(math.floor((0.5 * w * t_end + offset) / math.pi))
    poles = 2.0 * (np.arange(1, k_max + 1) * math.pi - offset) / w
    return poles[(poles > 0.0) & (poles <= t_end)]


def _check_poles(params: JcParams, t: np.ndarray):
    t = np.atleast_1d(np.asarray(t, dtype=float))
    poles = jc_poles(params, float(t.max()) + 1.0)
    if poles.size == 0:
        return
    gap = np.abs(t[:, None] - poles[None, :])
    if np.any(gap < POLE_TOLERANCE):
        i, k = np.unravel_index(np.argmin(gap), gap.shape)
        raise PoleError(f"decay rate evaluated at t={t[i]!r}, within {POLE_TOLERANCE} of a pole", pole=float(poles[k]))


def jc_decay_rate(params: JcParams, t):
    """
    Time-dependent decay rate γ_t = −2 Re(ċ_t/c_t) = 2γ0λ sinh(dt/2)/[d cosh(dt/2) + λ sinh(dt/2)].
    """
    if np.any(np.asarray(t) < 0):
        raise InvalidInputError("the decay rate is defined for t ≥ 0")
    _check_poles(params, t)
    c, s = _jc_components(params, t)
    rate = 2.0 * params.gamma0 * params.lam * s / c
    return rate if np.ndim(rate) else float(rate)


def jc_lamb_shift(params: JcParams, t):
    """λ_t = −2 Im(ċ_t/c_t); identically zero for the resonant Lorentzian."""
    ratio = np.asarray(jc_amplitude_derivative(params, t), dtype=complex) / np.asarray(jc_amplitude(params, t), dtype=complex)
    shift = -2.0 * ratio.imag
    return shift if np.ndim(shift) else float(shift)


def _jc_rate_integral(params: JcParams, grid: TimeGrid) -> np.ndarray:
    # ∫γ dt = −2 ln|c(t1)/c(t0)|
    c = np.abs(np.asarray(jc_amplitude(params, grid.times()), dtype=complex))
    if np.any(c == 0.0):
        raise PoleError("a grid node sits exactly on a pole of the decay rate", pole=float(grid.times()[np.argmin(c)]))
    return -2.0 * np.diff(np.log(c))


def _jc_phase_integrals(params: JcParams, grid: TimeGrid) -> np.ndarray:
    # c_t is real and changes sign at each pole: arg c jumps by π there, which the
    # Lamb-shift channel carries as a step integral of 2π per crossing
    c = np.real(np.asarray(jc_amplitude(params, grid.times()), dtype=complex))
    crossings = np.diff(np.signbit(c).astype(int)) != 0
    return 2.0 * math.pi * crossings.astype(float)


def jc_generator(
        params: JcParams,
        grid: TimeGrid,
        include_lamb_shift: bool = False,
        *,
        units: UnitSystem = DEFAULT_UNITS) -> LindbladGenerator:
    """
    Damped Jaynes-Cummings generator: H = ℏω0 σ+σ−, one channel (σ−, γ_t), and optionally the
    Lamb-shift term (λ_t/2)σ+σ−. Rates carry exact per-step integrals for the exponential integrator.

    Steps across a zero of c_t carry the sign flip of the coherences as a phase π on σ+σ−,
    so the exponential integrator reproduces ρ_eg ∝ c_t rather than |c_t|.
    """
    half = grid.half_times()
    rate = RateSchedule(values=jc_decay_rate(params, half), integrals=_jc_rate_integral(params, grid))
    hamiltonian = ControlledHamiltonian(
        grid=grid, drift=HermitianOperator(matrix=units.hbar * params.omega0 * EXCITED_PROJECTOR))
    phases = _jc_phase_integrals(params, grid)
    kwargs = {}
    if include_lamb_shift or phases.any():
        kwargs['lamb_shift_operator'] = HermitianOperator(matrix=EXCITED_PROJECTOR)
        kwargs['lamb_shift_rate'] = RateSchedule(values=jc_lamb_shift(params, half), integrals=phases)
    return LindbladGenerator(hamiltonian=hamiltonian, channels=(Channel(jump=SIGMA_MINUS, rate=rate),), **kwargs)


def jc_excited_state() -> DensityMatrix:
    return DensityMatrix.diagonal(1.0, 0.0)


def jc_ground_state() -> DensityMatrix:
    return DensityMatrix.diagonal(0.0, 1.0)


# probe qubit in a Lipkin-Meshkov-Glick bath

class LmgParams(pydantic.BaseModel):
    """
    Probe qubit coupled to an LMG bath of `n_spins` spins, restricted to the symmetric sector.

    Args:
        n_spins: Number of bath spins N.
        lam: LMG order parameter λ (alias `lambda`).
        gamma: Probe-bath coupling γ.
        coupling_scale: Extra prefactor on the probe-bath term.
    """
    model_config = pydantic.ConfigDict(frozen=True, populate_by_name=True)

    n_spins: int = pydantic.Field(ge=2, le=MAX_LMG_SPINS)
    lam: float = pydantic.Field(ge=0.0, alias='lambda')
    gamma: float = pydantic.Field(ge=0.0)
    coupling_scale: float = 1.0

    @property
    def bath_dimension(self) -> int:
        return self.n_spins + 1


def collective_operators(n_spins: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    J_z, J_+ and J_− on the Dicke states |J, m⟩, J = N/2, ordered m = J, J−1, ..., −J.
    """
    j = n_spins / 2.0
    m = j - np.arange(n_spins + 1)
    jz = np.diag(m).astype(complex)
    # J_+|m⟩ = √(J(J+1) − m(m+1)) |m+1⟩, and |m+1⟩ sits one index earlier
    raise_amp = np.sqrt(j * (j + 1) - m[1:] * (m[1:] + 1))
    jp = np.diag(raise_amp, k=1).astype(complex)
    return jz, jp, dagger(jp)


def lmg_bath_hamiltonian(params: LmgParams) -> np.ndarray:
    """H_B = −(λ/N)(2(J² − J_z²) − N) − 2J_z, diagonal in the Dicke basis."""
    n = params.n_spins
    j = n / 2.0
    jz, _, _ = collective_operators(n)
    pair = 2.0 * (j * (j + 1) * np.eye(n + 1) - jz @ jz) - n * np.eye(n + 1)
    return -(params.lam / n) * pair - 2.0 * jz


def lmg_probe_hamiltonian(params: LmgParams) -> HermitianOperator:
    """
    Total Hamiltonian H_S + H_B + H_SB on probe ⊗ Dicke states:
    H_S = −σ^z, H_SB = −2γ(J_+σ^− + J_−σ^+) in ladder form.

    Probe basis is (|↑⟩, |↓⟩), so the probe's excited state under −σ^z is |↓⟩.
    """
    jz, jp, jm = collective_operators(params.n_spins)
    bath_eye = np.eye(params.bath_dimension)
    probe_minus = np.array([[0, 0], [1, 0]], dtype=complex)
    h_s = np.kron(-SIGMA_Z, bath_eye)
    h_b = np.kron(np.eye(2), lmg_bath_hamiltonian(params))
    h_sb = -2.0 * params.gamma * params.coupling_scale * (np.kron(probe_minus, jp) + np.kron(dagger(probe_minus), jm))
    return HermitianOperator(matrix=h_s + h_b + h_sb)


def lmg_initial_state(params: LmgParams) -> Ket:
    """Probe in |↓⟩ times the lowest Dicke state of H_B (ties resolved toward larger J_z)."""
    bath = np.zeros(params.bath_dimension, dtype=complex)
    bath[int(np.argmin(np.real(np.diag(lmg_bath_hamiltonian(params)))))] = 1.0
    return Ket(amplitudes=np.kron(np.array([0.0, 1.0]), bath))


def lmg_probe_trajectory(params: LmgParams, grid: TimeGrid, *, units: UnitSystem = DEFAULT_UNITS) -> Trajectory:
    """
    Reduced probe trajectory ρ_S(t) = Tr_B |ψ(t)⟩⟨ψ(t)| by exact diagonalization, with generator
    snapshots Tr_B(−i[H, ρ_tot]/ℏ).
    """
    h = lmg_probe_hamiltonian(params).matrix
    evals, evecs = np.linalg.eigh(h)
    coeffs = dagger(evecs) @ lmg_initial_state(params).amplitudes
    phases = np.exp(-1j * np.outer(grid.times() - grid.t_start, evals) / units.hbar)
    psi = (phases * coeffs) @ evecs.T
    h_psi = -1j / units.hbar * psi @ h.T
    nb = params.bath_dimension
    psi_r, flow_r = psi.reshape(-1, 2, nb), h_psi.reshape(-1, 2, nb)
    states = np.einsum('kia,kja->kij', psi_r, psi_r.conj())
    forward = np.einsum('kia,kja->kij', flow_r, psi_r.conj())
    generator = forward + dagger(forward)
    return Trajectory(grid=grid, states=hermitian_part(states), generator_snapshots=generator)


# PT-symmetric qubit

class PtQubitParams(pydantic.BaseModel):
    """PT-symmetric qubit H = [[r e^{iθ}, s], [s, r e^{−iθ}]]."""
    model_config = pydantic.ConfigDict(frozen=True)

    r: float
    theta: float
    s: float

    @pydantic.field_validator('s')
    @classmethod
    def _nonzero(cls, value):
        if value == 0.0:
            raise ValueError("`s` must be nonzero")
        return value

    @property
    def unbroken(self) -> bool:
        return self.s ** 2 > (self.r * math.sin(self.theta)) ** 2


def pt_qubit_hamiltonian(params: PtQubitParams) -> np.ndarray:
    r, th, s = params.r, params.theta, params.s
    return np.array([[r * np.exp(1j * th), s], [s, r * np.exp(-1j * th)]], dtype=complex)


def pt_qubit_solution(params: PtQubitParams, t: float, *, units: UnitSystem = DEFAULT_UNITS) -> Ket:
    """
    Unnormalized state e^{−iHt/ℏ}(1, 0)ᵀ in closed form:
    e^{−itr cosθ/ℏ}/cos α · (cos(ωt/2ℏ − α), −i sin(ωt/2ℏ)), sin α = r sinθ/s, ω² = 4s² − 4r² sin²θ.
    """
    if not params.unbroken:
        raise DomainError(f"PT symmetry is broken for {params!r}")
    hbar = units.hbar
    alpha = math.asin(params.r * math.sin(params.theta) / params.s)
    omega = math.sqrt(4.0 * params.s ** 2 - 4.0 * (params.r * math.sin(params.theta)) ** 2)
    phase = np.exp(-1j * t * params.r * math.cos(params.theta) / hbar) / math.cos(alpha)
    x = omega * t / (2.0 * hbar)
    return Ket(amplitudes=phase * np.array([math.cos(x - alpha), -1j * math.sin(x)]))


def pt_qubit_period(params: PtQubitParams, *, units: UnitSystem = DEFAULT_UNITS) -> float:
    omega = math.sqrt(4.0 * params.s ** 2 - 4.0 * (params.r * math.sin(params.theta)) ** 2)
    return 2.0 * math.pi * units.hbar / omega


# counterdiabatic driving

def _counterdiabatic(h: np.ndarray, dh: np.ndarray, hbar: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """H1 = iℏ Σ_{m≠n} |m⟩⟨m|∂H|n⟩⟨n|/(ε_n − ε_m); returns (H1, energies, eigenvectors)."""
    evals, evecs = np.linalg.eigh(h)
    gaps = np.diff(evals)
    if gaps.size and gaps.min() < DEGENERACY_GAP:
        k = int(np.argmin(gaps))
        raise DegeneracyError(f"levels {k} and {k + 1} are degenerate (gap {gaps[k]:.3e})", levels=(k, k + 1))
    m = dagger(evecs) @ dh @ evecs
    denom = evals[None, :] - evals[:, None]
    np.fill_diagonal(denom, 1.0)
    h1_eigen = 1j * hbar * m / denom
    np.fill_diagonal(h1_eigen, 0.0)
    return hermitian_part(evecs @ h1_eigen @ dagger(evecs)), evals, evecs


def counterdiabatic_term(
        h0: ControlledHamiltonian,
        node: int,
        *,
        units: UnitSystem = DEFAULT_UNITS) -> HermitianOperator:
    """
    Counterdiabatic field H1 at a grid node, with ∂_tH0 from the control-signal differences.

    Raises:
        DegeneracyError: the instantaneous spectrum has a gap below 1e-8.
    """
    h1, _, _ = _counterdiabatic(h0.node_matrix(node), h0.node_derivative(node), units.hbar)
    return HermitianOperator(matrix=h1)


def eigenstate_speed(h0: ControlledHamiltonian, node: int, level: int) -> float:
    """√⟨∂_t n|∂_t n⟩ for the parallel-transported eigenstate |n_t⟩."""
    evals, evecs = np.linalg.eigh(h0.node_matrix(node))
    m = dagger(evecs) @ h0.node_derivative(node) @ evecs
    others = np.arange(len(evals)) != level
    return float(np.sqrt(np.sum(np.abs(m[others, level]) ** 2 / (evals[level] - evals[others]) ** 2)))


def counterdiabatic_hamiltonian(h0: ControlledHamiltonian, *, units: UnitSystem = DEFAULT_UNITS) -> ControlledHamiltonian:
    """
    H0 + H1 on every step: H1 is evaluated at the step midpoints, with the derivative
    taken by central differences of the step samples.
    """
    signals = h0.signals
    dt = h0.grid.dt
    if signals.shape[0]:
        grad = np.gradient(signals, dt, axis=1)
    else:
        grad = signals
    h_steps = h0.step_matrices()
    terms = np.stack([t.matrix for t in h0.control_terms]) if h0.control_terms else None
    corrections = np.empty_like(h_steps)
    for j in range(h0.grid.steps):
        dh = np.einsum('k,kij->ij', grad[:, j], terms) if terms is not None else np.zeros_like(h_steps[j])
        corrections[j], _, _ = _counterdiabatic(h_steps[j], dh, units.hbar)
    base = h0.step_corrections if h0.step_corrections is not None else 0.0
    return h0.with_corrections(base + corrections)


def tracking_fidelity(h0: ControlledHamiltonian, level: int = 0, *, units: UnitSystem = DEFAULT_UNITS) -> float:
    """|⟨n_τ|ψ_τ⟩|² after propagating |n_0⟩ under H0 + H1."""
    start = np.linalg.eigh(h0.node_matrix(0))[1][:, level]
    end = np.linalg.eigh(h0.node_matrix(h0.grid.steps))[1][:, level]
    traj = evolve_unitary(counterdiabatic_hamiltonian(h0, units=units), Ket(amplitudes=start), units=units)
    return float(abs(np.vdot(end, traj.kets[-1])) ** 2)


# Dirac electron in a magnetic field

class DiracLandauParams(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(frozen=True)

    b_field: pydantic.PositiveFloat
    mass: pydantic.PositiveFloat = 1.0
    charge: pydantic.PositiveFloat = 1.0
    light_speed: pydantic.PositiveFloat = 1.0


class DiracLandauReport(pydantic.BaseModel):
    """Speed-limit times, mean displacements and mean speeds of Schrödinger vs Dirac Landau dynamics."""
    model_config = pydantic.ConfigDict(frozen=True)

    tau_s: float
    tau_d: float
    disp_s: float
    disp_d: float
    v_s: float
    v_d: float
    v_s_exceeds_c: bool


def dirac_landau_report(params: DiracLandauParams, *, units: UnitSystem = DEFAULT_UNITS) -> DiracLandauReport:
    """
    Args:
        params: Field, mass, charge and speed of light.
        units: Physical constants.

    Returns:
        τ^S = πm/(eB), τ^D = πℏ/(√((mc²)² + 4ℏc²eB) − √((mc²)² + 2ℏc²eB)), ⟨Δr^S⟩ = √(πℏ/2eB),
        ⟨Δr^D⟩ = (√π/4β)(1 + 3/(2√2)) with β = √(eB/2ℏ), and the ratio speeds.
    """
    hbar = units.hbar
    m, e, b, c = params.mass, params.charge, params.b_field, params.light_speed
    rest = m * c * c
    x = hbar * c * c * e * b / (rest * rest)
    # √(1+4x) − √(1+2x) without cancellation
    gap = rest * 2.0 * x / (math.sqrt(1.0 + 4.0 * x) + math.sqrt(1.0 + 2.0 * x))
    tau_s = math.pi * m / (e * b)
    tau_d = math.pi * hbar / gap
    beta = math.sqrt(e * b / (2.0 * hbar))
    disp_s = math.sqrt(math.pi * hbar / (2.0 * e * b))
    disp_d = math.sqrt(math.pi) / (4.0 * beta) * (1.0 + 3.0 / (2.0 * math.sqrt(2.0)))
    v_s = disp_s / tau_s
    return DiracLandauReport(
        tau_s=tau_s, tau_d=tau_d, disp_s=disp_s, disp_d=disp_d,
        v_s=v_s, v_d=disp_d / tau_d, v_s_exceeds_c=v_s > c)


def dirac_superluminal_field(params: DiracLandauParams, *, units: UnitSystem = DEFAULT_UNITS) -> float:
    """Field above which the Schrödinger mean speed exceeds c: B = 2πm²c²/(eℏ)."""
    return 2.0 * math.pi * params.mass ** 2 * params.light_speed ** 2 / (params.charge * units.hbar)
