import logging
from typing import Literal, Union

import numpy as np
import pydantic
import scipy.linalg

from .errors import DomainError, InvalidInputError

logger = logging.getLogger(__name__)

HERMITICITY_TOL = 1e-12
TRACE_TOL = 1e-10
POSITIVITY_REPAIR_TOL = 1e-10
SUPPORT_CUTOFF = 1e-14

NormOrder = Union[float, Literal['op', 'tr', 'hs']]
NORM_ORDERS = {'op': np.inf, 'tr': 1.0, 'hs': 2.0}

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """
    Coerce `a` into a finite two-dimensional complex array.

    Args:
        a: Anything `numpy.asarray` understands.
        name: Used in the error message.

    Returns:
        A complex ndarray of shape (rows, cols).
    """
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2:
        raise InvalidInputError(f"`{name}` must be two-dimensional, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidInputError(f"`{name}` has non-finite entries")
    return m


def as_square(a, name: str = "matrix") -> np.ndarray:
    m = as_matrix(a, name)
    if m.shape[0] != m.shape[1]:
        raise InvalidInputError(f"`{name}` must be square, got shape {m.shape}")
    return m


def dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def hermitian_part(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + dagger(a))


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def _hermiticity_defect(m: np.ndarray) -> float:
    return float(np.linalg.norm(m - dagger(m)) / max(1.0, np.linalg.norm(m)))


class HermitianOperator(pydantic.BaseModel):
    """
    A square matrix equal to its conjugate transpose within 1e-12 (relative, Frobenius).
    The stored matrix is exactly symmetrized.
    """
    model_config = pydantic.ConfigDict(arbitrary_types_allowed=True, frozen=True)

    matrix: np.ndarray

    @pydantic.field_validator('matrix', mode='before')
    @classmethod
    def _check_hermitian(cls, value):
        m = as_square(value)
        defect = _hermiticity_defect(m)
        if defect > HERMITICITY_TOL:
            raise InvalidInputError(f"operator is not Hermitian (relative defect {defect:.3e})")
        return hermitian_part(m)

    @classmethod
    def from_matrix(cls, matrix) -> "HermitianOperator":
        """Symmetrize first; use for operators assembled from numerical products."""
        return cls(matrix=hermitian_part(as_square(matrix)))

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def eigh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.linalg.eigh(self.matrix)

    def shifted_to_ground(self) -> "HermitianOperator":
        e0 = float(np.linalg.eigvalsh(self.matrix)[0])
        return HermitianOperator(matrix=self.matrix - e0 * np.eye(self.dimension))


class Ket(pydantic.BaseModel):
    """
    A state vector. `norm_tracked` is the raw Euclidean norm of `amplitudes`,
    which non-Hermitian dynamics lets drift away from one.
    """
    model_config = pydantic.ConfigDict(arbitrary_types_allowed=True, frozen=True)

    amplitudes: np.ndarray
    norm_tracked: float = 1.0

    @pydantic.model_validator(mode='before')
    @classmethod
    def _track_norm(cls, data):
        if isinstance(data, dict):
            amps = np.asarray(data.get('amplitudes'), dtype=complex)
            if amps.ndim != 1 or amps.size == 0:
                raise InvalidInputError(f"ket amplitudes must be a non-empty vector, got shape {amps.shape}")
            if not np.all(np.isfinite(amps)):
                raise InvalidInputError("ket amplitudes have non-finite entries")
            data = {**data, 'amplitudes': amps, 'norm_tracked': float(np.linalg.norm(amps))}
        return data

    @classmethod
    def basis(cls, dimension: int, index: int) -> "Ket":
        amps = np.zeros(dimension, dtype=complex)
        amps[index] = 1.0
        return cls(amplitudes=amps)

    @classmethod
    def of(cls, *amplitudes) -> "Ket":
        """Normalized ket from its components."""
        amps = np.asarray(amplitudes, dtype=complex)
        return cls(amplitudes=amps / np.linalg.norm(amps))

    @property
    def dimension(self) -> int:
        return self.amplitudes.shape[0]

    @property
    def is_normalized(self) -> bool:
        return abs(self.norm_tracked - 1.0) <= 1e-10

    def normalized(self) -> "Ket":
        if self.norm_tracked == 0.0:
            raise DomainError("cannot normalize the zero vector")
        return Ket(amplitudes=self.amplitudes / self.norm_tracked)

    def overlap(self, other: "Ket") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))


def _certify_density(m: np.ndarray) -> np.ndarray:
    defect = _hermiticity_defect(m)
    if defect > HERMITICITY_TOL:
        raise InvalidInputError(f"density matrix is not Hermitian (relative defect {defect:.3e})")
    m = hermitian_part(m)
    trace = float(np.trace(m).real)
    if abs(trace - 1.0) > TRACE_TOL:
        raise InvalidInputError(f"density matrix trace is {trace!r}, expected 1")
    evals, evecs = np.linalg.eigh(m)
    if evals[0] < -POSITIVITY_REPAIR_TOL:
        raise InvalidInputError(f"density matrix has eigenvalue {evals[0]:.3e} below the repair band")
    if evals[0] < 0.0:
        logger.warning("Repairing negative eigenvalue %.3e of a density matrix", evals[0])
        evals = np.clip(evals, 0.0, None)
        evals = evals / evals.sum()
        m = hermitian_part((evecs * evals) @ dagger(evecs))
    return m


class DensityMatrix(pydantic.BaseModel):
    """
    A unit-trace positive semi-definite Hermitian matrix.
    Eigenvalues in [-1e-10, 0) are clamped to zero and the trace renormalized;
    larger violations are rejected.
    """
    model_config = pydantic.ConfigDict(arbitrary_types_allowed=True, frozen=True)

    matrix: np.ndarray

    @pydantic.field_validator('matrix', mode='before')
    @classmethod
    def _check_state(cls, value):
        return _certify_density(as_square(value))

    @classmethod
    def from_ket(cls, ket: Ket) -> "DensityMatrix":
        psi = ket.normalized().amplitudes
        return cls(matrix=np.outer(psi, psi.conj()))

    @classmethod
    def pure(cls, *amplitudes) -> "DensityMatrix":
        return cls.from_ket(Ket.of(*amplitudes))

    @classmethod
    def maximally_mixed(cls, dimension: int) -> "DensityMatrix":
        return cls(matrix=np.eye(dimension, dtype=complex) / dimension)

    @classmethod
    def diagonal(cls, *populations) -> "DensityMatrix":
        return cls(matrix=np.diag(np.asarray(populations, dtype=complex)))

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def purity(self) -> float:
        return float(np.real(np.einsum('ij,ji->', self.matrix, self.matrix)))

    def is_pure(self, tol: float = 1e-8) -> bool:
        return self.purity() > 1.0 - tol


State = Union[Ket, DensityMatrix]


def to_density(state: State) -> DensityMatrix:
    if isinstance(state, Ket):
        return DensityMatrix.from_ket(state)
    return state


def _same_dimension(*states: State):
    dims = {s.dimension for s in states}
    if len(dims) != 1:
        raise InvalidInputError(f"dimension mismatch: {sorted(dims)}")


def schatten_norm(a, p: NormOrder = 'op') -> float:
    """
    Schatten-p norm: the p-norm of the singular values.

    Args:
        a: Any finite matrix.
        p: Norm order, a positive number, `numpy.inf`, or one of 'op', 'tr', 'hs'.

    Returns:
        (Σ σ_i^p)^(1/p); the largest singular value for p = ∞.
    """
    p = NORM_ORDERS.get(p, p) if isinstance(p, str) else float(p)
    if isinstance(p, str) or not p > 0:
        raise InvalidInputError(f"invalid Schatten order {p!r}")
    s = scipy.linalg.svdvals(as_matrix(a))
    if s.size == 0 or s[0] == 0.0:
        return 0.0
    if np.isinf(p):
        return float(s[0])
    if p == 1.0:
        return float(s.sum())
    # scale by the largest singular value to keep s**p representable
    scale = s[0]
    return float(scale * np.sum((s / scale) ** p) ** (1.0 / p))


def batched_schatten_norm(a: np.ndarray, p: NormOrder = 'op') -> np.ndarray:
    """Schatten norms of a stack of matrices with shape (n, rows, cols)."""
    p = NORM_ORDERS.get(p, p) if isinstance(p, str) else float(p)
    s = np.linalg.svd(a, compute_uv=False)
    if np.isinf(p):
        return s[..., 0]
    return np.sum(s ** p, axis=-1) ** (1.0 / p)


def matrix_function(a: HermitianOperator, kind: Literal['sqrt_psd', 'exp', 'log']) -> np.ndarray:
    """
    Spectral functional calculus of a Hermitian operator.

    Args:
        a: The operator.
        kind: 'sqrt_psd' (square root of a positive semi-definite operator), 'exp', or
            'log' (restricted to the support, eigenvalues below 1e-14 contribute 0).

    Returns:
        f(a) as a complex matrix.
    """
    evals, evecs = a.eigh()
    if kind == 'sqrt_psd':
        if evals[0] < -POSITIVITY_REPAIR_TOL:
            raise DomainError(f"square root of an operator with eigenvalue {evals[0]:.3e}")
        f = np.sqrt(np.clip(evals, 0.0, None))
    elif kind == 'exp':
        f = np.exp(evals)
    elif kind == 'log':
        if evals[0] < -POSITIVITY_REPAIR_TOL:
            raise DomainError(f"logarithm of an operator with eigenvalue {evals[0]:.3e}")
        support = evals > SUPPORT_CUTOFF
        f = np.zeros_like(evals)
        f[support] = np.log(evals[support])
    else:
        raise InvalidInputError(f"unknown matrix function {kind!r}")
    return (evecs * f) @ dagger(evecs)


def fidelity(rho1: State, rho2: State) -> float:
    """
    Uhlmann fidelity [tr √(√ρ1 ρ2 √ρ1)]², clamped to [0, 1].
    """
    _same_dimension(rho1, rho2)
    if isinstance(rho1, Ket) and isinstance(rho2, Ket):
        return float(min(1.0, abs(rho1.normalized().overlap(rho2.normalized())) ** 2))
    r1, r2 = to_density(rho1).matrix, to_density(rho2).matrix
    sqrt_r1 = matrix_function(HermitianOperator.from_matrix(r1), 'sqrt_psd')
    inner = np.linalg.eigvalsh(hermitian_part(sqrt_r1 @ r2 @ sqrt_r1))
    f = float(np.sum(np.sqrt(np.clip(inner, 0.0, None))) ** 2)
    return float(np.clip(f, 0.0, 1.0))


def bures_angle(rho1: State, rho2: State) -> float:
    """Bures angle arccos √F, in [0, π/2]."""
    return float(np.arccos(np.clip(np.sqrt(fidelity(rho1, rho2)), 0.0, 1.0)))


def pure_state_angles(psi0: np.ndarray, states: np.ndarray) -> np.ndarray:
    """
    Bures angles between a fixed pure state and a stack of density matrices.

    Args:
        psi0: Normalized amplitudes of the reference pure state.
        states: Array of shape (n, d, d).
    """
    f = np.real(np.einsum('i,kij,j->k', psi0.conj(), states, psi0))
    return np.arccos(np.clip(np.sqrt(np.clip(f, 0.0, 1.0)), 0.0, 1.0))


def trace_distance(rho1: State, rho2: State) -> float:
    _same_dimension(rho1, rho2)
    return 0.5 * schatten_norm(to_density(rho1).matrix - to_density(rho2).matrix, 1)


class EnergyMoments(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(frozen=True)

    mean: float
    std_dev: float
    ground_energy: float


def energy_moments(hamiltonian: HermitianOperator, state: State) -> EnergyMoments:
    """
    Mean, standard deviation and ground energy of a Hamiltonian in a state.

    Args:
        hamiltonian: The Hamiltonian.
        state: A ket or a density matrix of the same dimension.

    Returns:
        The moments; negative variance round-off is clamped to zero.
    """
    if state.dimension != hamiltonian.dimension:
        raise InvalidInputError(f"dimension mismatch: operator {hamiltonian.dimension}, state {state.dimension}")
    h = hamiltonian.matrix
    if isinstance(state, Ket):
        psi = state.normalized().amplitudes
        h_psi = h @ psi
        mean = float(np.vdot(psi, h_psi).real)
        second = float(np.vdot(h_psi, h_psi).real)
    else:
        rho = state.matrix
        mean = float(np.real(np.einsum('ij,ji->', h, rho)))
        second = float(np.real(np.einsum('ij,jk,ki->', h, h, rho)))
    ground = float(np.linalg.eigvalsh(h)[0])
    return EnergyMoments(mean=mean, std_dev=float(np.sqrt(max(second - mean ** 2, 0.0))), ground_energy=ground)


def variances(hamiltonians: np.ndarray, states: np.ndarray) -> np.ndarray:
    """Energy variances ⟨H²⟩ − ⟨H⟩² for stacks of Hamiltonians and density matrices."""
    mean = np.real(np.einsum('kij,kji->k', hamiltonians, states))
    second = np.real(np.einsum('kij,kjl,kli->k', hamiltonians, hamiltonians, states))
    return np.clip(second - mean ** 2, 0.0, None)


def von_neumann_entropy(rho: DensityMatrix) -> float:
    """Entropy −tr ρ ln ρ in nats."""
    p = np.linalg.eigvalsh(rho.matrix)
    p = p[p > SUPPORT_CUTOFF]
    return float(max(-np.sum(p * np.log(p)), 0.0))


def relative_entropy(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """
    Quantum relative entropy tr ρ ln ρ − tr ρ ln σ.

    Returns:
        A nonnegative number, or `inf` when the support of ρ is not contained in that of σ.
    """
    _same_dimension(rho, sigma)
    s_vals, s_vecs = np.linalg.eigh(sigma.matrix)
    weights = np.real(np.einsum('ik,ij,jk->k', s_vecs.conj(), rho.matrix, s_vecs))
    outside = s_vals <= SUPPORT_CUTOFF
    if np.any(weights[outside] > 1e-12):
        return float('inf')
    cross = float(np.sum(weights[~outside] * np.log(s_vals[~outside])))
    return float(max(-von_neumann_entropy(rho) - cross, 0.0))


def thermal_state(hamiltonian: HermitianOperator, beta: float) -> DensityMatrix:
    """Gibbs state exp(−βH)/Z, β in inverse energy units."""
    evals, evecs = hamiltonian.eigh()
    weights = np.exp(-beta * (evals - evals[0]))
    weights /= weights.sum()
    return DensityMatrix(matrix=hermitian_part((evecs * weights) @ dagger(evecs)))
