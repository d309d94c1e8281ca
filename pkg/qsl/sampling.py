"""Seeded random instances: states, Hamiltonians, driven protocols and Lindbladians."""
import numpy as np

from .dynamics import Channel, ControlledHamiltonian, LindbladGenerator, RateSchedule, TimeGrid
from .linalg import DensityMatrix, HermitianOperator, Ket, dagger, hermitian_part


def ginibre(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    return rng.normal(size=(rows, cols)) + 1j * rng.normal(size=(rows, cols))


def random_hermitian(rng: np.random.Generator, d: int, scale: float = 1.0) -> HermitianOperator:
    """GUE-like Hermitian matrix with operator norm of order `scale`."""
    g = ginibre(rng, d, d)
    return HermitianOperator(matrix=scale * hermitian_part(g) / np.sqrt(2.0 * d))


def random_ket(rng: np.random.Generator, d: int) -> Ket:
    v = ginibre(rng, d, 1)[:, 0]
    return Ket(amplitudes=v / np.linalg.norm(v))


def random_density(rng: np.random.Generator, d: int, rank: int | None = None) -> DensityMatrix:
    """Induced-measure density matrix G G†/tr(G G†) with G of shape (d, rank)."""
    g = ginibre(rng, d, rank or d)
    rho = g @ dagger(g)
    return DensityMatrix(matrix=hermitian_part(rho / np.trace(rho).real))


def random_protocol(
        rng: np.random.Generator,
        d: int,
        grid: TimeGrid,
        n_terms: int = 1,
        scale: float = 1.0) -> ControlledHamiltonian:
    """Random drift plus `n_terms` random controls with smooth random Fourier signals."""
    mids = grid.midpoints()
    phase = (mids - grid.t_start) / grid.duration
    signals = np.empty((n_terms, grid.steps))
    for k in range(n_terms):
        a = rng.normal(size=3)
        signals[k] = a[0] + a[1] * np.sin(np.pi * phase) + a[2] * np.cos(2 * np.pi * phase)
    return ControlledHamiltonian(
        grid=grid,
        drift=random_hermitian(rng, d, scale),
        control_terms=tuple(random_hermitian(rng, d, scale) for _ in range(n_terms)),
        control_signals=signals)


def random_lindblad(
        rng: np.random.Generator,
        d: int,
        grid: TimeGrid,
        n_channels: int = 2,
        max_rate: float = 1.0) -> LindbladGenerator:
    """Constant random Hamiltonian with `n_channels` random jumps at constant nonnegative rates."""
    channels = []
    for _ in range(n_channels):
        jump = ginibre(rng, d, d) / np.sqrt(2.0 * d)
        channels.append(Channel(jump=jump, rate=RateSchedule.constant(float(rng.uniform(0.0, max_rate)), grid)))
    return LindbladGenerator(
        hamiltonian=ControlledHamiltonian.constant(random_hermitian(rng, d), grid),
        channels=tuple(channels))
