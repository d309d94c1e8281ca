import importlib.metadata

from .dynamics import ControlledHamiltonian, LindbladGenerator, TimeGrid, Trajectory, evolve_lindblad, evolve_unitary
from .errors import QslError
from .linalg import DensityMatrix, HermitianOperator, Ket
from .units import DEFAULT_UNITS, UnitSystem

try:
    __version__ = importlib.metadata.version("qsl")
except importlib.metadata.PackageNotFoundError:
    # Fallback for development when package is not installed
    __version__ = "0.0.0"

__all__ = [
    'ControlledHamiltonian', 'DensityMatrix', 'HermitianOperator', 'Ket', 'LindbladGenerator', 'QslError',
    'TimeGrid', 'Trajectory', 'UnitSystem', 'DEFAULT_UNITS', 'evolve_lindblad', 'evolve_unitary', '__version__',
]
