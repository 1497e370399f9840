"""Learning Markovian two-spin subsystem dynamics from measurement data."""

from .basis import build_basis, coherence_to_rho, default_basis, rho_to_coherence, structure_constants
from .errors import LindbladLearnError
from .generator import GeneratorParams, extract_readout, lindblad_matrix
from .trainer import LDAModel, TrainConfig, train

__all__ = [
    "GeneratorParams",
    "LDAModel",
    "LindbladLearnError",
    "TrainConfig",
    "build_basis",
    "coherence_to_rho",
    "default_basis",
    "extract_readout",
    "lindblad_matrix",
    "rho_to_coherence",
    "structure_constants",
    "train",
]
