"""Density-matrix quantum mechanics on finite lattices.

Lattice models, exact unitary evolution, guidance-law trajectories for density
matrices and wave functions, spontaneous-collapse dynamics and the
experiments that compare them.
"""
__version__ = "0.1.0"

from .errors import ConfigError, DensityLabError, NumericalFault  # noqa: E402
from .hilbert import DensityMatrix, Operator, PureState, make_density, make_operator, make_pure  # noqa: E402
from .model import LatticeModel, build_lattice_model, iph_state, macro_decomposition  # noqa: E402
from .dynamics import evolve_density, evolve_pure  # noqa: E402

__all__ = [
    "__version__",
    "ConfigError",
    "DensityLabError",
    "NumericalFault",
    "DensityMatrix",
    "Operator",
    "PureState",
    "make_density",
    "make_operator",
    "make_pure",
    "LatticeModel",
    "build_lattice_model",
    "iph_state",
    "macro_decomposition",
    "evolve_density",
    "evolve_pure",
]
