"""Two quantum emitters at adjacent cells of a tight-binding waveguide.

Exact lattice propagation, analytic one- and two-excitation solutions,
Markovian cascade, and decay-law classification.
"""
from .model import ModelError, ModelParams, build_basis, hamiltonian
from .propagate import TimeGrid, evolve

__version__ = "0.1.0"

__all__ = ["ModelError", "ModelParams", "TimeGrid", "build_basis", "evolve", "hamiltonian"]
