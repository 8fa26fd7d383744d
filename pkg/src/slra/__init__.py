"""Sparse low-rank approximation: spectral (Krylov), streaming sketches and planted-signal tools."""
from .core import (Component, OracleInfeasible, ParameterError, SparseRankKFactor, SupportPair,
                   brute_force_sparse_lra, materialize)

__version__ = "0.1.0"
__all__ = ["Component", "OracleInfeasible", "ParameterError", "SparseRankKFactor", "SupportPair",
           "brute_force_sparse_lra", "materialize", "__version__"]
