"""SAT encoding and solving for the mask/editor decomposition."""

from .cnf import CnfInstance, ModelFileError, SatModel, read_dimacs, read_model
from .decompose import (Decomposition, DecompositionFailed, check_decomposition, decompose,
                        decompose_with_model, extract, reachable_product)
from .encode import EncodingError, encode, expected_counts
from .solver import UNSAT, SolverTimeout, available_backends, solve, solve_clauses

__all__ = [
    "CnfInstance", "ModelFileError", "SatModel", "read_dimacs", "read_model",
    "Decomposition", "DecompositionFailed", "check_decomposition", "decompose",
    "decompose_with_model", "extract", "reachable_product",
    "EncodingError", "encode", "expected_counts",
    "UNSAT", "SolverTimeout", "available_backends", "solve", "solve_clauses",
]
