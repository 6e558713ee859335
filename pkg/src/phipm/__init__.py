"""Krylov evaluation of linear combinations of phi-functions with adaptive
time step and subspace dimension."""

from .linops import (
    LinearOperator,
    SparseMatrix,
    as_operator,
    gen_laplacian1d,
    gen_laplacian9,
    read_matrix_market,
    write_matrix_market,
)
from .densela import expm_pade13
from .stepper import (
    ControllerConstants,
    SolveOptions,
    SolveStats,
    SolverError,
    phipm,
    solve,
)

__all__ = [
    "ControllerConstants",
    "LinearOperator",
    "SolveOptions",
    "SolveStats",
    "SolverError",
    "SparseMatrix",
    "as_operator",
    "expm_pade13",
    "gen_laplacian1d",
    "gen_laplacian9",
    "phipm",
    "read_matrix_market",
    "solve",
    "write_matrix_market",
]
