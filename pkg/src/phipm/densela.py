"""Small dense linear algebra: the degree-13 Padé matrix exponential and
the flop-cost factor used by the step controller."""

from __future__ import annotations

import math
import warnings
from functools import lru_cache

import numpy as np
import scipy.linalg

from .linops import one_norm

# largest 1-norm for which the unscaled [13/13] approximant is accurate to
# double precision
THETA_13 = 5.37


class SingularMatrixError(ArithmeticError):
    pass


@lru_cache(maxsize=None)
def pade13_coefficients() -> np.ndarray:
    """Numerator coefficients b_0..b_13 of the [13/13] Padé approximant to
    exp, normalised so that b_13 = 1 (b_j = (26-j)! / (j! (13-j)!)).

    The denominator uses the same coefficients with alternating signs.
    """
    q = 13
    coeffs = [
        math.factorial(2 * q - j) // (math.factorial(j) * math.factorial(q - j))
        for j in range(q + 1)
    ]
    out = np.array([float(c) for c in coeffs])
    out.setflags(write=False)
    return out


def scaling_exponent(norm1: float) -> int:
    """Smallest nonnegative integer s with ||A||_1 / 2^s <= 5.37."""
    if norm1 <= THETA_13:
        return 0
    return max(0, math.ceil(math.log2(norm1 / THETA_13)))


def exp_cost_M(H) -> float:
    """Cost factor M with exp(H) costing M * size^3 flops."""
    return 44.0 / 3.0 + 2.0 * scaling_exponent(one_norm(H))


def multiply(a, b) -> np.ndarray:
    return np.asarray(a, dtype=float) @ np.asarray(b, dtype=float)


def add(a, b) -> np.ndarray:
    return np.asarray(a, dtype=float) + np.asarray(b, dtype=float)


def scale(alpha: float, a) -> np.ndarray:
    return alpha * np.asarray(a, dtype=float)


def solve(b, c) -> np.ndarray:
    """Solve ``b @ x = c`` by LU with partial pivoting."""
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    if b.ndim != 2 or b.shape[0] != b.shape[1]:
        raise ValueError("coefficient matrix must be square")
    if c.shape[0] != b.shape[0]:
        raise ValueError("right-hand side has the wrong number of rows")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(b, check_finite=False)
    if np.any(np.abs(np.diag(lu)) < 1e-300):
        raise SingularMatrixError("matrix is singular to working precision")
    return scipy.linalg.lu_solve((lu, piv), c, check_finite=False)


def expm_pade13(a) -> np.ndarray:
    """Matrix exponential by scaling and squaring with the [13/13] Padé
    approximant."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("expm needs a square matrix")
    if not np.all(np.isfinite(a)):
        raise ValueError("expm input has non-finite entries")
    n = a.shape[0]
    if n == 0:
        return np.zeros((0, 0))

    s = scaling_exponent(one_norm(a))
    if s:
        a = a * 2.0 ** (-s)

    b = pade13_coefficients()
    ident = np.eye(n)
    a2 = a @ a
    a4 = a2 @ a2
    a6 = a2 @ a4
    u = a @ (a6 @ (b[13] * a6 + b[11] * a4 + b[9] * a2)
             + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * ident)
    v = (a6 @ (b[12] * a6 + b[10] * a4 + b[8] * a2)
         + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * ident)
    r = solve(v - u, v + u)
    for _ in range(s):
        r = r @ r
    return r
