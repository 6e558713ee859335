"""Reference implementations used to check the solver.

Nothing here touches the Padé exponential or the Krylov code: phi-functions
come from a truncated Taylor series (with argument halving and the doubling
formula for large arguments) and the ODE reference is a fixed-step RK4.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@dataclass(frozen=True)
class PhiOracleConfig:
    series_terms: int = 60
    norm_cap: float = 2.0

    def __post_init__(self):
        if self.series_terms < 20:
            raise ValueError("series_terms must be at least 20")


DEFAULT_CONFIG = PhiOracleConfig()


def _as_square(H) -> np.ndarray:
    H = np.atleast_2d(np.asarray(H, dtype=float))
    if H.shape[0] != H.shape[1]:
        raise ValueError("matrix must be square")
    return H


def _norm1(H) -> float:
    return float(np.abs(H).sum(axis=0).max()) if H.size else 0.0


@lru_cache(maxsize=None)
def _inverse_factorials(n: int) -> tuple:
    return tuple(1.0 / math.factorial(k) for k in range(n + 1))


def phi_series(H, ell: int, config: PhiOracleConfig = DEFAULT_CONFIG) -> np.ndarray:
    """sum_{k=0}^{K} H^k / (k + ell)!  evaluated by Horner's rule."""
    H = _as_square(H)
    if _norm1(H) > config.norm_cap:
        raise ValueError(f"||H||_1 = {_norm1(H):.3g} exceeds the series cap {config.norm_cap}")
    K = config.series_terms
    inv_fact = _inverse_factorials(K + ell)
    if H.shape == (1, 1):
        # scalar path: plain floats are much cheaper than 1x1 products
        z, acc = float(H[0, 0]), inv_fact[K + ell]
        for k in range(K - 1, -1, -1):
            acc = z * acc + inv_fact[k + ell]
        return np.array([[acc]])
    S = np.eye(H.shape[0]) * inv_fact[K + ell]
    diag = np.diag_indices(H.shape[0])
    for k in range(K - 1, -1, -1):
        S = H @ S
        S[diag] += inv_fact[k + ell]
    return S


def phi_matrices(H, max_ell: int, config: PhiOracleConfig = DEFAULT_CONFIG) -> list[np.ndarray]:
    """phi_0(H), ..., phi_{max_ell}(H) for any H.

    Large arguments are halved until the series applies and then doubled
    back with phi_l(2Z) = 2^-l [phi_0(Z) phi_l(Z) + sum_{j=1}^{l} phi_j(Z)/(l-j)!].
    """
    H = _as_square(H)
    nrm = _norm1(H)
    s = 0
    if nrm > config.norm_cap:
        s = math.ceil(math.log2(nrm / config.norm_cap))
    Z = H / 2.0**s
    phis = [phi_series(Z, ell, config) for ell in range(max_ell + 1)]
    for _ in range(s):
        doubled = []
        for ell in range(max_ell + 1):
            acc = phis[0] @ phis[ell]
            for j in range(1, ell + 1):
                acc = acc + phis[j] / math.factorial(ell - j)
            doubled.append(acc / 2.0**ell)
        phis = doubled
    return phis


def phi_matrix(H, ell: int, config: PhiOracleConfig = DEFAULT_CONFIG) -> np.ndarray:
    return phi_matrices(H, ell, config)[ell]


def phi_scalar(z: float, ell: int, config: PhiOracleConfig = DEFAULT_CONFIG) -> float:
    return float(phi_matrix([[z]], ell, config)[0, 0])


def phi_recurrence_check(z: float, ell: int) -> float:
    """|phi_l(z) - z phi_{l+1}(z) - 1/l!|"""
    phis = phi_matrices([[z]], ell + 1)
    return abs(phis[ell][0, 0] - z * phis[ell + 1][0, 0] - 1.0 / math.factorial(ell))


def _columns(b, n) -> np.ndarray:
    b = np.asarray(b, dtype=float)
    if b.ndim == 1:
        b = b[:, None]
    if b.shape[0] != n:
        raise ValueError("b has the wrong number of rows")
    return b


def ode_reference(A, b, t_end: float, steps: int = 4000) -> np.ndarray:
    """RK4 solution at t_end of u' = A u + sum_j t^j/j! b_{j+1}, u(0) = b_0."""
    A = _as_square(A)
    B = _columns(b, A.shape[0])
    forcing = B[:, 1:]
    p = forcing.shape[1]
    fact = np.array([math.factorial(j) for j in range(p)], dtype=float)

    def g(t):
        if p == 0:
            return 0.0
        return forcing @ (t ** np.arange(p) / fact)

    def f(t, u):
        return A @ u + g(t)

    h = t_end / steps
    u = B[:, 0].copy()
    t = 0.0
    for k in range(steps):
        t = k * h
        k1 = f(t, u)
        k2 = f(t + h / 2, u + h / 2 * k1)
        k3 = f(t + h / 2, u + h / 2 * k2)
        k4 = f(t + h, u + h * k3)
        u = u + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return u


def lemma_solution(A, b, t_k: float, tau_k: float, u_k=None) -> np.ndarray:
    """Exact solution at t_k + tau_k of the ODE above, started from u(t_k) = u_k."""
    A = _as_square(A)
    B = _columns(b, A.shape[0])
    p = B.shape[1] - 1
    if u_k is None:
        u_k = B[:, 0]
    phis = phi_matrices(tau_k * A, p)
    u = phis[0] @ np.asarray(u_k, dtype=float)
    for j in range(p):
        for ell in range(j + 1):
            coef = t_k ** (j - ell) / math.factorial(j - ell) * tau_k ** (ell + 1)
            u = u + coef * (phis[ell + 1] @ B[:, j + 1])
    return u


def exact_combination(A, b, t: float = 1.0) -> np.ndarray:
    """phi_0(tA) b_0 + t phi_1(tA) b_1 + ... + t^p phi_p(tA) b_p."""
    A = _as_square(A)
    B = _columns(b, A.shape[0])
    if t == 0:
        return B[:, 0].copy()
    return lemma_solution(A, B, 0.0, t, B[:, 0])
