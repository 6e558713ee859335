"""Arnoldi and Lanczos bases, and phi-function evaluation on the projected
matrix through a single exponential of an augmented matrix."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import densela
from .linops import LinearOperator, inf_norm, matvec


@dataclass
class KrylovBasis:
    """Orthonormal Krylov basis V (n x (m+1)) and projected matrix H (m x m).

    ``V[:, m]`` is v_{m+1}; it is zero when ``breakdown`` is set.
    """

    V: np.ndarray
    H: np.ndarray
    h_next: float
    beta: float
    breakdown: bool
    matvecs: int

    @property
    def m(self) -> int:
        return self.H.shape[0]

    @property
    def v_next(self) -> np.ndarray:
        return self.V[:, self.m]


def breakdown_tolerance(op: LinearOperator) -> float:
    return op.n * np.finfo(float).eps * inf_norm(op)


def _check_seed(op, seed, m):
    seed = np.asarray(seed, dtype=float)
    if seed.shape != (op.n,):
        raise ValueError("seed length does not match operator")
    if not 1 <= m <= op.n:
        raise ValueError(f"Krylov dimension {m} outside [1, {op.n}]")
    beta = float(np.linalg.norm(seed))
    if beta == 0.0:
        raise ValueError("zero seed vector")
    return seed, beta


def arnoldi(op: LinearOperator, seed, m: int) -> KrylovBasis:
    """Arnoldi iteration with modified Gram-Schmidt."""
    seed, beta = _check_seed(op, seed, m)
    tol = breakdown_tolerance(op)
    V = np.zeros((op.n, m + 1))
    H = np.zeros((m + 1, m))
    V[:, 0] = seed / beta
    count = [0]
    for j in range(m):
        w = matvec(op, V[:, j], count)
        for i in range(j + 1):
            H[i, j] = V[:, i] @ w
            w -= H[i, j] * V[:, i]
        h = float(np.linalg.norm(w))
        if h <= tol:
            k = j + 1
            Vk = V[:, : k + 1].copy()
            Vk[:, k] = 0.0
            return KrylovBasis(Vk, H[:k, :k].copy(), h, beta, True, count[0])
        H[j + 1, j] = h
        V[:, j + 1] = w / h
    return KrylovBasis(V, H[:m, :m].copy(), float(H[m, m - 1]), beta, False, count[0])


def lanczos(op: LinearOperator, seed, m: int) -> KrylovBasis:
    """Symmetric Lanczos three-term recurrence; H comes back tridiagonal."""
    seed, beta = _check_seed(op, seed, m)
    tol = breakdown_tolerance(op)
    V = np.zeros((op.n, m + 1))
    T = np.zeros((m + 1, m))
    V[:, 0] = seed / beta
    count = [0]
    prev_off = 0.0
    for j in range(m):
        w = matvec(op, V[:, j], count)
        T[j, j] = V[:, j] @ w
        w -= T[j, j] * V[:, j]
        if j > 0:
            w -= prev_off * V[:, j - 1]
        h = float(np.linalg.norm(w))
        if h <= tol:
            k = j + 1
            Vk = V[:, : k + 1].copy()
            Vk[:, k] = 0.0
            return KrylovBasis(Vk, T[:k, :k].copy(), h, beta, True, count[0])
        T[j + 1, j] = h
        if j + 1 < m:
            T[j, j + 1] = h
        V[:, j + 1] = w / h
        prev_off = h
    return KrylovBasis(V, T[:m, :m].copy(), float(T[m, m - 1]), beta, False, count[0])


def augment(H, p: int) -> np.ndarray:
    """(m+p) x (m+p) matrix whose exponential carries phi_p(H) e_1 in the top
    m entries of its last column."""
    if p < 1:
        raise ValueError("augmentation needs p >= 1")
    H = np.asarray(H, dtype=float)
    m = H.shape[0]
    out = np.zeros((m + p, m + p))
    out[:m, :m] = H
    out[0, m] = 1.0
    for i in range(p - 1):
        out[m + i, m + i + 1] = 1.0
    return out


def phi_e1_pair(H, tau: float, p: int) -> tuple[np.ndarray, np.ndarray]:
    """Return (phi_p(tau H) e_1, phi_{p+1}(tau H) e_1) from one exponential."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    H = np.asarray(H, dtype=float)
    m = H.shape[0]
    E = densela.expm_pade13(augment(tau * H, p + 1))
    phi_next = E[:m, -1].copy()
    phi_p = E[:m, 0].copy() if p == 0 else E[:m, m + p - 1].copy()
    return phi_p, phi_next
