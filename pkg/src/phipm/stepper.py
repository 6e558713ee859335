"""Adaptive time-stepping driver for

    u(t) = phi_0(tA) b_0 + t phi_1(tA) b_1 + ... + t^p phi_p(tA) b_p.

Each step evaluates one phi_p(tau A) w_p product in a Krylov subspace; the
step size tau and the subspace dimension m are adapted together, picking
whichever change the flop-cost model says is cheaper.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from . import krylov
from .densela import scaling_exponent
from .linops import LinearOperator, as_operator, inf_norm, is_symmetric, matvec, one_norm


class SolverError(RuntimeError):
    """The integration could not reach t_end."""

    def __init__(self, message: str, t_reached: float = 0.0):
        super().__init__(message)
        self.t_reached = t_reached


@dataclass
class SolveOptions:
    t_end: float = 1.0
    tol: float = 1e-7
    symmetric: bool | None = None  # None: detect for explicit matrices
    m_init: int = 10
    m_max: int = 100
    fixed_m: int | None = None

    def __post_init__(self):
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not 1 <= self.m_init <= self.m_max:
            raise ValueError("need 1 <= m_init <= m_max")
        if self.fixed_m is not None and self.fixed_m < 1:
            raise ValueError("fixed_m must be at least 1")


@dataclass
class SolveStats:
    steps: int = 0
    rejections: int = 0
    matvecs: int = 0
    exponentials: int = 0

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ControllerConstants:
    gamma: float = 0.8
    delta: float = 1.2
    tau_shrink_max: float = 5.0
    tau_growth_max: float = 2.0
    m_shrink_factor: float = 0.75
    m_growth_factor: float = 4.0 / 3.0
    q_fraction: float = 0.25
    kappa_default: float = 2.0


@dataclass
class Attempt:
    """One pass through the inner loop, recorded when a trace list is given."""

    t: float
    tau: float
    m: int
    eps: float
    omega: float
    accepted: bool


@dataclass
class RejectionRecord:
    tau: float
    m: int
    eps: float
    q_hat: float | None  # only set when estimated from two attempts
    kappa_hat: float | None


def initial_tau(op: LinearOperator, ref, tol: float, m_init: int, m_max: int,
                t_end: float = 1.0) -> float:
    """Expokit-style first step, enlarged tenfold, clipped to (0, t_end]."""
    norm_a = inf_norm(op)
    ref_norm = float(np.max(np.abs(ref))) if np.size(ref) else 0.0
    if norm_a == 0.0 or ref_norm == 0.0:
        return t_end
    mbar = 0.5 * (m_init + m_max)
    # log of the bracketed quantity; the power overflows for large mbar
    log_inner = (math.log(tol) + (mbar + 1) * (math.log(mbar + 1) - 1.0)
                 + 0.5 * math.log(2 * math.pi * (mbar + 1))
                 - math.log(4 * norm_a * ref_norm))
    tau = 10.0 / norm_a * math.exp(log_inner / mbar)
    return min(tau, t_end)


def w_recurrence(op: LinearOperator, u, b, t_k: float, counter: list | None = None) -> list:
    """w_0 = u, w_j = A w_{j-1} + sum_{l=0}^{p-j} t_k^l/l! b_{j+l}."""
    B = np.asarray(b, dtype=float)
    p = B.shape[1] - 1
    w = [np.asarray(u, dtype=float)]
    for j in range(1, p + 1):
        wj = matvec(op, w[-1], counter)
        for ell in range(p - j + 1):
            wj = wj + (t_k**ell / math.factorial(ell)) * B[:, j + ell]
        w.append(wj)
    return w


def krylov_phi_step(op: LinearOperator, w_p, tau: float, p: int, m: int, symmetric: bool):
    """Corrected Krylov approximation F of phi_p(tau A) w_p and its error
    estimate eps.

    Returns ``(F, eps, basis)``; ``basis`` is None when w_p vanishes and no
    subspace was built.
    """
    w_p = np.asarray(w_p, dtype=float)
    if not np.any(w_p):
        return np.zeros(op.n), 0.0, None
    build = krylov.lanczos if symmetric else krylov.arnoldi
    basis = build(op, w_p, min(m, op.n))
    phi_p, phi_next = krylov.phi_e1_pair(basis.H, tau, p)
    F = basis.beta * (basis.V[:, : basis.m] @ phi_p)
    if basis.breakdown:
        return F, 0.0, basis
    # the basis for tau*A has coupling tau*h_{m+1,m}
    corr = basis.beta * tau * basis.h_next * phi_next[-1]
    F = F + corr * basis.v_next
    return F, abs(corr), basis


def assemble_step(w: list, F, tau: float) -> np.ndarray:
    """u_{k+1} = tau^p F + sum_{j<p} tau^j/j! w_j."""
    p = len(w) - 1
    u = tau**p * np.asarray(F, dtype=float)
    for j in range(p):
        u = u + (tau**j / math.factorial(j)) * w[j]
    return u


def omega(eps: float, tau: float, t_end: float, tol: float) -> float:
    denom = tau * tol
    if denom == 0.0:
        return math.inf if eps > 0 else 0.0
    return t_end * eps / denom


def _ratio_log(a: float, b: float) -> float | None:
    if a > 0 and b > 0 and a != b:
        return math.log(a / b)
    return None


def suggest_tau_m(tau: float, m: int, eps: float, omega_: float,
                  prev: RejectionRecord | None = None,
                  consts: ControllerConstants = ControllerConstants()):
    """Return ``(tau_new, m_new, q_est, kappa_est)``.

    ``q_est``/``kappa_est`` are the heuristic order and error-decay rate when
    they were estimated from two attempts (or carried over), else None.
    """
    q_est = None
    if prev is not None:
        if prev.tau > tau:
            num, den = _ratio_log(tau, prev.tau), _ratio_log(eps, prev.eps)
            if num is not None and den is not None:
                q = num / den - 1.0
                if math.isfinite(q) and q > -1.0:
                    q_est = q
        if q_est is None:
            q_est = prev.q_hat
    q_hat = q_est if q_est is not None else consts.q_fraction * m

    if omega_ > 0:
        tau_new = tau * (consts.gamma / omega_) ** (1.0 / (q_hat + 1.0))
    else:
        tau_new = math.inf

    kappa_est = None
    if prev is not None:
        if prev.m != m:
            lr = _ratio_log(eps, prev.eps)
            if lr is not None:
                k = math.exp(lr / (prev.m - m))
                if math.isfinite(k) and k > 1.0:
                    kappa_est = k
        if kappa_est is None:
            kappa_est = prev.kappa_hat
    kappa_hat = kappa_est if kappa_est is not None else consts.kappa_default

    if omega_ > 0:
        growth = math.log(omega_ / consts.gamma) / math.log(kappa_hat)
        m_new = m + math.ceil(growth) if math.isfinite(growth) else math.inf
    else:
        m_new = -math.inf
    return tau_new, m_new, q_est, kappa_est


def step_cost(m: int, p: int, n: int, nnz: int, symmetric: bool, H_norm1: float) -> float:
    """Flops for one step with subspace dimension m."""
    M = 44.0 / 3.0 + 2.0 * scaling_exponent(H_norm1)
    expo = M * (m + p + 1) ** 3
    if symmetric:
        return (m + p) * nnz + 3 * (m + p) * n + expo
    return (m + p) * nnz + (m * m + 3 * p + 2) * n + expo


def total_cost(remaining: float, tau: float, c1: float) -> float:
    steps = remaining / tau if tau > 0 else math.inf
    return math.ceil(steps) * c1 if math.isfinite(steps) else math.inf


def _clamp_tau(tau_new, tau, remaining, consts):
    return min(max(tau_new, tau / consts.tau_shrink_max), consts.tau_growth_max * tau, remaining)


def _clamp_m(m_new, m, m_max, consts):
    lo = max(math.floor(consts.m_shrink_factor * m), 1)
    hi = math.ceil(consts.m_growth_factor * m)
    return int(min(max(m_new, lo), hi, m_max))


def solve(op, b, opts: SolveOptions = SolveOptions(),
          consts: ControllerConstants = ControllerConstants(),
          trace: list | None = None):
    """Compute u(t_end) for the phi-function combination with columns of b.

    Returns ``(u, stats)``. Attempts are appended to ``trace`` when given.
    """
    op = as_operator(op)
    n = op.n
    B = np.asarray(b, dtype=float)
    if B.ndim == 1:
        B = B[:, None]
    if B.ndim != 2 or B.shape[0] != n:
        raise ValueError(f"b must have {n} rows")
    if not np.all(np.isfinite(B)):
        raise ValueError("b has non-finite entries")
    p = B.shape[1] - 1
    stats = SolveStats()
    if not np.any(B):
        return np.zeros(n), stats

    t_end, tol = opts.t_end, opts.tol
    symmetric = is_symmetric(op) if opts.symmetric is None else bool(opts.symmetric)
    adaptive_m = opts.fixed_m is None
    if adaptive_m:
        m_max = min(opts.m_max, n)
        m = min(opts.m_init, m_max)
        m_lo, m_hi = opts.m_init, opts.m_max
    else:
        m = m_max = min(opts.fixed_m, n)
        m_lo = m_hi = opts.fixed_m
    m_lo, m_hi = min(m_lo, n), min(m_hi, n)

    ref = B[:, 0]
    if not np.any(ref):
        ref = next(B[:, j] for j in range(p + 1) if np.any(B[:, j]))
    tau = initial_tau(op, ref, tol, m_lo, m_hi, t_end)

    counter = [0]
    t = 0.0
    u = B[:, 0].copy()
    done = False
    while not done:
        remaining = t_end - t
        tau = min(tau, remaining)
        w = w_recurrence(op, u, B, t, counter)
        prev = None
        while True:
            last = tau >= remaining
            if last:
                tau = remaining
            F, eps, basis = krylov_phi_step(op, w[p], tau, p, m, symmetric)
            if basis is not None:
                counter[0] += basis.matvecs
                stats.exponentials += 1
                aug_norm = one_norm(krylov.augment(tau * basis.H, p + 1))
            else:
                aug_norm = 0.0
            if not (math.isfinite(eps) and np.all(np.isfinite(F))):
                stats.matvecs = counter[0]
                raise SolverError(f"non-finite values at t = {t:g}", t)

            om = omega(eps, tau, t_end, tol)
            tau_new, m_new, q_est, k_est = suggest_tau_m(tau, m, eps, om, prev, consts)
            tau_cand = _clamp_tau(tau_new, tau, remaining, consts)
            change_m = False
            if adaptive_m:
                m_cand = _clamp_m(m_new, m, m_max, consts)
                cost_tau = total_cost(remaining, tau_cand,
                                      step_cost(m, p, n, op.nnz_estimate, symmetric, aug_norm))
                cost_m = total_cost(remaining, tau,
                                    step_cost(m_cand, p, n, op.nnz_estimate, symmetric, aug_norm))
                change_m = cost_tau >= cost_m and m_cand != m

            accepted = om <= consts.delta
            if trace is not None:
                trace.append(Attempt(t, tau, m, eps, om, accepted))

            if accepted:
                u = assemble_step(w, F, tau)
                stats.steps += 1
                if last:
                    t = t_end
                    done = True
                else:
                    t = t + tau
            else:
                stats.rejections += 1
                prev = RejectionRecord(tau, m, eps, q_est, k_est)

            if change_m:
                m = m_cand
            else:
                tau = tau_cand

            if accepted:
                break
            if tau < 1e-15 * t_end:
                stats.matvecs = counter[0]
                raise SolverError(f"step size underflow at t = {t:g}", t)

    stats.matvecs = counter[0]
    return u, stats


def phipm(t: float, A, b, tol: float = 1e-7, symm: bool | None = None, m: int = 10, **kwargs):
    """``u, stats = phipm(t, A, b, tol, symm, m)``.

    ``A`` may be a dense array, a scipy sparse matrix, a SparseMatrix or a
    LinearOperator; ``b`` holds b_0..b_p as columns. Remaining keyword
    arguments (``m_max``, ``fixed_m``) go to :class:`SolveOptions`; ``trace``
    and ``consts`` go to :func:`solve`.
    """
    trace = kwargs.pop("trace", None)
    consts = kwargs.pop("consts", ControllerConstants())
    m_max = kwargs.pop("m_max", 100)
    opts = SolveOptions(t_end=t, tol=tol, symmetric=symm, m_init=min(m, m_max),
                        m_max=m_max, **kwargs)
    return solve(A, b, opts, consts, trace)
