import math

import numpy as np
import pytest

from phipm.krylov import arnoldi, augment, lanczos, phi_e1_pair
from phipm.linops import LinearOperator, gen_laplacian1d, inf_norm
from phipm.oracle import phi_matrix, phi_series

from conftest import dense_op


def arnoldi_residual(a, basis):
    m = basis.m
    V = basis.V
    lhs = a @ V[:, :m]
    rhs = V[:, :m] @ basis.H
    rhs[:, m - 1] += basis.h_next * V[:, m]
    return np.abs(lhs - rhs).max()


def test_arnoldi_invariant_subspace():
    b = arnoldi(dense_op(np.diag([1.0, 2.0])), [1.0, 0.0], 2)
    assert b.breakdown and b.m == 1
    np.testing.assert_array_equal(b.H, [[1.0]])
    np.testing.assert_array_equal(b.v_next, [0.0, 0.0])


def test_arnoldi_nilpotent():
    b = arnoldi(dense_op([[0.0, 1.0], [0.0, 0.0]]), [0.0, 1.0], 2)
    np.testing.assert_array_equal(b.V[:, 0], [0.0, 1.0])
    np.testing.assert_array_equal(b.V[:, 1], [1.0, 0.0])
    np.testing.assert_array_equal(b.H, [[0.0, 0.0], [1.0, 0.0]])
    assert b.breakdown and b.m == 2


def test_arnoldi_first_vector(rng):
    a = rng.standard_normal((20, 20))
    seed = rng.standard_normal(20) * 3
    b = arnoldi(dense_op(a), seed, 5)
    assert b.beta == pytest.approx(np.linalg.norm(seed))
    np.testing.assert_allclose(b.V[:, 0], seed / np.linalg.norm(seed), rtol=1e-15)
    assert abs(np.linalg.norm(b.V[:, 0]) - 1) <= 1e-15


def test_arnoldi_zero_seed():
    with pytest.raises(ValueError):
        arnoldi(dense_op(np.eye(3)), np.zeros(3), 2)
    with pytest.raises(ValueError):
        lanczos(dense_op(np.eye(3)), np.zeros(3), 2)


@pytest.mark.parametrize("trial", range(10))
def test_arnoldi_orthonormal_and_relation(rng, trial):
    n = int(rng.integers(31, 101))
    m = int(rng.integers(1, 31))
    a = rng.standard_normal((n, n))
    b = arnoldi(dense_op(a), rng.standard_normal(n), m)
    V = b.V[:, : b.m + 1]
    G = V.T @ V
    off = G - np.diag(np.diag(G))
    assert np.abs(off).max() <= 1e-10
    assert np.abs(np.diag(G) - 1).max() <= 1e-12
    assert np.all(np.tril(b.H, -2) == 0)
    assert arnoldi_residual(a, b) <= 1e-10 * np.abs(a).sum(axis=1).max()
    assert b.matvecs == b.m


def test_lanczos_simple():
    b = lanczos(dense_op([[2.0]]), [1.0], 1)
    np.testing.assert_array_equal(b.H, [[2.0]])
    lap = LinearOperator.explicit(gen_laplacian1d(5))
    b = lanczos(lap, np.eye(5)[0], 3)
    assert b.H[0, 0] == -2.0


def test_lanczos_matches_arnoldi(rng):
    for _ in range(5):
        a = rng.standard_normal((30, 30))
        a = a + a.T
        seed = rng.standard_normal(30)
        ha = arnoldi(dense_op(a), seed, 10).H
        hl = lanczos(dense_op(a), seed, 10).H
        np.testing.assert_allclose(hl, ha, atol=1e-8)
        assert np.all(np.triu(hl, 2) == 0) and np.all(np.tril(hl, -2) == 0)
        np.testing.assert_allclose(hl, hl.T, atol=1e-10)


def test_full_dimension_exact(rng):
    n = 8
    a = rng.standard_normal((n, n))
    seed = rng.standard_normal(n)
    b = arnoldi(dense_op(a), seed, n)
    tau, p = 0.7, 2
    phi_p, _ = phi_e1_pair(b.H, tau, p)
    approx = b.beta * b.V[:, :n] @ phi_p
    ref = phi_matrix(tau * a, p) @ seed
    np.testing.assert_allclose(approx, ref, atol=1e-10 * np.abs(ref).max())


def test_augment_shapes():
    np.testing.assert_array_equal(augment([[3.0]], 1), [[3.0, 1.0], [0.0, 0.0]])
    np.testing.assert_array_equal(augment([[3.0]], 2), [[3.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 0.0]])
    h = np.array([[1.0, 2.0], [3.0, 4.0]])
    out = augment(h, 1)
    np.testing.assert_array_equal(out, [[1.0, 2.0, 1.0], [3.0, 4.0, 0.0], [0.0, 0.0, 0.0]])
    with pytest.raises(ValueError):
        augment(h, 0)


def test_phi_pair_scalars():
    p1, p2 = phi_e1_pair([[0.0]], 1.0, 1)
    assert p1[0] == pytest.approx(1.0) and p2[0] == pytest.approx(0.5)
    a = -0.7
    p0, p1 = phi_e1_pair([[a]], 1.0, 0)
    assert p0[0] == pytest.approx(math.exp(a), rel=1e-14)
    assert p1[0] == pytest.approx((math.exp(a) - 1) / a, rel=1e-14)
    p1, p2 = phi_e1_pair([[1.0]], 1.0, 1)
    assert p1[0] == pytest.approx(math.e - 1, rel=1e-14)
    assert p2[0] == pytest.approx(math.e - 2, rel=1e-14)


def test_phi_pair_matches_series(rng):
    for _ in range(40):
        m = int(rng.integers(1, 11))
        p = int(rng.integers(0, 5))
        h = rng.standard_normal((m, m))
        h *= rng.uniform(0.05, 2.0) / np.abs(h).sum(axis=0).max()
        tau = 1.0
        phi_p, phi_q = phi_e1_pair(h, tau, p)
        np.testing.assert_allclose(phi_p, phi_series(h, p)[:, 0], atol=1e-12)
        np.testing.assert_allclose(phi_q, phi_series(h, p + 1)[:, 0], atol=1e-12)
        # phi_p(H) e1 = H phi_{p+1}(H) e1 + e1/p!
        e1 = np.eye(m)[0]
        np.testing.assert_allclose(phi_p, h @ phi_q + e1 / math.factorial(p), atol=1e-11)


def test_breakdown_tolerance_uses_norm():
    op = dense_op(np.zeros((3, 3)))
    assert inf_norm(op) == 0
    b = arnoldi(op, np.ones(3), 3)
    assert b.breakdown and b.m == 1
