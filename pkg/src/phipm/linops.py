"""Operators for the Krylov solver: CSR matrices, matrix-free callbacks,
Matrix Market I/O and the Laplacian test-matrix generators."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.sparse as sp


class MatrixMarketError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SparseMatrix:
    """Square real matrix in canonical CSR form.

    Column indices are strictly increasing within each row. Construct from
    triplets with :meth:`from_coo` when the input is unsorted.
    """

    n: int
    row_starts: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        rs = np.asarray(self.row_starts, dtype=np.int64)
        ci = np.asarray(self.col_indices, dtype=np.int64)
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "row_starts", rs)
        object.__setattr__(self, "col_indices", ci)
        object.__setattr__(self, "values", vals)

        if self.n < 0:
            raise ValueError("negative dimension")
        if rs.shape != (self.n + 1,):
            raise ValueError("row_starts must have length n+1")
        if rs[0] != 0 or rs[-1] != ci.size or ci.size != vals.size:
            raise ValueError("row_starts inconsistent with nnz")
        if np.any(np.diff(rs) < 0):
            raise ValueError("row_starts must be non-decreasing")
        if ci.size and (ci.min() < 0 or ci.max() >= self.n):
            raise ValueError("column index out of range")
        # strictly increasing columns inside each row
        if ci.size > 1:
            step = np.diff(ci)
            row_break = np.zeros(ci.size - 1, dtype=bool)
            inner = rs[1:-1]
            inner = inner[(inner > 0) & (inner < ci.size)]
            row_break[inner - 1] = True
            if np.any((step <= 0) & ~row_break):
                raise ValueError("column indices must be strictly increasing within a row")

    @property
    def nnz(self) -> int:
        return int(self.values.size)

    @classmethod
    def from_coo(cls, n: int, rows, cols, vals) -> "SparseMatrix":
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=float)
        if rows.size and (rows.min() < 0 or rows.max() >= n or cols.min() < 0 or cols.max() >= n):
            raise ValueError("index out of range")
        order = np.lexsort((cols, rows))
        rows, cols, vals = rows[order], cols[order], vals[order]
        if rows.size > 1:
            dup = (np.diff(rows) == 0) & (np.diff(cols) == 0)
            if np.any(dup):
                k = int(np.flatnonzero(dup)[0])
                raise ValueError(f"duplicate entry at ({rows[k]}, {cols[k]})")
        row_starts = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=n), out=row_starts[1:])
        return cls(n, row_starts, cols, vals)

    @classmethod
    def from_dense(cls, a) -> "SparseMatrix":
        a = np.asarray(a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("matrix must be square")
        rows, cols = np.nonzero(a)
        return cls.from_coo(a.shape[0], rows, cols, a[rows, cols])

    @classmethod
    def from_scipy(cls, m) -> "SparseMatrix":
        m = sp.csr_matrix(m)
        if m.shape[0] != m.shape[1]:
            raise ValueError("matrix must be square")
        m.sum_duplicates()
        m.sort_indices()
        return cls(m.shape[0], m.indptr, m.indices, m.data)

    @cached_property
    def _csr(self) -> sp.csr_matrix:
        return sp.csr_matrix(
            (self.values, self.col_indices, self.row_starts), shape=(self.n, self.n)
        )

    def to_scipy(self) -> sp.csr_matrix:
        return self._csr.copy()

    def toarray(self) -> np.ndarray:
        return self._csr.toarray()

    def __matmul__(self, x):
        return self._csr @ x

    def __neg__(self) -> "SparseMatrix":
        return SparseMatrix(self.n, self.row_starts, self.col_indices, -self.values)


@dataclass(frozen=True, eq=False)
class LinearOperator:
    """The matrix A of the phi-function combination.

    Either ``matrix`` is set (explicit CSR) or ``apply`` is a callable
    returning ``A @ x``. Callback operators must state ``nnz_estimate`` and
    ``inf_norm_estimate``; the step-cost model and the initial step size
    depend on both.
    """

    n: int
    matrix: SparseMatrix | None = None
    apply: Callable[[np.ndarray], np.ndarray] | None = field(default=None, repr=False)
    nnz_estimate: int = 0
    inf_norm_estimate: float | None = None

    @classmethod
    def explicit(cls, matrix: SparseMatrix) -> "LinearOperator":
        return cls(n=matrix.n, matrix=matrix, nnz_estimate=matrix.nnz)

    @classmethod
    def callback(cls, apply, n: int, nnz_estimate: int, inf_norm_estimate: float) -> "LinearOperator":
        if nnz_estimate is None or inf_norm_estimate is None:
            raise ValueError("callback operators need nnz_estimate and inf_norm_estimate")
        if nnz_estimate < n:
            raise ValueError("nnz_estimate must be at least n")
        if inf_norm_estimate < 0:
            raise ValueError("inf_norm_estimate must be nonnegative")
        return cls(n=n, apply=apply, nnz_estimate=int(nnz_estimate),
                   inf_norm_estimate=float(inf_norm_estimate))

    @property
    def is_callback(self) -> bool:
        return self.matrix is None


def as_operator(a) -> LinearOperator:
    """Coerce a dense array, scipy sparse matrix or SparseMatrix to an operator."""
    if isinstance(a, LinearOperator):
        return a
    if isinstance(a, SparseMatrix):
        return LinearOperator.explicit(a)
    if sp.issparse(a):
        return LinearOperator.explicit(SparseMatrix.from_scipy(a))
    return LinearOperator.explicit(SparseMatrix.from_dense(a))


def matvec(op: LinearOperator, x, counter: list | None = None) -> np.ndarray:
    """Return ``A @ x``; ``counter[0]`` is incremented when given."""
    x = np.asarray(x, dtype=float)
    if x.shape != (op.n,):
        raise ValueError(f"vector of length {x.shape} does not match operator of size {op.n}")
    if op.matrix is not None:
        y = op.matrix @ x
    else:
        y = np.asarray(op.apply(x), dtype=float)
        if y.shape != (op.n,):
            raise ValueError("callback returned a vector of the wrong length")
    if counter is not None:
        counter[0] += 1
    return y


def inf_norm(op: LinearOperator) -> float:
    if op.matrix is None:
        if op.inf_norm_estimate is None:
            raise ValueError("callback operator carries no infinity-norm estimate")
        return op.inf_norm_estimate
    m = op.matrix
    if m.n == 0 or m.nnz == 0:
        return 0.0
    row_sums = np.add.reduceat(np.abs(m.values), m.row_starts[:-1][np.diff(m.row_starts) > 0])
    return float(row_sums.max())


def one_norm(mat) -> float:
    mat = np.asarray(mat, dtype=float)
    if mat.size == 0:
        return 0.0
    return float(np.abs(mat).sum(axis=0).max())


def is_symmetric(op: LinearOperator) -> bool:
    """Exact (bitwise) symmetry of an explicit matrix; callbacks are never
    treated as symmetric."""
    if op.matrix is None:
        return False
    m = op.matrix
    t = m._csr.T.tocsr()
    t.sort_indices()
    return (
        np.array_equal(t.indptr, m.row_starts)
        and np.array_equal(t.indices, m.col_indices)
        and np.array_equal(t.data, m.values)
    )


def read_matrix_market(path) -> SparseMatrix:
    text = Path(path).read_text()
    lines = text.splitlines()
    if not lines:
        raise MatrixMarketError("empty file")
    header = lines[0].split()
    if len(header) != 5 or header[0].lower() != "%%matrixmarket":
        raise MatrixMarketError(f"malformed header: {lines[0]!r}")
    obj, fmt, fld, symm = (h.lower() for h in header[1:])
    if obj != "matrix" or fmt != "coordinate":
        raise MatrixMarketError("only 'matrix coordinate' files are supported")
    if fld not in ("real", "integer"):
        raise MatrixMarketError(f"unsupported field {fld!r}")
    if symm not in ("general", "symmetric"):
        raise MatrixMarketError(f"unsupported symmetry {symm!r}")

    body = (ln for ln in lines[1:] if ln.strip() and not ln.lstrip().startswith("%"))
    try:
        size = next(body).split()
    except StopIteration:
        raise MatrixMarketError("missing size line") from None
    if len(size) != 3:
        raise MatrixMarketError("malformed size line")
    nrows, ncols, nnz = (int(s) for s in size)
    if nrows != ncols:
        raise MatrixMarketError("matrix must be square")

    rows, cols, vals = [], [], []
    for ln in body:
        parts = ln.split()
        if len(parts) != 3:
            raise MatrixMarketError(f"malformed entry line: {ln!r}")
        i, j, v = int(parts[0]), int(parts[1]), float(parts[2])
        if not (1 <= i <= nrows and 1 <= j <= ncols):
            raise MatrixMarketError(f"index ({i}, {j}) out of range")
        if symm == "symmetric" and j > i:
            raise MatrixMarketError("symmetric storage must hold the lower triangle only")
        rows.append(i - 1)
        cols.append(j - 1)
        vals.append(v)
    if len(vals) != nnz:
        raise MatrixMarketError(f"expected {nnz} entries, found {len(vals)}")

    rows = np.array(rows, dtype=np.int64)
    cols = np.array(cols, dtype=np.int64)
    vals = np.array(vals, dtype=float)
    if symm == "symmetric":
        off = rows != cols
        rows, cols, vals = (
            np.concatenate([rows, cols[off]]),
            np.concatenate([cols, rows[off]]),
            np.concatenate([vals, vals[off]]),
        )
    try:
        return SparseMatrix.from_coo(nrows, rows, cols, vals)
    except ValueError as exc:
        raise MatrixMarketError(str(exc)) from None


def format_matrix_market(mat: SparseMatrix, comment: str | None = None) -> str:
    """Coordinate-format text for ``mat``. Values use repr(), which reads back
    to the same double."""
    out = ["%%MatrixMarket matrix coordinate real general"]
    if comment:
        out.extend("% " + c for c in comment.splitlines())
    out.append(f"{mat.n} {mat.n} {mat.nnz}")
    for i in range(mat.n):
        for k in range(mat.row_starts[i], mat.row_starts[i + 1]):
            out.append(f"{i + 1} {mat.col_indices[k] + 1} {float(mat.values[k])!r}")
    return "\n".join(out) + "\n"


def write_matrix_market(path, mat: SparseMatrix, comment: str | None = None) -> None:
    Path(path).write_text(format_matrix_market(mat, comment))


def gen_laplacian9(grid: int, h: float = 1.0, negate: bool = False) -> SparseMatrix:
    """Nine-point Laplacian on a ``grid`` x ``grid`` mesh, Dirichlet truncated.

    Stencil (1/(6h^2)) [1 4 1; 4 -20 4; 1 4 1]; ``negate`` flips the sign.
    """
    if grid < 1:
        raise ValueError("grid size must be at least 1")
    if h <= 0:
        raise ValueError("h must be positive")
    N = grid
    scale = 1.0 / (6.0 * h * h)
    if negate:
        scale = -scale
    stencil = {(-1, -1): 1, (-1, 0): 4, (-1, 1): 1,
               (0, -1): 4, (0, 0): -20, (0, 1): 4,
               (1, -1): 1, (1, 0): 4, (1, 1): 1}
    ii, jj = np.meshgrid(np.arange(N), np.arange(N), indexing="ij")
    ii, jj = ii.ravel(), jj.ravel()
    rows, cols, vals = [], [], []
    for (di, dj), w in stencil.items():
        ni, nj = ii + di, jj + dj
        ok = (ni >= 0) & (ni < N) & (nj >= 0) & (nj < N)
        rows.append(ii[ok] * N + jj[ok])
        cols.append(ni[ok] * N + nj[ok])
        vals.append(np.full(ok.sum(), w * scale))
    return SparseMatrix.from_coo(N * N, np.concatenate(rows), np.concatenate(cols),
                                 np.concatenate(vals))


def gen_laplacian1d(n: int, h: float = 1.0, negate: bool = False) -> SparseMatrix:
    """Tridiagonal (1/h^2)[1, -2, 1] with Dirichlet ends."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if h <= 0:
        raise ValueError("h must be positive")
    scale = (-1.0 if negate else 1.0) / (h * h)
    m = sp.diags([np.ones(n - 1), -2.0 * np.ones(n), np.ones(n - 1)], [-1, 0, 1],
                 shape=(n, n), format="csr") * scale
    return SparseMatrix.from_scipy(m)


def read_vectors(path) -> np.ndarray:
    """Read whitespace-delimited columns; returns an (n, k) array."""
    data = np.loadtxt(path, dtype=float, ndmin=2)
    return data


def write_vector(path, x) -> None:
    Path(path).write_text("".join(f"{v:.17g}\n" for v in np.asarray(x, dtype=float)))
