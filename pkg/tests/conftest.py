import numpy as np
import pytest

from phipm.linops import LinearOperator, SparseMatrix

# one PASS/FAIL line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20101111)


def dense_op(a):
    return LinearOperator.explicit(SparseMatrix.from_dense(a))


class CountingOperator:
    """Wraps a dense matrix as a callback and counts products."""

    def __init__(self, a):
        self.a = np.asarray(a, dtype=float)
        self.calls = 0
        n = self.a.shape[0]
        self.op = LinearOperator.callback(
            self._apply, n, nnz_estimate=max(n, np.count_nonzero(self.a)),
            inf_norm_estimate=float(np.abs(self.a).sum(axis=1).max()),
        )

    def _apply(self, x):
        self.calls += 1
        return self.a @ x
