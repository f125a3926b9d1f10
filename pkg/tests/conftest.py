import numpy as np
import pytest

from qnls import PolynomialSystem, SparseMatrix, evaluate

acceptance_lines: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_lines:
            terminalreporter.write_line(line)


@pytest.fixture
def diag_system():
    """Canonical 2-variable quadratic system f_i = x_i^2 / 2."""
    a1 = SparseMatrix.from_dense(np.diag([1.0, 0.0]))
    a2 = SparseMatrix.from_dense(np.diag([0.0, 1.0]))
    return PolynomialSystem(2, 1, 1, (a1, a2))


def fd_gradient(system, i, x, h=1e-5):
    """Central finite differences of f_i, the pre-build gradient oracle."""
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros_like(x)
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h
        out[k] = (evaluate(system, x + e)[i] - evaluate(system, x - e)[i]) / (2 * h)
    return out


def fd_gradient_scalar(fun, x, h=1e-5):
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros_like(x)
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h
        out[k] = (fun(x + e) - fun(x - e)) / (2 * h)
    return out
