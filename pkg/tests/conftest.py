import numpy as np
import pytest

from accnest import problems, reference


def fd_gradient(value, x, h, chunk=256):
    """Central differences along every coordinate, batched through `value`."""
    n = x.shape[0]
    g = np.empty(n)
    for start in range(0, n, chunk):
        idx = np.arange(start, min(start + chunk, n))
        E = np.zeros((n, idx.size))
        E[idx, np.arange(idx.size)] = h
        fp = value(x[:, None] + E)
        fm = value(x[:, None] - E)
        g[idx] = (fp - fm) / (2.0 * h)
    return g


def rel_err(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300)


@pytest.fixture(scope="session")
def small_ridge():
    p = problems.ridge_build(problems.RidgeSpec(m=120, n=200, lam=1.0, seed=3))
    return p, reference.reference_solution(p)


@pytest.fixture(scope="session")
def small_bpdn():
    spec = problems.BpdnSpec(m=80, n=200, lam=0.05, tau_huber=1e-2, sigma_scvx=0.05,
                             nnz=8, seed=5)
    p = problems.bpdn_build(spec)
    return p, reference.reference_solution(p)


@pytest.fixture(scope="session")
def quad50():
    p = problems.quadratic_build(problems.QuadSpec(n=50, kappa=1e4, seed=7))
    return p, reference.reference_solution(p)


@pytest.fixture(scope="session")
def full_bowl():
    spec = problems.BowlSpec(n=500, tau_ball=4.0)
    p = problems.build(spec)
    return p, reference.reference_solution(p)


@pytest.fixture(scope="session")
def full_ridge():
    p = problems.build(problems.RidgeSpec())
    return p, reference.reference_solution(p)


@pytest.fixture(scope="session")
def full_bpdn():
    p = problems.build(problems.BpdnSpec())
    return p, reference.reference_solution(p)


# one line per acceptance criterion, echoed at the end of the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
