import itertools

import numpy as np
import pytest


def sparse_matrix(rng, shape, s):
    """Random matrix with ``s`` nonzeros at random positions, Gaussian values."""
    X = np.zeros(int(np.prod(shape)))
    idx = rng.choice(X.size, s, replace=False)
    X[idx] = rng.standard_normal(s)
    return X.reshape(shape, order="F")


def vertex_l1_oracle(A, y, tol=1e-9):
    """Exact optimal value of ``min ||z||_1 s.t. Az = y`` by vertex enumeration.

    The split LP in ``(z+, z-)`` attains its optimum at a basic feasible
    solution, whose support S has linearly independent columns A_S.  All such
    supports are enumerated; each gives the unique solution of A_S z = y.
    """
    A = np.asarray(A, float)
    m, N = A.shape
    r = np.linalg.matrix_rank(A)
    best = np.inf
    best_z = None
    if np.linalg.norm(y) == 0:
        return 0.0, np.zeros(N)
    for k in range(1, min(r, N) + 1):
        for S in itertools.combinations(range(N), k):
            AS = A[:, S]
            if np.linalg.matrix_rank(AS) < k:
                continue
            zs = np.linalg.lstsq(AS, y, rcond=None)[0]
            if np.linalg.norm(AS @ zs - y) > tol * max(1.0, np.linalg.norm(y)):
                continue
            v = np.abs(zs).sum()
            if v < best:
                best = v
                best_z = np.zeros(N)
                best_z[list(S)] = zs
    return best, best_z


def linprog_l1(A, y):
    """Optimal value of basis pursuit through the split LP solved by HiGHS."""
    from scipy.optimize import linprog

    m, N = A.shape
    res = linprog(np.ones(2 * N), A_eq=np.hstack([A, -A]), b_eq=y, bounds=(0, None), method="highs")
    assert res.status == 0
    return res.fun


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    """One line per acceptance criterion that ran, in criterion order."""
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
