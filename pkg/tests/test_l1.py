import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gtcs.l1 import (
    InfeasibleSystem,
    NonConvergence,
    NonOrthonormalBasis,
    SolverConfig,
    SolverStats,
    basis_pursuit,
    basis_pursuit_denoise,
    basis_pursuit_synthesis,
    merge_stats,
)
from gtcs.harness import dct_basis

from conftest import linprog_l1, vertex_l1_oracle

# C_2 at delta_2s = 0.2, evaluated to 30 digits with mpmath
C2_AT_0_2 = 8.472819712177565


def gaussian_instance(seed, m=20, N=50, s=3):
    r = np.random.default_rng(seed)
    A = r.standard_normal((m, N)) / np.sqrt(m)
    z0 = np.zeros(N)
    z0[r.choice(N, s, replace=False)] = r.standard_normal(s)
    return A, z0


def test_identity_pins_solution(rng):
    y = rng.standard_normal(7)
    z, st_ = basis_pursuit(np.eye(7), y)
    assert np.allclose(z, y, atol=1e-12)
    assert st_.converged


def test_one_row_minimum():
    z, _ = basis_pursuit(np.array([[1.0, 1.0]]), np.array([1.0]))
    assert abs(z.sum() - 1.0) < 1e-9
    assert abs(np.abs(z).sum() - 1.0) < 1e-6


@pytest.mark.parametrize("seed", range(5))
def test_sparse_recovery_20x50(seed):
    A, z0 = gaussian_instance(seed)
    y = A @ z0
    # the LP oracle confirms z0 is the l1 minimizer before we ask for it
    assert abs(linprog_l1(A, y) - np.abs(z0).sum()) < 1e-7
    z, st_ = basis_pursuit(A, y)
    assert np.linalg.norm(z - z0) <= 1e-6 * np.linalg.norm(z0)
    assert st_.certified == 1


def test_constraint_residual_bound(rng):
    A = rng.standard_normal((10, 30))
    y = rng.standard_normal(10) * 50
    cfg = SolverConfig()
    z, st_ = basis_pursuit(A, y, cfg)
    assert np.linalg.norm(A @ z - y) <= cfg.termination_tol * max(1.0, np.linalg.norm(y))
    assert abs(np.abs(z).sum() - linprog_l1(A, y)) <= 1e-6 * np.abs(z).sum()


def test_batched_columns_match_single(rng):
    A = rng.standard_normal((8, 16))
    Z0 = np.zeros((16, 5))
    for j in range(5):
        Z0[rng.choice(16, 2, replace=False), j] = rng.standard_normal(2)
    Y = A @ Z0
    Y[:, 2] = 0.0
    Z, st_ = basis_pursuit(A, Y)
    assert Z.shape == (16, 5) and st_.columns == 5
    assert np.all(Z[:, 2] == 0)
    for j in (0, 1, 3, 4):
        zj, _ = basis_pursuit(A, Y[:, j])
        assert np.allclose(Z[:, j], zj, atol=1e-10)


def test_deterministic(rng):
    A = rng.standard_normal((12, 30))
    y = rng.standard_normal(12)
    z1, s1 = basis_pursuit(A, y)
    z2, s2 = basis_pursuit(A, y)
    assert np.array_equal(z1, z2) and s1 == s2


@pytest.mark.parametrize("alpha", [-3.0, 1e-5, 250.0])
def test_scaling(alpha):
    A, z0 = gaussian_instance(7, m=12, N=30, s=4)
    y = A @ z0 + 0.3 * np.random.default_rng(1).standard_normal(12)
    z, _ = basis_pursuit(A, y)
    za, _ = basis_pursuit(A, alpha * y)
    assert np.allclose(za, alpha * z, atol=1e-6 * abs(alpha) * np.abs(z).max())


def test_infeasible():
    A = np.array([[1.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
    with pytest.raises(InfeasibleSystem) as exc:
        basis_pursuit(A, np.array([1.0, 2.0]))
    assert list(exc.value.columns) == [0]


def test_rank_deficient_but_consistent():
    A = np.array([[1.0, 2.0, 0.0], [2.0, 4.0, 0.0]])
    z, _ = basis_pursuit(A, np.array([2.0, 4.0]))
    assert abs(np.abs(z).sum() - 1.0) < 1e-6


def test_nonconvergence_carries_iterate():
    A, z0 = gaussian_instance(3, m=10, N=40, s=8)
    cfg = SolverConfig(max_iters=2)
    with pytest.raises(NonConvergence) as exc:
        basis_pursuit(A, A @ z0, cfg)
    e = exc.value
    assert e.solution.shape == (40,)
    assert not e.stats.converged and e.stats.iterations <= 2


def test_config_validation_and_keys():
    with pytest.raises(ValueError):
        SolverConfig(termination_tol=0)
    with pytest.raises(ValueError):
        SolverConfig(max_iters=0)
    with pytest.raises(ValueError):
        SolverConfig(penalty=-1)
    with pytest.raises(ValueError):
        SolverConfig(denoise_radius=-1e-3)
    cfg = SolverConfig(1e-7, 500, 2.0, 0.1)
    assert cfg.to_dict() == {"tol": 1e-7, "max_iters": 500, "penalty": 2.0, "epsilon": 0.1}
    assert SolverConfig.from_dict(cfg.to_dict()) == cfg


def test_merge_stats():
    s = merge_stats([SolverStats(10, 1e-9, True, 1, 1), SolverStats(30, 1e-7, False, 0, 2)])
    assert s == SolverStats(30, 1e-7, False, 1, 3)
    assert merge_stats([]).converged


# -- oracle equivalence on small instances -------------------------------

@settings(max_examples=40, deadline=None)
@given(st.integers(2, 9), st.integers(1, 12), st.integers(0, 2 ** 31), st.booleans())
def test_matches_vertex_oracle(N, m, seed, sparse):
    r = np.random.default_rng(seed)
    m = min(m, N + 3)
    A = r.standard_normal((m, N))
    if sparse:
        z0 = np.zeros(N)
        z0[r.choice(N, max(1, N // 3), replace=False)] = r.standard_normal(max(1, N // 3))
    else:
        z0 = r.standard_normal(N)
    y = A @ z0
    opt, _ = vertex_l1_oracle(A, y)
    z, st_ = basis_pursuit(A, y)
    assert st_.converged
    assert abs(np.abs(z).sum() - opt) <= 1e-6 * max(1.0, opt)
    assert np.linalg.norm(A @ z - y) <= 1e-6 * max(1.0, np.linalg.norm(y))


def test_vertex_oracle_agrees_with_linprog(rng):
    # the two oracles are independent routes to the same optimum
    for _ in range(10):
        A = rng.standard_normal((5, 9))
        y = rng.standard_normal(5)
        assert abs(vertex_l1_oracle(A, y)[0] - linprog_l1(A, y)) < 1e-8


# -- denoising -----------------------------------------------------------

def test_denoise_large_radius_gives_zero(rng):
    A = rng.standard_normal((5, 10))
    y = rng.standard_normal(5)
    f, st_ = basis_pursuit_denoise(A, y, np.linalg.norm(y) * 1.01)
    assert np.all(f == 0) and st_.converged


def test_denoise_zero_radius_is_bp():
    A, z0 = gaussian_instance(0)
    f, _ = basis_pursuit_denoise(A, A @ z0, 0.0)
    z, _ = basis_pursuit(A, A @ z0)
    assert np.allclose(f, z, atol=1e-6)


@pytest.mark.parametrize("seed", range(5))
def test_denoise_error_bound(seed):
    A, z0 = gaussian_instance(seed)
    e = np.random.default_rng(100 + seed).standard_normal(20)
    eps = 1e-3
    e *= eps / np.linalg.norm(e)
    cfg = SolverConfig()
    f, st_ = basis_pursuit_denoise(A, A @ z0 + e, eps, cfg)
    assert st_.converged
    assert np.linalg.norm(A @ f - (A @ z0 + e)) <= eps + cfg.termination_tol
    assert np.linalg.norm(f - z0) <= C2_AT_0_2 * eps


def test_denoise_optimal_value_against_cvxpy(rng):
    cp = pytest.importorskip("cvxpy")
    for _ in range(3):
        A = rng.standard_normal((8, 20))
        y = rng.standard_normal(8)
        eps = 0.3 * np.linalg.norm(y)
        f, _ = basis_pursuit_denoise(A, y, eps)
        x = cp.Variable(20)
        prob = cp.Problem(cp.Minimize(cp.norm1(x)), [cp.norm2(A @ x - y) <= eps])
        prob.solve()
        assert abs(np.abs(f).sum() - prob.value) <= 1e-5 * prob.value


def test_denoise_default_radius_from_config(rng):
    A = rng.standard_normal((5, 10))
    y = rng.standard_normal(5)
    f, _ = basis_pursuit_denoise(A, y, cfg=SolverConfig(denoise_radius=10 * np.linalg.norm(y)))
    assert np.all(f == 0)


# -- synthesis -----------------------------------------------------------

def test_synthesis_identity_basis():
    A, z0 = gaussian_instance(2)
    x, g, _ = basis_pursuit_synthesis(A, np.eye(50), A @ z0)
    assert np.allclose(x, z0, atol=1e-8) and np.allclose(g, x)


def test_synthesis_dct_constant_signal(rng):
    N = 32
    Phi = dct_basis(N)
    x0 = np.full(N, 2.0)
    A = rng.standard_normal((4, N)) / 2.0
    x, g, _ = basis_pursuit_synthesis(A, Phi, A @ x0)
    assert np.count_nonzero(np.abs(g) > 1e-9) == 1
    assert np.allclose(x, x0, atol=1e-8)


def test_synthesis_sparse_in_basis():
    A, g0 = gaussian_instance(4)
    Phi = np.linalg.qr(np.random.default_rng(4).standard_normal((50, 50)))[0]
    x, g, _ = basis_pursuit_synthesis(A, Phi, A @ Phi @ g0)
    assert np.linalg.norm(x - Phi @ g0) <= 1e-6 * np.linalg.norm(g0)


def test_synthesis_rejects_non_orthonormal():
    with pytest.raises(NonOrthonormalBasis):
        basis_pursuit_synthesis(np.eye(3), 2 * np.eye(3), np.ones(3))
    with pytest.raises(NonOrthonormalBasis):
        basis_pursuit_synthesis(np.eye(3), np.ones((3, 2)), np.ones(3))
