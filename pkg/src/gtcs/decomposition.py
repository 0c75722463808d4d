"""Rank-one decompositions of (measured) tensors.

A :class:`RankOneSum` stores ``sum_k w_k a_k^(1) o ... o a_k^(d)`` as one
factor matrix per mode (column ``k`` of ``factors[j]`` is ``a_k^(j+1)``) and
a weight vector.  The decompositions here return unit-norm factor columns
with the scale carried by the weights.
"""
import numpy as np

from .tensor import as_tensor, mode_n_product, mode_n_unfold, unvectorize

__all__ = [
    "RankOneSum",
    "TuckerFactors",
    "RankDeficientUpdate",
    "svd_rank_decomposition",
    "weak_tucker_decomposition",
    "hosvd",
    "hosvd_rank_one_terms",
    "cp_als",
    "reconstruct",
    "khatri_rao",
]

DEFAULT_TOL = 1e-10


class RankDeficientUpdate(np.linalg.LinAlgError):
    """A CP-ALS least-squares subproblem was singular."""


class RankOneSum:
    """Weighted sum of rank-one tensors.

    Parameters
    ----------
    factors : sequence of ndarray
        ``factors[j]`` has shape ``(shape[j], K)``.
    weights : array_like, optional
        Length-``K`` weights, default all ones.
    shape : tuple, optional
        Needed only when ``K == 0`` and no factors are given.
    """

    def __init__(self, factors, weights=None, shape=None):
        factors = [np.asarray(F, dtype=np.float64) for F in factors]
        if factors:
            if any(F.ndim != 2 for F in factors):
                raise ValueError("factors must be matrices")
            K = factors[0].shape[1]
            if any(F.shape[1] != K for F in factors):
                raise ValueError("factor matrices disagree on the number of terms")
            fshape = tuple(F.shape[0] for F in factors)
            if shape is not None and tuple(shape) != fshape:
                raise ValueError("factor lengths %s do not match shape %s" % (fshape, tuple(shape)))
            shape = fshape
        else:
            if shape is None:
                raise ValueError("shape is required for an empty sum without factors")
            shape = tuple(int(n) for n in shape)
            K = 0
            factors = [np.zeros((n, 0)) for n in shape]
        self.factors = factors
        self.weights = np.ones(K) if weights is None else np.asarray(weights, dtype=np.float64).ravel()
        if self.weights.shape != (K,):
            raise ValueError("need %d weights, got %d" % (K, self.weights.size))
        self.shape = tuple(shape)

    @property
    def rank(self):
        """Number of terms ``K``."""
        return self.weights.size

    @property
    def order(self):
        return len(self.shape)

    @property
    def terms(self):
        """List of ``K`` d-tuples of vectors."""
        return [tuple(F[:, k] for F in self.factors) for k in range(self.rank)]

    def truncate(self, R):
        """Keep the ``R`` terms of largest absolute weight, in their original order."""
        if R >= self.rank:
            return self
        keep = np.sort(np.argsort(-np.abs(self.weights), kind="stable")[:R])
        return RankOneSum([F[:, keep] for F in self.factors], self.weights[keep], self.shape)

    def __repr__(self):
        return "RankOneSum(shape=%s, K=%d)" % (self.shape, self.rank)


def khatri_rao(matrices):
    """Column-wise Kronecker product; the last matrix's row index varies fastest."""
    out = matrices[0]
    for M in matrices[1:]:
        out = (out[:, None, :] * M[None, :, :]).reshape(-1, out.shape[1])
    return out


def reconstruct(S):
    """Dense tensor ``sum_k w_k a_k^(1) o ... o a_k^(d)``."""
    if S.rank == 0:
        return np.zeros(S.shape)
    # vec(X) = (A_d kr ... kr A_1) w in column-major order
    vec = khatri_rao(S.factors[::-1]) @ S.weights
    return unvectorize(vec, S.shape)


def _support_svd(M):
    """Thin SVD of ``M`` computed on its nonzero rows and columns only.

    Exactly-zero rows (columns) of ``M`` stay exactly zero in the left (right)
    singular vectors, so sparsity survives the factorization.
    """
    rows = np.flatnonzero(np.any(M != 0, axis=1))
    cols = np.flatnonzero(np.any(M != 0, axis=0))
    r = min(rows.size, cols.size)
    U = np.zeros((M.shape[0], r))
    Vt = np.zeros((r, M.shape[1]))
    if r == 0:
        return U, np.zeros(0), Vt
    u, s, vt = np.linalg.svd(M[np.ix_(rows, cols)], full_matrices=False)
    U[rows] = u
    Vt[:, cols] = vt
    return U, s, Vt


def svd_rank_decomposition(Y, tol=DEFAULT_TOL):
    """Rank decomposition ``Y = sum_k s_k u_k v_k^T`` of a matrix by SVD.

    Terms with ``s_k <= tol * s_max`` are dropped, so ``K`` is the numerical rank.
    """
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim != 2:
        raise ValueError("svd_rank_decomposition needs a matrix")
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    U, s, Vt = _support_svd(Y)
    K = int(np.count_nonzero(s > tol * s[0])) if s.size else 0
    return RankOneSum([U[:, :K], Vt[:K].T], s[:K], Y.shape)


def weak_tucker_decomposition(Y, tol=DEFAULT_TOL):
    """Rank-one expansion by successive unfolding and SVD.

    ``Y_(1)`` is split by SVD into ``sum_j s_j c_j g_j^T``; every ``g_j`` is
    refolded into an order ``d-1`` tensor and treated the same way along its
    first mode, and so on down to vectors.  Every mode-``j`` vector lies in
    the column space of ``Y_(j)``; for an ``s``-sparse input each is
    ``s``-sparse and there are at most ``s**(d-1)`` terms.

    Branches whose accumulated weight is at most ``tol`` times the largest
    singular value of ``Y_(1)`` are pruned.  Terms come out in depth-first
    order.
    """
    Y = as_tensor(Y)
    if Y.ndim < 2:
        raise ValueError("weak_tucker_decomposition needs order >= 2")
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    d = Y.ndim
    cols = [[] for _ in range(d)]
    weights = []
    _, s0, _ = _support_svd(mode_n_unfold(Y, 1))
    if s0.size == 0 or s0[0] == 0:
        return RankOneSum([], shape=Y.shape)
    cutoff = tol * s0[0]

    def expand(T, prefix, w):
        U, s, Vt = _support_svd(mode_n_unfold(T, 1))
        for j in range(s.size):
            wj = w * s[j]
            if wj <= cutoff:
                continue
            if T.ndim == 2:
                vecs = prefix + [U[:, j], Vt[j]]
                for mode, v in enumerate(vecs):
                    cols[mode].append(v)
                weights.append(wj)
            else:
                expand(unvectorize(Vt[j], T.shape[1:]), prefix + [U[:, j]], wj)

    expand(Y, [], 1.0)
    if not weights:
        return RankOneSum([], shape=Y.shape)
    return RankOneSum([np.column_stack(c) for c in cols], np.array(weights), Y.shape)


class TuckerFactors:
    """Core tensor and orthogonal factors with ``X = core x_1 U_1 ... x_d U_d``."""

    def __init__(self, core, factors):
        self.core = np.asarray(core, dtype=np.float64)
        self.factors = [np.asarray(U, dtype=np.float64) for U in factors]
        if len(self.factors) != self.core.ndim:
            raise ValueError("need one factor per core mode")

    @property
    def shape(self):
        return tuple(U.shape[0] for U in self.factors)

    def reconstruct(self):
        X = self.core
        for n, U in enumerate(self.factors, start=1):
            X = mode_n_product(X, U, n)
        return X


def _complete_basis(U):
    """Extend orthonormal columns ``U`` (n x r) to an n x n orthogonal matrix."""
    n, r = U.shape
    if r == n:
        return U
    Q, _ = np.linalg.qr(np.hstack([U, np.eye(n)]))
    Q = Q[:, :n]
    Q[:, :r] = U
    return Q


def hosvd(X):
    """Higher-order SVD.

    ``U_n`` holds the left singular vectors of ``X_(n)`` (completed to a square
    orthogonal matrix when ``X_(n)`` has fewer columns than rows) and the core
    is ``X x_1 U_1^T ... x_d U_d^T``.
    """
    X = as_tensor(X)
    factors = []
    for n in range(1, X.ndim + 1):
        U, _, _ = np.linalg.svd(mode_n_unfold(X, n), full_matrices=False)
        factors.append(_complete_basis(U))
    core = X
    for n, U in enumerate(factors, start=1):
        core = mode_n_product(core, U.T, n)
    return TuckerFactors(core, factors)


def hosvd_rank_one_terms(T, tol=DEFAULT_TOL):
    """Expand a Tucker form into rank-one terms, one per significant core entry.

    Core entries with ``|entry| <= tol * max|core|`` are dropped; each kept
    entry ``(i_1, ..., i_d)`` becomes the term ``U_1[:, i_1] o ... o U_d[:, i_d]``
    weighted by the entry.  Terms follow the column-major order of the core.
    """
    core = T.core
    peak = np.max(np.abs(core)) if core.size else 0.0
    if peak == 0:
        return RankOneSum([], shape=T.shape)
    flat = np.reshape(core, -1, order="F")
    keep = np.flatnonzero(np.abs(flat) > tol * peak)
    idx = np.unravel_index(keep, core.shape, order="F")
    factors = [U[:, i] for U, i in zip(T.factors, idx)]
    return RankOneSum(factors, flat[keep], T.shape)


def _cp_init(X, R, seed, init):
    factors = []
    for n in range(1, X.ndim + 1):
        N = X.shape[n - 1]
        # one stream per (mode, column): the first r columns do not depend on R
        A = np.column_stack([
            np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(n, r))))
            .standard_normal(N)
            for r in range(R)
        ])
        if init == "svd":
            U, _, _ = np.linalg.svd(mode_n_unfold(X, n), full_matrices=False)
            k = min(R, U.shape[1])
            A[:, :k] = U[:, :k]
        elif init != "random":
            raise ValueError("init must be 'random' or 'svd'")
        factors.append(A)
    return factors


def _cp_residual(normX2, X1, A1, kr, lam, gram):
    # ||X - model||^2 = ||X||^2 - 2 <X, model> + ||model||^2
    inner = np.sum((X1 @ kr) * A1 * lam)
    model2 = lam @ gram @ lam
    return np.sqrt(max(normX2 - 2.0 * inner + model2, 0.0))


def cp_als(X, R, iters=200, seed=0, tol=1e-12, init="random", return_residuals=False):
    """CP decomposition ``X ~ [lambda; A_1, ..., A_d]`` by alternating least squares.

    Parameters
    ----------
    X : ndarray
    R : int
        Number of rank-one terms.
    iters : int
        Maximum number of sweeps.
    seed : int
        Seed of the Gaussian initialization.  Each factor column has its own
        stream, so runs with different ``R`` share their leading columns.
    tol : float
        Stop when the fit residual improves by less than ``tol * ||X||``.
    init : {'random', 'svd'}
        ``'svd'`` replaces the leading columns by left singular vectors of the
        unfoldings; for a matrix with ``R = rank`` this is a fixed point and
        reproduces the truncated SVD.
    return_residuals : bool
        Also return the residual ``||X - model||_F`` after every sweep.

    Raises
    ------
    RankDeficientUpdate
        If a Gram matrix of the least-squares subproblem is singular.
    """
    X = as_tensor(X)
    if int(R) != R or R < 1:
        raise ValueError("R must be a positive integer")
    R = int(R)
    d = X.ndim
    A = _cp_init(X, R, seed, init)
    lam = np.ones(R)
    normX2 = float(np.sum(X * X))
    unfolded = [mode_n_unfold(X, n) for n in range(1, d + 1)]
    residuals = []
    for _ in range(int(iters)):
        for n in range(d):
            others = [A[k] for k in range(d) if k != n]
            kr = khatri_rao(others[::-1]) if others else np.ones((1, R))
            V = np.ones((R, R))
            for F in others:
                V *= F.T @ F
            M = unfolded[n] @ kr
            if np.linalg.cond(V) > 1e13:
                raise RankDeficientUpdate("singular least-squares update in mode %d" % (n + 1))
            An = np.linalg.solve(V, M.T).T
            lam = np.linalg.norm(An, axis=0)
            if np.any(lam == 0):
                raise RankDeficientUpdate("factor column vanished in mode %d" % (n + 1))
            A[n] = An / lam
        gram = np.ones((R, R))
        for F in A:
            gram *= F.T @ F
        kr = khatri_rao(A[:d - 1][::-1]) if d > 1 else np.ones((1, R))
        res = _cp_residual(normX2, unfolded[d - 1], A[d - 1], kr, lam, gram)
        residuals.append(res)
        if len(residuals) > 1 and residuals[-2] - res <= tol * np.sqrt(normX2):
            break
    out = RankOneSum(A, lam, X.shape)
    return (out, residuals) if return_residuals else out
