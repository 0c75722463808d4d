"""Dense tensors and the multilinear primitives everything else builds on.

Tensors are plain :class:`numpy.ndarray` objects of dtype ``float64``.  The
*linear* layout used by :func:`vectorize`, :func:`mode_n_unfold` and the GTCS1
file format is column-major (first index varies fastest), which is what makes

    vectorize(X x_1 U_1 ... x_d U_d) == (U_d kron ... kron U_1) @ vectorize(X)

hold without a permutation.  The in-memory numpy order is irrelevant: every
function here goes through ``order="F"`` explicitly.

Modes are numbered from 1 to ``d``, as in the usual multilinear notation.

Unfolding convention, worked on a 2x2x2 tensor with
``X[i, j, k] = 4(i-1) + 2(j-1) + k`` (1-based)::

    mode_n_unfold(X, 1) == [[1, 3, 2, 4],
                            [5, 7, 6, 8]]

Column ``c`` of the mode-``n`` unfolding holds the fiber whose remaining
indices ``(i_1, ..., i_{n-1}, i_{n+1}, ..., i_d)`` enumerate ``c`` with
``i_1`` varying fastest.
"""
from functools import reduce

import numpy as np

__all__ = [
    "as_tensor",
    "kronecker",
    "outer_product",
    "mode_n_unfold",
    "mode_n_fold",
    "mode_n_product",
    "multi_mode_product",
    "vectorize",
    "unvectorize",
    "sparsity",
]


def as_tensor(X):
    """Validate and convert ``X`` to a finite float64 array of order >= 1."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 0:
        X = X.reshape(1)
    if X.size == 0 or min(X.shape) < 1:
        raise ValueError("tensor dimensions must all be >= 1, got %s" % (X.shape,))
    if not np.all(np.isfinite(X)):
        raise ValueError("tensor entries must be finite")
    return X


def _check_mode(n, d):
    if not (1 <= n <= d):
        raise ValueError("mode %r out of range for an order-%d tensor" % (n, d))
    return n - 1


def _as_matrix(A, name):
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise ValueError("%s must be a matrix, got shape %s" % (name, A.shape))
    return A


def kronecker(A, B):
    """Kronecker product; block ``(p, q)`` of the result is ``A[p, q] * B``."""
    return np.kron(_as_matrix(A, "A"), _as_matrix(B, "B"))


def outer_product(vectors):
    """Tensor product ``v_1 o v_2 o ... o v_d`` of a sequence of vectors.

    Entry ``(i_1, ..., i_d)`` of the result is ``prod_j vectors[j][i_j]``.
    """
    vectors = [np.asarray(v, dtype=np.float64).ravel() for v in vectors]
    if not vectors:
        raise ValueError("need at least one vector")
    if any(v.size == 0 for v in vectors):
        raise ValueError("vectors must be nonempty")
    return reduce(np.multiply.outer, vectors)


def mode_n_unfold(X, n):
    """Mode-``n`` unfolding ``X_(n)``, an ``N_n x prod_{k != n} N_k`` matrix.

    Parameters
    ----------
    X : ndarray
        Tensor of order ``d``.
    n : int
        Mode, ``1 <= n <= d``.

    Returns
    -------
    ndarray
        The unfolding; its columns are the mode-``n`` fibers ordered with the
        lowest remaining mode varying fastest.
    """
    X = np.asarray(X, dtype=np.float64)
    ax = _check_mode(n, X.ndim)
    return np.reshape(np.moveaxis(X, ax, 0), (X.shape[ax], -1), order="F")


def mode_n_fold(M, n, shape):
    """Inverse of :func:`mode_n_unfold` for a tensor of the given ``shape``."""
    M = _as_matrix(M, "M")
    shape = tuple(int(s) for s in shape)
    ax = _check_mode(n, len(shape))
    rest = shape[:ax] + shape[ax + 1:]
    if M.shape != (shape[ax], int(np.prod(rest, dtype=np.int64))):
        raise ValueError(
            "matrix of shape %s cannot be folded into %s along mode %d"
            % (M.shape, shape, n)
        )
    T = np.reshape(M, (shape[ax],) + rest, order="F")
    return np.moveaxis(T, 0, ax)


def mode_n_product(X, U, n):
    """Mode-``n`` product ``X x_n U``.

    ``U`` is ``J x N_n``; the result has ``N_n`` replaced by ``J``.  A
    singleton result mode is kept, so the order never changes.
    """
    X = np.asarray(X, dtype=np.float64)
    U = _as_matrix(U, "U")
    ax = _check_mode(n, X.ndim)
    if U.shape[1] != X.shape[ax]:
        raise ValueError(
            "inner dimensions differ: U is %s, mode %d of X has size %d"
            % (U.shape, n, X.shape[ax])
        )
    return np.moveaxis(np.tensordot(U, X, axes=(1, ax)), 0, ax)


def multi_mode_product(X, matrices, modes=None):
    """Apply ``X x_{modes[0]} matrices[0] x ...`` in the given mode order.

    With ``modes=None`` the matrices are applied to modes ``1..len(matrices)``.
    """
    if modes is None:
        modes = range(1, len(matrices) + 1)
    modes = list(modes)
    if len(modes) != len(matrices):
        raise ValueError("need one mode per matrix")
    for U, n in zip(matrices, modes):
        X = mode_n_product(X, U, n)
    return X


def vectorize(X):
    """Column-major vectorization (first index fastest)."""
    return np.reshape(np.asarray(X, dtype=np.float64), -1, order="F")


def unvectorize(x, shape):
    """Inverse of :func:`vectorize`."""
    return np.reshape(np.asarray(x, dtype=np.float64), tuple(shape), order="F")


def sparsity(X, tol=0.0):
    """Number of entries of ``X`` with magnitude strictly above ``tol``."""
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    return int(np.count_nonzero(np.abs(np.asarray(X)) > tol))
