"""Basis pursuit and basis pursuit denoising by ADMM.

Both solvers accept a single right-hand side ``y`` (vector) or several at once
(an ``m x n`` matrix whose columns are independent problems sharing ``A``).
Batching is how the recovery procedures keep per-fiber solves cheap.

Every column is solved on a normalized copy (``y / ||y||``) and rescaled, so
the tolerances are relative and ``basis_pursuit(A, a * y) == a * basis_pursuit(A, y)``.

Besides the usual primal/dual residual test, the iteration periodically
polishes the current support by least squares and checks the KKT conditions
of the resulting point exactly.  A column whose polished point passes is
*certified* optimal and leaves the iteration early; this is what gives
solutions accurate to rounding error instead of to ``termination_tol``.
"""
from dataclasses import dataclass

import numpy as np

__all__ = [
    "SolverConfig",
    "SolverStats",
    "SolverError",
    "NonConvergence",
    "InfeasibleSystem",
    "NonOrthonormalBasis",
    "basis_pursuit",
    "basis_pursuit_denoise",
    "basis_pursuit_synthesis",
    "merge_stats",
]

# over-relaxation of the ADMM x-update
RELAXATION = 1.6
# residual test and certificate attempt every CHECK_EVERY iterations
CHECK_EVERY = 10
# relative distance of y from range(A) above which a system is infeasible
INFEASIBLE_TOL = 1e-8
# relative singular value cutoff for the rank of A
RANK_TOL = 1e-10
# slack on the dual feasibility test of the optimality certificate
DUAL_SLACK = 1e-9
# residual balancing: rescale the penalty by BALANCE_STEP when one residual
# exceeds the other by more than BALANCE_RATIO
BALANCE_RATIO = 10.0
BALANCE_STEP = 2.0
# a drop of |z| by this factor between consecutive sorted entries marks a
# candidate support for the certificate
SUPPORT_DROP = 1e-3


@dataclass(frozen=True)
class SolverConfig:
    """Tolerances of the l1 solvers.

    ``termination_tol`` bounds both ADMM residuals of the normalized problem;
    ``penalty`` is the augmented-Lagrangian weight; ``denoise_radius`` is the
    default noise radius of :func:`basis_pursuit_denoise`.
    """

    termination_tol: float = 1e-6
    max_iters: int = 10000
    penalty: float = 1.0
    denoise_radius: float = 0.0

    def __post_init__(self):
        if not self.termination_tol > 0:
            raise ValueError("termination_tol must be positive")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise ValueError("max_iters must be a positive integer")
        if not self.penalty > 0:
            raise ValueError("penalty must be positive")
        if not self.denoise_radius >= 0:
            raise ValueError("denoise_radius must be nonnegative")

    def to_dict(self):
        return {
            "tol": self.termination_tol,
            "max_iters": int(self.max_iters),
            "penalty": self.penalty,
            "epsilon": self.denoise_radius,
        }

    @classmethod
    def from_dict(cls, d):
        """Build from the config-file keys ``tol``, ``max_iters``, ``penalty``, ``epsilon``."""
        kw = {}
        for key, field in (("tol", "termination_tol"), ("max_iters", "max_iters"),
                           ("penalty", "penalty"), ("epsilon", "denoise_radius")):
            if key in d and d[key] is not None:
                kw[field] = d[key]
        if "max_iters" in kw:
            kw["max_iters"] = int(kw["max_iters"])
        return cls(**kw)


@dataclass(frozen=True)
class SolverStats:
    """Diagnostics of one solver call (aggregated over its columns).

    ``iterations`` is the largest iteration count of any column,
    ``final_residual`` the largest normalized residual, ``converged`` whether
    every column met the tolerance and ``certified`` how many columns were
    proven optimal by the KKT check.
    """

    iterations: int
    final_residual: float
    converged: bool
    certified: int = 0
    columns: int = 1

    def to_dict(self):
        return {
            "iterations": int(self.iterations),
            "final_residual": float(self.final_residual),
            "converged": bool(self.converged),
            "certified": int(self.certified),
            "columns": int(self.columns),
        }


def merge_stats(stats):
    """Aggregate several :class:`SolverStats` into one."""
    stats = list(stats)
    if not stats:
        return SolverStats(0, 0.0, True, 0, 0)
    return SolverStats(
        iterations=max(s.iterations for s in stats),
        final_residual=max(s.final_residual for s in stats),
        converged=all(s.converged for s in stats),
        certified=sum(s.certified for s in stats),
        columns=sum(s.columns for s in stats),
    )


class SolverError(Exception):
    """Base class of solver failures."""


class NonConvergence(SolverError):
    """``max_iters`` reached with some residual above tolerance.

    The last iterate and the statistics are attached so the caller can
    decide whether to accept it.
    """

    def __init__(self, message, solution=None, stats=None, columns=()):
        super().__init__(message)
        self.solution = solution
        self.stats = stats
        self.columns = tuple(columns)


class InfeasibleSystem(SolverError):
    """The right-hand side lies outside the range of ``A`` (beyond the noise radius)."""

    def __init__(self, message, columns=()):
        super().__init__(message)
        self.columns = tuple(columns)


class NonOrthonormalBasis(ValueError):
    pass


def _soft(v, t):
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def _rebalance(rho, r, s):
    """Per-column penalty update; returns the new penalties and the dual rescale factor."""
    new = np.where(r > BALANCE_RATIO * s, rho * BALANCE_STEP,
                   np.where(s > BALANCE_RATIO * r, rho / BALANCE_STEP, rho))
    return new, rho / new


class _Operator:
    """Thin SVD of ``A`` plus what the iterations need from it."""

    def __init__(self, A):
        self.A = A
        U, s, Vt = np.linalg.svd(A, full_matrices=False)
        r = int(np.count_nonzero(s > RANK_TOL * s[0])) if s.size and s[0] > 0 else 0
        self.U, self.s, self.Vt = U[:, :r], s[:r], Vt[:r]
        self.rank = r

    def range_distance(self, Y):
        """Column-wise distance of ``Y`` from range(A)."""
        return np.linalg.norm(Y - self.U @ (self.U.T @ Y), axis=0)

    def min_norm(self, Y):
        """Minimum-norm solutions of ``A x = P_range(A) y``, column-wise."""
        return self.Vt.T @ ((self.U.T @ Y) / self.s[:, None])

    def dual_from(self, lam):
        """Least-squares ``nu`` with ``A.T @ nu ~= lam``."""
        return self.U @ ((self.Vt @ lam) / self.s)


def _prepare(A, y):
    A = np.asarray(A, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if A.ndim != 2:
        raise ValueError("A must be a matrix")
    single = y.ndim == 1
    Y = y[:, None] if single else y
    if Y.ndim != 2 or Y.shape[0] != A.shape[0]:
        raise ValueError("y has shape %s, expected %d rows" % (y.shape, A.shape[0]))
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(Y))):
        raise ValueError("A and y must be finite")
    return A, Y, single


def _candidate_supports(z, rank):
    """The support of ``z`` and, if there is one, the support above its sharpest magnitude drop."""
    S = np.flatnonzero(z)
    out = [S] if 0 < S.size <= rank else []
    if S.size > 1:
        a = np.abs(z[S])
        order = np.argsort(-a, kind="stable")
        ratio = a[order[1:]] / a[order[:-1]]
        k = int(np.argmin(ratio)) + 1
        if ratio[k - 1] < SUPPORT_DROP and k <= rank:
            out.append(np.sort(S[order[:k]]))
    return out


def _certify_bp(op, yn, z, lam):
    """Polish ``z`` on a candidate support and verify optimality for ``min |z|_1, Az = yn``.

    Returns the certified solution or ``None``.
    """
    for S in _candidate_supports(z, op.rank):
        sol = _certify_support(op, yn, S, lam)
        if sol is not None:
            return sol
    return None


def _certify_support(op, yn, S, lam):
    A = op.A
    for _ in range(2):
        AS = A[:, S]
        zs, _, rk, _ = np.linalg.lstsq(AS, yn, rcond=None)
        if rk < S.size:
            return None
        big = np.abs(zs) > 1e-12 * np.max(np.abs(zs))
        if big.all():
            break
        S, zs = S[big], zs[big]
        if S.size == 0:
            return None
    AS = A[:, S]
    if np.linalg.norm(AS @ zs - yn) > 1e-10:
        return None
    sgn = np.sign(zs)
    nu = op.dual_from(lam)
    fix, *_ = np.linalg.lstsq(AS.T, sgn - AS.T @ nu, rcond=None)
    g = A.T @ (nu + fix)
    if np.max(np.abs(g)) > 1.0 + DUAL_SLACK or np.max(np.abs(g[S] - sgn)) > 1e-8:
        return None
    out = np.zeros(A.shape[1])
    out[S] = zs
    return out


def _polish_bp(op, yn, z, x, tol):
    """Least-squares polish of an uncertified iterate, kept only if no worse than ``x``."""
    S = np.flatnonzero(z)
    if S.size == 0 or S.size > op.rank:
        return x
    zs, _, rk, _ = np.linalg.lstsq(op.A[:, S], yn, rcond=None)
    if rk < S.size or np.linalg.norm(op.A[:, S] @ zs - yn) > 1e-10:
        return x
    if np.abs(zs).sum() > np.abs(x).sum() * (1.0 + tol):
        return x
    out = np.zeros_like(x)
    out[S] = zs
    return out


def _duality_gap(op, Yn, x, lam):
    """Relative gap between the feasible iterates ``x`` and the scaled duals from ``lam``.

    ``x`` satisfies ``A x = y`` exactly (it is a projection), and
    ``nu / max(1, ||A^T nu||_inf)`` is dual feasible, so the gap bounds the
    suboptimality of ``||x||_1``.
    """
    nu = op.U @ ((op.Vt @ lam) / op.s[:, None])
    scale = np.maximum(1.0, np.max(np.abs(op.A.T @ nu), axis=0))
    primal = np.abs(x).sum(axis=0)
    dual = np.einsum("ij,ij->j", Yn, nu) / scale
    return (primal - dual) / np.maximum(primal, 1e-300)


def _bp_columns(op, Yn, cfg):
    """ADMM on normalized right-hand sides; returns solutions and per-column info."""
    N = op.A.shape[1]
    n = Yn.shape[1]
    tol, alpha = float(cfg.termination_tol), RELAXATION
    rho = np.full(n, float(cfg.penalty))
    out = np.zeros((N, n))
    iters = np.zeros(n, dtype=int)
    resid = np.zeros(n)
    conv = np.zeros(n, dtype=bool)
    cert = np.zeros(n, dtype=bool)

    Vt = op.Vt
    idx = np.arange(n)
    x0 = op.min_norm(Yn)
    z = np.zeros((N, n))
    u = np.zeros((N, n))
    x = x0.copy()
    it = 0
    while idx.size and it < cfg.max_iters:
        it += 1
        v = z - u
        x = v - Vt.T @ (Vt @ v) + x0
        xh = alpha * x + (1.0 - alpha) * z
        zold = z
        z = _soft(xh + u, 1.0 / rho)
        u = u + xh - z
        if it % CHECK_EVERY and it != cfg.max_iters:
            continue
        r = np.linalg.norm(x - z, axis=0)
        s = rho * np.linalg.norm(z - zold, axis=0)
        gap = _duality_gap(op, Yn[:, idx], x, rho * u)
        done = np.zeros(idx.size, dtype=bool)
        for k, j in enumerate(idx):
            sol = _certify_bp(op, Yn[:, j], z[:, k], rho[k] * u[:, k])
            if sol is not None:
                out[:, j] = sol
                resid[j] = np.linalg.norm(op.A @ sol - Yn[:, j])
                conv[j] = cert[j] = done[k] = True
                iters[j] = it
                continue
            small = min(max(r[k], s[k]), gap[k])
            if small <= tol or it == cfg.max_iters:
                out[:, j] = _polish_bp(op, Yn[:, j], z[:, k], x[:, k], tol)
                resid[j] = small
                conv[j] = small <= tol
                done[k] = True
            if done[k]:
                iters[j] = it
        rho, scale = _rebalance(rho, r, s)
        u = u * scale
        if done.any():
            keep = ~done
            idx, x0, z, u, x = idx[keep], x0[:, keep], z[:, keep], u[:, keep], x[:, keep]
            rho = rho[keep]
    return out, iters, resid, conv, cert


def _finish(Z, iters, resid, conv, cert, single, what):
    stats = SolverStats(
        iterations=int(iters.max()) if iters.size else 0,
        final_residual=float(resid.max()) if resid.size else 0.0,
        converged=bool(conv.all()),
        certified=int(cert.sum()),
        columns=int(conv.size),
    )
    sol = Z[:, 0] if single else Z
    if not stats.converged:
        bad = np.flatnonzero(~conv)
        raise NonConvergence(
            "%s: %d of %d columns did not converge (residual %.3g)"
            % (what, bad.size, conv.size, stats.final_residual),
            solution=sol, stats=stats, columns=bad,
        )
    return sol, stats


def basis_pursuit(A, y, cfg=None):
    """Solve ``min ||z||_1`` subject to ``A z = y``.

    Parameters
    ----------
    A : (m, N) array_like
        Measurement matrix.
    y : (m,) or (m, n) array_like
        Measurements; columns of a matrix are solved independently.
    cfg : SolverConfig, optional

    Returns
    -------
    z : ndarray
        Solution(s), shape ``(N,)`` or ``(N, n)``.
    stats : SolverStats

    Raises
    ------
    InfeasibleSystem
        If some ``y`` is farther than ``1e-8 ||y||`` from range(A).
    NonConvergence
        If ``cfg.max_iters`` is reached first; the iterate is attached.
    """
    cfg = cfg or SolverConfig()
    A, Y, single = _prepare(A, y)
    op = _Operator(A)
    N, n = A.shape[1], Y.shape[1]
    norms = np.linalg.norm(Y, axis=0)
    live = np.flatnonzero(norms > 0)
    Z = np.zeros((N, n))
    iters = np.zeros(n, dtype=int)
    resid = np.zeros(n)
    conv = np.ones(n, dtype=bool)
    cert = np.zeros(n, dtype=bool)
    cert[norms == 0] = True
    if live.size:
        if op.rank == 0:
            raise InfeasibleSystem("A is zero but y is not", columns=live)
        Yn = Y[:, live] / norms[live]
        dist = op.range_distance(Yn)
        bad = dist > INFEASIBLE_TOL
        if bad.any():
            raise InfeasibleSystem(
                "y is outside range(A) (relative distance %.3g)" % dist.max(),
                columns=live[bad],
            )
        sol, it, res, cv, ct = _bp_columns(op, Yn, cfg)
        Z[:, live] = sol * norms[live]
        iters[live], resid[live], conv[live], cert[live] = it, res, cv, ct
    return _finish(Z, iters, resid, conv, cert, single, "basis_pursuit")


def _certify_bpdn(A, yn, eps, f):
    """Exact solution of the denoising problem on the support/signs of ``f``, if optimal."""
    S = np.flatnonzero(f)
    if S.size == 0 or S.size > A.shape[0]:
        return None
    sgn = np.sign(f[S])
    AS = A[:, S]
    G = AS.T @ AS
    try:
        L = np.linalg.cholesky(G)
    except np.linalg.LinAlgError:
        return None
    solve = lambda b: np.linalg.solve(L.T, np.linalg.solve(L, b))
    fls = solve(AS.T @ yn)
    r0 = np.linalg.norm(AS @ fls - yn)
    if r0 > eps:
        return None
    w = solve(sgn)
    q = float(sgn @ w)
    if q <= 0:
        return None
    mu = np.sqrt((eps * eps - r0 * r0) / q)
    fs = fls - mu * w
    if np.any(np.sign(fs) != sgn):
        return None
    r = yn - AS @ fs
    g = A.T @ r
    if np.max(np.abs(g)) > mu * (1.0 + DUAL_SLACK) + 1e-14:
        return None
    out = np.zeros(A.shape[1])
    out[S] = fs
    return out


def _bpdn_columns(A, op, Yn, epsn, cfg):
    N = A.shape[1]
    n = Yn.shape[1]
    tol, alpha = float(cfg.termination_tol), RELAXATION
    rho = np.full(n, float(cfg.penalty))
    out = np.zeros((N, n))
    iters = np.zeros(n, dtype=int)
    resid = np.zeros(n)
    conv = np.zeros(n, dtype=bool)
    cert = np.zeros(n, dtype=bool)

    # (I + A^T A)^{-1} = I - V diag(s^2 / (1 + s^2)) V^T
    Vt = op.Vt
    shrink = (op.s ** 2 / (1.0 + op.s ** 2))[:, None]
    idx = np.arange(n)
    Y = Yn.copy()
    eps = epsn.copy()
    v1 = np.zeros((N, n))
    d1 = np.zeros((N, n))
    v2 = np.zeros(Yn.shape)
    d2 = np.zeros(Yn.shape)
    it = 0
    while idx.size and it < cfg.max_iters:
        it += 1
        rhs = (v1 - d1) + A.T @ (v2 - d2)
        x = rhs - Vt.T @ (shrink * (Vt @ rhs))
        Ax = A @ x
        xh = alpha * x + (1.0 - alpha) * v1
        Axh = alpha * Ax + (1.0 - alpha) * v2
        v1old, v2old = v1, v2
        v1 = _soft(xh + d1, 1.0 / rho)
        w = Axh + d2 - Y
        wn = np.linalg.norm(w, axis=0)
        v2 = Y + w * np.minimum(1.0, eps / np.maximum(wn, 1e-300))
        d1 = d1 + xh - v1
        d2 = d2 + Axh - v2
        if it % CHECK_EVERY and it != cfg.max_iters:
            continue
        r = np.sqrt(np.linalg.norm(x - v1, axis=0) ** 2 + np.linalg.norm(Ax - v2, axis=0) ** 2)
        s = rho * np.sqrt(np.linalg.norm(v1 - v1old, axis=0) ** 2
                          + np.linalg.norm(v2 - v2old, axis=0) ** 2)
        done = np.zeros(idx.size, dtype=bool)
        for k, j in enumerate(idx):
            sol = _certify_bpdn(A, Y[:, k], eps[k], v1[:, k])
            if sol is not None:
                out[:, j] = sol
                resid[j] = max(0.0, np.linalg.norm(A @ sol - Y[:, k]) - eps[k])
                conv[j] = cert[j] = done[k] = True
            elif (r[k] <= tol and s[k] <= tol) or it == cfg.max_iters:
                out[:, j] = v1[:, k]
                resid[j] = max(r[k], s[k])
                conv[j] = r[k] <= tol and s[k] <= tol
                done[k] = True
            if done[k]:
                iters[j] = it
        rho, scale = _rebalance(rho, r, s)
        d1, d2 = d1 * scale, d2 * scale
        if done.any():
            keep = ~done
            idx, Y, eps, rho = idx[keep], Y[:, keep], eps[keep], rho[keep]
            v1, d1, v2, d2 = v1[:, keep], d1[:, keep], v2[:, keep], d2[:, keep]
    return out, iters, resid, conv, cert


def basis_pursuit_denoise(A, y, eps=None, cfg=None):
    """Solve ``min ||f||_1`` subject to ``||A f - y||_2 <= eps``.

    ``eps`` defaults to ``cfg.denoise_radius``; ``eps == 0`` is plain
    :func:`basis_pursuit`.  Columns of a matrix ``y`` share ``eps``.
    """
    cfg = cfg or SolverConfig()
    if eps is None:
        eps = cfg.denoise_radius
    eps = float(eps)
    if not eps >= 0:
        raise ValueError("eps must be nonnegative")
    if eps == 0:
        return basis_pursuit(A, y, cfg)
    A, Y, single = _prepare(A, y)
    op = _Operator(A)
    N, n = A.shape[1], Y.shape[1]
    norms = np.linalg.norm(Y, axis=0)
    Z = np.zeros((N, n))
    iters = np.zeros(n, dtype=int)
    resid = np.zeros(n)
    conv = np.ones(n, dtype=bool)
    cert = np.ones(n, dtype=bool)
    # zero is feasible and optimal whenever ||y|| <= eps
    live = np.flatnonzero(norms > eps)
    if live.size:
        Yn = Y[:, live] / norms[live]
        epsn = eps / norms[live]
        dist = op.range_distance(Yn) if op.rank else np.ones(live.size)
        bad = dist > epsn * (1.0 + INFEASIBLE_TOL) + INFEASIBLE_TOL
        if bad.any():
            raise InfeasibleSystem(
                "y is farther than eps from range(A)", columns=live[bad]
            )
        sol, it, res, cv, ct = _bpdn_columns(A, op, Yn, epsn, cfg)
        Z[:, live] = sol * norms[live]
        iters[live], resid[live], conv[live], cert[live] = it, res, cv, ct
    return _finish(Z, iters, resid, conv, cert, single, "basis_pursuit_denoise")


def basis_pursuit_synthesis(A, Phi, y, cfg=None, orth_tol=1e-10):
    """Recover ``x = Phi g`` with ``g`` solving basis pursuit for ``A @ Phi``.

    ``Phi`` must be square with orthonormal columns.

    Returns
    -------
    x, g : ndarray
    stats : SolverStats
    """
    Phi = np.asarray(Phi, dtype=np.float64)
    if Phi.ndim != 2 or Phi.shape[0] != Phi.shape[1]:
        raise NonOrthonormalBasis("Phi must be square")
    if np.max(np.abs(Phi.T @ Phi - np.eye(Phi.shape[0]))) > orth_tol:
        raise NonOrthonormalBasis("Phi is not orthonormal")
    g, stats = basis_pursuit(np.asarray(A, dtype=np.float64) @ Phi, y, cfg)
    return Phi @ g, g, stats
