"""Recovery of tensors from multi-way measurements.

* :func:`gtcs_s` -- serial recovery, one mode at a time.
* :func:`gtcs_p` -- decompose the measurements into rank-one terms, then
  recover every factor vector independently.
* :func:`kcs_recover` -- one basis pursuit on the vectorized problem.
* :func:`mwcs_recover` -- CP fit in the compressed domain, then per-mode
  recovery of the CP factors.
* :func:`noisy_columnwise`, :func:`noisy_rank_truncated` -- the two matrix
  procedures for noisy measurements.
"""
import json
import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .decomposition import (
    RankOneSum,
    cp_als,
    hosvd,
    hosvd_rank_one_terms,
    reconstruct,
    svd_rank_decomposition,
    weak_tucker_decomposition,
    DEFAULT_TOL,
)
from .l1 import (
    InfeasibleSystem,
    NonConvergence,
    SolverConfig,
    SolverError,
    SolverStats,
    basis_pursuit,
    basis_pursuit_denoise,
    merge_stats,
)
from .sensing import DEFAULT_MAX_ELEMENTS, MeasurementEnsemble, kcs_operator, sample
from .tensor import as_tensor, mode_n_fold, mode_n_unfold, unvectorize, vectorize

__all__ = [
    "GTCS_S",
    "GTCS_P_CT",
    "GTCS_P_HOSVD",
    "GTCS_P_SVD",
    "KCS",
    "MWCS",
    "METHODS",
    "RecoveryReport",
    "RecoveryError",
    "NoisyParams",
    "DegenerateSpectrum",
    "rip_constant",
    "gtcs_s",
    "gtcs_p",
    "kcs_recover",
    "mwcs_recover",
    "noisy_columnwise",
    "noisy_rank_truncated",
]

GTCS_S = "GTCS_S"
GTCS_P_CT = "GTCS_P_CT"
GTCS_P_HOSVD = "GTCS_P_HOSVD"
GTCS_P_SVD = "GTCS_P_SVD"
KCS = "KCS"
MWCS = "MWCS"
NOISY_COLUMNWISE = "NOISY_COLUMNWISE"
NOISY_RANK_TRUNCATED = "NOISY_RANK_TRUNCATED"
METHODS = (GTCS_S, GTCS_P_CT, GTCS_P_HOSVD, GTCS_P_SVD, KCS, MWCS)

_DECOMPOSITIONS = {"CT": GTCS_P_CT, "HOSVD": GTCS_P_HOSVD, "SVD": GTCS_P_SVD, "SVD_MATRIX": GTCS_P_SVD}

# relative radii of the relaxed retries after an infeasible serial subproblem,
# as multiples of termination_tol
FALLBACK_FACTORS = (10.0, 100.0, 1000.0)


class RecoveryError(Exception):
    """A solver failure inside a recovery procedure.

    ``where`` locates it: ``{"mode": n, "columns": [...]}`` for the serial
    method, ``{"mode": n, "terms": [...]}`` for the per-term methods.
    """

    def __init__(self, message, cause=None, **where):
        super().__init__(message)
        self.cause = cause
        self.where = where


class DegenerateSpectrum(UserWarning):
    """No singular value of the noisy measurements clears the noise threshold."""


@dataclass
class RecoveryReport:
    """Result and measurements of one recovery."""

    recovered: np.ndarray
    method: str
    wall_times: dict
    solver_calls: int
    solver_stats: SolverStats
    residual: float
    config: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)
    psnr: float = None

    def to_dict(self):
        return {
            "method": self.method,
            "shape": list(self.recovered.shape),
            "wall_times": _jsonable(self.wall_times),
            "solver_calls": int(self.solver_calls),
            "solver_stats": self.solver_stats.to_dict(),
            "residual": float(self.residual),
            "psnr_db": None if self.psnr is None else float(self.psnr),
            "config": _jsonable(self.config),
            "extra": _jsonable(self.extra),
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _check_measurements(Y, E):
    Y = as_tensor(Y)
    if not isinstance(E, MeasurementEnsemble):
        raise TypeError("E must be a MeasurementEnsemble")
    if Y.ndim != E.order or Y.shape != E.measures:
        raise ValueError("measurements of shape %s do not match ensemble %s" % (Y.shape, E.measures))
    return Y


def _report(recovered, method, Y, E, cfg, times, calls, stats, **extra):
    residual = float(np.linalg.norm(sample(recovered, E) - Y))
    config = {"solver": cfg.to_dict(), "ensemble": E.metadata()}
    for key in ("seed", "tol", "R", "mode_order", "decomposition", "rank_cap"):
        if key in extra:
            config[key] = extra.pop(key)
    return RecoveryReport(recovered, method, times, calls, stats, residual, config, extra)


def _bp(U, M, cfg, strict):
    try:
        return basis_pursuit(U, M, cfg)
    except NonConvergence as exc:
        if strict:
            raise
        return exc.solution, exc.stats


def _bpdn(U, M, eps, cfg, strict):
    try:
        return basis_pursuit_denoise(U, M, eps, cfg)
    except NonConvergence as exc:
        if strict:
            raise
        return exc.solution, exc.stats


def _solve_mode_serial(U, M, cfg, mode, fallbacks, strict=True):
    """Basis pursuit on every column of ``M``; relaxed retries for infeasible columns."""
    try:
        return _bp(U, M, cfg, strict)
    except InfeasibleSystem as exc:
        bad = np.array(exc.columns, dtype=int)
    except SolverError as exc:
        raise RecoveryError("mode %d: %s" % (mode, exc), exc, mode=mode,
                            columns=list(getattr(exc, "columns", ()))) from exc
    good = np.setdiff1d(np.arange(M.shape[1]), bad)
    W = np.zeros((U.shape[1], M.shape[1]))
    stats = []
    try:
        if good.size:
            W[:, good], st = _bp(U, M[:, good], cfg, strict)
            stats.append(st)
        norms = np.linalg.norm(M[:, bad], axis=0)
        last = None
        for factor in FALLBACK_FACTORS:
            radius = factor * cfg.termination_tol * float(norms.max())
            fallbacks.append({"mode": mode, "columns": bad.tolist(), "radius": radius})
            try:
                W[:, bad], st = _bpdn(U, M[:, bad], radius, cfg, strict)
            except InfeasibleSystem as exc:
                last = exc
                continue
            stats.append(st)
            fallbacks[-1]["accepted"] = True
            return W, merge_stats(stats)
        raise RecoveryError("mode %d: infeasible after %d relaxed retries"
                            % (mode, len(FALLBACK_FACTORS)), last, mode=mode, columns=bad.tolist())
    except SolverError as exc:
        raise RecoveryError("mode %d: %s" % (mode, exc), exc, mode=mode,
                            columns=list(getattr(exc, "columns", ()))) from exc


def gtcs_s(Y, E, cfg=None, mode_order=None, strict=True):
    """Serial recovery.

    For each mode ``n`` in turn (ascending by default), every column of the
    current unfolding ``Z_(n)`` is recovered by basis pursuit with ``U_n`` and
    the results are folded back with ``m_n`` replaced by ``N_n``.

    A column that lies outside the range of ``U_n`` (which can happen when
    earlier modes were recovered only approximately) is retried with basis
    pursuit denoising at radii ``10, 100, 1000`` times ``termination_tol``
    relative to the column norms; each retry is recorded under
    ``extra["fallbacks"]``.

    With ``strict=False`` a subproblem that hits ``max_iters`` contributes
    its last iterate and ``solver_stats.converged`` of the report is false;
    by default it raises.

    Raises
    ------
    RecoveryError
        Tagged with the mode and the failing columns.
    """
    cfg = cfg or SolverConfig()
    Y = _check_measurements(Y, E)
    order = list(mode_order) if mode_order is not None else list(range(1, E.order + 1))
    if sorted(order) != list(range(1, E.order + 1)):
        raise ValueError("mode_order must be a permutation of 1..%d" % E.order)
    t0 = time.perf_counter()
    Z = Y
    calls = 0
    stats = []
    per_mode = {}
    fallbacks = []
    for n in order:
        t = time.perf_counter()
        M = mode_n_unfold(Z, n)
        W, st = _solve_mode_serial(E.matrices[n - 1], M, cfg, n, fallbacks, strict)
        calls += M.shape[1]
        stats.append(st)
        shape = list(Z.shape)
        shape[n - 1] = E.dims[n - 1]
        Z = mode_n_fold(W, n, shape)
        per_mode[n] = time.perf_counter() - t
    total = time.perf_counter() - t0
    times = {"decomposition": 0.0, "solve": sum(per_mode.values()), "per_mode": per_mode, "total": total}
    return _report(Z, GTCS_S, Y, E, cfg, times, calls, merge_stats(stats),
                   mode_order=order, fallbacks=fallbacks)


def _solve_terms(terms, E, cfg, workers=1, modes=None, strict=True):
    """Recover every factor vector of ``terms``; one batched solve per mode.

    Factor columns are normalized before solving and the scales are folded
    into the weights, so the solver always sees unit right-hand sides.
    """
    d = terms.order
    modes = list(modes) if modes is not None else list(range(1, d + 1))
    weights = terms.weights.copy()
    batches = {}
    for n in range(1, d + 1):
        B = terms.factors[n - 1]
        norms = np.linalg.norm(B, axis=0)
        norms[norms == 0] = 1.0
        weights = weights * norms
        batches[n] = B / norms

    def solve(n):
        t = time.perf_counter()
        try:
            W, st = _bp(E.matrices[n - 1], batches[n], cfg, strict)
        except SolverError as exc:
            raise RecoveryError("mode %d: %s" % (n, exc), exc, mode=n,
                                terms=list(getattr(exc, "columns", ()))) from exc
        return W, st, time.perf_counter() - t

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            done = dict(zip(modes, pool.map(solve, modes)))
    else:
        done = {n: solve(n) for n in modes}
    # assemble by mode and term index, never by completion order
    factors = [done[n][0] for n in range(1, d + 1)]
    stats = merge_stats(done[n][1] for n in range(1, d + 1))
    per_mode = {n: done[n][2] for n in range(1, d + 1)}
    shape = tuple(E.dims)
    return RankOneSum(factors, weights, shape), stats, per_mode


def _decompose(Y, kind, tol, rank_cap):
    if kind == "SVD":
        if Y.ndim != 2:
            raise ValueError("the SVD decomposition applies to matrices only")
        terms = svd_rank_decomposition(Y, tol)
    elif kind == "CT":
        terms = weak_tucker_decomposition(Y, tol)
    elif kind == "HOSVD":
        terms = hosvd_rank_one_terms(hosvd(Y), tol)
    else:
        raise ValueError("unknown decomposition %r" % kind)
    if rank_cap is not None:
        terms = terms.truncate(int(rank_cap))
    return terms


def gtcs_p(Y, E, cfg=None, decomposition="CT", rank_cap=None, tol=DEFAULT_TOL, workers=1, modes=None,
           strict=True):
    """Parallelizable recovery.

    ``Y`` is split into rank-one terms ``sum_k b_k^(1) o ... o b_k^(d)``
    (``decomposition``: ``"CT"`` weak core-Tucker, ``"HOSVD"``, or ``"SVD"``
    for matrices), every ``b_k^(j)`` is recovered by basis pursuit with
    ``U_j``, and the recovered vectors are reassembled with the same weights.

    Parameters
    ----------
    rank_cap : int, optional
        Keep only the ``rank_cap`` heaviest terms (a rank-``R`` approximation of ``Y``).
    tol : float
        Relative cutoff of the decomposition.
    workers : int
        Number of threads for the per-mode solves.  Results are assembled by
        term index, so they do not depend on this or on ``modes``.
    modes : sequence of int, optional
        Order in which the modes are submitted.
    strict : bool
        As in :func:`gtcs_s`.
    """
    cfg = cfg or SolverConfig()
    Y = _check_measurements(Y, E)
    kind = str(decomposition).upper()
    if kind == "SVD_MATRIX":
        kind = "SVD"
    if kind not in ("CT", "HOSVD", "SVD"):
        raise ValueError("unknown decomposition %r" % decomposition)
    t0 = time.perf_counter()
    terms = _decompose(Y, kind, tol, rank_cap)
    t_dec = time.perf_counter() - t0
    rec_terms, stats, per_mode = _solve_terms(terms, E, cfg, workers, modes, strict)
    X = reconstruct(rec_terms)
    total = time.perf_counter() - t0
    times = {"decomposition": t_dec, "solve": sum(per_mode.values()), "per_mode": per_mode, "total": total}
    return _report(X, _DECOMPOSITIONS[kind], Y, E, cfg, times, terms.rank * terms.order, stats,
                   decomposition=kind, rank_cap=rank_cap, tol=tol, terms=terms.rank)


def kcs_recover(Y, E, cfg=None, max_elements=DEFAULT_MAX_ELEMENTS, strict=True):
    """One basis pursuit with ``U_d kron ... kron U_1`` on ``vectorize(Y)``."""
    cfg = cfg or SolverConfig()
    Y = _check_measurements(Y, E)
    t0 = time.perf_counter()
    A = kcs_operator(E, max_elements)
    t_op = time.perf_counter() - t0
    try:
        z, stats = _bp(A, vectorize(Y), cfg, strict)
    except SolverError as exc:
        raise RecoveryError("KCS: %s" % exc, exc) from exc
    total = time.perf_counter() - t0
    X = unvectorize(z, E.dims)
    times = {"decomposition": t_op, "solve": total - t_op, "per_mode": {}, "total": total}
    return _report(X, KCS, Y, E, cfg, times, 1, stats)


def mwcs_recover(Y, E, cfg=None, R=1, seed=0, iters=200, init="random", workers=1, strict=True):
    """CP fit of rank ``R`` in the compressed domain, then per-mode recovery."""
    cfg = cfg or SolverConfig()
    Y = _check_measurements(Y, E)
    if int(R) != R or R < 1:
        raise ValueError("R must be a positive integer")
    t0 = time.perf_counter()
    terms = cp_als(Y, int(R), iters=iters, seed=seed, init=init)
    t_dec = time.perf_counter() - t0
    rec_terms, stats, per_mode = _solve_terms(terms, E, cfg, workers, strict=strict)
    X = reconstruct(rec_terms)
    total = time.perf_counter() - t0
    times = {"decomposition": t_dec, "solve": sum(per_mode.values()), "per_mode": per_mode, "total": total}
    return _report(X, MWCS, Y, E, cfg, times, terms.rank * terms.order, stats,
                   R=int(R), seed=int(seed), init=init)


def rip_constant(delta_2s):
    """``C_2 = 4 sqrt(1 + d) / (1 - (1 + sqrt 2) d)`` for ``d = delta_2s`` in ``(0, sqrt2 - 1)``."""
    if not (0 < delta_2s < math.sqrt(2) - 1):
        raise ValueError("delta_2s must lie in (0, sqrt(2) - 1)")
    return 4.0 * math.sqrt(1.0 + delta_2s) / (1.0 - (1.0 + math.sqrt(2)) * delta_2s)


@dataclass(frozen=True)
class NoisyParams:
    """Noise radius ``eps`` (bound on ``||E||_F``) and the RIP constant ``delta_2s``."""

    eps: float
    delta_2s: float = 0.2

    def __post_init__(self):
        if not self.eps >= 0:
            raise ValueError("eps must be nonnegative")
        rip_constant(self.delta_2s)

    @property
    def C2(self):
        return rip_constant(self.delta_2s)


def _check_matrix_case(Yp, E):
    if E.order != 2:
        raise ValueError("the noisy procedures are for matrices (d = 2)")
    return _check_measurements(Yp, E)


def noisy_columnwise(Yp, E, p, cfg=None, strict=True):
    """Two-stage recovery from ``Y' = U_1 X U_2^T + E``, ``||E||_F <= eps``.

    Stage 1 denoises every column of ``Y'`` with radius ``eps``; stage 2
    denoises every row of the result with radius ``sqrt(m_2) C_2 eps``.
    The guaranteed error bound ``sqrt(m_2 N_1) C_2^2 eps`` and the tighter
    ``C_2^2 eps`` (columns of ``E`` bounded by ``eps / sqrt(m_2)``) are
    reported under ``extra``.  ``strict`` is as in :func:`gtcs_s`.
    """
    cfg = cfg or SolverConfig()
    Yp = _check_matrix_case(Yp, E)
    U1, U2 = E.matrices
    m2, N1 = U2.shape[0], U1.shape[1]
    C2 = p.C2
    t0 = time.perf_counter()
    try:
        Z, st1 = _bpdn(U1, Yp, p.eps, cfg, strict)
        t1 = time.perf_counter()
        Xt, st2 = _bpdn(U2, Z.T, math.sqrt(m2) * C2 * p.eps, cfg, strict)
    except SolverError as exc:
        raise RecoveryError("noisy_columnwise: %s" % exc, exc) from exc
    t2 = time.perf_counter()
    times = {"decomposition": 0.0, "solve": t2 - t0, "per_mode": {1: t1 - t0, 2: t2 - t1}, "total": t2 - t0}
    return _report(Xt.T, NOISY_COLUMNWISE, Yp, E, cfg, times, Yp.shape[1] + N1, merge_stats([st1, st2]),
                   eps=p.eps, delta_2s=p.delta_2s, C2=C2,
                   bound=math.sqrt(m2 * N1) * C2 ** 2 * p.eps,
                   bound_tight=C2 ** 2 * p.eps)


def noisy_rank_truncated(Yp, E, p, s, cfg=None, rank_tol=DEFAULT_TOL, strict=True):
    """Recovery through a best rank-``s'`` approximation of ``Y'``.

    ``s'`` is the number of singular values of ``Y'`` above ``eps / sqrt(s)``
    (and above ``rank_tol * sigma_1``, which only matters at ``eps = 0``),
    capped at ``s``.  For each kept triple the vectors ``sigma_i u_i`` and
    ``sigma_i v_i`` are denoised with radius ``eps / sqrt(2 s)`` and
    ``X = sum_i x_i y_i^T / sigma_i``.

    When ``s' = 0`` the zero matrix is returned, ``extra["degenerate_spectrum"]``
    is set and a :class:`DegenerateSpectrum` warning is issued.
    """
    cfg = cfg or SolverConfig()
    Yp = _check_matrix_case(Yp, E)
    if int(s) != s or s < 1:
        raise ValueError("s must be a positive integer")
    U1, U2 = E.matrices
    C2 = p.C2
    t0 = time.perf_counter()
    u, sig, vt = np.linalg.svd(Yp, full_matrices=False)
    cut = max(p.eps / math.sqrt(s), rank_tol * (sig[0] if sig.size else 0.0))
    sp = min(int(s), int(np.count_nonzero(sig > cut)))
    t_dec = time.perf_counter() - t0
    extra = dict(eps=p.eps, delta_2s=p.delta_2s, C2=C2, s=int(s), s_prime=sp,
                 bound=C2 ** 2 * p.eps, degenerate_spectrum=sp == 0)
    if sp == 0:
        warnings.warn("no singular value of Y' exceeds eps/sqrt(s); returning zero", DegenerateSpectrum)
        total = time.perf_counter() - t0
        times = {"decomposition": t_dec, "solve": 0.0, "per_mode": {}, "total": total}
        return _report(np.zeros(E.dims), NOISY_RANK_TRUNCATED, Yp, E, cfg, times, 0,
                       SolverStats(0, 0.0, True, 0, 0), **extra)
    radius = p.eps / math.sqrt(2 * s)
    try:
        t = time.perf_counter()
        Xs, st1 = _bpdn(U1, u[:, :sp] * sig[:sp], radius, cfg, strict)
        t1 = time.perf_counter()
        Ys, st2 = _bpdn(U2, vt[:sp].T * sig[:sp], radius, cfg, strict)
        t2 = time.perf_counter()
    except SolverError as exc:
        raise RecoveryError("noisy_rank_truncated: %s" % exc, exc) from exc
    X = (Xs / sig[:sp]) @ Ys.T
    times = {"decomposition": t_dec, "solve": t2 - t, "per_mode": {1: t1 - t, 2: t2 - t1},
             "total": t2 - t0}
    return _report(X, NOISY_RANK_TRUNCATED, Yp, E, cfg, times, 2 * sp, merge_stats([st1, st2]), **extra)
