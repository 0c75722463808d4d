"""Test data, sparsifying bases, PSNR and parameter sweeps."""
import csv
import io
import json
import math
import os
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.fft

from .fileio import load_tensor
from .l1 import SolverConfig, SolverError
from .recovery import (
    GTCS_P_CT,
    GTCS_P_HOSVD,
    GTCS_P_SVD,
    GTCS_S,
    KCS,
    MWCS,
    RecoveryError,
    gtcs_p,
    gtcs_s,
    kcs_recover,
    mwcs_recover,
)
from .decomposition import RankDeficientUpdate
from .sensing import SizeOverflow, generate_ensemble, sample
from .tensor import as_tensor, multi_mode_product

__all__ = [
    "DATASETS",
    "CSV_COLUMNS",
    "TIMING_COLUMNS",
    "PSNR_CAP",
    "ExperimentSpec",
    "SparsifyingBasis",
    "gen_sparse_phantom",
    "gen_compressible",
    "make_dataset",
    "dct_basis",
    "to_transform_domain",
    "from_transform_domain",
    "psnr",
    "recover",
    "cell_seed",
    "iter_sweep",
    "run_sweep",
    "write_csv",
]

SPARSE_IMAGE = "sparse_image"
COMPRESSIBLE_IMAGE = "compressible_image"
SPARSE_VIDEO = "sparse_video"
COMPRESSIBLE_VIDEO = "compressible_video"
FILE = "file"
DATASETS = (SPARSE_IMAGE, COMPRESSIBLE_IMAGE, SPARSE_VIDEO, COMPRESSIBLE_VIDEO, FILE)

PSNR_CAP = 300.0

CSV_COLUMNS = (
    "dataset", "method", "d", "dims", "m", "R", "seed", "normalized_samples", "psnr_db",
    "residual", "decomposition_s", "solve_s", "total_s", "solver_calls", "status",
)
TIMING_COLUMNS = ("decomposition_s", "solve_s", "total_s")

def _rng(seed, *key):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))))


# ----------------------------------------------------------------- phantoms

def gen_sparse_phantom(kind=SPARSE_VIDEO, dims=None, support=None, seed=0):
    """Sparse test tensors.

    ``kind="sparse_image"``: a 64 x 64 binary image with 178 ones inside a
    14 x 18 block of rows and columns chosen at random (every column at most
    14-sparse, every row at most 18-sparse).

    ``kind="sparse_video"``: a 24 x 24 x 24 tensor whose centered 6 x 6 x 6
    block holds values uniform on ``[0.5, 1.5]``.

    For other ``dims`` the default support scales with the size: the row
    and column counts in proportion to ``dims``, the count in proportion to
    the area, and the video block to a quarter of each edge.

    ``support`` overrides the block sizes: ``(rows, cols, count)`` for the
    image, the block edge lengths for the video.  A zero support gives the
    zero tensor.
    """
    rng = _rng(seed, 0)
    if kind == SPARSE_IMAGE:
        dims = tuple(dims or (64, 64))
        if support is None:
            rows = max(1, round(14 * dims[0] / 64))
            cols = max(1, round(18 * dims[-1] / 64))
            count = min(rows * cols, max(rows, cols, round(178 * math.prod(dims) / 4096)))
            support = (rows, cols, count)
        rows, cols, count = support
        if len(dims) != 2 or rows > dims[0] or cols > dims[1] or count > rows * cols or min(rows, cols, count) < 0:
            raise ValueError("support %r does not fit in %s" % (support, dims))
        X = np.zeros(dims)
        if count == 0:
            return X
        r = np.sort(rng.choice(dims[0], rows, replace=False))
        c = np.sort(rng.choice(dims[1], cols, replace=False))
        # every chosen row and column gets at least one entry: walk a
        # diagonal first, then fill the rest at random
        cells = [(i % rows, i % cols) for i in range(max(rows, cols))]
        if count < len(cells):
            cells = cells[:count]
        taken = set(cells)
        rest = [(i, j) for i in range(rows) for j in range(cols) if (i, j) not in taken]
        extra = rng.choice(len(rest), count - len(cells), replace=False) if count > len(cells) else []
        cells += [rest[k] for k in extra]
        for i, j in cells:
            X[r[i], c[j]] = 1.0
        return X
    if kind == SPARSE_VIDEO:
        dims = tuple(dims or (24, 24, 24))
        block = tuple(support) if support is not None else tuple(max(1, round(n / 4)) for n in dims)
        if len(block) != len(dims) or any(b > n or b < 0 for b, n in zip(block, dims)):
            raise ValueError("support %r does not fit in %s" % (support, dims))
        X = np.zeros(dims)
        sl = tuple(slice((n - b) // 2, (n - b) // 2 + b) for n, b in zip(dims, block))
        X[sl] = rng.uniform(0.5, 1.5, size=block)
        return X
    raise ValueError("unknown phantom kind %r" % kind)


def gen_compressible(dims, seed=0, low=4, tail=1.5, tail_scale=0.02):
    """Smooth synthetic data whose DCT coefficients decay by a power law.

    Coefficient ``k`` (multi-index, 0-based) outside the ``low``-cube gets an
    amplitude ``tail_scale * (1 + |k|_1)^-tail`` with random sign; inside it
    a random O(1) amplitude.  The result is synthesized with the per-mode
    DCT, so its coefficients in that basis are exactly these.
    """
    dims = tuple(int(n) for n in dims)
    rng = _rng(seed, 1)
    grids = np.meshgrid(*[np.arange(n) for n in dims], indexing="ij")
    l1 = sum(grids)
    coef = tail_scale * (1.0 + l1) ** (-float(tail)) * rng.choice([-1.0, 1.0], size=dims)
    low_sl = tuple(slice(0, min(low, n)) for n in dims)
    coef[low_sl] = rng.uniform(0.5, 1.0, size=coef[low_sl].shape) * rng.choice([-1.0, 1.0], size=coef[low_sl].shape)
    coef[(0,) * len(dims)] = 4.0
    return from_transform_domain(coef, SparsifyingBasis.dct(dims))


def make_dataset(name, dims=None, seed=0, path=None):
    """Ground truth for a dataset name; ``"file"`` reads GTCS1 from ``path``."""
    if name in (SPARSE_IMAGE, SPARSE_VIDEO):
        return gen_sparse_phantom(name, dims, seed=seed)
    if name == COMPRESSIBLE_IMAGE:
        return gen_compressible(dims or (64, 64), seed)
    if name == COMPRESSIBLE_VIDEO:
        return gen_compressible(dims or (24, 24, 24), seed)
    if name == FILE:
        if not path:
            raise ValueError("dataset 'file' needs a path")
        return load_tensor(path)
    raise ValueError("unknown dataset %r" % name)


# ------------------------------------------------------------ DCT and PSNR

def dct_basis(N):
    """Orthonormal DCT-II synthesis matrix; column ``k`` is the k-th cosine atom."""
    if int(N) != N or N < 1:
        raise ValueError("N must be a positive integer")
    # scipy's orthonormal DCT-II of the identity gives the analysis matrix
    return scipy.fft.dct(np.eye(int(N)), type=2, norm="ortho", axis=0).T


@dataclass(frozen=True, eq=False)
class SparsifyingBasis:
    """Per-mode orthonormal bases ``Phi_i``."""

    kind: str
    matrices: tuple

    @classmethod
    def identity(cls, dims):
        return cls("identity", tuple(np.eye(n) for n in dims))

    @classmethod
    def dct(cls, dims):
        return cls("dct2", tuple(dct_basis(n) for n in dims))


def to_transform_domain(X, B):
    """Coefficients ``X x_1 Phi_1^T ... x_d Phi_d^T``."""
    return multi_mode_product(as_tensor(X), [P.T for P in B.matrices])


def from_transform_domain(G, B):
    """Synthesis ``G x_1 Phi_1 ... x_d Phi_d``."""
    return multi_mode_product(as_tensor(G), list(B.matrices))


def psnr(reference, estimate, peak=None):
    """``10 log10(peak^2 / MSE)`` in dB, capped at 300 dB.

    ``peak`` defaults to ``max |reference|``.
    """
    ref = np.asarray(reference, dtype=np.float64)
    est = np.asarray(estimate, dtype=np.float64)
    if ref.shape != est.shape:
        raise ValueError("shape mismatch %s vs %s" % (ref.shape, est.shape))
    if peak is None:
        peak = float(np.max(np.abs(ref))) if ref.size else 0.0
    if not peak > 0:
        raise ValueError("peak must be positive")
    mse = float(np.mean((ref - est) ** 2))
    if mse == 0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * math.log10(peak ** 2 / mse))


# ------------------------------------------------------------------ sweeps

def _normalize_method(method, d):
    name = str(method).upper().replace("-", "_")
    if name == "GTCS_P":
        return GTCS_P_SVD if d == 2 else GTCS_P_CT
    if name not in (GTCS_S, GTCS_P_CT, GTCS_P_HOSVD, GTCS_P_SVD, KCS, MWCS):
        raise ValueError("unknown method %r" % method)
    return name


def recover(method, Y, E, cfg=None, R=None, seed=0, basis=None, strict=True):
    """Dispatch to a recovery procedure by method name.

    With a non-identity ``basis`` the measurements are taken as
    ``sample(X, E)`` for a signal ``X`` that is sparse in ``basis``: the
    recovery runs on the effective ensemble ``U_i Phi_i`` and the result is
    mapped back by synthesis.  ``strict`` is passed on to the procedure.
    """
    from .sensing import MeasurementEnsemble

    method = _normalize_method(method, E.order)
    Eeff = E
    if basis is not None and basis.kind != "identity":
        Eeff = MeasurementEnsemble(tuple(U @ P for U, P in zip(E.matrices, basis.matrices)),
                                   E.distribution, E.seed)
    if method == GTCS_S:
        rep = gtcs_s(Y, Eeff, cfg, strict=strict)
    elif method == GTCS_P_CT:
        rep = gtcs_p(Y, Eeff, cfg, "CT", strict=strict)
    elif method == GTCS_P_HOSVD:
        rep = gtcs_p(Y, Eeff, cfg, "HOSVD", strict=strict)
    elif method == GTCS_P_SVD:
        rep = gtcs_p(Y, Eeff, cfg, "SVD", strict=strict)
    elif method == KCS:
        rep = kcs_recover(Y, Eeff, cfg, strict=strict)
    else:
        rep = mwcs_recover(Y, Eeff, cfg, R=int(R or 1), seed=seed, strict=strict)
    if Eeff is not E:
        rep.recovered = from_transform_domain(rep.recovered, basis)
        rep.extra["basis"] = basis.kind
    return rep


@dataclass
class ExperimentSpec:
    """One sweep: every combination of ``m``, method, seed (and ``R`` for MWCS).

    ``m`` is the per-mode measurement count (``m_i = m`` for all modes).
    ``basis`` is ``"identity"`` or ``"dct2"``; it defaults to DCT for the
    compressible datasets.
    """

    dataset: str = SPARSE_IMAGE
    dims: tuple = None
    methods: list = field(default_factory=lambda: [GTCS_S])
    m_values: list = field(default_factory=list)
    R_values: list = field(default_factory=lambda: [1])
    seeds: list = field(default_factory=lambda: [0])
    seed: int = 0
    distribution: str = "gaussian"
    basis: str = None
    path: str = None
    data_seed: int = None
    tol: float = 1e-6
    max_iters: int = 10000
    penalty: float = 1.0
    epsilon: float = 0.0
    out: str = None
    reports_dir: str = None

    def __post_init__(self):
        if self.dataset not in DATASETS:
            raise ValueError("unknown dataset %r" % self.dataset)
        if not self.methods:
            raise ValueError("methods must be nonempty")
        if not self.seeds:
            raise ValueError("seeds must be nonempty")
        if self.dims is not None:
            self.dims = tuple(int(n) for n in self.dims)
        self.m_values = [int(m) for m in self.m_values]
        self.R_values = [int(r) for r in self.R_values]
        self.seeds = [int(s) for s in self.seeds]
        if self.basis is None:
            self.basis = "dct2" if self.dataset.startswith("compressible") else "identity"
        if self.basis not in ("identity", "dct2"):
            raise ValueError("unknown basis %r" % self.basis)

    @property
    def solver(self):
        return SolverConfig(self.tol, self.max_iters, self.penalty, self.epsilon)

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        if "m" in data and "m_values" not in data:
            data["m_values"] = data.pop("m")
        if "R" in data and "R_values" not in data:
            data["R_values"] = data.pop("R")
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError("unknown spec keys: %s" % ", ".join(sorted(unknown)))
        return cls(**data)

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self):
        out = asdict(self)
        out["dims"] = None if self.dims is None else list(self.dims)
        return out


def cell_seed(spec_seed, m, seed):
    """Ensemble seed of one sweep cell, a pure function of the cell indices."""
    ss = np.random.SeedSequence(int(spec_seed), spawn_key=(int(m), int(seed)))
    return int(ss.generate_state(1, np.uint32)[0])


def _fmt(x):
    if isinstance(x, float):
        return repr(x)
    return str(x)


def iter_sweep(spec):
    """Yield ``(row, report)`` for every cell in (m, method, seed, R) order.

    Subproblems that reach ``max_iters`` keep their last iterate and the row
    gets ``status="not_converged"``.  Other failures become rows whose
    ``status`` names the error; the report is then ``None``.  The ensemble of a cell depends on ``(spec.seed, m, seed)``
    only, so all methods at a given ``(m, seed)`` see the same measurements.
    """
    data_seed = spec.seed if spec.data_seed is None else spec.data_seed
    X = make_dataset(spec.dataset, spec.dims, data_seed, spec.path)
    dims = X.shape
    d = X.ndim
    basis = SparsifyingBasis.dct(dims) if spec.basis == "dct2" else None
    cfg = spec.solver
    total = math.prod(dims)
    for m in spec.m_values:
        if not 1 <= m <= min(dims):
            raise ValueError("m=%d outside [1, %d]" % (m, min(dims)))
        for method in spec.methods:
            name = _normalize_method(method, d)
            Rs = spec.R_values if name == MWCS else [None]
            for seed in spec.seeds:
                ens_seed = cell_seed(spec.seed, m, seed)
                E = generate_ensemble(dims, (m,) * d, spec.distribution, ens_seed)
                Y = sample(X, E)
                for R in Rs:
                    row = {
                        "dataset": spec.dataset, "method": name, "d": d,
                        "dims": "x".join(str(n) for n in dims), "m": m,
                        "R": "" if R is None else R, "seed": seed,
                        "normalized_samples": m ** d / total,
                        "psnr_db": "", "residual": "", "decomposition_s": "", "solve_s": "",
                        "total_s": "", "solver_calls": "", "status": "ok",
                    }
                    rep = None
                    try:
                        rep = recover(name, Y, E, cfg, R=R, seed=seed, basis=basis, strict=False)
                    except (RecoveryError, SolverError, SizeOverflow, RankDeficientUpdate,
                            np.linalg.LinAlgError) as exc:
                        row["status"] = "error:%s" % type(getattr(exc, "cause", None) or exc).__name__
                    if rep is not None:
                        rep.psnr = psnr(X, rep.recovered)
                        rep.config.update(ensemble_seed=ens_seed, cell_seed=seed, m=m, R=R)
                        wt = rep.wall_times
                        row.update(psnr_db=rep.psnr, residual=rep.residual,
                                   decomposition_s=wt["decomposition"], solve_s=wt["solve"],
                                   total_s=wt["total"], solver_calls=rep.solver_calls)
                        if not rep.solver_stats.converged:
                            row["status"] = "not_converged"
                    yield row, rep


def write_csv(rows, fh, columns=CSV_COLUMNS):
    w = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: _fmt(row[k]) for k in columns})
        fh.flush()


def run_sweep(spec, out=None, reports_dir=None):
    """Run a sweep and return its rows.

    Rows are written to ``out`` (path or file object) as they complete, and
    each successful cell's report to ``reports_dir`` as JSON.
    """
    out = out if out is not None else spec.out
    reports_dir = reports_dir if reports_dir is not None else spec.reports_dir
    if reports_dir:
        os.makedirs(reports_dir, exist_ok=True)
    rows = []

    def gen():
        for i, (row, rep) in enumerate(iter_sweep(spec)):
            rows.append(row)
            if rep is not None and reports_dir:
                name = "%04d_%s_m%d_s%d%s.json" % (i, row["method"], row["m"], row["seed"],
                                                   "" if row["R"] == "" else "_R%d" % row["R"])
                with open(os.path.join(reports_dir, name), "w") as fh:
                    fh.write(rep.to_json(indent=1))
            yield row

    if out is None:
        write_csv(gen(), io.StringIO())
    elif hasattr(out, "write"):
        write_csv(gen(), out)
    else:
        with open(out, "w", newline="") as fh:
            write_csv(gen(), fh)
    return rows
