"""Per-mode measurement ensembles, multi-way sampling and measurement bounds."""
import math
from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from .tensor import as_tensor, kronecker, multi_mode_product

__all__ = [
    "GAUSSIAN",
    "BERNOULLI",
    "MeasurementEnsemble",
    "SizeOverflow",
    "VacuousBound",
    "BoundParams",
    "generate_ensemble",
    "mode_rng",
    "sample",
    "kcs_operator",
    "bound_per_mode",
    "bound_kcs",
    "bound_gtcs_total",
]

GAUSSIAN = "gaussian"
BERNOULLI = "bernoulli"
EXPLICIT = "explicit"
DEFAULT_MAX_ELEMENTS = 2 ** 31


class SizeOverflow(MemoryError):
    """The dense Kronecker operator would exceed the element cap."""


class VacuousBound(ValueError):
    """``N <= s``: the measurement bound says nothing in this regime."""


@dataclass(frozen=True, eq=False)
class MeasurementEnsemble:
    """The matrices ``U_1, ..., U_d`` (``U_i`` is ``m_i x N_i``) and how they were drawn."""

    matrices: tuple
    distribution: str = EXPLICIT
    seed: int = 0
    dims: tuple = field(init=False)
    measures: tuple = field(init=False)

    def __post_init__(self):
        mats = tuple(np.asarray(U, dtype=np.float64) for U in self.matrices)
        if not mats:
            raise ValueError("an ensemble needs at least one matrix")
        for U in mats:
            if U.ndim != 2:
                raise ValueError("measurement matrices must be 2-D")
            if U.shape[0] > U.shape[1]:
                raise ValueError("measurement matrix %s has m > N" % (U.shape,))
            U.setflags(write=False)
        object.__setattr__(self, "matrices", mats)
        object.__setattr__(self, "dims", tuple(U.shape[1] for U in mats))
        object.__setattr__(self, "measures", tuple(U.shape[0] for U in mats))

    @classmethod
    def identity(cls, dims):
        return cls(tuple(np.eye(n) for n in dims))

    @property
    def order(self):
        return len(self.matrices)

    def metadata(self):
        return {
            "distribution": self.distribution,
            "seed": int(self.seed),
            "dims": list(self.dims),
            "measures": list(self.measures),
        }


def mode_rng(seed, mode):
    """Generator for mode ``mode`` (1-based): the mode index is mixed into the seed."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(int(mode),))))


def generate_ensemble(dims, measures, distribution=GAUSSIAN, seed=0):
    """Draw ``U_i`` with i.i.d. entries of variance ``1 / m_i``.

    Gaussian entries are ``N(0, 1/m_i)``; Bernoulli entries are
    ``+-1/sqrt(m_i)`` with equal probability.  Mode ``i`` uses its own stream
    derived from ``(seed, i)``, so the matrices are reproducible bit for bit
    and independent of the other modes' sizes.
    """
    dims, measures = list(dims), list(measures)
    if len(dims) != len(measures) or not dims:
        raise ValueError("dims and measures must be nonempty and of equal length")
    for m, n in zip(measures, dims):
        if not (1 <= m <= n):
            raise ValueError("need 1 <= m_i <= N_i, got m=%d, N=%d" % (m, n))
    distribution = distribution.lower()
    mats = []
    for i, (m, n) in enumerate(zip(measures, dims), start=1):
        rng = mode_rng(seed, i)
        if distribution == GAUSSIAN:
            U = rng.standard_normal((m, n)) / math.sqrt(m)
        elif distribution == BERNOULLI:
            U = (2.0 * rng.integers(0, 2, size=(m, n)) - 1.0) / math.sqrt(m)
        else:
            raise ValueError("unknown distribution %r" % distribution)
        mats.append(U)
    return MeasurementEnsemble(tuple(mats), distribution, int(seed))


def sample(X, E, modes=None):
    """Multi-way sampling ``Y = X x_1 U_1 x_2 ... x_d U_d``.

    ``modes`` optionally gives the order in which the mode products are
    applied; the result does not depend on it.
    """
    X = as_tensor(X)
    if X.shape != E.dims:
        raise ValueError("tensor shape %s does not match ensemble dims %s" % (X.shape, E.dims))
    if modes is None:
        modes = range(1, E.order + 1)
    modes = list(modes)
    return multi_mode_product(X, [E.matrices[n - 1] for n in modes], modes)


def kcs_operator(E, max_elements=DEFAULT_MAX_ELEMENTS):
    """Dense ``U_d kron ... kron U_1``, the vectorized form of :func:`sample`."""
    rows = math.prod(E.measures)
    cols = math.prod(E.dims)
    if rows * cols > max_elements:
        raise SizeOverflow(
            "Kronecker operator would be %d x %d (%d elements > cap %d)"
            % (rows, cols, rows * cols, max_elements)
        )
    return reduce(kronecker, reversed(E.matrices))


@dataclass(frozen=True)
class BoundParams:
    """Sparsity ``s`` and the universal constant ``c`` of ``m >= 2 c s ln(N/s)``."""

    s: int
    c: float = 1.0

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("c must be positive")
        if int(self.s) != self.s or self.s < 1:
            raise ValueError("s must be a positive integer")


def _ceil(x):
    # absorb rounding in values that are mathematically integral
    return int(math.ceil(x - 1e-9 * max(1.0, abs(x))))


def _log_ratios(dims, p):
    out = []
    for n in dims:
        if n <= p.s:
            raise VacuousBound("N=%s <= s=%d" % (n, p.s))
        out.append(math.log(n / p.s))
    return out


def bound_per_mode(N, p):
    """``ceil(2 c s ln(N / s))``."""
    (lr,) = _log_ratios([N], p)
    return _ceil(2.0 * p.c * p.s * lr)


def bound_kcs(dims, p):
    """``ceil(2 c s (-ln s + sum_i ln N_i))`` for the vectorized problem."""
    _log_ratios(dims, p)
    return _ceil(2.0 * p.c * p.s * (-math.log(p.s) + sum(math.log(n) for n in dims)))


def bound_gtcs_total(dims, p):
    """``ceil((2 c s)^d prod_i ln(N_i / s))``.

    This is the product of the unrounded per-mode bounds, so it assumes every
    fiber is as sparse as the whole tensor and is very loose.
    """
    return _ceil(math.prod(2.0 * p.c * p.s * lr for lr in _log_ratios(dims, p)))
