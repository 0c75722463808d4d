"""Tensor compressive sensing: multi-way sampling and serial/parallel recovery.

Modes are numbered from 1 and tensors are linearized column-major (first
index fastest) throughout; see :mod:`gtcs.tensor`.
"""
from .decomposition import (
    RankDeficientUpdate,
    RankOneSum,
    TuckerFactors,
    cp_als,
    hosvd,
    hosvd_rank_one_terms,
    khatri_rao,
    reconstruct,
    svd_rank_decomposition,
    weak_tucker_decomposition,
)
from .fileio import load_tensor, save_tensor
from .l1 import (
    InfeasibleSystem,
    NonConvergence,
    NonOrthonormalBasis,
    SolverConfig,
    SolverError,
    SolverStats,
    basis_pursuit,
    basis_pursuit_denoise,
    basis_pursuit_synthesis,
)
from .recovery import (
    DegenerateSpectrum,
    NoisyParams,
    RecoveryError,
    RecoveryReport,
    gtcs_p,
    gtcs_s,
    kcs_recover,
    mwcs_recover,
    noisy_columnwise,
    noisy_rank_truncated,
    rip_constant,
)
from .sensing import (
    BoundParams,
    MeasurementEnsemble,
    SizeOverflow,
    VacuousBound,
    bound_gtcs_total,
    bound_kcs,
    bound_per_mode,
    generate_ensemble,
    kcs_operator,
    sample,
)
from .tensor import (
    kronecker,
    mode_n_fold,
    mode_n_product,
    mode_n_unfold,
    multi_mode_product,
    outer_product,
    sparsity,
    unvectorize,
    vectorize,
)

__version__ = "0.1.0"
