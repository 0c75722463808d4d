# The order-3 phantom: a 6 x 6 x 6 block of positive values in a 24^3 cube.
#
# Every fiber through the block is 6-sparse, so each per-mode program is a
# 6-sparse recovery in dimension 24.  Below is the PSNR of serial and
# parallel recovery as m grows.  KCS is left out: its operator at m=12 is
# already 1728 x 13824.

import numpy as np

from gtcs import generate_ensemble, gtcs_p, gtcs_s, sample
from gtcs.harness import gen_sparse_phantom, psnr

X = gen_sparse_phantom("sparse_video")
print("nonzeros", np.count_nonzero(X))

for m in (12, 14, 16, 18):
    E = generate_ensemble(X.shape, (m,) * 3, seed=m)
    Y = sample(X, E)
    s = gtcs_s(Y, E, strict=False)
    p = gtcs_p(Y, E, decomposition="CT", strict=False)
    print("m=%2d  normalized samples %.3f  GTCS-S %6.1f dB (%.2f s)  GTCS-P %6.1f dB (%.2f s, %d terms)"
          % (m, m ** 3 / X.size, psnr(X, s.recovered), s.wall_times["total"],
             psnr(X, p.recovered), p.wall_times["total"], p.extra["terms"]))
