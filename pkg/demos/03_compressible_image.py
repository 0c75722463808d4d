# A smooth image is not sparse but its DCT coefficients fall off quickly.
# Recovery runs on the coefficients with the effective ensemble U_i Phi_i and
# maps back by synthesis.

import numpy as np

from gtcs import generate_ensemble, sample
from gtcs.harness import SparsifyingBasis, gen_compressible, psnr, to_transform_domain
from gtcs.harness import recover

X = gen_compressible((24, 24), seed=0)
B = SparsifyingBasis.dct(X.shape)

c = np.sort(np.abs(to_transform_domain(X, B)).ravel())[::-1]
print("largest DCT magnitudes", np.round(c[:4], 3), "... 100th", "%.1e" % c[99])

for m in (12, 18, 23):
    E = generate_ensemble(X.shape, (m, m), seed=m)
    Y = sample(X, E)
    line = []
    for method in ("GTCS_S", "GTCS_P", "KCS"):
        rep = recover(method, Y, E, basis=B, strict=False)
        line.append("%s %.1f dB" % (method, psnr(X, rep.recovered)))
    print("m=%d  " % m + "  ".join(line))
