# Noisy measurements Y' = U1 X U2^T + noise with ||noise||_F = eps.
# Both noisy procedures report the error bound they are meant to satisfy.

import numpy as np

from gtcs import NoisyParams, generate_ensemble, noisy_columnwise, noisy_rank_truncated, sample

rng = np.random.default_rng(3)
X = np.zeros((48, 48))
X.flat[rng.choice(X.size, 2, replace=False)] = rng.standard_normal(2)
E = generate_ensemble(X.shape, (32, 32), seed=3)

for eps in (1e-4, 1e-3, 1e-2):
    noise = rng.standard_normal((32, 32))
    Yp = sample(X, E) + eps * noise / np.linalg.norm(noise)
    p = NoisyParams(eps)
    a = noisy_columnwise(Yp, E, p)
    b = noisy_rank_truncated(Yp, E, p, s=2)
    print("eps=%g  columnwise error %.2e (bound %.2e)  rank-truncated error %.2e (bound %.2e, s'=%d)"
          % (eps, np.linalg.norm(a.recovered - X), a.extra["bound"],
             np.linalg.norm(b.recovered - X), b.extra["bound"], b.extra["s_prime"]))
