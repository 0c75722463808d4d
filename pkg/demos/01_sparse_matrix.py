# Compressing a sparse matrix with two small Gaussian matrices and getting it back.
#
# Y = U1 X U2^T keeps 16*16 numbers out of 24*24.  Serial recovery undoes one
# side at a time, parallel recovery splits Y into rank-one pieces first, and
# KCS solves one big problem with kron(U2, U1).

import numpy as np

from gtcs import generate_ensemble, gtcs_p, gtcs_s, kcs_recover, sample

rng = np.random.default_rng(0)
X = np.zeros((24, 24))
X.flat[rng.choice(X.size, 3, replace=False)] = rng.standard_normal(3)

E = generate_ensemble(X.shape, (16, 16), seed=1)
Y = sample(X, E)
print("measurements", Y.shape, "from", X.shape)

for name, rep in [("GTCS-S", gtcs_s(Y, E)),
                  ("GTCS-P", gtcs_p(Y, E, decomposition="SVD")),
                  ("KCS", kcs_recover(Y, E))]:
    err = np.linalg.norm(rep.recovered - X) / np.linalg.norm(X)
    print("%-7s rel. error %.1e  solver calls %3d  %.3f s"
          % (name, err, rep.solver_calls, rep.wall_times["total"]))

# Denser signals are harder for the per-mode methods.  Each column program of
# the serial method sees the union of the row supports, so 8 scattered
# nonzeros in a 16 x 16 matrix often look 6-8 sparse to a 12 x 16 matrix,
# beyond what l1 recovery can do there.  KCS sees all 144 measurements at once.
hits = {"GTCS-S": 0, "GTCS-P": 0, "KCS": 0}
for trial in range(20):
    r = np.random.default_rng(100 + trial)
    X = np.zeros((16, 16))
    X.flat[r.choice(256, 8, replace=False)] = r.standard_normal(8)
    E = generate_ensemble(X.shape, (12, 12), seed=trial)
    Y = sample(X, E)
    for name, f in [("GTCS-S", gtcs_s), ("GTCS-P", lambda Y, E, **k: gtcs_p(Y, E, decomposition="SVD", **k)),
                    ("KCS", kcs_recover)]:
        rep = f(Y, E, strict=False)
        hits[name] += np.linalg.norm(rep.recovered - X) <= 1e-6 * np.linalg.norm(X)
print("exact out of 20 at 16x16, s=8, m=12:", hits)
