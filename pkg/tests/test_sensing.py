import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gtcs.sensing import (
    BoundParams,
    MeasurementEnsemble,
    SizeOverflow,
    VacuousBound,
    bound_gtcs_total,
    bound_kcs,
    bound_per_mode,
    generate_ensemble,
    kcs_operator,
    mode_rng,
    sample,
)
from gtcs.tensor import vectorize


def test_shapes_and_metadata():
    E = generate_ensemble((8, 9, 10), (3, 4, 5), "gaussian", seed=7)
    assert [U.shape for U in E.matrices] == [(3, 8), (4, 9), (5, 10)]
    assert E.dims == (8, 9, 10) and E.measures == (3, 4, 5) and E.order == 3
    assert E.metadata() == {"distribution": "gaussian", "seed": 7, "dims": [8, 9, 10], "measures": [3, 4, 5]}


def test_reproducible_and_mode_independent():
    a = generate_ensemble((20, 30), (5, 6), seed=3)
    b = generate_ensemble((20, 30), (5, 6), seed=3)
    assert all(np.array_equal(x, y) for x, y in zip(a.matrices, b.matrices))
    # mode 2's matrix does not depend on mode 1's size
    c = generate_ensemble((11, 30), (2, 6), seed=3)
    assert np.array_equal(a.matrices[1], c.matrices[1])
    d = generate_ensemble((20, 30), (5, 6), seed=4)
    assert not np.array_equal(a.matrices[0], d.matrices[0])


def test_mode_streams_differ():
    x1 = mode_rng(0, 1).standard_normal(5)
    x2 = mode_rng(0, 2).standard_normal(5)
    assert not np.allclose(x1, x2)


@pytest.mark.parametrize("dist", ["gaussian", "bernoulli"])
def test_entry_variance(dist):
    E = generate_ensemble((4000,), (50,), dist, seed=1)
    U = E.matrices[0]
    assert abs(U.mean()) < 0.01 / math.sqrt(50) * 10
    assert abs(U.var() * 50 - 1.0) < 0.02
    if dist == "bernoulli":
        assert np.allclose(np.abs(U), 1 / math.sqrt(50))


def test_ensemble_validation():
    with pytest.raises(ValueError):
        generate_ensemble((4,), (5,))
    with pytest.raises(ValueError):
        generate_ensemble((4, 4), (2,))
    with pytest.raises(ValueError):
        generate_ensemble((4,), (2,), "uniform")
    with pytest.raises(ValueError):
        MeasurementEnsemble((np.zeros((3, 2)),))


def test_matrices_are_read_only():
    E = generate_ensemble((5,), (3,))
    with pytest.raises(ValueError):
        E.matrices[0][0, 0] = 1.0


def test_identity_sampling_is_noop(rng):
    X = rng.standard_normal((3, 4, 2))
    assert np.array_equal(sample(X, MeasurementEnsemble.identity(X.shape)), X)


def test_sample_mode_order_irrelevant(rng):
    X = rng.standard_normal((5, 6, 7))
    E = generate_ensemble(X.shape, (2, 3, 4), seed=0)
    assert np.allclose(sample(X, E), sample(X, E, modes=[3, 1, 2]), atol=1e-12)


def test_sample_shape_mismatch(rng):
    E = generate_ensemble((5, 6), (2, 3))
    with pytest.raises(ValueError):
        sample(rng.standard_normal((6, 5)), E)


def test_kcs_size_cap():
    E = generate_ensemble((10, 10), (5, 5))
    assert kcs_operator(E).shape == (25, 100)
    with pytest.raises(SizeOverflow):
        kcs_operator(E, max_elements=2499)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.integers(1, 5), min_size=2, max_size=4), st.integers(0, 10 ** 6))
def test_kronecker_identity(dims, seed):
    r = np.random.default_rng(seed)
    measures = [int(r.integers(1, n + 1)) for n in dims]
    E = generate_ensemble(dims, measures, seed=seed)
    X = r.standard_normal(dims)
    assert np.allclose(vectorize(sample(X, E)), kcs_operator(E) @ vectorize(X), atol=1e-10)


# bound values below were evaluated with mpmath at 30 digits
def test_bound_per_mode():
    p = BoundParams(s=6)
    assert bound_per_mode(24, p) == 17          # 12 ln 4 = 16.6355...
    assert bound_per_mode(64, BoundParams(14)) == 43   # 28 ln(64/14) = 42.555...
    assert bound_per_mode(64, BoundParams(18)) == 46   # 36 ln(64/18) = 45.666...


def test_bound_kcs_and_total():
    p = BoundParams(s=6)
    assert bound_kcs((24, 24, 24), p) == 93          # 12 (3 ln 24 - ln 6) = 92.908...
    assert bound_gtcs_total((24, 24, 24), p) == 4604  # (12 ln 4)^3 = 4603.73...


def test_bound_integral_values_not_rounded_up():
    # 2 c s ln(N/s) = 2 exactly for c = 1/ln 2, s = 1, N = 2
    assert bound_per_mode(2, BoundParams(1, 1 / math.log(2))) == 2


def test_bound_constant_scales():
    assert bound_per_mode(24, BoundParams(6, 2.0)) == 34  # 24 ln 4 = 33.27...


def test_vacuous_bound():
    with pytest.raises(VacuousBound):
        bound_per_mode(6, BoundParams(6))
    with pytest.raises(VacuousBound):
        bound_kcs((24, 5), BoundParams(6))


def test_bound_params_validation():
    with pytest.raises(ValueError):
        BoundParams(0)
    with pytest.raises(ValueError):
        BoundParams(2, c=0)
    with pytest.raises(ValueError):
        BoundParams(2.5)
