import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from gtcs.fileio import MAGIC, dumps, load_tensor, loads, save_tensor


def test_layout_bytes():
    X = np.array([[1.0, 2.0], [3.0, 4.0]])
    buf = dumps(X)
    assert buf[:5] == b"GTCS1"
    assert struct.unpack_from("<III", buf, 5) == (2, 2, 2)
    # first index fastest
    assert struct.unpack_from("<4d", buf, 17) == (1.0, 3.0, 2.0, 4.0)
    assert len(buf) == 5 + 4 + 8 + 32


def test_file_roundtrip(tmp_path, rng):
    X = rng.standard_normal((3, 1, 4))
    p = tmp_path / "x.gtcs"
    save_tensor(p, X)
    Y = load_tensor(p)
    assert Y.shape == (3, 1, 4)
    assert np.array_equal(X, Y)


@pytest.mark.parametrize("buf", [b"", b"GTCS2" + bytes(8), MAGIC + b"\x01", MAGIC + struct.pack("<I", 0)])
def test_malformed_headers(buf):
    with pytest.raises(ValueError):
        loads(buf)


def test_payload_length_checked():
    buf = dumps(np.ones((2, 2)))
    with pytest.raises(ValueError):
        loads(buf[:-1])
    with pytest.raises(ValueError):
        loads(buf + b"\x00")


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(1, 5), min_size=1, max_size=4).flatmap(
    lambda s: arrays(np.float64, tuple(s), elements=st.floats(allow_nan=False, allow_infinity=False))))
def test_roundtrip_property(X):
    assert np.array_equal(loads(dumps(X)), X)
