"""Reading and writing tensors in the GTCS1 binary format.

Layout (all little-endian)::

    b"GTCS1"                      5-byte magic
    uint32 d                      order
    uint32 N_1 ... uint32 N_d     dimensions
    float64 x prod(N_i)           entries, column-major (first index fastest)
"""
import struct

import numpy as np

from .tensor import as_tensor

MAGIC = b"GTCS1"

__all__ = ["MAGIC", "dumps", "loads", "save_tensor", "load_tensor"]


def dumps(X):
    """Serialize a tensor to GTCS1 bytes."""
    X = as_tensor(X)
    head = MAGIC + struct.pack("<I", X.ndim) + struct.pack("<%dI" % X.ndim, *X.shape)
    return head + np.asarray(X, dtype="<f8").tobytes(order="F")


def loads(buf):
    """Parse GTCS1 bytes back into a tensor."""
    buf = bytes(buf)
    if buf[:5] != MAGIC:
        raise ValueError("not a GTCS1 stream (bad magic)")
    if len(buf) < 9:
        raise ValueError("truncated GTCS1 header")
    (d,) = struct.unpack_from("<I", buf, 5)
    if d < 1:
        raise ValueError("GTCS1 order must be >= 1")
    off = 9 + 4 * d
    if len(buf) < off:
        raise ValueError("truncated GTCS1 header")
    dims = struct.unpack_from("<%dI" % d, buf, 9)
    if min(dims) < 1:
        raise ValueError("GTCS1 dimensions must be >= 1")
    count = int(np.prod(dims, dtype=np.int64))
    if len(buf) != off + 8 * count:
        raise ValueError(
            "GTCS1 payload has %d bytes, expected %d" % (len(buf) - off, 8 * count)
        )
    data = np.frombuffer(buf, dtype="<f8", count=count, offset=off)
    return as_tensor(np.reshape(data.astype(np.float64), dims, order="F"))


def save_tensor(path, X):
    with open(path, "wb") as fh:
        fh.write(dumps(X))


def load_tensor(path):
    with open(path, "rb") as fh:
        return loads(fh.read())
