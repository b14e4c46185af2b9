"""Binary field snapshots ("QTF1" files).

Layout, all little-endian::

    b"QTF1"
    u32 n1, u32 n2, u32 n3, u32 ncomp
    f64 box_length, f64 time
    ncomp arrays of n1*n2*n3 f64 values, x1 varying fastest

Simulation states are stored with 8 components: u1, u2, u3 followed by the five
stored Q entries q11, q12, q13, q22, q23.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"QTF1"
_HEADER = struct.Struct("<4I2d")


class SnapshotError(ValueError):
    pass


def write_snapshot(path, components: np.ndarray, box_length: float, time: float) -> None:
    components = np.asarray(components, dtype=float)
    if components.ndim == 3:
        components = components[None]
    if components.ndim != 4:
        raise SnapshotError("expected an array of shape (ncomp, n1, n2, n3)")
    ncomp, n1, n2, n3 = components.shape
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(_HEADER.pack(n1, n2, n3, ncomp, float(box_length), float(time)))
        for comp in components:
            fh.write(np.asarray(comp, dtype="<f8").ravel(order="F").tobytes())


def read_snapshot(path) -> tuple[np.ndarray, float, float]:
    """Return (components, box_length, time)."""
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise SnapshotError(f"{path}: bad magic {data[:4]!r}")
    n1, n2, n3, ncomp, box_length, time = _HEADER.unpack_from(data, 4)
    offset = 4 + _HEADER.size
    count = n1 * n2 * n3
    expected = offset + 8 * count * ncomp
    if len(data) != expected:
        raise SnapshotError(f"{path}: expected {expected} bytes, found {len(data)}")
    flat = np.frombuffer(data, dtype="<f8", offset=offset, count=count * ncomp)
    comps = np.stack([
        flat[c * count:(c + 1) * count].reshape((n1, n2, n3), order="F")
        for c in range(ncomp)
    ]).astype(float)
    return comps, box_length, time
