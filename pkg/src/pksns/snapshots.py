"""Binary field snapshots.

Layout (all little-endian): magic bytes ``PKNS``, version (u32), N (u32),
L (f64), t (f64), then four row-major f64 arrays in order n, u1, u2, c.
Round trips are bit-exact.
"""

from __future__ import annotations

import struct

import numpy as np

from .spectral import make_grid
from .state import DensityField, SimState, VelocityField

MAGIC = b"PKNS"
VERSION = 1
_HEADER = struct.Struct("<4sIIdd")


def write_snapshot(path: str, state: SimState) -> None:
    grid = state.grid
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, grid.n, grid.length, state.t))
        for arr in (state.n.values, state.u.u1, state.u.u2, state.c):
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def read_snapshot(path: str) -> SimState:
    """Reload a snapshot; the Poisson variant tag is not stored."""
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        if len(header) != _HEADER.size:
            raise ValueError(f"{path}: truncated snapshot header")
        magic, version, n, length, t = _HEADER.unpack(header)
        if magic != MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        if version != VERSION:
            raise ValueError(f"{path}: unsupported snapshot version {version}")
        count = n * n
        payload = fh.read(4 * count * 8)
        if len(payload) != 4 * count * 8:
            raise ValueError(f"{path}: truncated snapshot payload")
    arrays = np.frombuffer(payload, dtype="<f8").reshape(4, n, n)
    grid = make_grid(n, length)
    return SimState(
        t=t,
        n=DensityField(grid, arrays[0].copy()),
        u=VelocityField(grid, arrays[1].copy(), arrays[2].copy()),
        c=arrays[3].copy(),
        variant=None,
    )
