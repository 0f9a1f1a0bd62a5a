"""Run-length codec for binary masks.

Counts alternate starting with the number of leading zeros (possibly 0),
so [1,1,0,0,0] encodes as [0,2,3]. This is the on-disk format for every
mask in the bundle: 2D masks, point-level proposals and visibility maps.
"""
from __future__ import annotations

import numpy as np


class RLEError(ValueError):
    pass


def encode_rle(bits) -> list[int]:
    """Encode a 1-D binary sequence as alternating run counts, zeros first."""
    bits = np.asarray(bits).astype(bool).ravel()
    if bits.size == 0:
        raise RLEError("cannot encode an empty bit sequence")
    # boundaries between runs
    change = np.flatnonzero(bits[1:] != bits[:-1]) + 1
    starts = np.concatenate(([0], change, [bits.size]))
    runs = np.diff(starts).tolist()
    if bits[0]:
        runs = [0] + runs
    return [int(r) for r in runs]


def decode_rle(runs, length: int) -> np.ndarray:
    """Inverse of :func:`encode_rle`. Returns a bool array of `length` bits."""
    runs = [int(r) for r in runs]
    if any(r < 0 for r in runs):
        raise RLEError("negative run length")
    total = sum(runs)
    if total != length:
        raise RLEError(f"run sum {total} does not match declared length {length}")
    out = np.zeros(length, dtype=bool)
    pos = 0
    value = False
    for r in runs:
        if value:
            out[pos:pos + r] = True
        pos += r
        value = not value
    return out
