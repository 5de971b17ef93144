"""Bit-array helpers.

Bits are numpy uint8 arrays of 0/1 values, most significant bit first
inside every fixed-width group. All functions are pure.
"""
from __future__ import annotations

import numpy as np

from .errors import ParameterError


def int_to_bits(value: int, width: int) -> np.ndarray:
    """Encode a nonnegative int as `width` bits, MSB first."""
    if width < 1:
        raise ParameterError("width must be >= 1")
    if value < 0 or value >> width:
        raise ParameterError(f"value {value} does not fit in {width} bits")
    return np.array([(value >> (width - 1 - i)) & 1 for i in range(width)], dtype=np.uint8)


def bits_to_int(bits: np.ndarray) -> int:
    """Decode an MSB-first bit array into a Python int."""
    out = 0
    for b in np.asarray(bits, dtype=np.uint8):
        out = (out << 1) | int(b)
    return out


def ints_to_bits(values: np.ndarray, width: int) -> np.ndarray:
    """Vectorized encoding: each value becomes `width` MSB-first bits."""
    values = np.asarray(values, dtype=np.uint64)
    shifts = np.arange(width - 1, -1, -1, dtype=np.uint64)
    return ((values[:, None] >> shifts[None, :]) & np.uint64(1)).astype(np.uint8).reshape(-1)


def bits_to_ints(bits: np.ndarray, width: int) -> np.ndarray:
    """Vectorized decoding of a flat bit array into width-sized groups."""
    bits = np.asarray(bits, dtype=np.uint64)
    if bits.size % width:
        raise ParameterError("bit length is not a multiple of the group width")
    groups = bits.reshape(-1, width)
    weights = np.uint64(1) << np.arange(width - 1, -1, -1, dtype=np.uint64)
    return (groups * weights).sum(axis=1, dtype=np.uint64)


def xor_bits(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Element-wise XOR of two equal-length bit arrays."""
    a = np.asarray(a, dtype=np.uint8)
    b = np.asarray(b, dtype=np.uint8)
    if a.shape != b.shape:
        raise ParameterError("bit arrays must have equal length")
    return np.bitwise_xor(a, b)


def cycle_to_length(bits: np.ndarray, length: int) -> np.ndarray:
    """Repeat a bit array cyclically (or truncate) to an exact length."""
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.size == 0:
        raise ParameterError("cannot cycle an empty bit array")
    reps = -(-length // bits.size)
    return np.tile(bits, reps)[:length]
