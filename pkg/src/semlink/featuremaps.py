"""Semantic sources: feature-map sets, synthesis, quantization, file I/O.

A source item is a stack of N real-valued H'xW' activation maps plus a
class label. Maps are synthesized with a controllable concentration of
class signal (no network inference happens here), or loaded from the
"SEMF" binary format documented in `save_feature_maps`.

Everything in this module is a pure function of its arguments; values
are safe to share across threads.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .bitops import bits_to_ints, ints_to_bits
from .errors import DataError, FormatError, ParameterError

_MAGIC = b"SEMF"
_VERSION = 1

# Synthetic-source texture constants. Class signal lives in per-map mean
# activation (amplitude _AMP); items deviate from their class mean by a
# per-map jitter and a zero-mean pixel field whose spatial mean is small.
_AMP = 1.5
_SECONDARY = 0.25   # off-signature positive variation, fraction of _AMP
_MEAN_JITTER = 0.05
_PIXEL_NOISE = 0.3


@dataclass
class FeatureMapSet:
    """One semantic source item: N stacked H'xW' activation maps.

    maps are stored float32 so that file round-trips are bit-exact.
    """

    maps: np.ndarray          # (N, H', W') float32
    label: int
    source_id: str = ""

    def __post_init__(self):
        maps = np.ascontiguousarray(self.maps, dtype=np.float32)
        if maps.ndim != 3:
            raise ParameterError("maps must be a (N, H', W') array")
        n, h, w = maps.shape
        if n < 1 or h < 1 or w < 1:
            raise ParameterError("need N >= 1, H' >= 1, W' >= 1")
        if not np.all(np.isfinite(maps)):
            raise DataError("feature maps contain non-finite values")
        if self.label < 0:
            raise ParameterError("label must be nonnegative")
        self.maps = maps

    @property
    def n_maps(self) -> int:
        return self.maps.shape[0]

    @property
    def map_shape(self) -> tuple[int, int]:
        return self.maps.shape[1], self.maps.shape[2]


@dataclass
class QuantizedPayload:
    """Uniformly quantized map: (min,max) dequantization range + raw bits."""

    map_index: int
    min_val: float
    max_val: float
    bits: np.ndarray = field(repr=False)  # length H'*W'*B, uint8 0/1
    bits_per_sample: int = 8


def important_map_count(n_maps: int) -> int:
    """Number of maps that carry the concentrated class signal at skew=1."""
    return math.ceil(0.4 * n_maps)


def synth_dataset(n_items, n_maps, map_shape, n_classes, skew, seed):
    """Generate a labeled list of FeatureMapSet items.

    Class identity is planted in the per-map mean activation so that a
    linear head over spatial means can recover it. `skew` scales the
    class signal outside the top `important_map_count(n_maps)` maps:
    at skew=1 those maps carry essentially all discriminative energy,
    at skew=0 the signal is spread uniformly.

    Deterministic: identical arguments (including seed) give
    bit-identical datasets.
    """
    if n_items < 1:
        raise ParameterError("n_items must be >= 1")
    if n_classes < 1:
        raise ParameterError("n_classes must be >= 1")
    if n_maps < n_classes:
        raise ParameterError("need n_maps >= n_classes")
    h, w = map_shape
    if h < 1 or w < 1:
        raise ParameterError("map_shape entries must be >= 1")
    if not 0.0 <= skew <= 1.0:
        raise ParameterError("skew must lie in [0, 1]")

    rng = np.random.default_rng(seed)
    k = important_map_count(n_maps)

    # Each map carries a positive activation bump for its signature
    # class (map i fires for class i mod n_classes) plus a smaller
    # positive class-specific variation. Maps outside the top-k are
    # attenuated by (1 - skew); at skew=1 they are pure noise.
    signature = np.arange(n_maps) % n_classes
    onehot = (signature[None, :] == np.arange(n_classes)[:, None]).astype(float)
    variation = rng.uniform(size=(n_classes, n_maps))
    pattern = _AMP * (onehot + _SECONDARY * variation)
    pattern[:, k:] *= (1.0 - skew)

    items = []
    for t in range(n_items):
        label = t % n_classes
        mean_jitter = rng.normal(0.0, _MEAN_JITTER, size=n_maps)
        pixels = rng.normal(0.0, _PIXEL_NOISE, size=(n_maps, h, w))
        maps = (pattern[label] + mean_jitter)[:, None, None] + pixels
        items.append(FeatureMapSet(maps=maps.astype(np.float32),
                                   label=label,
                                   source_id=f"synth-{seed}-{t:05d}"))
    return items


def quantize_map(map2d, bits_per_sample: int = 8, map_index: int = 0) -> QuantizedPayload:
    """Uniform quantization of one map over its own [min, max] range.

    Degenerate range (min == max) encodes as all-zero bits and
    dequantizes back to the exact constant.
    """
    if not 1 <= bits_per_sample <= 16:
        raise ParameterError("bits_per_sample must be in [1, 16]")
    m = np.asarray(map2d, dtype=np.float64)
    if not np.all(np.isfinite(m)):
        raise DataError("cannot quantize non-finite values")
    lo = float(m.min())
    hi = float(m.max())
    levels = (1 << bits_per_sample) - 1
    if hi > lo:
        codes = np.rint((m.reshape(-1) - lo) / (hi - lo) * levels)
        codes = np.clip(codes, 0, levels).astype(np.uint64)
    else:
        codes = np.zeros(m.size, dtype=np.uint64)
    return QuantizedPayload(map_index=map_index, min_val=lo, max_val=hi,
                            bits=ints_to_bits(codes, bits_per_sample),
                            bits_per_sample=bits_per_sample)


def dequantize_payload(payload: QuantizedPayload, shape) -> np.ndarray:
    """Invert quantize_map; max per-element error is range/(2^B - 1).

    Returns float64 so the degenerate min==max case is exact; callers
    that rebuild a FeatureMapSet downcast to its float32 storage.
    """
    h, w = shape
    b = payload.bits_per_sample
    if payload.bits.size != h * w * b:
        raise ParameterError("bit length does not match the requested shape")
    codes = bits_to_ints(payload.bits, b).astype(np.float64)
    if payload.max_val > payload.min_val:
        step = (payload.max_val - payload.min_val) / ((1 << b) - 1)
        vals = payload.min_val + codes * step
    else:
        vals = np.full(h * w, payload.min_val)
    return vals.reshape(h, w)


def save_feature_maps(item: FeatureMapSet, path) -> None:
    """Write the SEMF binary format.

    Layout (little-endian, no padding): magic "SEMF", version u16=1,
    N u16, H' u16, W' u16, label u16, then N*H'*W' float32 activations
    in row-major, map-major order.
    """
    n, h, w = item.maps.shape
    if max(n, h, w, item.label) > 0xFFFF:
        raise DataError("dimensions or label exceed the u16 file format")
    header = _MAGIC + struct.pack("<HHHHH", _VERSION, n, h, w, item.label)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(item.maps.astype("<f4").tobytes())


def load_feature_maps(path) -> FeatureMapSet:
    """Read the SEMF binary format; strict about sizes and finiteness."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 14:
        raise FormatError("file too short for a SEMF header")
    if blob[:4] != _MAGIC:
        raise FormatError("bad magic; not a SEMF file")
    version, n, h, w, label = struct.unpack("<HHHHH", blob[4:14])
    if version != _VERSION:
        raise FormatError(f"unsupported SEMF version {version}")
    if n < 1 or h < 1 or w < 1:
        raise FormatError("header declares an empty map stack")
    expect = 14 + 4 * n * h * w
    if len(blob) != expect:
        raise FormatError(f"payload size mismatch: have {len(blob)} bytes, header implies {expect}")
    maps = np.frombuffer(blob, dtype="<f4", offset=14).reshape(n, h, w)
    if not np.all(np.isfinite(maps)):
        raise FormatError("file contains non-finite activations")
    return FeatureMapSet(maps=maps.copy(), label=label)
