"""Key material: reciprocal-channel probing, score-keyed hashing,
keystream expansion, and brute-force search-space accounting.

The "lightweight hash" is a fixed 64-bit multiply-xor-rotate mixing
function, frozen by golden vectors (tests/golden/hash_vectors.txt) so
the derived keys are bit-exact on every platform. All mod-1 arithmetic
runs in Q0.32 fixed point for the same reason.

Tag packing for domain separation: tag = (domain << 56) | (index << 32) | block.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bitops import bits_to_int, cycle_to_length, int_to_bits, xor_bits
from .errors import ParameterError
from .importance import ImportanceVector

_M64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MUL1 = 0xBF58476D1CE4E5B9
_MUL2 = 0x94D049BB133111EB

# Domain constants for tag packing.
DOM_WEIGHT = 1
DOM_KEYSTREAM = 2
DOM_SKEY = 3
DOM_STATIC_PAD = 4
DOM_SEED_SPLIT = 5

DEFAULT_L_SCORES = 16
DEFAULT_L_SKEY = 64
DEFAULT_L_PLK = 128

_Q32 = 1 << 32


def _rotl(x: int, r: int) -> int:
    return ((x << r) | (x >> (64 - r))) & _M64


def hash64(value: int, tag: int) -> int:
    """Keyed 64-bit mixing function (two multiply-xor-rotate rounds).

    The additive golden-ratio tag injection avoids the trivial
    zero fixed point of a pure xor combination.
    """
    h = ((value & _M64) + (tag + 1) * _GOLDEN) & _M64
    for r in (25, 47):
        h = (h * _MUL1) & _M64
        h ^= _rotl(h, r)
        h = (h * _MUL2) & _M64
        h ^= h >> 31
    return h


def pack_tag(domain: int, index: int = 0, block: int = 0) -> int:
    if not (0 <= domain < 256 and 0 <= index < (1 << 24) and 0 <= block < (1 << 32)):
        raise ParameterError("tag component out of range")
    return (domain << 56) | (index << 32) | block


def expand_bits(value: int, domain: int, index: int, n_bits: int) -> np.ndarray:
    """Counter-mode expansion of hash64 into an n_bits bit array."""
    if n_bits < 1:
        raise ParameterError("n_bits must be >= 1")
    n_blocks = -(-n_bits // 64)
    words = [hash64(value, pack_tag(domain, index, j)) for j in range(n_blocks)]
    out = np.concatenate([int_to_bits(wd, 64) for wd in words])
    return out[:n_bits]


def fold_bits(bits: np.ndarray) -> int:
    """Collapse a bit array into one 64-bit word by hash chaining.

    The bit length enters the chain so that zero-padding cannot collide.
    """
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.size == 0:
        raise ParameterError("cannot fold an empty bit array")
    pad = (-bits.size) % 64
    padded = np.concatenate([bits, np.zeros(pad, dtype=np.uint8)])
    state = hash64(bits.size, tag=0)
    for j in range(padded.size // 64):
        chunk = bits_to_int(padded[64 * j:64 * (j + 1)])
        state = hash64(state ^ chunk, tag=j + 1)
    return state


@dataclass
class PlkProbe:
    """Result of a reciprocal channel probing round."""

    alice: np.ndarray             # bits at one end
    bob: np.ndarray               # bits at the other end
    static_environment: bool      # channel had no gain diversity; keys padded


def probe_plk(channel, n_bits: int, measurement_noise: float = 0.0,
              seed: int = 0) -> PlkProbe:
    """Extract shared bits from the channel's subcarrier magnitudes.

    Both ends observe the same per-probe perturbed magnitude (the
    reciprocal channel), each corrupted by independent measurement
    noise, and quantize against the running median of their own
    sequence. Zero measurement noise gives identical keys; the
    disagreement rate grows continuously with the noise level.

    A gain-flat channel cannot produce diversity; that degenerate case
    is flagged and both keys are padded with the same seeded
    pseudo-random bits.
    """
    if n_bits < 1:
        raise ParameterError("n_bits must be >= 1")
    if measurement_noise < 0:
        raise ParameterError("measurement_noise must be >= 0")

    mags = np.abs(channel.freq_response)
    spread = float(mags.max() - mags.min())
    if spread <= 1e-12 * max(float(mags.max()), 1.0):
        pad = expand_bits(seed, DOM_STATIC_PAD, 0, n_bits)
        return PlkProbe(alice=pad, bob=pad.copy(), static_environment=True)

    rng_common = np.random.default_rng(seed)
    rng_a = np.random.default_rng(hash64(seed, pack_tag(DOM_SEED_SPLIT, 0, 1)))
    rng_b = np.random.default_rng(hash64(seed, pack_tag(DOM_SEED_SPLIT, 0, 2)))

    scale = float(mags.mean())
    ks = np.arange(n_bits) % mags.size
    common = mags[ks] + 0.1 * scale * rng_common.normal(size=n_bits)
    obs_a = common + measurement_noise * scale * rng_a.normal(size=n_bits)
    obs_b = common + measurement_noise * scale * rng_b.normal(size=n_bits)

    def quantize(obs: np.ndarray) -> np.ndarray:
        bits = np.empty(n_bits, dtype=np.uint8)
        for t in range(n_bits):
            bits[t] = 1 if obs[t] > np.median(obs[:t + 1]) else 0
        return bits

    return PlkProbe(alice=quantize(obs_a), bob=quantize(obs_b),
                    static_environment=False)


def weight_stream(seed_bits: np.ndarray, n: int, bits_per_weight: int = DEFAULT_L_SCORES) -> np.ndarray:
    """Expand a seed into n fixed-point weights in [0, 1).

    Each weight is a bits_per_weight-bit unsigned value read as a
    Q0.bits_per_weight fraction, drawn from the keyed hash in counter
    mode. Deterministic in (seed, n, bits_per_weight).
    """
    seed_bits = np.asarray(seed_bits, dtype=np.uint8)
    if seed_bits.size == 0:
        raise ParameterError("seed must be nonempty")
    if n < 1:
        raise ParameterError("n must be >= 1")
    if not 1 <= bits_per_weight <= 32:
        raise ParameterError("bits_per_weight must be in [1, 32]")
    key = fold_bits(seed_bits)
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        word = hash64(key, pack_tag(DOM_WEIGHT, i, 0))
        frac = word >> (64 - bits_per_weight)
        out[i] = frac / float(1 << bits_per_weight)
    return out


def _q32(x: float) -> int:
    """Quantize a value in [0, 1] to Q0.32 (nearest, clamped)."""
    return min(max(int(round(x * _Q32)), 0), _Q32 - 1)


def skey_stream(iv: ImportanceVector, weights: np.ndarray,
                l_skey: int = DEFAULT_L_SKEY) -> list[np.ndarray]:
    """Per-map keys from hashed fixed-point weight-score products.

    generated_i = (weight_i * q(score_i)) mod 1 in Q0.32; the i-th key
    is the keyed hash of that 32-bit value under domain tag i,
    truncated to l_skey bits. Bit-exact on any platform.
    """
    scores = np.asarray(iv.scores, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != scores.shape:
        raise ParameterError("weights length must match scores length")
    if l_skey < 1:
        raise ParameterError("l_skey must be >= 1")
    keys = []
    for i in range(scores.size):
        w32 = _q32(float(weights[i]))
        s32 = _q32(float(scores[i]))
        generated = (w32 * s32) >> 32          # product of two Q0.32 fractions, mod 1
        keys.append(expand_bits(generated, DOM_SKEY, i, l_skey))
    return keys


def derive_keystream(skeys: list[np.ndarray], plk: np.ndarray, length: int) -> np.ndarray:
    """Seed key = concat(skeys) XOR plk (shorter cycled), expanded in
    counter mode to `length` bits. Prefixes are stable in `length`."""
    if length < 1:
        raise ParameterError("length must be >= 1")
    if not skeys:
        raise ParameterError("skeys must be nonempty")
    plk = np.asarray(plk, dtype=np.uint8)
    if plk.size == 0:
        raise ParameterError("plk must be nonempty")
    seed_key = make_seed_key(skeys, plk)
    return expand_bits(fold_bits(seed_key), DOM_KEYSTREAM, 0, length)


def make_seed_key(skeys: list[np.ndarray], plk: np.ndarray) -> np.ndarray:
    """concat(skeys) XOR plk over the longer of the two lengths."""
    concat = np.concatenate([np.asarray(k, dtype=np.uint8) for k in skeys])
    common = max(concat.size, plk.size)
    return xor_bits(cycle_to_length(concat, common), cycle_to_length(plk, common))


@dataclass
class KeyMaterial:
    """Everything both legitimate ends share for one transmission."""

    plk: np.ndarray
    skey_stream: list[np.ndarray]
    seed_key: np.ndarray

    def keystream(self, length: int) -> np.ndarray:
        return expand_bits(fold_bits(self.seed_key), DOM_KEYSTREAM, 0, length)


def make_key_material(plk: np.ndarray, skeys: list[np.ndarray]) -> KeyMaterial:
    return KeyMaterial(plk=np.asarray(plk, dtype=np.uint8), skey_stream=list(skeys),
                       seed_key=make_seed_key(skeys, plk))


@dataclass
class SearchSpace:
    """Exact brute-force attempt count, stored as multiplier * 2^log2."""

    multiplier: int
    log2: int

    def value(self) -> int:
        return self.multiplier * (1 << self.log2)

    def __str__(self) -> str:
        if self.multiplier == 1:
            return f"2^{self.log2}"
        return f"{self.multiplier} * 2^{self.log2}"


def _check_positive(**kwargs):
    for name, v in kwargs.items():
        if v < 1:
            raise ParameterError(f"{name} must be >= 1")


def search_space_scores(l_scores: int, n: int) -> SearchSpace:
    """(2^l_scores)^n attempts to guess all per-map weights."""
    _check_positive(l_scores=l_scores, n=n)
    return SearchSpace(multiplier=1, log2=l_scores * n)


def search_space_skey(l_skey: int, n: int) -> SearchSpace:
    """(2^l_skey)^n attempts to guess the whole per-map key stream."""
    _check_positive(l_skey=l_skey, n=n)
    return SearchSpace(multiplier=1, log2=l_skey * n)


def search_space_seed(l_seedkey: int) -> SearchSpace:
    """2^l_seedkey attempts against a single fixed seed key."""
    _check_positive(l_seedkey=l_seedkey)
    return SearchSpace(multiplier=1, log2=l_seedkey)


def search_space_total(l_seedkey: int, n: int) -> SearchSpace:
    """n * 2^(l_seedkey*n): key stream and allocation jointly unknown."""
    _check_positive(l_seedkey=l_seedkey, n=n)
    return SearchSpace(multiplier=n, log2=l_seedkey * n)


def check_golden_file(path) -> list[tuple[int, str, str]]:
    """Verify a golden-vector file of lines "input_hex tag expected_hex".

    Returns a list of (line_number, got_hex, expected_hex) mismatches;
    an empty list means the hash still matches its frozen vectors.
    """
    mismatches = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            in_hex, tag_s, want_hex = line.split()
            got = hash64(int(in_hex, 16), int(tag_s))
            if got != int(want_hex, 16):
                mismatches.append((lineno, f"{got:016x}", want_hex))
    return mismatches
