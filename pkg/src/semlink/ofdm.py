"""OFDM baseband chain: Gray QAM, pilot framing, multipath + AWGN,
per-subcarrier MMSE channel estimation and equalization.

Conventions
-----------
* The modem IDFT/DFT pair is orthonormal (norm="ortho"), so noise of
  variance sigma^2 per complex time sample reappears with the same
  variance per resource element, and the received frequency-domain
  frame satisfies  rx[j,k] = H[k] * tx[j,k] + noise[j,k]  exactly,
  where H is the plain (unnormalized) L_fft-point DFT of the taps.
* Constellations are Gray-mapped squares with unit average energy.
  Each symbol's bits are [I bits | Q bits], MSB first; per axis the
  Gray-decoded index u maps to amplitude 2u - (m-1), m = sqrt(order).
* With unit-energy symbols and a unit-power delay profile, SNR in dB
  converts to noise variance as sigma^2 = 10^(-snr_db/10).

All operations are pure given explicit seeds; frames can be processed
in parallel without shared state.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bitops import bits_to_ints, ints_to_bits
from .errors import ConfigurationError, ParameterError

_PILOT_SEED = 0x53454D50  # fixed: pilots are public and shared by both ends

QAM_ORDERS = (4, 16, 64)


# ---------------------------------------------------------------------------
# channel model


@dataclass
class ChannelRealization:
    """Multipath taps with their frequency response and noise level."""

    taps: np.ndarray          # (L_taps,) complex
    l_fft: int
    noise_var: float          # sigma^2 per complex sample
    freq_response: np.ndarray = field(init=False)   # H[k], exactly DFT(taps)

    def __post_init__(self):
        self.taps = np.ascontiguousarray(self.taps, dtype=np.complex128)
        if self.taps.ndim != 1 or self.taps.size < 1:
            raise ParameterError("taps must be a nonempty 1-D complex array")
        if self.l_fft < 2:
            raise ParameterError("l_fft must be >= 2")
        if self.taps.size > self.l_fft:
            raise ParameterError("more taps than FFT bins")
        if self.noise_var < 0:
            raise ParameterError("noise_var must be >= 0")
        self.freq_response = np.fft.fft(self.taps, self.l_fft)

    @property
    def n_taps(self) -> int:
        return self.taps.size


def exponential_profile(n_taps: int, decay: float = 3.0) -> np.ndarray:
    """Unit-sum exponential power-delay profile."""
    if n_taps < 1:
        raise ParameterError("n_taps must be >= 1")
    p = np.exp(-np.arange(n_taps) / decay)
    return p / p.sum()


def draw_channel(n_taps: int, l_fft: int, noise_var: float, seed,
                 decay: float = 3.0) -> ChannelRealization:
    """Rayleigh taps: independent complex Gaussians scaled so that
    E|tap_l|^2 follows the unit-power exponential profile."""
    rng = np.random.default_rng(seed)
    p = exponential_profile(n_taps, decay)
    taps = np.sqrt(p / 2.0) * (rng.normal(size=n_taps) + 1j * rng.normal(size=n_taps))
    return ChannelRealization(taps=taps, l_fft=l_fft, noise_var=noise_var)


def noise_var_from_snr_db(snr_db: float) -> float:
    return float(10.0 ** (-snr_db / 10.0))


# ---------------------------------------------------------------------------
# constellations

_CONSTELLATIONS: dict[int, np.ndarray] = {}


def _gray_to_binary(g: np.ndarray) -> np.ndarray:
    b = g.copy()
    shift = 1
    while shift < 16:
        b ^= b >> shift
        shift <<= 1
    return b


def constellation(order: int) -> np.ndarray:
    """Unit-energy Gray square constellation, indexed by bit pattern."""
    if order not in QAM_ORDERS:
        raise ParameterError(f"order must be one of {QAM_ORDERS}")
    if order not in _CONSTELLATIONS:
        bpc = int(np.log2(order))
        half = bpc // 2
        m = 1 << half
        vals = np.arange(order, dtype=np.uint64)
        gi = (vals >> half) & (m - 1)           # I bits (first half, MSB side)
        gq = vals & (m - 1)                     # Q bits (second half)
        ui = _gray_to_binary(gi).astype(np.float64)
        uq = _gray_to_binary(gq).astype(np.float64)
        scale = 1.0 / np.sqrt(2.0 * (m * m - 1) / 3.0)
        points = ((2 * ui - (m - 1)) + 1j * (2 * uq - (m - 1))) * scale
        _CONSTELLATIONS[order] = points
    return _CONSTELLATIONS[order]


def qam_modulate(bits: np.ndarray, order: int = 16) -> np.ndarray:
    """Map a bit array (length divisible by log2(order)) to symbols."""
    points = constellation(order)
    bpc = int(np.log2(order))
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.size % bpc:
        raise ParameterError(f"bit length must be divisible by {bpc}")
    vals = bits_to_ints(bits, bpc)
    return points[vals.astype(np.intp)]


def qam_demodulate(symbols: np.ndarray, order: int = 16) -> np.ndarray:
    """Hard minimum-distance decisions; exact ties resolve to the
    lexicographically smallest bit pattern (lowest constellation index)."""
    points = constellation(order)
    bpc = int(np.log2(order))
    symbols = np.asarray(symbols, dtype=np.complex128).reshape(-1)
    # argmin returns the first minimum, i.e. the smallest bit pattern
    d2 = np.abs(symbols[:, None] - points[None, :]) ** 2
    vals = np.argmin(d2, axis=1).astype(np.uint64)
    return ints_to_bits(vals, bpc)


# ---------------------------------------------------------------------------
# framing and the air interface


def pilot_symbols(n_pilots: int, l_fft: int) -> np.ndarray:
    """Fixed unit-modulus pseudo-random pilot rows, known to both ends."""
    if n_pilots < 1:
        raise ParameterError("n_pilots must be >= 1")
    rng = np.random.default_rng(_PILOT_SEED)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=(n_pilots, l_fft))
    return np.exp(1j * phases)


@dataclass
class OfdmFrame:
    """Frequency-domain frame: known pilot rows plus payload rows."""

    pilots: np.ndarray          # (N_p, L_fft), unit modulus
    data: np.ndarray            # (N_s, L_fft); N_s may be 0
    cp_len: int
    subcarrier_perm: np.ndarray # permutation applied to data columns

    def __post_init__(self):
        self.pilots = np.ascontiguousarray(self.pilots, dtype=np.complex128)
        self.data = np.ascontiguousarray(self.data, dtype=np.complex128)
        if self.pilots.ndim != 2 or self.pilots.shape[0] < 1:
            raise ParameterError("need at least one pilot row")
        l_fft = self.pilots.shape[1]
        if l_fft < 2:
            raise ParameterError("l_fft must be >= 2")
        if self.data.ndim != 2 or self.data.shape[1] != l_fft:
            raise ParameterError("data and pilots disagree on L_fft")
        if not 0 <= self.cp_len < l_fft:
            raise ParameterError("cp_len must satisfy 0 <= cp_len < l_fft")
        if not np.allclose(np.abs(self.pilots), 1.0, atol=1e-9):
            raise ParameterError("pilot symbols must have unit power")
        perm = np.asarray(self.subcarrier_perm, dtype=np.intp)
        if perm.shape != (l_fft,) or not np.array_equal(np.sort(perm), np.arange(l_fft)):
            raise ParameterError("subcarrier_perm must be a permutation of [0, L_fft)")
        self.subcarrier_perm = perm

    @property
    def l_fft(self) -> int:
        return self.pilots.shape[1]


def channel_apply(frame: OfdmFrame, ch: ChannelRealization, seed):
    """Send a frame through the multipath channel with AWGN.

    IDFT -> cyclic prefix -> serialized tap convolution -> AWGN ->
    CP removal -> DFT. With cp_len >= n_taps - 1 the output equals the
    per-subcarrier model rx[j,k] = H[k] tx[j,k] + noise[j,k] with noise
    variance ch.noise_var per resource element.

    Returns (pilots_rx, data_rx) in the frequency domain.
    """
    if frame.cp_len < ch.n_taps - 1:
        raise ConfigurationError(
            f"cp_len={frame.cp_len} cannot absorb {ch.n_taps} taps (ISI not modeled)")
    if frame.l_fft != ch.l_fft:
        raise ParameterError("frame and channel disagree on L_fft")

    rows = np.vstack([frame.pilots, frame.data])
    time = np.fft.ifft(rows, axis=1, norm="ortho")
    with_cp = np.hstack([time[:, -frame.cp_len:], time]) if frame.cp_len else time
    serial = with_cp.reshape(-1)

    faded = np.convolve(serial, ch.taps)[: serial.size]
    if ch.noise_var > 0:
        rng = np.random.default_rng(seed)
        sigma = np.sqrt(ch.noise_var / 2.0)
        faded = faded + sigma * (rng.normal(size=faded.size)
                                 + 1j * rng.normal(size=faded.size))

    sym_len = frame.l_fft + frame.cp_len
    received = faded.reshape(rows.shape[0], sym_len)[:, frame.cp_len:]
    freq = np.fft.fft(received, axis=1, norm="ortho")
    n_p = frame.pilots.shape[0]
    return freq[:n_p], freq[n_p:]


def mmse_estimate(pilots_rx: np.ndarray, pilots_tx: np.ndarray,
                  noise_var: float) -> np.ndarray:
    """Per-subcarrier MMSE channel estimate from unit-power pilots:

        H_hat[k] = sum_i pilots_rx[i,k] * conj(pilots_tx[i,k]) / (N_p + sigma^2)
    """
    pilots_rx = np.asarray(pilots_rx, dtype=np.complex128)
    pilots_tx = np.asarray(pilots_tx, dtype=np.complex128)
    if pilots_rx.shape != pilots_tx.shape or pilots_rx.ndim != 2:
        raise ParameterError("pilot arrays must share a (N_p, L_fft) shape")
    n_p = pilots_rx.shape[0]
    return (pilots_rx * np.conj(pilots_tx)).sum(axis=0) / (n_p + noise_var)


def mmse_equalize(data_rx: np.ndarray, h_hat: np.ndarray,
                  noise_var: float) -> np.ndarray:
    """Per-subcarrier MMSE equalizer:

        out[j,k] = data_rx[j,k] * conj(H_hat[k]) / (|H_hat[k]|^2 + sigma^2)
    """
    data_rx = np.asarray(data_rx, dtype=np.complex128)
    h_hat = np.asarray(h_hat, dtype=np.complex128)
    if data_rx.ndim != 2 or h_hat.shape != (data_rx.shape[1],):
        raise ParameterError("data must be (N_s, L_fft) with a matching estimate")
    return data_rx * np.conj(h_hat) / (np.abs(h_hat) ** 2 + noise_var)


def channel_estimation_loss(h_hat: np.ndarray, h: np.ndarray) -> float:
    """Mean squared complex deviation of the estimate from the truth."""
    h_hat = np.asarray(h_hat, dtype=np.complex128)
    h = np.asarray(h, dtype=np.complex128)
    if h_hat.shape != h.shape:
        raise ParameterError("estimate and truth must have equal length")
    return float(np.mean(np.abs(h_hat - h) ** 2))
