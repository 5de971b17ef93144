"""End-to-end transmission pipeline and experiment sweeps.

One trial runs the full chain: importance scoring -> budgeted map
selection -> seeded weight/key derivation -> quantize -> XOR-encrypt ->
channel-ranked subcarrier allocation -> OFDM over a multipath channel,
then a legitimate receiver (shares keys and allocation feedback) and an
eavesdropper (independent channel, knows every algorithm, guesses
identity allocation and an all-zero keystream).

Measurement conventions
-----------------------
* `ber_legit` compares the decrypted bits against the original payload.
* `ber_plaintext` is the channel BER of the *same* on-air frame
  (demodulated bits against the bits that were actually modulated).
  Because XOR-ing the keystream at both ends cancels exactly, the two
  error vectors are identical bit for bit; the plaintext column is the
  "original signal" baseline the encrypted pipeline must match.
* Latency is a payload-symbol count times a configurable symbol
  duration, never wall-clock.

Determinism: a master seed fans out to per-trial, per-lane seeds
through the keyed hash, so trials are independent of execution order
and identical configs reproduce byte-identical CSVs.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from .allocation import AllocationMap, allocate, apply_allocation, deallocate, rank_subchannels
from .bitops import xor_bits
from .config import RunConfig
from .errors import ParameterError
from .featuremaps import (FeatureMapSet, QuantizedPayload, dequantize_payload,
                          quantize_map, synth_dataset)
from .importance import HeadParams, importance, predict, train_head
from .keys import (KeyMaterial, hash64, make_key_material, pack_tag, probe_plk,
                   search_space_scores, search_space_seed, search_space_skey,
                   search_space_total, skey_stream, weight_stream, DOM_SEED_SPLIT)
from .ofdm import (ChannelRealization, OfdmFrame, channel_apply,
                   channel_estimation_loss, draw_channel, mmse_equalize,
                   mmse_estimate, noise_var_from_snr_db, pilot_symbols,
                   qam_demodulate, qam_modulate)
from .selection import Selection, select_maps

# Per-trial seed lanes.
LANE_CH_LEGIT = 1
LANE_CH_EVE = 2
LANE_PLK = 3
LANE_CSI_PROBE = 4
LANE_TX_NOISE = 5
LANE_EVE_NOISE = 6


def derive_seed(master_seed: int, trial: int, lane: int) -> int:
    """Counter-mode split of the master seed; order-insensitive."""
    return hash64(master_seed, pack_tag(DOM_SEED_SPLIT, trial, lane))


def prepare(cfg: RunConfig, dataset=None, head=None):
    """Synthesize the dataset and train the head unless supplied."""
    if dataset is None:
        dataset = synth_dataset(cfg.n_items, cfg.n_maps, cfg.map_shape,
                                cfg.n_classes, cfg.skew, cfg.seed)
    if head is None:
        head = train_head(dataset, cfg.epochs, cfg.lr, seed=cfg.seed)
    return dataset, head


def frame_geometry(symbols_per_map, l_fft: int):
    """Smallest data-row count whose per-map column blocks fit the FFT."""
    symbols_per_map = list(symbols_per_map)
    if len(symbols_per_map) > l_fft:
        raise ParameterError(f"{len(symbols_per_map)} maps cannot fit {l_fft} subcarriers")
    total = sum(symbols_per_map)
    n_rows = max(1, -(-total // l_fft))
    while True:
        widths = [-(-s // n_rows) for s in symbols_per_map]
        if sum(widths) <= l_fft:
            return n_rows, widths
        n_rows += 1


@dataclass
class TxResult:
    """Everything produced by one transmitter pass."""

    frame: OfdmFrame | None
    alloc: AllocationMap | None
    selection: Selection
    iv_confidence: float
    tx_class: int
    quants: list            # QuantizedPayload per selected map, selection order
    plaintext_bits: np.ndarray
    onair_bits: np.ndarray  # plaintext XOR keystream (equal when encryption off)
    symbols: int            # payload symbols (padding and pilots excluded)
    n_data_rows: int
    padded_syms_per_map: int


@dataclass
class RxResult:
    ber: float
    bit_errors: int
    total_bits: int
    ber_plaintext: float
    l_cha: float
    predicted_class: int
    recovered_maps: dict           # map_index -> dequantized (H', W') float32
    equalized_payload: np.ndarray  # payload resource elements after equalization
    payload_subcarriers: np.ndarray
    payload_rows: np.ndarray


@dataclass
class EveResult:
    ber: float
    bit_errors: int
    total_bits: int


@dataclass
class TrialRecord:
    trial: int
    snr_db: float
    epsilon: float
    lam: int
    symbols: int
    latency: float
    total_bits: int
    ber_legit: float
    ber_plaintext: float
    ber_eve: float
    l_cha: float
    cls_correct: bool
    cls_match_tx: bool
    nothing_transmitted: bool
    perm_digest: str
    master_seed: int

    # raw error counts, for exact aggregation across trials
    err_legit: int = 0
    err_plain: int = 0
    err_eve: int = 0


@dataclass
class TransmissionReport:
    records: list


def transmit(item: FeatureMapSet, cfg: RunConfig, head: HeadParams,
             keys: KeyMaterial | None, csi_rank: np.ndarray,
             epsilon: float | None = None, encrypt: bool = True) -> TxResult:
    """Transmitter pass: score, select, quantize, encrypt, allocate, frame."""
    eps = cfg.epsilon if epsilon is None else epsilon
    iv = importance(head, item)
    sel = select_maps(iv, eps)
    empty = np.zeros(0, dtype=np.uint8)
    if sel.lam == 0:
        return TxResult(frame=None, alloc=None, selection=sel,
                        iv_confidence=iv.confidence, tx_class=iv.class_index,
                        quants=[], plaintext_bits=empty, onair_bits=empty,
                        symbols=0, n_data_rows=0, padded_syms_per_map=0)

    h, w = item.map_shape
    bpc = int(math.log2(cfg.qam_order))
    bits_per_map = h * w * cfg.bits_per_sample
    padded_syms = -(-bits_per_map // bpc)
    n_rows, widths = frame_geometry([padded_syms] * sel.lam, cfg.l_fft)
    alloc = allocate(sel, iv, csi_rank, [padded_syms] * sel.lam, n_rows)

    quants = [quantize_map(item.maps[idx], cfg.bits_per_sample, map_index=int(idx))
              for idx in sel.indices]
    plaintext = np.concatenate([q.bits for q in quants])
    if encrypt:
        if keys is None:
            raise ParameterError("encryption requested without key material")
        onair = xor_bits(plaintext, keys.keystream(plaintext.size))
    else:
        onair = plaintext.copy()

    logical = np.zeros((n_rows, cfg.l_fft), dtype=np.complex128)
    pad_bits = padded_syms * bpc - bits_per_map
    col = 0
    for r in range(sel.lam):
        seg = onair[r * bits_per_map:(r + 1) * bits_per_map]
        padded = np.concatenate([seg, np.zeros(pad_bits, dtype=np.uint8)])
        syms = qam_modulate(padded, cfg.qam_order)
        block = np.zeros(n_rows * widths[r], dtype=np.complex128)
        block[:syms.size] = syms
        logical[:, col:col + widths[r]] = block.reshape((n_rows, widths[r]), order="F")
        col += widths[r]

    frame = OfdmFrame(pilots=pilot_symbols(cfg.n_pilots, cfg.l_fft),
                      data=apply_allocation(logical, alloc),
                      cp_len=cfg.cp_len, subcarrier_perm=alloc.perm)
    return TxResult(frame=frame, alloc=alloc, selection=sel,
                    iv_confidence=iv.confidence, tx_class=iv.class_index,
                    quants=quants, plaintext_bits=plaintext, onair_bits=onair,
                    symbols=sel.lam * padded_syms, n_data_rows=n_rows,
                    padded_syms_per_map=padded_syms)


def _extract_payload(logical: np.ndarray, tx: TxResult, cfg: RunConfig):
    """Demodulate per-map column blocks; returns (bits, points, subcarriers, rows).

    Inverse of the column-major fill in `transmit`; the returned bits are
    truncated to the real per-map payload length (modulation padding cut).
    """
    bits_per_map = tx.plaintext_bits.size // tx.selection.lam
    perm = tx.alloc.perm
    bits_out, pts, subs, rows = [], [], [], []
    col = 0
    n_rows = tx.n_data_rows
    for r in range(tx.selection.lam):
        width = tx.alloc.widths[r]
        block = logical[:, col:col + width]
        syms = block.flatten(order="F")[: tx.padded_syms_per_map]
        sym_idx = np.arange(tx.padded_syms_per_map)
        local_col = col + sym_idx // n_rows
        pts.append(syms)
        subs.append(perm[local_col])
        rows.append(sym_idx % n_rows)
        bits = qam_demodulate(syms, cfg.qam_order)[:bits_per_map]
        bits_out.append(bits)
        col += width
    return (np.concatenate(bits_out), np.concatenate(pts),
            np.concatenate(subs), np.concatenate(rows))


def receive_legit(rx_pilots: np.ndarray, rx_data: np.ndarray, cfg: RunConfig,
                  tx: TxResult, keys: KeyMaterial | None, head: HeadParams,
                  channel: ChannelRealization) -> RxResult:
    """Shared-secret receiver: estimate, equalize, deallocate, demodulate,
    decrypt, dequantize, classify."""
    sigma2 = channel.noise_var
    pilots = pilot_symbols(cfg.n_pilots, cfg.l_fft)
    h_hat = mmse_estimate(rx_pilots, pilots, sigma2)
    l_cha = channel_estimation_loss(h_hat, channel.freq_response)
    eq = mmse_equalize(rx_data, h_hat, sigma2)
    logical = deallocate(eq, tx.alloc)
    demod, points, subs, rows = _extract_payload(logical, tx, cfg)

    if keys is not None:
        recovered = xor_bits(demod, keys.keystream(demod.size))
    else:
        recovered = demod
    err = int(np.count_nonzero(recovered != tx.plaintext_bits))
    err_plain = int(np.count_nonzero(demod != tx.onair_bits))
    total = tx.plaintext_bits.size

    # Rebuild the map stack (missing maps stay zero) and classify.
    full = np.zeros((head.n_maps,) + _map_shape_of(cfg, tx), dtype=np.float32)
    recovered_maps = {}
    bits_per_map = total // tx.selection.lam
    for r, q in enumerate(tx.quants):
        seg = recovered[r * bits_per_map:(r + 1) * bits_per_map]
        payload = QuantizedPayload(map_index=q.map_index, min_val=q.min_val,
                                   max_val=q.max_val, bits=seg,
                                   bits_per_sample=q.bits_per_sample)
        full[q.map_index] = dequantize_payload(payload, _map_shape_of(cfg, tx))
        recovered_maps[q.map_index] = full[q.map_index].copy()
    received_item = FeatureMapSet(maps=full, label=0)
    predicted = predict(head, received_item)

    return RxResult(ber=err / total, bit_errors=err, total_bits=total,
                    ber_plaintext=err_plain / total, l_cha=l_cha,
                    predicted_class=predicted, recovered_maps=recovered_maps,
                    equalized_payload=points, payload_subcarriers=subs,
                    payload_rows=rows)


def _map_shape_of(cfg: RunConfig, tx: TxResult) -> tuple[int, int]:
    # payload length fixes H'*W'; cfg carries the configured shape
    return tuple(cfg.map_shape)


def receive_eavesdrop(rx_pilots: np.ndarray, rx_data: np.ndarray, cfg: RunConfig,
                      tx: TxResult, noise_var: float,
                      alloc: AllocationMap | None = None) -> EveResult:
    """Eavesdropper receiver.

    Estimates and equalizes her own observation (pilots are public),
    then guesses identity allocation and an all-zero keystream. Passing
    `alloc` switches to the diagnostic control where the allocation
    feedback is shared.
    """
    pilots = pilot_symbols(cfg.n_pilots, cfg.l_fft)
    h_hat = mmse_estimate(rx_pilots, pilots, noise_var)
    eq = mmse_equalize(rx_data, h_hat, noise_var)
    logical = deallocate(eq, alloc) if alloc is not None else eq
    demod, _, _, _ = _extract_payload(logical, tx, cfg)
    err = int(np.count_nonzero(demod != tx.plaintext_bits))
    total = tx.plaintext_bits.size
    return EveResult(ber=err / total, bit_errors=err, total_bits=total)


def run_trial(cfg: RunConfig, item: FeatureMapSet, head: HeadParams, trial: int,
              snr_db: float, epsilon: float, encrypt: bool = True):
    """One end-to-end trial; returns (TrialRecord, RxResult|None)."""
    sigma2 = noise_var_from_snr_db(snr_db)
    ch_legit = draw_channel(cfg.l_taps, cfg.l_fft, sigma2,
                            seed=derive_seed(cfg.seed, trial, LANE_CH_LEGIT))
    ch_eve = draw_channel(cfg.l_taps, cfg.l_fft, sigma2,
                          seed=derive_seed(cfg.seed, trial, LANE_CH_EVE))

    probe = probe_plk(ch_legit, cfg.l_plk, cfg.plk_noise,
                      seed=derive_seed(cfg.seed, trial, LANE_PLK))
    plk = probe.alice

    iv = importance(head, item)
    weights = weight_stream(plk, n=item.n_maps, bits_per_weight=cfg.l_scores)
    skeys = skey_stream(iv, weights, l_skey=cfg.l_skey)
    km = make_key_material(plk, skeys)

    # CSI feedback round: the legitimate receiver ranks its own estimate.
    probe_frame = OfdmFrame(pilots=pilot_symbols(cfg.n_pilots, cfg.l_fft),
                            data=np.zeros((0, cfg.l_fft), dtype=np.complex128),
                            cp_len=cfg.cp_len,
                            subcarrier_perm=np.arange(cfg.l_fft))
    probe_rx, _ = channel_apply(probe_frame, ch_legit,
                                seed=derive_seed(cfg.seed, trial, LANE_CSI_PROBE))
    h_feedback = mmse_estimate(probe_rx, probe_frame.pilots, sigma2)
    csi_rank = rank_subchannels(h_feedback)

    tx = transmit(item, cfg, head, km if encrypt else None, csi_rank,
                  epsilon=epsilon, encrypt=encrypt)
    if tx.selection.lam == 0:
        rec = TrialRecord(trial=trial, snr_db=snr_db, epsilon=epsilon, lam=0,
                          symbols=0, latency=0.0, total_bits=0, ber_legit=0.0,
                          ber_plaintext=0.0, ber_eve=0.0, l_cha=0.0,
                          cls_correct=False, cls_match_tx=False,
                          nothing_transmitted=True, perm_digest="",
                          master_seed=cfg.seed)
        return rec, None

    rx_p, rx_d = channel_apply(tx.frame, ch_legit,
                               seed=derive_seed(cfg.seed, trial, LANE_TX_NOISE))
    legit = receive_legit(rx_p, rx_d, cfg, tx, km if encrypt else None, head, ch_legit)

    eve_p, eve_d = channel_apply(tx.frame, ch_eve,
                                 seed=derive_seed(cfg.seed, trial, LANE_EVE_NOISE))
    eve = receive_eavesdrop(eve_p, eve_d, cfg, tx, sigma2)

    rec = TrialRecord(
        trial=trial, snr_db=snr_db, epsilon=epsilon, lam=tx.selection.lam,
        symbols=tx.symbols, latency=tx.symbols * cfg.symbol_duration,
        total_bits=legit.total_bits, ber_legit=legit.ber,
        ber_plaintext=legit.ber_plaintext, ber_eve=eve.ber, l_cha=legit.l_cha,
        cls_correct=(legit.predicted_class == item.label),
        cls_match_tx=(legit.predicted_class == tx.tx_class),
        nothing_transmitted=False,
        perm_digest="-".join(str(int(p)) for p in tx.alloc.perm),
        master_seed=cfg.seed,
        err_legit=legit.bit_errors, err_plain=int(round(legit.ber_plaintext * legit.total_bits)),
        err_eve=eve.bit_errors)
    return rec, legit


# ---------------------------------------------------------------------------
# sweeps


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, float):
        return format(x, ".10g")
    return str(x)


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


BER_SWEEP_HEADER = ["snr_db", "trials", "total_bits", "ber_legit_encrypted",
                    "ber_legit_plaintext", "ber_eve", "mean_l_cha"]
LATENCY_SWEEP_HEADER = ["epsilon", "mean_lambda", "mean_symbols",
                        "latency_proxy", "accuracy"]
TRIAL_HEADER = ["trial", "snr_db", "epsilon", "lambda", "symbols", "latency",
                "total_bits", "ber_legit", "ber_plaintext", "ber_eve", "l_cha",
                "cls_correct", "cls_match_tx", "nothing_transmitted", "perm",
                "master_seed"]


def trial_row(rec: TrialRecord):
    return [rec.trial, rec.snr_db, rec.epsilon, rec.lam, rec.symbols,
            rec.latency, rec.total_bits, rec.ber_legit, rec.ber_plaintext,
            rec.ber_eve, rec.l_cha, rec.cls_correct, rec.cls_match_tx,
            rec.nothing_transmitted, rec.perm_digest, rec.master_seed]


def run_ber_sweep(cfg: RunConfig, dataset=None, head=None, out_dir=None):
    """BER vs SNR for the legitimate (encrypted + plaintext baseline) and
    eavesdropper paths; also dumps one equalized constellation per SNR.

    Returns (summary_rows, report); writes ber_sweep.csv and
    constellation_snr<int>.csv files when out_dir is given.
    """
    dataset, head = prepare(cfg, dataset, head)
    rows = []
    records = []
    constellations = {}
    for snr in cfg.snr_db:
        err_enc = err_plain = err_eve = bits = 0
        l_cha_sum = 0.0
        for t in range(cfg.trials):
            item = dataset[t % len(dataset)]
            rec, legit = run_trial(cfg, item, head, t, snr, cfg.epsilon)
            records.append(rec)
            if rec.nothing_transmitted:
                continue
            err_enc += rec.err_legit
            err_plain += rec.err_plain
            err_eve += rec.err_eve
            bits += rec.total_bits
            l_cha_sum += rec.l_cha
            if t == 0:
                constellations[snr] = legit
        if bits == 0:
            raise ParameterError("sweep produced no payload bits; epsilon too large")
        rows.append([snr, cfg.trials, bits, err_enc / bits, err_plain / bits,
                     err_eve / bits, l_cha_sum / cfg.trials])

    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        _write_csv(os.path.join(out_dir, "ber_sweep.csv"), BER_SWEEP_HEADER, rows)
        for snr, legit in constellations.items():
            pts = legit.equalized_payload
            c_rows = [[float(p.real), float(p.imag), int(s), int(r)]
                      for p, s, r in zip(pts, legit.payload_subcarriers,
                                         legit.payload_rows)]
            _write_csv(os.path.join(out_dir, f"constellation_snr{int(round(snr))}.csv"),
                       ["i", "q", "subcarrier", "frame"], c_rows)
    return rows, TransmissionReport(records=records)


def run_latency_sweep(cfg: RunConfig, epsilons=None, dataset=None, head=None,
                      out_dir=None):
    """Selection-budget sweep at the first configured SNR.

    Per epsilon: mean selected maps, mean payload symbols, the latency
    proxy, and receiver classification accuracy over the dataset. Trials
    share seeds across epsilons so curves are paired and monotone
    wherever the selector is.
    """
    dataset, head = prepare(cfg, dataset, head)
    eps_grid = list(cfg.epsilons if epsilons is None else epsilons)
    if sorted(eps_grid) != eps_grid:
        raise ParameterError("epsilons must be sorted ascending")
    snr = cfg.snr_db[0]
    rows = []
    records = []
    for eps in eps_grid:
        lams, syms, correct = [], [], []
        for t, item in enumerate(dataset):
            rec, _ = run_trial(cfg, item, head, t, snr, eps)
            records.append(rec)
            lams.append(rec.lam)
            syms.append(rec.symbols)
            correct.append(rec.cls_correct)
        mean_syms = float(np.mean(syms))
        rows.append([eps, float(np.mean(lams)), mean_syms,
                     mean_syms * cfg.symbol_duration, float(np.mean(correct))])

    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        _write_csv(os.path.join(out_dir, "latency_sweep.csv"),
                   LATENCY_SWEEP_HEADER, rows)
    return rows, TransmissionReport(records=records)


def seed_key_length(cfg: RunConfig) -> int:
    """Bit length of the derived seed key at this configuration."""
    return max(cfg.n_maps * cfg.l_skey, cfg.l_plk)


def report_search_space(cfg: RunConfig) -> str:
    """Exact attacker search-space table at the configured lengths."""
    n = cfg.n_maps
    l_seed = seed_key_length(cfg)
    entries = [
        ("weights (per-map scores)", search_space_scores(cfg.l_scores, n)),
        ("per-map key stream", search_space_skey(cfg.l_skey, n)),
        ("single seed key", search_space_seed(l_seed)),
        ("seed keys + allocation", search_space_total(l_seed, n)),
    ]
    lines = [f"search spaces (N={n}, L_scores={cfg.l_scores}, "
             f"L_skey={cfg.l_skey}, L_seedkey={l_seed})"]
    for name, ss in entries:
        lines.append(f"  {name:<28} multiplier={ss.multiplier:<4d} log2={ss.log2}")
    return "\n".join(lines)
