"""Channel-aware mapping of semantic payloads onto OFDM subcarriers.

Subchannels are ranked by estimated gain magnitude; maps are laid out
in descending-score order over contiguous blocks of ranked subcarriers,
so the strongest subchannels always carry the most important content.
The permutation is shared with the legitimate receiver as feedback; an
eavesdropper observing an independent channel cannot reproduce it.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ParameterError
from .importance import ImportanceVector
from .selection import Selection


@dataclass
class AllocationMap:
    """Column permutation plus the (map, subcarrier) pairing it encodes."""

    perm: np.ndarray        # logical data column j -> physical subcarrier perm[j]
    pairs: list             # (map_index, physical subcarrier), selection order
    csi_rank: np.ndarray    # subcarriers sorted by |H| descending
    widths: list            # columns occupied per selected map, selection order

    def inverse(self) -> np.ndarray:
        inv = np.empty_like(self.perm)
        inv[self.perm] = np.arange(self.perm.size)
        return inv


def rank_subchannels(freq_response: np.ndarray) -> np.ndarray:
    """Indices sorted by |H[k]| descending; ties broken by ascending k
    so the feedback sequence is deterministic."""
    h = np.asarray(freq_response)
    if h.size == 0:
        raise ParameterError("frequency response is empty")
    mags = np.abs(h)
    return np.lexsort((np.arange(mags.size), -mags))


def allocate(selection: Selection, iv: ImportanceVector, csi_rank: np.ndarray,
             symbols_per_map, n_data_rows: int) -> AllocationMap:
    """Assign each selected map a contiguous block of ranked subcarriers.

    symbols_per_map gives the payload symbol count of each selected map
    (selection order). Every map occupies ceil(symbols / n_data_rows)
    whole columns; total columns must fit within the frame.
    """
    if selection.lam < 1:
        raise ParameterError("selection is empty")
    if n_data_rows < 1:
        raise ParameterError("n_data_rows must be >= 1")
    symbols_per_map = list(symbols_per_map)
    if len(symbols_per_map) != selection.lam:
        raise ParameterError("symbols_per_map must match the selection size")
    csi_rank = np.asarray(csi_rank, dtype=np.intp)
    l_fft = csi_rank.size

    widths = [-(-s // n_data_rows) for s in symbols_per_map]
    if sum(widths) > l_fft:
        raise ConfigurationError(
            f"payload needs {sum(widths)} subcarrier columns, frame has {l_fft}")

    perm = csi_rank.copy()   # logical column j lands on the j-th best subcarrier
    pairs = []
    col = 0
    for map_index, width in zip(selection.indices, widths):
        for j in range(col, col + width):
            pairs.append((int(map_index), int(csi_rank[j])))
        col += width
    return AllocationMap(perm=perm, pairs=pairs, csi_rank=csi_rank, widths=widths)


def apply_allocation(logical: np.ndarray, alloc: AllocationMap) -> np.ndarray:
    """Scatter logical data columns onto their physical subcarriers."""
    logical = np.asarray(logical)
    if logical.ndim != 2 or logical.shape[1] != alloc.perm.size:
        raise ParameterError("grid geometry does not match the allocation")
    physical = np.empty_like(logical)
    physical[:, alloc.perm] = logical
    return physical


def deallocate(received: np.ndarray, alloc: AllocationMap) -> np.ndarray:
    """Gather physical subcarriers back into logical column order;
    exact inverse of apply_allocation."""
    received = np.asarray(received)
    if received.ndim != 2 or received.shape[1] != alloc.perm.size:
        raise ParameterError("frame geometry does not match the allocation")
    return received[:, alloc.perm]
