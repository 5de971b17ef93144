"""Independent reference computations used by the tests.

These deliberately avoid the library's own code paths: closed-form BER,
rank statistics, brute-force selection, so failures point at the
implementation rather than at a shared bug.
"""
import math

import numpy as np


def q_func(x: float) -> float:
    return 0.5 * math.erfc(x / math.sqrt(2.0))


def ber_16qam_awgn(snr_linear: float) -> float:
    """Exact bit error rate of Gray 16-QAM over AWGN at symbol SNR.

    Derived per axis (Gray PAM-4, levels {+-1, +-3}/sqrt(10), noise
    variance sigma^2/2 per axis, thresholds at 0 and +-2/sqrt(10)):
    averaging the sign-bit and magnitude-bit error events over the four
    levels gives 3/4 Q(a) + 1/2 Q(3a) - 1/4 Q(5a) with a = sqrt(SNR/5).
    """
    a = math.sqrt(snr_linear / 5.0)
    return 0.75 * q_func(a) + 0.5 * q_func(3 * a) - 0.25 * q_func(5 * a)


def spearman(x, y) -> float:
    """Spearman rank correlation (average ranks on ties)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)

    def ranks(v):
        order = np.argsort(v, kind="stable")
        r = np.empty(v.size, dtype=float)
        r[order] = np.arange(v.size)
        # average ranks over exact ties
        for val in np.unique(v):
            mask = v == val
            r[mask] = r[mask].mean()
        return r

    rx, ry = ranks(x), ranks(y)
    rx -= rx.mean()
    ry -= ry.mean()
    denom = math.sqrt((rx ** 2).sum() * (ry ** 2).sum())
    return float((rx * ry).sum() / denom) if denom else 0.0


def brute_force_min_prefix(scores, confidence, epsilon):
    """Smallest descending-score prefix with residual strictly below
    epsilon; returns the full count when no prefix satisfies it."""
    order = np.lexsort((np.arange(len(scores)), -np.asarray(scores)))
    for lam in range(len(scores) + 1):
        residual = confidence - float(np.sum(np.asarray(scores)[order[:lam]]))
        if residual < epsilon:
            return lam
    return len(scores)


def sorted_desc_by_magnitude(values):
    """O(n^2) selection-sort ranking oracle: indices by |v| descending,
    ties by ascending index."""
    values = list(np.abs(np.asarray(values)))
    remaining = list(range(len(values)))
    out = []
    while remaining:
        best = remaining[0]
        for idx in remaining[1:]:
            if values[idx] > values[best]:
                best = idx
        out.append(best)
        remaining.remove(best)
    return out
