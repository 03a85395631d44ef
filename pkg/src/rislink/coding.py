"""Rate-1/2 convolutional code, constraint length 7, generators (133, 171) octal.

Zero-tail termination: six flush zeros follow the payload, so a length-L
payload encodes to 2*(L+6) bits. The decoder is a 64-state Viterbi with
either hard bits or log-likelihood ratios as input (positive LLR means the
coded bit is more likely 0).
"""

from __future__ import annotations

import numpy as np
from numba import njit

CONSTRAINT_LENGTH = 7
N_STATES = 64
TAIL_BITS = CONSTRAINT_LENGTH - 1
GENERATORS = (0o133, 0o171)

_G1_TAPS = np.array([(GENERATORS[0] >> (6 - k)) & 1 for k in range(7)], dtype=np.uint8)
_G2_TAPS = np.array([(GENERATORS[1] >> (6 - k)) & 1 for k in range(7)], dtype=np.uint8)


def _build_trellis():
    """out_sym[s, b]: 2-bit branch output; pred state = ((s & 31) << 1) + choice."""
    out_sym = np.zeros((N_STATES, 2), dtype=np.int64)
    for s in range(N_STATES):
        for b in (0, 1):
            reg = (b << 6) | s
            o1 = bin(reg & GENERATORS[0]).count("1") & 1
            o2 = bin(reg & GENERATORS[1]).count("1") & 1
            out_sym[s, b] = (o1 << 1) | o2
    return out_sym

_OUT_SYM = _build_trellis()


def conv_encode(bits) -> np.ndarray:
    """Encode a bit sequence; output interleaves the 133 branch first."""
    b = np.asarray(bits, dtype=np.uint8).ravel()
    if b.size and (b.max() > 1):
        raise ValueError("input must contain only 0/1 bits")
    x = np.concatenate([b, np.zeros(TAIL_BITS, dtype=np.uint8)])
    c1 = np.convolve(x, _G1_TAPS)[: x.size] % 2
    c2 = np.convolve(x, _G2_TAPS)[: x.size] % 2
    out = np.empty(2 * x.size, dtype=np.uint8)
    out[0::2] = c1
    out[1::2] = c2
    return out


@njit(cache=True)
def _viterbi_kernel(sym_metric, out_sym):  # pragma: no cover - jitted
    T = sym_metric.shape[0]
    n = out_sym.shape[0]
    NEG = -1e30
    pm = np.full(n, NEG)
    pm[0] = 0.0
    new_pm = np.empty(n)
    backptr = np.empty((T, n), dtype=np.uint8)
    for t in range(T):
        for sp in range(n):
            b = sp >> 5
            low = (sp & 31) << 1
            m0 = pm[low] + sym_metric[t, out_sym[low, b]]
            m1 = pm[low + 1] + sym_metric[t, out_sym[low + 1, b]]
            if m0 >= m1:
                new_pm[sp] = m0
                backptr[t, sp] = 0
            else:
                new_pm[sp] = m1
                backptr[t, sp] = 1
        for sp in range(n):
            pm[sp] = new_pm[sp]
    bits = np.empty(T, dtype=np.uint8)
    s = 0  # zero tail drives the encoder back to state 0
    for t in range(T - 1, -1, -1):
        bits[t] = s >> 5
        s = ((s & 31) << 1) + backptr[t, s]
    return bits


def viterbi_decode(values, soft: bool | None = None) -> np.ndarray:
    """Maximum-likelihood decode; returns the payload without tail bits.

    `values` is either hard coded bits or LLRs (two per payload bit);
    float input is treated as soft unless `soft` says otherwise.
    """
    arr = np.asarray(values)
    if arr.size % 2 != 0:
        raise ValueError(f"coded length must be even, got {arr.size}")
    if arr.size < 2 * TAIL_BITS:
        raise ValueError("input shorter than the code tail")
    if soft is None:
        soft = np.issubdtype(arr.dtype, np.floating)
    if soft:
        llr = np.asarray(arr, dtype=np.float64).reshape(-1, 2)
    else:
        bits = np.asarray(arr, dtype=np.float64)
        if np.any((bits != 0) & (bits != 1)):
            raise ValueError("hard input must contain only 0/1 bits")
        llr = (1.0 - 2.0 * bits).reshape(-1, 2)
    # correlation metric per trellis step for each 2-bit branch output
    signs0 = np.array([+1.0, +1.0, -1.0, -1.0])  # bit0 of symbols 0..3
    signs1 = np.array([+1.0, -1.0, +1.0, -1.0])
    sym_metric = llr[:, 0:1] * signs0 + llr[:, 1:2] * signs1
    decoded = _viterbi_kernel(np.ascontiguousarray(sym_metric), _OUT_SYM)
    return decoded[:-TAIL_BITS]
