"""Constellation mapping and constant-amplitude pilot sequences."""

from __future__ import annotations

import math

import numpy as np

MODULATIONS = ("qpsk", "16qam")

_QAM16_SCALE = 1.0 / math.sqrt(10.0)
# Gray axis map: (hi, lo) bits 00 -> -3, 01 -> -1, 11 -> +1, 10 -> +3
_PAM_LEVELS = np.array([-3.0, -1.0, 1.0, 3.0]) * _QAM16_SCALE
_PAM_BITS_HI = np.array([0, 0, 1, 1])
_PAM_BITS_LO = np.array([0, 1, 1, 0])
_LEVEL_OF_BITS = {(0, 0): 0, (0, 1): 1, (1, 1): 2, (1, 0): 3}


def bits_per_symbol(modulation: str) -> int:
    if modulation == "qpsk":
        return 2
    if modulation == "16qam":
        return 4
    raise ValueError(f"unsupported modulation {modulation!r}")


def qam_map(bits, modulation: str) -> np.ndarray:
    """Gray-mapped symbols with unit average energy."""
    b = np.asarray(bits, dtype=np.int64).ravel()
    bps = bits_per_symbol(modulation)
    if b.size % bps:
        raise ValueError(f"bit count {b.size} not divisible by {bps}")
    if b.size and (b.min() < 0 or b.max() > 1):
        raise ValueError("bits must be 0/1")
    g = b.reshape(-1, bps)
    if modulation == "qpsk":
        return ((1 - 2 * g[:, 0]) + 1j * (1 - 2 * g[:, 1])) / math.sqrt(2.0)
    idx_i = 2 * g[:, 0] + g[:, 1]
    idx_q = 2 * g[:, 2] + g[:, 3]
    lut = np.empty(4)
    for pair, level in _LEVEL_OF_BITS.items():
        lut[2 * pair[0] + pair[1]] = _PAM_LEVELS[level]
    return lut[idx_i] + 1j * lut[idx_q]


def _pam_llrs(y: np.ndarray, noise_var) -> tuple[np.ndarray, np.ndarray]:
    """Max-log LLRs of the two Gray bits of one 4-PAM axis."""
    d2 = (y[:, None] - _PAM_LEVELS[None, :]) ** 2
    big = 1e30
    llr = []
    for bits in (_PAM_BITS_HI, _PAM_BITS_LO):
        d0 = np.min(np.where(bits[None, :] == 0, d2, big), axis=1)
        d1 = np.min(np.where(bits[None, :] == 1, d2, big), axis=1)
        llr.append((d1 - d0) / noise_var)
    return llr[0], llr[1]


def qam_demap(symbols, modulation: str, noise_var) -> np.ndarray:
    """Per-bit LLRs (positive favors bit 0). noise_var is the complex
    per-symbol noise variance, scalar or one value per symbol."""
    y = np.asarray(symbols, dtype=complex).ravel()
    nv = np.broadcast_to(np.asarray(noise_var, dtype=float), y.shape)
    if np.any(nv <= 0):
        raise ValueError("noise_var must be positive")
    if modulation == "qpsk":
        a = 1.0 / math.sqrt(2.0)
        out = np.empty((y.size, 2))
        out[:, 0] = 4.0 * a * y.real / nv
        out[:, 1] = 4.0 * a * y.imag / nv
        return out.ravel()
    if modulation == "16qam":
        hi_i, lo_i = _pam_llrs(y.real, nv)
        hi_q, lo_q = _pam_llrs(y.imag, nv)
        out = np.empty((y.size, 4))
        out[:, 0], out[:, 1], out[:, 2], out[:, 3] = hi_i, lo_i, hi_q, lo_q
        return out.ravel()
    raise ValueError(f"unsupported modulation {modulation!r}")


def hard_bits(llrs) -> np.ndarray:
    return (np.asarray(llrs) < 0).astype(np.uint8)


def zadoff_chu(root: int, length: int) -> np.ndarray:
    """Odd-length constant-amplitude sequence with ideal cyclic autocorrelation.

    x[n] = exp(-j*pi*root*n*(n+1)/length). Root and length must be coprime.
    """
    if length < 1:
        raise ValueError("length must be >= 1")
    if length % 2 == 0:
        raise ValueError("only odd lengths are supported")
    if math.gcd(root, length) != 1:
        raise ValueError(f"root {root} and length {length} must be coprime")
    n = np.arange(length)
    return np.exp(-1j * math.pi * root * n * (n + 1) / length)
