"""OFDM waveform chain: transform, synchronization, estimation, equalization.

The modulator scales so a fully occupied unit-energy grid produces unit
average sample power, which keeps the link-budget channel gains meaningful
at the waveform level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .coding import conv_encode, viterbi_decode
from .frame import (PhyConfig, ResourceGrid, build_grid, cell_positions,
                    check_allocations, pilot_row, subcarrier_bins)
from .modem import qam_demap


def _scale(config: PhyConfig) -> float:
    return config.fft_size / math.sqrt(config.occupied_subcarriers)


def ofdm_modulate(grid, config: PhyConfig) -> np.ndarray:
    """Grid -> serial samples: per symbol, inverse transform plus cyclic prefix."""
    g = grid.grid if isinstance(grid, ResourceGrid) else np.asarray(grid, dtype=complex)
    occ, n_sym = g.shape
    if occ != config.occupied_subcarriers:
        raise ValueError(f"grid has {occ} rows, expected {config.occupied_subcarriers}")
    bins = subcarrier_bins(config)
    spectrum = np.zeros((config.fft_size, n_sym), dtype=complex)
    spectrum[bins, :] = g
    body = np.fft.ifft(spectrum, axis=0) * _scale(config)
    if config.cp_length:
        body = np.vstack([body[-config.cp_length:, :], body])
    return body.T.ravel()


def ofdm_demodulate(samples, config: PhyConfig, n_symbols: int | None = None,
                    offset: int = 0) -> np.ndarray:
    """Serial samples -> grid array (occupied x n_symbols).

    Indexing past the buffer wraps around, so a best-effort decode at a
    garbage offset still yields (garbage) symbols instead of an error.
    """
    x = np.asarray(samples, dtype=complex).ravel()
    sym_len = config.fft_size + config.cp_length
    if n_symbols is None:
        n_symbols = (x.size - offset) // sym_len
    if n_symbols < 1:
        raise ValueError("buffer holds no complete symbol at this offset")
    starts = offset + np.arange(n_symbols) * sym_len + config.cp_length
    idx = starts[:, None] + np.arange(config.fft_size)[None, :]
    bodies = np.take(x, idx, mode="wrap")
    spectrum = np.fft.fft(bodies, axis=1) / _scale(config)
    return spectrum[:, subcarrier_bins(config)].T


def pilot_symbol_time(config: PhyConfig) -> np.ndarray:
    """Time-domain body of the pilot OFDM symbol (no prefix), the sync template."""
    bins = subcarrier_bins(config)
    spectrum = np.zeros(config.fft_size, dtype=complex)
    spectrum[bins] = pilot_row(config)
    return np.fft.ifft(spectrum) * _scale(config)


@dataclass(frozen=True)
class SyncResult:
    frame_offset: int
    ok: bool
    peak_to_mean: float


def synchronize(rx, config: PhyConfig, search: int | None = None) -> SyncResult:
    """Locate the frame start by correlating against the known pilot symbol.

    Returns the lag of the strongest correlation (converted from pilot-body
    position to frame start), flagged not-ok when the peak-to-mean ratio
    falls below config.sync_threshold. `search` limits the examined lags.
    """
    x = np.asarray(rx, dtype=complex).ravel()
    template = pilot_symbol_time(config)
    if x.size < template.size:
        raise ValueError("buffer shorter than one OFDM symbol")
    n_lags = x.size - template.size + 1
    if search is not None:
        n_lags = min(n_lags, search)
    nfft = 1 << int(np.ceil(np.log2(x.size + template.size)))
    corr = np.fft.ifft(np.fft.fft(x, nfft) * np.conj(np.fft.fft(template, nfft)))
    mag = np.abs(corr[:n_lags])
    peak = int(np.argmax(mag))
    mean = float(np.mean(mag))
    ratio = float(mag[peak] / mean) if mean > 0 else 0.0
    first_pilot = min(config.pilot_symbols)
    pilot_body_pos = first_pilot * (config.fft_size + config.cp_length) + config.cp_length
    return SyncResult(
        frame_offset=peak - pilot_body_pos,
        ok=ratio >= config.sync_threshold,
        peak_to_mean=ratio,
    )


def estimate_channel(rx_grid: np.ndarray, config: PhyConfig,
                     pilots: np.ndarray | None = None) -> np.ndarray:
    """Least-squares per-subcarrier gains from the block pilot symbol(s).

    H[k] = Y[k]/X[k], averaged over pilot symbols and held across the frame.
    """
    ref = pilot_row(config) if pilots is None else np.asarray(pilots, dtype=complex)
    if np.any(ref == 0):
        raise ValueError("known pilot values must be nonzero")
    est = np.zeros(config.occupied_subcarriers, dtype=complex)
    for sym in config.pilot_symbols:
        est += rx_grid[:, sym] / ref
    return est / len(config.pilot_symbols)


def subcarrier_noise_var(config: PhyConfig, sample_noise_var: float) -> float:
    """Per-cell complex noise variance after the receive transform."""
    return sample_noise_var * config.occupied_subcarriers / config.fft_size


def equalize_extract(rx_grid: np.ndarray, channel: np.ndarray, allocations,
                     config: PhyConfig, noise_var: float) -> dict:
    """One-tap equalization and per-user soft demapping.

    noise_var is the per-cell variance before equalization; dividing by
    |H|^2 keeps the LLR scaling correct for non-unit channels. Returns
    {user_id: llr array} in the canonical cell order.
    """
    check_allocations(allocations, config)
    h = np.asarray(channel, dtype=complex)
    out = {}
    for alloc in allocations:
        rows, cols = cell_positions(config, alloc)
        h_cells = h[rows]
        safe = np.where(np.abs(h_cells) > 0, h_cells, 1.0)
        eq = rx_grid[rows, cols] / safe
        var_eff = noise_var / np.maximum(np.abs(safe) ** 2, 1e-300)
        out[alloc.user_id] = qam_demap(eq, config.modulation, var_eff)
    return out


def compute_ber(sent, received) -> float:
    a = np.asarray(sent).ravel()
    b = np.asarray(received).ravel()
    if a.size != b.size:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    if a.size == 0:
        raise ValueError("empty bit sequences")
    return float(np.mean(a != b))


def transmit_frame(config: PhyConfig, allocations, payload_bits_by_user) -> np.ndarray:
    """Encode per-user payloads, fill one frame, modulate to samples."""
    coded = {}
    for alloc in allocations:
        payload = np.asarray(payload_bits_by_user[alloc.user_id]).ravel()
        expected = alloc.payload_bits(config)
        if payload.size != expected:
            raise ValueError(
                f"user {alloc.user_id}: expected {expected} payload bits, "
                f"got {payload.size}"
            )
        coded[alloc.user_id] = conv_encode(payload)
    grid = build_grid(config, allocations, coded)
    return ofdm_modulate(grid, config)


def receive_frame(samples, config: PhyConfig, allocations, noise_var_cell: float,
                  offset: int = 0) -> dict:
    """Demodulate one frame at `offset` and decode every user's payload."""
    rx_grid = ofdm_demodulate(samples, config, config.symbols_per_frame, offset)
    channel = estimate_channel(rx_grid, config)
    llrs = equalize_extract(rx_grid, channel, allocations, config, noise_var_cell)
    return {uid: viterbi_decode(llr, soft=True) for uid, llr in llrs.items()}
