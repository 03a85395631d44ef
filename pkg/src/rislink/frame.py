"""Time-frequency resource grid and per-user allocation.

One frame is 120 resource blocks; a block spans 14 OFDM symbols by 12
subcarriers, so the frame occupies 1440 subcarriers. Symbol 0 carries a
block pilot (a Zadoff-Chu row across all occupied subcarriers); the
remaining 13 symbols carry user data. Blocks are the unit of allocation and
distinct users own disjoint block sets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .coding import TAIL_BITS
from .modem import bits_per_symbol, qam_map, zadoff_chu

KIND_NULL = 0
KIND_PILOT = 1
KIND_USER_BASE = 2  # user u occupies kind value KIND_USER_BASE + u


@dataclass(frozen=True)
class PhyConfig:
    fft_size: int = 2048
    cp_length: int = 144
    sample_rate: float = 2.4e9
    modulation: str = "16qam"
    rb_count: int = 120
    symbols_per_rb: int = 14
    subcarriers_per_rb: int = 12
    zc_root: int = 25
    zc_length: int = 139
    pilot_symbols: tuple = (0,)
    code_rate: float = 0.5
    sync_threshold: float = 6.0

    def __post_init__(self):
        if self.occupied_subcarriers > self.fft_size:
            raise ValueError(
                f"{self.occupied_subcarriers} occupied subcarriers exceed the "
                f"{self.fft_size}-point transform"
            )
        if not 0 <= self.cp_length < self.fft_size:
            raise ValueError("cp_length must lie in [0, fft_size)")
        bits_per_symbol(self.modulation)  # validates the name
        if any(not 0 <= s < self.symbols_per_rb for s in self.pilot_symbols):
            raise ValueError("pilot symbol index out of range")
        if len(self.pilot_symbols) >= self.symbols_per_rb:
            raise ValueError("at least one data symbol is required")

    @property
    def occupied_subcarriers(self) -> int:
        return self.rb_count * self.subcarriers_per_rb

    @property
    def symbols_per_frame(self) -> int:
        return self.symbols_per_rb

    @property
    def data_symbols(self) -> tuple:
        return tuple(
            s for s in range(self.symbols_per_frame) if s not in self.pilot_symbols
        )

    @property
    def bits_per_cell(self) -> int:
        return bits_per_symbol(self.modulation)

    @property
    def cells_per_rb(self) -> int:
        return self.subcarriers_per_rb * len(self.data_symbols)

    @property
    def frame_samples(self) -> int:
        return self.symbols_per_frame * (self.fft_size + self.cp_length)

    @property
    def frame_duration_s(self) -> float:
        return self.frame_samples / self.sample_rate


def subcarrier_bins(config: PhyConfig) -> np.ndarray:
    """FFT bin of each grid row: occupied band centered on DC, DC nulled."""
    occ = config.occupied_subcarriers
    half = occ // 2
    rows = np.arange(occ)
    k = np.where(rows < half, rows - half, rows - half + 1)
    return np.mod(k, config.fft_size)


def pilot_row(config: PhyConfig) -> np.ndarray:
    """Zadoff-Chu sequence tiled cyclically across the occupied subcarriers."""
    zc = zadoff_chu(config.zc_root, config.zc_length)
    reps = math.ceil(config.occupied_subcarriers / config.zc_length)
    return np.tile(zc, reps)[: config.occupied_subcarriers]


@dataclass(frozen=True)
class UserAllocation:
    """Block indices owned by one user."""

    user_id: int
    rb_indices: tuple

    def __post_init__(self):
        rbs = tuple(int(b) for b in self.rb_indices)
        if len(set(rbs)) != len(rbs):
            raise ValueError(f"user {self.user_id}: duplicate block indices")
        object.__setattr__(self, "rb_indices", rbs)

    def data_cells(self, config: PhyConfig) -> int:
        return len(self.rb_indices) * config.cells_per_rb

    def coded_bits(self, config: PhyConfig) -> int:
        return self.data_cells(config) * config.bits_per_cell

    def payload_bits(self, config: PhyConfig) -> int:
        """Payload capacity per frame under the rate-1/2 zero-tail code."""
        return self.coded_bits(config) // 2 - TAIL_BITS


def check_allocations(allocations, config: PhyConfig):
    seen: dict[int, int] = {}
    for alloc in allocations:
        for rb in alloc.rb_indices:
            if not 0 <= rb < config.rb_count:
                raise ValueError(f"user {alloc.user_id}: block {rb} out of range")
            if rb in seen:
                raise ValueError(
                    f"block {rb} owned by both user {seen[rb]} and user {alloc.user_id}"
                )
            seen[rb] = alloc.user_id
    ids = [a.user_id for a in allocations]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate user ids")


def equal_split(config: PhyConfig, n_users: int) -> list[UserAllocation]:
    """Contiguous equal division of all blocks among n_users."""
    if n_users < 1 or config.rb_count % n_users:
        raise ValueError(f"cannot split {config.rb_count} blocks over {n_users} users")
    per = config.rb_count // n_users
    return [
        UserAllocation(user_id=u, rb_indices=tuple(range(u * per, (u + 1) * per)))
        for u in range(n_users)
    ]


def cell_positions(config: PhyConfig, alloc: UserAllocation):
    """Canonical (subcarrier, symbol) fill order of one user's cells.

    Blocks ascending; inside a block subcarrier-major: all data symbols of a
    subcarrier row before moving to the next row.
    """
    rows = []
    cols = []
    data_syms = config.data_symbols
    for rb in sorted(alloc.rb_indices):
        base = rb * config.subcarriers_per_rb
        for sc in range(base, base + config.subcarriers_per_rb):
            for sym in data_syms:
                rows.append(sc)
                cols.append(sym)
    return np.array(rows, dtype=np.intp), np.array(cols, dtype=np.intp)


@dataclass(frozen=True)
class ResourceGrid:
    """Complex frame grid plus the cell-kind partition."""

    grid: np.ndarray
    cell_kind: np.ndarray

    def __post_init__(self):
        if self.grid.shape != self.cell_kind.shape:
            raise ValueError("grid and cell_kind shapes differ")

    def kind_counts(self) -> dict:
        kinds, counts = np.unique(self.cell_kind, return_counts=True)
        return dict(zip(kinds.tolist(), counts.tolist()))


def build_grid(config: PhyConfig, allocations, coded_bits_by_user,
               pilots: np.ndarray | None = None) -> ResourceGrid:
    """Assemble one frame from per-user coded bits.

    Every user's coded bit count must match its owned cells exactly;
    mismatches report expected vs actual. Unowned data cells stay null.
    """
    check_allocations(allocations, config)
    occ = config.occupied_subcarriers
    grid = np.zeros((occ, config.symbols_per_frame), dtype=complex)
    kind = np.full((occ, config.symbols_per_frame), KIND_NULL, dtype=np.int8)

    row = pilot_row(config) if pilots is None else np.asarray(pilots, dtype=complex)
    if row.shape != (occ,):
        raise ValueError(f"pilot row must have length {occ}")
    for sym in config.pilot_symbols:
        grid[:, sym] = row
        kind[:, sym] = KIND_PILOT

    for alloc in allocations:
        bits = np.asarray(coded_bits_by_user[alloc.user_id]).ravel()
        expected = alloc.coded_bits(config)
        if bits.size != expected:
            raise ValueError(
                f"user {alloc.user_id}: expected {expected} coded bits "
                f"for {alloc.data_cells(config)} cells, got {bits.size}"
            )
        symbols = qam_map(bits, config.modulation)
        rows, cols = cell_positions(config, alloc)
        grid[rows, cols] = symbols
        kind[rows, cols] = KIND_USER_BASE + alloc.user_id
    return ResourceGrid(grid=grid, cell_kind=kind)


def effective_rate_bps(config: PhyConfig, allocation: UserAllocation) -> float:
    """Payload throughput excluding pilot and coding overhead, bits/s."""
    cells = allocation.data_cells(config)
    return cells * config.bits_per_cell * config.code_rate / config.frame_duration_s
