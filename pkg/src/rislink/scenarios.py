"""Desk-scale reproductions of the system experiments.

Four scenario kinds: a single-user angle sweep with and without bias, four
simultaneous multi-beam groups, the weight-feedback refinement, and a
three-user image transmission demo. Every scenario is a pure function of
(spec, master seed): all randomness flows through streams derived from
(master_seed, cell index), so repeated runs are byte-identical.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import channel, ofdm, ris, spgd
from .channel import LinkGeometry, NoiseModel, SnrConfig
from .fileio import write_ber_report, write_pbm
from .frame import PhyConfig, equal_split
from .ris import CouplingConfig, ElementResponseModel, RisGeometry
from .spgd import ObjectiveSpec, SpgdConfig

SWEEP_ANGLES = tuple(float(a) for a in range(-50, 61, 10))

# receiver noise defaults per scenario family (see config module)
SWEEP_NOISE_POWER_DBM = -48.0
DEMO_NOISE_POWER_DBM = -52.5

# simultaneous-beam direction groups exercised by the multi scenario; the
# third group repeats -20 in its printed form and is deduplicated before
# optimization (noted in the emitted metadata)
MULTI_GROUPS = (
    (-50.0, -20.0, 50.0),
    (40.0, 50.0, 60.0),
    (-20.0, 0.0, -20.0),
    (0.0, 10.0, 30.0),
)

IMAGE_LETTERS = ("A", "B", "C")
IMAGE_ANGLES = (-20.0, 0.0, 20.0)

_GLYPHS = {
    "A": ("...11...",
          "..1..1..",
          ".1....1.",
          ".1....1.",
          ".111111.",
          ".1....1.",
          ".1....1.",
          "........"),
    "B": (".11111..",
          ".1....1.",
          ".1....1.",
          ".11111..",
          ".1....1.",
          ".1....1.",
          ".11111..",
          "........"),
    "C": ("..1111..",
          ".1....1.",
          ".1......",
          ".1......",
          ".1......",
          ".1....1.",
          "..1111..",
          "........"),
}


def letter_image(letter: str, size: int = 64) -> np.ndarray:
    """1-bit letter glyph (True = black), upscaled from an 8x8 master."""
    rows = _GLYPHS[letter.upper()]
    base = np.array([[c == "1" for c in r] for r in rows], dtype=bool)
    scale = size // base.shape[0]
    return np.kron(base, np.ones((scale, scale), dtype=bool))


@dataclass(frozen=True)
class ScenarioSpec:
    """Everything a scenario run needs, seeds included."""

    kind: str
    geometry: RisGeometry = RisGeometry()
    response: ElementResponseModel = field(default_factory=ris.default_response_model)
    coupling: CouplingConfig = CouplingConfig(enabled=True, alpha=0.15)
    link: LinkGeometry = LinkGeometry()
    noise: NoiseModel = NoiseModel()
    phy: PhyConfig = PhyConfig()
    spgd: SpgdConfig = SpgdConfig(gain=20000.0, perturbation_volts=0.5, iterations=300)
    snr: SnrConfig = SnrConfig(noise_power_dbm=-48.0)
    angles: tuple = SWEEP_ANGLES
    groups: tuple = MULTI_GROUPS
    user_angles: tuple = IMAGE_ANGLES
    master_seed: int = 0
    sweep_frames: int = 1
    min_payload_bits: int = 100_000
    feedback_rounds: int = 3
    feedback_iterations: int | None = None   # None -> spgd.iterations // 4
    feedback_gain: float | None = None       # None -> spgd.gain
    jobs: int = 1

    def __post_init__(self):
        if self.kind not in ("single_sweep", "multi_group", "feedback_demo", "image_demo"):
            raise ValueError(f"unknown scenario kind {self.kind!r}")
        for a in tuple(self.angles) + tuple(self.user_angles) + tuple(
            x for g in self.groups for x in g
        ):
            if not -90.0 <= float(a) <= 90.0:
                raise ValueError(f"scenario angle {a} outside [-90, 90]")
        if self.feedback_rounds < 1:
            raise ValueError("feedback_rounds must be >= 1")


def derived_seed(*keys) -> int:
    """Stable per-cell seed from (master seed, cell indices)."""
    return int(np.random.SeedSequence(tuple(int(k) for k in keys)).generate_state(1)[0])


def _objective(spec: ScenarioSpec, directions, jitter_rng):
    """Noisy measurement handle plus jitter-free helpers for `directions`."""
    geom, model, coup = spec.geometry, spec.response, spec.coupling

    def per_direction(v):
        state = ris.realize(geom, model, v, coup)
        return np.array([
            channel.received_power_dbm(
                geom, replace(spec.link, rx_angle_deg=a), spec.noise, state)
            for a in directions
        ])

    def measure(v):
        state = ris.realize(geom, model, v, coup)
        return np.array([
            channel.received_power_dbm(
                geom, replace(spec.link, rx_angle_deg=a), spec.noise, state,
                rng=jitter_rng)
            for a in directions
        ])

    def reference(v):
        return float(sum(channel.dbm_to_mw(x) for x in per_direction(v)))

    return measure, reference, per_direction


def optimize_beam(spec: ScenarioSpec, directions, cell_index: int = 0):
    """Initialize from the grating pattern and refine toward `directions`.

    Returns (best pattern, trace, objective spec, jitter-free per-direction
    readout).
    """
    jitter = np.random.default_rng([spec.master_seed, cell_index, 1])
    measure, reference, per_direction = _objective(spec, directions, jitter)
    obj = ObjectiveSpec(tuple(directions), tuple(1.0 for _ in directions), measure)
    v0 = ris.initial_voltage_pattern(spec.geometry, spec.response, list(directions))
    cfg = replace(spec.spgd, seed=derived_seed(spec.master_seed, cell_index, 0))
    trace = spgd.run_spgd(obj, v0, cfg, reference_objective=reference)
    return trace.best_pattern, trace, obj, per_direction


def _optimize(spec: ScenarioSpec, directions, cell_index):
    best, _, obj, per_direction = optimize_beam(spec, directions, cell_index)
    return best, obj, per_direction


def _zero_state(spec: ScenarioSpec):
    return ris.realize(spec.geometry, spec.response,
                       np.zeros(spec.geometry.element_count), spec.coupling)


def _jitter_free_rrp(spec: ScenarioSpec, state, angle):
    return channel.received_power_dbm(
        spec.geometry, replace(spec.link, rx_angle_deg=angle), spec.noise, state)


def _decode_stream(spec: ScenarioSpec, rx, allocations, n_frames):
    """Synchronize once, then decode every frame; garbage input decodes at 0."""
    phy = spec.phy
    sync = ofdm.synchronize(rx, phy, search=phy.frame_samples)
    offset = sync.frame_offset if sync.ok and sync.frame_offset >= 0 else 0
    nv = ofdm.subcarrier_noise_var(phy, channel.dbm_to_mw(spec.snr.noise_power_dbm))
    decoded = {a.user_id: [] for a in allocations}
    for f in range(n_frames):
        bits = ofdm.receive_frame(rx, phy, allocations,
                                  nv, offset=offset + f * phy.frame_samples)
        for uid, b in bits.items():
            decoded[uid].append(b)
    return {uid: np.concatenate(parts) for uid, parts in decoded.items()}


def _multiuser_link(spec: ScenarioSpec, state, user_angles, payloads, cell_index):
    """Transmit one multi-frame stream; each user receives through its own gain.

    Returns {user_id: (ber, decoded bits)}.
    """
    phy = spec.phy
    allocations = equal_split(phy, len(user_angles))
    capacity = allocations[0].payload_bits(phy)
    n_frames = payloads[0].size // capacity
    tx = np.concatenate([
        ofdm.transmit_frame(
            phy, allocations,
            {a.user_id: payloads[a.user_id][f * capacity:(f + 1) * capacity]
             for a in allocations})
        for f in range(n_frames)
    ])
    out = {}
    for alloc, angle in zip(allocations, user_angles):
        gain = channel.channel_gain(
            spec.geometry, spec.link, spec.noise, state, angle)
        rng = np.random.default_rng(
            [spec.master_seed, cell_index, 3, alloc.user_id])
        rx = channel.apply_channel(tx, gain, spec.snr, rng)
        decoded = _decode_stream(spec, rx, allocations, n_frames)
        ber = ofdm.compute_ber(payloads[alloc.user_id], decoded[alloc.user_id])
        out[alloc.user_id] = (ber, decoded[alloc.user_id])
    return out


def _user_payloads(spec: ScenarioSpec, n_users, cell_index, min_bits):
    phy = spec.phy
    capacity = equal_split(phy, n_users)[0].payload_bits(phy)
    n_frames = max(1, math.ceil(min_bits / capacity))
    total = n_frames * capacity
    rng = np.random.default_rng([spec.master_seed, cell_index, 2])
    return {u: rng.integers(0, 2, total).astype(np.uint8) for u in range(n_users)}, n_frames


# --------------------------------------------------------------------------
# single-user sweep

@dataclass(frozen=True)
class SweepRecord:
    angle_deg: float
    rrp_biased_dbm: float
    rrp_unbiased_dbm: float
    gain_db: float
    ber_biased: float
    ber_unbiased: float


@dataclass(frozen=True)
class SweepResult:
    records: tuple
    master_seed: int


def _sweep_cell(spec: ScenarioSpec, index: int) -> SweepRecord:
    angle = float(spec.angles[index])
    best, _, _ = _optimize(spec, (angle,), index)
    state_best = ris.realize(spec.geometry, spec.response, best, spec.coupling)
    state_zero = _zero_state(spec)
    rrp_biased = _jitter_free_rrp(spec, state_best, angle)
    rrp_unbiased = _jitter_free_rrp(spec, state_zero, angle)

    capacity = equal_split(spec.phy, 1)[0].payload_bits(spec.phy)
    payloads, _ = _user_payloads(spec, 1, index, spec.sweep_frames * capacity)
    ber_biased = _multiuser_link(spec, state_best, (angle,), payloads,
                                 cell_index=index)[0][0]
    ber_unbiased = _multiuser_link(spec, state_zero, (angle,), payloads,
                                   cell_index=index + 1000)[0][0]
    return SweepRecord(
        angle_deg=angle,
        rrp_biased_dbm=rrp_biased,
        rrp_unbiased_dbm=rrp_unbiased,
        gain_db=rrp_biased - rrp_unbiased,
        ber_biased=ber_biased,
        ber_unbiased=ber_unbiased,
    )


def run_single_sweep(spec: ScenarioSpec) -> SweepResult:
    """Optimize a single beam at each sweep angle; record power and BER
    with and without bias."""
    indices = range(len(spec.angles))
    if spec.jobs > 1:
        with ProcessPoolExecutor(max_workers=spec.jobs) as pool:
            records = list(pool.map(_sweep_cell, [spec] * len(spec.angles), indices))
    else:
        records = [_sweep_cell(spec, i) for i in indices]
    return SweepResult(records=tuple(records), master_seed=spec.master_seed)


# --------------------------------------------------------------------------
# multi-beam groups

@dataclass(frozen=True)
class GroupRecord:
    group_id: int
    angle_deg: float
    rrp_dbm: float
    gain_db: float
    ber: float
    weight: int


@dataclass(frozen=True)
class GroupResult:
    records: tuple
    metadata: tuple
    master_seed: int


def _group_cell(spec: ScenarioSpec, index: int):
    group = tuple(float(a) for a in spec.groups[index])
    directions = tuple(dict.fromkeys(group))  # ordered dedup
    notes = []
    if len(directions) != len(group):
        notes.append(
            f"group {index}: configured directions {group} contain repeats; "
            f"optimized over {directions}"
        )
    best, _, per_direction = _optimize(spec, directions, 100 + index)
    state_best = ris.realize(spec.geometry, spec.response, best, spec.coupling)
    state_zero = _zero_state(spec)

    payloads, _ = _user_payloads(spec, len(directions), 100 + index,
                                 spec.min_payload_bits // 4)
    link_out = _multiuser_link(spec, state_best, directions, payloads,
                               cell_index=100 + index)
    records = []
    for k, angle in enumerate(directions):
        rrp = _jitter_free_rrp(spec, state_best, angle)
        unb = _jitter_free_rrp(spec, state_zero, angle)
        records.append(GroupRecord(
            group_id=index, angle_deg=angle, rrp_dbm=rrp,
            gain_db=rrp - unb, ber=link_out[k][0], weight=1,
        ))
    return records, notes


def run_multi_groups(spec: ScenarioSpec) -> GroupResult:
    """Simultaneous multi-beam optimization for each configured group."""
    indices = range(len(spec.groups))
    if spec.jobs > 1:
        with ProcessPoolExecutor(max_workers=spec.jobs) as pool:
            cells = list(pool.map(_group_cell, [spec] * len(spec.groups), indices))
    else:
        cells = [_group_cell(spec, i) for i in indices]
    records, metadata = [], []
    for recs, notes in cells:
        records.extend(recs)
        metadata.extend(notes)
    return GroupResult(records=tuple(records), metadata=tuple(metadata),
                       master_seed=spec.master_seed)


# --------------------------------------------------------------------------
# image transmission and feedback refinement

@dataclass(frozen=True)
class UserPhaseRecord:
    user_id: int
    angle_deg: float
    letter: str
    sent_bits: int
    errors: int
    ber: float
    rrp_dbm: float
    recovered: np.ndarray = field(repr=False, compare=False)


@dataclass(frozen=True)
class ImageJob:
    user_angles: tuple
    letters: tuple
    sources: dict
    phases: dict          # phase name -> tuple of UserPhaseRecord
    feedback_history: tuple
    master_seed: int


PHASE_UNBIASED = "unbiased"
PHASE_BIASED = "biased"
PHASE_FEEDBACK = "feedback"


def _feedback_config(spec: ScenarioSpec):
    gain = spec.feedback_gain if spec.feedback_gain is not None else spec.spgd.gain
    iters = (spec.feedback_iterations if spec.feedback_iterations is not None
             else max(1, spec.spgd.iterations // 4))
    return replace(spec.spgd, gain=gain,
                   seed=derived_seed(spec.master_seed, 200, 5)), iters


def run_image_demo(spec: ScenarioSpec, images: dict | None = None) -> ImageJob:
    """Send one letter image per user through each configuration phase.

    Phases: unbiased surface, optimized multi-beam, and multi-beam after
    weight-feedback rounds. Payloads tile each image cyclically until every
    user carries at least min_payload_bits, so small BERs resolve.
    """
    angles = tuple(float(a) for a in spec.user_angles)
    letters = IMAGE_LETTERS[: len(angles)]
    if images is None:
        images = {letter: letter_image(letter) for letter in letters}
    for letter in letters:
        if letter not in images:
            raise ValueError(f"missing image for letter {letter}")

    cell = 200
    phy = spec.phy
    allocations = equal_split(phy, len(angles))
    capacity = allocations[0].payload_bits(phy)
    n_frames = max(1, math.ceil(spec.min_payload_bits / capacity))
    total = n_frames * capacity
    payloads = {}
    for uid, letter in enumerate(letters):
        bits = images[letter].astype(np.uint8).ravel()
        payloads[uid] = np.tile(bits, math.ceil(total / bits.size))[:total]

    best, obj, per_direction = _optimize(spec, angles, cell)
    fb_cfg, fb_iters = _feedback_config(spec)
    refined, history = spgd.run_feedback_loop(
        obj, best, fb_cfg, rounds=spec.feedback_rounds,
        feedback_iterations=fb_iters, reference_readings=per_direction,
    )

    states = {
        PHASE_UNBIASED: _zero_state(spec),
        PHASE_BIASED: ris.realize(spec.geometry, spec.response, best, spec.coupling),
        PHASE_FEEDBACK: ris.realize(spec.geometry, spec.response, refined, spec.coupling),
    }
    phases = {}
    for p_idx, (phase, state) in enumerate(states.items()):
        phase_spec = replace(spec, master_seed=derived_seed(spec.master_seed, cell, 10 + p_idx))
        link_out = _multiuser_link(phase_spec, state, angles, payloads, cell_index=cell)
        records = []
        for uid, letter in enumerate(letters):
            src = images[letter]
            ber, decoded = link_out[uid]
            n_bits = payloads[uid].size
            records.append(UserPhaseRecord(
                user_id=uid, angle_deg=angles[uid], letter=letter,
                sent_bits=n_bits, errors=int(round(ber * n_bits)), ber=ber,
                rrp_dbm=_jitter_free_rrp(spec, state, angles[uid]),
                recovered=decoded[: src.size].reshape(src.shape).astype(bool),
            ))
        phases[phase] = tuple(records)
    return ImageJob(
        user_angles=angles, letters=letters, sources=dict(images),
        phases=phases, feedback_history=tuple(history),
        master_seed=spec.master_seed,
    )


def run_feedback_demo(spec: ScenarioSpec):
    """Multi-beam optimization plus weight-feedback rounds, power-only view.

    Returns (per-round history, per-direction dBm before, after).
    """
    angles = tuple(float(a) for a in spec.user_angles)
    cell = 300
    best, obj, per_direction = _optimize(spec, angles, cell)
    before = per_direction(best)
    fb_cfg, fb_iters = _feedback_config(spec)
    refined, history = spgd.run_feedback_loop(
        obj, best, fb_cfg, rounds=spec.feedback_rounds,
        feedback_iterations=fb_iters, reference_readings=per_direction,
    )
    after = per_direction(refined)
    return history, before, after, refined


# --------------------------------------------------------------------------
# emission

def _fmt(x) -> str:
    return f"{x:.10g}"


def emit_sweep_csv(result: SweepResult, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["angle_deg", "rrp_biased_dbm", "rrp_unbiased_dbm",
                    "gain_db", "ber_biased", "ber_unbiased"])
        for r in result.records:
            w.writerow([_fmt(r.angle_deg), _fmt(r.rrp_biased_dbm),
                        _fmt(r.rrp_unbiased_dbm), _fmt(r.gain_db),
                        _fmt(r.ber_biased), _fmt(r.ber_unbiased)])


def emit_group_csv(result: GroupResult, path, metadata_path=None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["group_id", "angle_deg", "rrp_dbm", "gain_db", "ber", "weight"])
        for r in result.records:
            w.writerow([r.group_id, _fmt(r.angle_deg), _fmt(r.rrp_dbm),
                        _fmt(r.gain_db), _fmt(r.ber), r.weight])
    if metadata_path is not None:
        with open(metadata_path, "w", encoding="utf-8") as fh:
            for line in result.metadata:
                fh.write(line + "\n")


def emit_feedback_csv(history, path) -> None:
    if not history:
        raise ValueError("empty feedback history")
    n = len(history[0].weights)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["round"] + [f"weight_dir{k}" for k in range(n)]
                   + [f"measured_dbm_dir{k}" for k in range(n)])
        for st in history:
            w.writerow([st.round] + [str(x) for x in st.weights]
                       + [_fmt(x) for x in st.last_measured_dbm])


def emit_image_results(job: ImageJob, out_dir) -> None:
    os.makedirs(out_dir, exist_ok=True)
    for letter, src in sorted(job.sources.items()):
        write_pbm(os.path.join(out_dir, f"source_{letter}.pbm"), src)
    for phase, records in job.phases.items():
        write_ber_report(
            os.path.join(out_dir, f"ber_report_{phase}.csv"),
            [(r.user_id, r.sent_bits, r.errors, r.ber) for r in records],
        )
        for r in records:
            write_pbm(os.path.join(out_dir, f"recovered_{r.letter}_{phase}.pbm"),
                      r.recovered)
    if job.feedback_history:
        emit_feedback_csv(job.feedback_history,
                          os.path.join(out_dir, "feedback_history.csv"))


def emit_results(result, out_dir) -> list:
    """Write a scenario result's files into out_dir; returns the paths."""
    os.makedirs(out_dir, exist_ok=True)
    written = []
    if isinstance(result, SweepResult):
        path = os.path.join(out_dir, "sweep.csv")
        emit_sweep_csv(result, path)
        written.append(path)
    elif isinstance(result, GroupResult):
        path = os.path.join(out_dir, "groups.csv")
        meta = os.path.join(out_dir, "groups_metadata.txt")
        emit_group_csv(result, path, meta)
        written.extend([path, meta])
    elif isinstance(result, ImageJob):
        emit_image_results(result, out_dir)
        written.append(out_dir)
    else:
        raise TypeError(f"cannot emit results for {type(result).__name__}")
    return written
