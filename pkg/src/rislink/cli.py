"""Command line entry point.

Subcommands: beamform, sweep, multi, image, feedback, link. Every run writes
a `manifest` file with the fully resolved configuration and seed into the
output directory; re-running with the same manifest reproduces the outputs
byte for byte. Exit codes: 0 success, 2 usage error, 1 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import os
import re
import sys
from dataclasses import replace

import numpy as np

from . import CONFIG_SCHEMA_VERSION, __version__, channel, ofdm, ris, scenarios, spgd
from .config import ConfigError, RunConfig, RunSettings, load_config, write_manifest
from .fileio import (read_payload_bits, read_pbm, write_ber_report,
                     write_payload_bits, write_waveform)
from .frame import equal_split


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rislink",
        description="Link-level simulator for a 220 GHz reflective-surface "
                    "multi-user system",
    )
    parser.add_argument(
        "--version", action="version",
        version=f"rislink {__version__} (config-schema {CONFIG_SCHEMA_VERSION})",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="configuration file")
    common.add_argument("--seed", type=int, metavar="N", help="master seed")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--jobs", type=int, metavar="N",
                        help="parallel scenario cells (default 1)")

    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("beamform", parents=[common],
                       help="optimize a pattern for one or more directions")
    p.add_argument("--angle", type=float, action="append", metavar="DEG",
                   help="target direction, repeatable for multi-beam")
    sub.add_parser("sweep", parents=[common],
                   help="single-beam angle sweep with and without bias")
    p = sub.add_parser("multi", parents=[common],
                       help="simultaneous multi-beam groups")
    p.add_argument("--group", action="append", metavar="A,B,C",
                   help="comma-separated direction group, repeatable")
    p = sub.add_parser("image", parents=[common],
                       help="three-user image transmission demo")
    p.add_argument("--images", nargs=3, metavar="PBM",
                   help="three P4 bitmap files (defaults to generated letters)")
    p = sub.add_parser("feedback", parents=[common],
                       help="multi-beam power feedback refinement")
    p.add_argument("--rounds", type=int, metavar="N", help="feedback rounds")
    p = sub.add_parser("link", parents=[common],
                       help="single end-to-end link run with waveform capture")
    p.add_argument("--angle", type=float, metavar="DEG", help="receiver direction")
    p.add_argument("--payload", metavar="PATH", help="payload bit file to send")
    p.add_argument("--frames", type=int, metavar="N", help="frames to send")

    # accept negative direction lists like `--group -50,-20,50`
    numberish = re.compile(r"^-\d[\d.,eE+-]*$")
    parser._negative_number_matcher = numberish
    for action in sub.choices.values():
        action._negative_number_matcher = numberish
    return parser


def _check_angle(parser, value, name="angle"):
    if not -90.0 < value < 90.0:
        parser.error(f"{name} {value:g} out of range (-90, 90)")
    return float(value)


def _resolve(args, parser) -> RunConfig:
    """Merge CLI flags over the config file's [run] section."""
    cfg = load_config(args.config) if args.config else RunConfig()
    run = cfg.run
    angles = run.angles
    if getattr(args, "angle", None) is not None:
        raw = args.angle if isinstance(args.angle, list) else [args.angle]
        angles = tuple(_check_angle(parser, a) for a in raw)
    group = run.group
    if getattr(args, "group", None):
        parsed = []
        for text in args.group:
            try:
                parts = tuple(float(t) for t in text.split(",") if t.strip())
            except ValueError:
                parser.error(f"--group expects comma-separated numbers, got {text!r}")
            if not parts:
                parser.error(f"--group expects at least one direction, got {text!r}")
            for a in parts:
                _check_angle(parser, a, name="group angle")
            parsed.append(parts)
        group = tuple(parsed) if len(parsed) > 1 else parsed[0]
    run = RunSettings(
        command=args.command,
        seed=args.seed if args.seed is not None else run.seed,
        out_dir=args.out if args.out is not None else run.out_dir,
        jobs=args.jobs if args.jobs is not None else run.jobs,
        angles=angles,
        group=group,
        rounds=(args.rounds if getattr(args, "rounds", None) is not None
                else run.rounds),
        frames=(args.frames if getattr(args, "frames", None) is not None
                else run.frames),
        payload=(args.payload if getattr(args, "payload", None) is not None
                 else run.payload),
    )
    return replace(cfg, run=run)


def _prepare_out(cfg: RunConfig) -> str:
    out = cfg.run.out_dir
    os.makedirs(out, exist_ok=True)
    write_manifest(cfg, os.path.join(out, "manifest"))
    return out


def _write_pattern_csv(path, pattern) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["element", "volts"])
        for i, v in enumerate(np.asarray(pattern)):
            w.writerow([i, f"{v:.10g}"])


def cmd_beamform(cfg: RunConfig, parser) -> int:
    angles = cfg.run.angles
    if not angles:
        parser.error("beamform requires --angle (or [run] angles in the config)")
    out = _prepare_out(cfg)
    spec = cfg.scenario_spec("multi_group", master_seed=cfg.run.seed)
    best, trace, _, per_direction = scenarios.optimize_beam(spec, angles)
    spgd.export_trace_csv(trace, os.path.join(out, "trace.csv"))
    _write_pattern_csv(os.path.join(out, "pattern.csv"), best)
    zero = ris.realize(spec.geometry, spec.response,
                       np.zeros(spec.geometry.element_count), spec.coupling)
    with open(os.path.join(out, "beams.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["angle_deg", "rrp_dbm", "rrp_unbiased_dbm", "gain_db"])
        for angle, rrp in zip(angles, per_direction(best)):
            unb = channel.received_power_dbm(
                spec.geometry, replace(spec.link, rx_angle_deg=angle),
                spec.noise, zero)
            w.writerow([f"{angle:.10g}", f"{rrp:.10g}", f"{unb:.10g}",
                        f"{rrp - unb:.10g}"])
    for angle, rrp in zip(angles, per_direction(best)):
        print(f"beam {angle:+.1f} deg: {rrp:.2f} dBm after optimization")
    print(f"wrote {out}/pattern.csv, trace.csv, beams.csv")
    return 0


def cmd_sweep(cfg: RunConfig, parser) -> int:
    out = _prepare_out(cfg)
    spec = cfg.scenario_spec("single_sweep")
    result = scenarios.run_single_sweep(spec)
    scenarios.emit_results(result, out)
    for r in result.records:
        print(f"angle {r.angle_deg:+6.1f}: gain {r.gain_db:6.2f} dB, "
              f"ber {r.ber_biased:.2e} (biased) {r.ber_unbiased:.3f} (unbiased)")
    print(f"wrote {out}/sweep.csv")
    return 0


def cmd_multi(cfg: RunConfig, parser) -> int:
    out = _prepare_out(cfg)
    overrides = {}
    if cfg.run.group:
        groups = cfg.run.group
        if groups and not isinstance(groups[0], tuple):
            groups = (groups,)
        overrides["groups"] = groups
    spec = cfg.scenario_spec("multi_group", **overrides)
    result = scenarios.run_multi_groups(spec)
    scenarios.emit_results(result, out)
    for r in result.records:
        print(f"group {r.group_id} angle {r.angle_deg:+6.1f}: "
              f"gain {r.gain_db:6.2f} dB, ber {r.ber:.2e}")
    print(f"wrote {out}/groups.csv")
    return 0


def cmd_image(cfg: RunConfig, parser, image_paths=None) -> int:
    out = _prepare_out(cfg)
    spec = cfg.scenario_spec("image_demo")
    images = None
    if image_paths:
        images = {}
        for letter, path in zip(scenarios.IMAGE_LETTERS, image_paths):
            try:
                images[letter] = read_pbm(path)
            except (OSError, ValueError) as exc:
                raise RuntimeError(f"cannot read image {path}: {exc}") from None
    job = scenarios.run_image_demo(spec, images=images)
    scenarios.emit_results(job, out)
    for phase, records in job.phases.items():
        bers = ", ".join(f"{r.letter}@{r.angle_deg:+.0f}: {r.ber:.4f}" for r in records)
        print(f"{phase:9s} {bers}")
    print(f"wrote BER reports and recovered images to {out}/")
    return 0


def cmd_feedback(cfg: RunConfig, parser) -> int:
    out = _prepare_out(cfg)
    rounds = cfg.run.rounds or cfg.scenario.feedback_rounds
    spec = cfg.scenario_spec("feedback_demo", feedback_rounds=rounds)
    history, before, after, pattern = scenarios.run_feedback_demo(spec)
    scenarios.emit_feedback_csv(history, os.path.join(out, "feedback_history.csv"))
    _write_pattern_csv(os.path.join(out, "pattern.csv"), pattern)
    with open(os.path.join(out, "feedback_summary.csv"), "w", newline="",
              encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["angle_deg", "rrp_before_dbm", "rrp_after_dbm"])
        for angle, b, a in zip(spec.user_angles, before, after):
            w.writerow([f"{angle:.10g}", f"{b:.10g}", f"{a:.10g}"])
    for angle, b, a in zip(spec.user_angles, before, after):
        print(f"direction {angle:+6.1f}: {b:.2f} -> {a:.2f} dBm")
    print(f"wrote {out}/feedback_history.csv, feedback_summary.csv, pattern.csv")
    return 0


def cmd_link(cfg: RunConfig, parser) -> int:
    out = _prepare_out(cfg)
    spec = cfg.scenario_spec("single_sweep")
    angle = cfg.run.angles[0] if cfg.run.angles else float(spec.user_angles[0])
    _check_angle(parser, angle)
    phy = spec.phy
    alloc = equal_split(phy, 1)
    capacity = alloc[0].payload_bits(phy)
    n_frames = max(1, cfg.run.frames)
    if cfg.run.payload:
        bits = read_payload_bits(cfg.run.payload)
        total = n_frames * capacity
        bits = np.tile(bits, int(np.ceil(total / bits.size)))[:total]
    else:
        rng = np.random.default_rng([spec.master_seed, 7])
        bits = rng.integers(0, 2, n_frames * capacity).astype(np.uint8)

    best, _, _, _ = scenarios.optimize_beam(spec, (angle,))
    state = ris.realize(spec.geometry, spec.response, best, spec.coupling)
    gain = channel.channel_gain(spec.geometry, spec.link, spec.noise, state, angle)
    tx = np.concatenate([
        ofdm.transmit_frame(phy, alloc, {0: bits[f * capacity:(f + 1) * capacity]})
        for f in range(n_frames)
    ])
    rng = np.random.default_rng([spec.master_seed, 8])
    rx = channel.apply_channel(tx, gain, spec.snr, rng)
    nv = ofdm.subcarrier_noise_var(phy, channel.dbm_to_mw(spec.snr.noise_power_dbm))
    decoded = np.concatenate([
        ofdm.receive_frame(rx, phy, alloc, nv, offset=f * phy.frame_samples)[0]
        for f in range(n_frames)
    ])
    ber = ofdm.compute_ber(bits, decoded)
    write_payload_bits(os.path.join(out, "payload_sent.bits"), bits)
    write_payload_bits(os.path.join(out, "payload_received.bits"), decoded)
    write_waveform(os.path.join(out, "tx.iq"), tx, phy.sample_rate)
    write_waveform(os.path.join(out, "rx.iq"), rx, phy.sample_rate)
    write_ber_report(os.path.join(out, "ber_report.csv"),
                     [(0, bits.size, int(round(ber * bits.size)), ber)])
    print(f"link at {angle:+.1f} deg: {bits.size} bits, ber {ber:.3e}")
    print(f"wrote {out}/tx.iq, rx.iq, payload_*.bits, ber_report.csv")
    return 0


_COMMANDS = {
    "beamform": cmd_beamform,
    "sweep": cmd_sweep,
    "multi": cmd_multi,
    "image": cmd_image,
    "feedback": cmd_feedback,
    "link": cmd_link,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _resolve(args, parser)
        if args.command == "image":
            return cmd_image(cfg, parser, image_paths=getattr(args, "images", None))
        return _COMMANDS[args.command](cfg, parser)
    except (ConfigError, RuntimeError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
