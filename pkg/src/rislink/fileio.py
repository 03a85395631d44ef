"""On-disk formats: bit payloads, I/Q waveforms, portable bitmaps, BER reports."""

from __future__ import annotations

import csv
import struct

import numpy as np

WAVEFORM_MAGIC = b"RISIQ1"


def write_payload_bits(path, bits) -> None:
    """Raw binary payload: 8-byte little-endian bit count, then packed bits."""
    b = np.asarray(bits, dtype=np.uint8).ravel()
    if b.size and b.max() > 1:
        raise ValueError("payload must contain only 0/1 bits")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", b.size))
        fh.write(np.packbits(b).tobytes())


def read_payload_bits(path) -> np.ndarray:
    with open(path, "rb") as fh:
        header = fh.read(8)
        if len(header) != 8:
            raise ValueError(f"{path}: truncated payload header")
        (count,) = struct.unpack("<Q", header)
        packed = np.frombuffer(fh.read(), dtype=np.uint8)
    bits = np.unpackbits(packed)
    if bits.size < count:
        raise ValueError(f"{path}: expected {count} bits, file holds {bits.size}")
    return bits[:count]


def write_waveform(path, samples, sample_rate: float) -> None:
    """`RISIQ1` header, float64 sample rate, uint64 count, float32 I/Q pairs."""
    x = np.asarray(samples, dtype=complex).ravel()
    iq = np.empty(2 * x.size, dtype="<f4")
    iq[0::2] = x.real
    iq[1::2] = x.imag
    with open(path, "wb") as fh:
        fh.write(WAVEFORM_MAGIC)
        fh.write(struct.pack("<d", sample_rate))
        fh.write(struct.pack("<Q", x.size))
        fh.write(iq.tobytes())


def read_waveform(path):
    """Returns (samples, sample_rate)."""
    with open(path, "rb") as fh:
        magic = fh.read(len(WAVEFORM_MAGIC))
        if magic != WAVEFORM_MAGIC:
            raise ValueError(f"{path}: not a {WAVEFORM_MAGIC.decode()} waveform file")
        (rate,) = struct.unpack("<d", fh.read(8))
        (count,) = struct.unpack("<Q", fh.read(8))
        iq = np.frombuffer(fh.read(), dtype="<f4")
    if iq.size != 2 * count:
        raise ValueError(f"{path}: expected {count} samples, found {iq.size // 2}")
    return iq[0::2].astype(float) + 1j * iq[1::2].astype(float), rate


def write_pbm(path, bitmap) -> None:
    """P4 portable bitmap; truthy pixels are black."""
    img = np.asarray(bitmap).astype(bool)
    if img.ndim != 2:
        raise ValueError("bitmap must be 2-D")
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P4\n{w} {h}\n".encode("ascii"))
        fh.write(np.packbits(img, axis=1).tobytes())


def read_pbm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(b"P4"):
        raise ValueError(f"{path}: not a P4 bitmap")
    # header: magic, whitespace-separated width and height, one whitespace byte
    pos = 2
    fields = []
    while len(fields) < 2:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        fields.append(int(data[start:pos]))
    pos += 1  # single whitespace after the header
    w, h = fields
    row_bytes = (w + 7) // 8
    raw = np.frombuffer(data[pos : pos + h * row_bytes], dtype=np.uint8)
    if raw.size != h * row_bytes:
        raise ValueError(f"{path}: truncated bitmap data")
    rows = np.unpackbits(raw.reshape(h, row_bytes), axis=1)[:, :w]
    return rows.astype(bool)


def write_ber_report(path, rows) -> None:
    """rows: iterable of (user_id, sent_bits, errors, ber)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["user_id", "sent_bits", "errors", "ber"])
        for user_id, sent, errors, ber in rows:
            writer.writerow([user_id, sent, errors, f"{ber:.10g}"])
