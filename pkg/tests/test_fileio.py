import numpy as np
import pytest

from rislink.fileio import (read_payload_bits, read_pbm, read_waveform,
                            write_ber_report, write_payload_bits, write_pbm,
                            write_waveform)


def test_payload_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    for n in (0, 1, 7, 8, 1000, 4097):
        bits = rng.integers(0, 2, n).astype(np.uint8)
        path = tmp_path / f"p{n}.bits"
        write_payload_bits(path, bits)
        assert np.array_equal(read_payload_bits(path), bits)


def test_payload_validation(tmp_path):
    path = tmp_path / "bad.bits"
    with pytest.raises(ValueError):
        write_payload_bits(path, np.array([0, 3]))
    path.write_bytes(b"\x01\x02")
    with pytest.raises(ValueError, match="truncated"):
        read_payload_bits(path)


def test_waveform_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    x = (rng.standard_normal(5000) + 1j * rng.standard_normal(5000)).astype(complex)
    path = tmp_path / "w.iq"
    write_waveform(path, x, 2.4e9)
    y, rate = read_waveform(path)
    assert rate == 2.4e9
    # float32 storage bounds the round-trip error
    assert np.max(np.abs(y - x)) < 1e-6 * np.max(np.abs(x)) + 1e-6


def test_waveform_magic_check(tmp_path):
    path = tmp_path / "bad.iq"
    path.write_bytes(b"NOTRIQ" + b"\x00" * 32)
    with pytest.raises(ValueError, match="waveform"):
        read_waveform(path)


def test_pbm_round_trip(tmp_path):
    rng = np.random.default_rng(2)
    for shape in ((64, 64), (8, 8), (5, 13)):
        img = rng.random(shape) > 0.5
        path = tmp_path / f"img_{shape[0]}x{shape[1]}.pbm"
        write_pbm(path, img)
        assert np.array_equal(read_pbm(path), img)


def test_pbm_rejects_other_formats(tmp_path):
    path = tmp_path / "x.pbm"
    path.write_bytes(b"P1\n2 2\n0 1 1 0\n")
    with pytest.raises(ValueError, match="P4"):
        read_pbm(path)


def test_ber_report(tmp_path):
    path = tmp_path / "ber.csv"
    write_ber_report(path, [(0, 1000, 3, 0.003), (1, 1000, 0, 0.0)])
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "user_id,sent_bits,errors,ber"
    assert lines[1] == "0,1000,3,0.003"
    assert len(lines) == 3
