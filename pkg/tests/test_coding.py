import numpy as np
import pytest

from rislink.coding import TAIL_BITS, conv_encode, viterbi_decode

# impulse response of the two generator branches, 133 octal then 171 octal
IMPULSE_PAIRS = [(1, 1), (0, 1), (1, 1), (1, 1), (0, 0), (1, 0), (1, 1)]


def test_all_zero_input():
    out = conv_encode(np.zeros(50, dtype=np.uint8))
    assert out.size == 2 * 56
    assert not out.any()


def test_impulse_response():
    out = conv_encode(np.array([1], dtype=np.uint8))
    pairs = list(zip(out[0::2], out[1::2]))
    assert pairs[:7] == IMPULSE_PAIRS
    assert not any(b for pair in pairs[7:] for b in pair)


def test_length_accounting():
    assert conv_encode(np.zeros(100, dtype=np.uint8)).size == 212


def test_clean_round_trip():
    rng = np.random.default_rng(0)
    for n in (1, 7, 64, 1000):
        bits = rng.integers(0, 2, n).astype(np.uint8)
        assert np.array_equal(viterbi_decode(conv_encode(bits), soft=False), bits)


def test_single_flip_corrected():
    rng = np.random.default_rng(1)
    bits = rng.integers(0, 2, 100).astype(np.uint8)
    coded = conv_encode(bits)
    assert coded.size >= 200
    for pos in (0, 57, 199):
        corrupted = coded.copy()
        corrupted[pos] ^= 1
        assert np.array_equal(viterbi_decode(corrupted, soft=False), bits)


def test_soft_equals_hard_on_clean_input():
    rng = np.random.default_rng(2)
    bits = rng.integers(0, 2, 200).astype(np.uint8)
    coded = conv_encode(bits)
    llr = (1.0 - 2.0 * coded.astype(float)) * 3.7
    assert np.array_equal(viterbi_decode(llr), bits)


def _all_codewords(k):
    msgs = np.array([[int(b) for b in format(m, f"0{k}b")] for m in range(2 ** k)],
                    dtype=np.uint8)
    return msgs, np.stack([conv_encode(m) for m in msgs])


def test_matches_brute_force_ml_all_ten_bit_messages():
    k = 10
    msgs, codebook = _all_codewords(k)
    signs = 1.0 - 2.0 * codebook.astype(float)
    rng = np.random.default_rng(3)
    for trial in range(20):
        true = rng.integers(0, 2 ** k)
        llr = signs[true] * 2.0 + rng.normal(0.0, 2.0, signs.shape[1])
        metrics = signs @ llr
        ml = int(np.argmax(metrics))
        decoded = viterbi_decode(llr)
        got = int("".join(map(str, decoded)), 2)
        assert metrics[got] == pytest.approx(metrics[ml], abs=1e-9)
        assert got == ml  # continuous noise: ties have measure zero


def test_input_validation():
    with pytest.raises(ValueError):
        viterbi_decode(np.zeros(13))
    with pytest.raises(ValueError):
        viterbi_decode(np.zeros(4))  # shorter than the tail
    with pytest.raises(ValueError):
        viterbi_decode(np.array([0, 1, 2, 0] * 10), soft=False)
    with pytest.raises(ValueError):
        conv_encode(np.array([0, 2]))


def test_tail_is_stripped():
    bits = np.array([1, 0, 1], dtype=np.uint8)
    decoded = viterbi_decode(conv_encode(bits), soft=False)
    assert decoded.size == bits.size
    assert TAIL_BITS == 6
