import math
import struct

import numpy as np
import pytest
from fields import smooth_field

from mgrx.encoder import (
    MAGIC,
    METHOD_MULTIGRID,
    CompressedArtifact,
    decode_labels,
    encode_labels,
    header_size,
    huffman_code_lengths,
    read_artifact,
    write_artifact,
)
from mgrx.errors import CorruptArtifactError, DecodeError, NotAnArtifactError, UnsupportedVersionError
from mgrx.pipeline import compress


def roundtrip(labels):
    data = encode_labels(labels)
    out, end = decode_labels(data, len(labels))
    assert end == len(data)
    assert np.array_equal(out, labels)
    return data


def test_all_zero_labels_are_tiny():
    n = 10_000
    assert len(roundtrip(np.zeros(n, np.int32))) <= 16 + math.ceil(n / 8)


def test_skewed_alphabet_within_entropy_plus_one():
    labels = np.array([0] * 900 + [1] * 50 + [-1] * 50, dtype=np.int32)
    np.random.default_rng(0).shuffle(labels)
    data = roundtrip(labels)
    p = np.array([0.9, 0.05, 0.05])
    entropy = -(p * np.log2(p)).sum()
    counts = np.array([900, 50, 50])
    lengths = huffman_code_lengths(counts)
    assert (lengths * counts).sum() / 1000 <= entropy + 1
    assert len(data) * 8 / 1000 <= entropy + 1 + 0.4  # header and table


@pytest.mark.parametrize("seed", range(4))
def test_random_labels_roundtrip(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 5000))
    labels = rng.integers(-32767, 32768, n).astype(np.int32)
    data = roundtrip(labels)
    span = int(labels.max()) - int(labels.min()) + 1
    assert len(data) <= n * math.ceil(math.log2(max(span, 2))) / 8 + 64


def test_zipf_within_entropy_slack():
    rng = np.random.default_rng(1)
    labels = (rng.zipf(1.6, 50_000).clip(1, 3000) * rng.choice([-1, 1], 50_000)).astype(np.int32)
    data = roundtrip(labels)
    _, counts = np.unique(labels, return_counts=True)
    p = counts / counts.sum()
    entropy_bits = -(p * np.log2(p)).sum() * labels.size
    table = 5 * counts.size + 32
    assert len(data) * 8 <= entropy_bits + labels.size + 8 * table


def test_empty_and_single_symbol():
    roundtrip(np.zeros(0, np.int32))
    roundtrip(np.full(7, -3, np.int32))


def test_length_limit_applies():
    counts = np.array([2**i for i in range(30)])
    assert huffman_code_lengths(counts).max() <= 20
    labels = np.repeat(np.arange(30, dtype=np.int32), counts[:30] // 2**8 + 1)
    roundtrip(labels)


def test_truncated_or_wrong_count_raises():
    data = encode_labels(np.arange(-50, 50, dtype=np.int32).repeat(3))
    with pytest.raises(DecodeError):
        decode_labels(data[:-3])
    with pytest.raises(DecodeError):
        decode_labels(data, 7)


def make_artifact():
    return CompressedArtifact(
        dtype=np.dtype(np.float64),
        method=METHOD_MULTIGRID,
        dims=(3, 3),
        num_levels=1,
        stop_level=0,
        quant_mode="levelwise",
        budget=0.5,
        bin_widths=(4 / 9, 5 / 9),
        coarse=np.array([1, 0, -2, 3], np.int32),
        level_labels=[np.zeros(5, np.int32)],
    )


def test_header_layout():
    data = write_artifact(make_artifact())
    assert data[:4] == MAGIC and data[4] == 1
    hs = header_size(2, 1, 3)
    assert hs == 4 + 1 + 1 + 1 + 1 + 16 + 1 + 1 + 1 + 8 + 16 + 1 + 24
    lengths = struct.unpack_from("<3Q", data, hs - 24)
    assert hs + sum(lengths) + 4 == len(data)


def test_write_read_write_identical():
    data = compress(smooth_field(2, 17), 1e-3)
    art = read_artifact(data)
    assert write_artifact(art) == data


def test_header_errors():
    data = write_artifact(make_artifact())
    with pytest.raises(NotAnArtifactError):
        read_artifact(b"NOPE" + data[4:])
    bad = bytearray(data)
    bad[4] = 9
    with pytest.raises(UnsupportedVersionError):
        read_artifact(bytes(bad))
    with pytest.raises(CorruptArtifactError):
        read_artifact(data[:-1])
    bad = bytearray(data)
    bad[30] ^= 0xFF
    with pytest.raises(CorruptArtifactError):
        read_artifact(bytes(bad))
