"""Canonical Huffman coding of label streams and the on-disk container.

Container layout, little-endian::

    "MGRX" | version u8 | element u8 | method u8 | ndims u8 | dims u64 x d
    | levels u8 | stop u8 | quant u8 | budget f64 | q_l f64 x (L+1)
    | sections u8 | section lengths u64 x sections | payload | crc32 u32

Sections are the coarse block (labels or a Lorenzo stream), one label block
per level above the stop level, then the outlier block.
"""

from __future__ import annotations

import heapq
import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from .errors import CorruptArtifactError, DecodeError, NotAnArtifactError, UnsupportedVersionError
from .lorenzo import LorenzoStream
from .quantizer import LABEL_BOUND, LEVELWISE, UNIFORM

MAGIC = b"MGRX"
VERSION = 1
MAX_CODE_LENGTH = 20

METHOD_MULTIGRID = 0
METHOD_HYBRID = 1
METHOD_LORENZO = 2

ELEMENT_CODES = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}
ELEMENT_TYPES = {v: k for k, v in ELEMENT_CODES.items()}
QUANT_CODES = {UNIFORM: 0, LEVELWISE: 1}
QUANT_MODES = {v: k for k, v in QUANT_CODES.items()}

_TABLE_SINGLE = 0
_TABLE_DENSE = 1
_TABLE_SPARSE = 2
_FIXED_WIDTH = 3


class _Reader:
    """Bounds-checked cursor over a byte buffer."""

    def __init__(self, data: bytes | memoryview, pos: int = 0):
        self.data = memoryview(data)
        self.pos = pos

    def take(self, n: int) -> memoryview:
        if n < 0 or self.pos + n > len(self.data):
            raise CorruptArtifactError("truncated data")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        fmt = "<" + fmt
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def array(self, dtype, count: int) -> np.ndarray:
        dtype = np.dtype(dtype).newbyteorder("<")
        return np.frombuffer(self.take(count * dtype.itemsize), dtype=dtype).astype(dtype.newbyteorder("="))

    def done(self) -> None:
        if self.pos != len(self.data):
            raise CorruptArtifactError(f"{len(self.data) - self.pos} trailing bytes")


# ---------------------------------------------------------------- Huffman


def huffman_code_lengths(counts: np.ndarray, limit: int = MAX_CODE_LENGTH) -> np.ndarray:
    """Optimal prefix-code lengths, flattened frequencies until within ``limit``."""
    counts = np.asarray(counts, dtype=np.int64)
    if counts.size == 1:
        return np.ones(1, dtype=np.int64)
    while True:
        heap = [(int(c), i) for i, c in enumerate(counts)]
        heapq.heapify(heap)
        parent = np.zeros(2 * counts.size - 1, dtype=np.int64)
        node = counts.size
        while len(heap) > 1:
            c1, a = heapq.heappop(heap)
            c2, b = heapq.heappop(heap)
            parent[a] = parent[b] = node
            heapq.heappush(heap, (c1 + c2, node))
            node += 1
        depth = np.zeros(node, dtype=np.int64)
        for i in range(node - 2, -1, -1):
            depth[i] = depth[parent[i]] + 1
        lengths = depth[: counts.size]
        if lengths.max() <= limit:
            return lengths
        counts = np.maximum(counts // 2, 1)


def canonical_codes(lengths: np.ndarray) -> np.ndarray:
    """Canonical code values for symbols given in (length, symbol) order."""
    order = np.lexsort((np.arange(lengths.size), lengths))
    codes = np.zeros(lengths.size, dtype=np.int64)
    code = 0
    prev = int(lengths[order[0]])
    for rank, i in enumerate(order):
        ln = int(lengths[i])
        if rank:
            code = (code + 1) << (ln - prev)
        codes[i] = code
        prev = ln
    return codes


def _write_table(symbols: np.ndarray, lengths: np.ndarray) -> bytes:
    span = int(symbols[-1] - symbols[0] + 1)
    dense_size = 9 + span
    sparse_size = 4 + 5 * symbols.size
    if dense_size <= sparse_size:
        table = np.zeros(span, dtype=np.uint8)
        table[symbols - symbols[0]] = lengths
        return struct.pack("<BiI", _TABLE_DENSE, int(symbols[0]), span) + table.tobytes()
    rec = np.zeros(symbols.size, dtype=[("sym", "<i4"), ("len", "u1")])
    rec["sym"] = symbols
    rec["len"] = lengths
    return struct.pack("<BI", _TABLE_SPARSE, symbols.size) + rec.tobytes()


def _read_table(r: _Reader) -> tuple[np.ndarray, np.ndarray]:
    (kind,) = r.unpack("B")
    if kind == _TABLE_DENSE:
        lo, span = r.unpack("iI")
        if span == 0 or span > 2 * LABEL_BOUND + 1:
            raise CorruptArtifactError("bad code table span")
        table = r.array(np.uint8, span).astype(np.int64)
        present = np.flatnonzero(table)
        return present.astype(np.int64) + lo, table[present]
    if kind == _TABLE_SPARSE:
        (n,) = r.unpack("I")
        if n == 0 or n > 2 * LABEL_BOUND + 1:
            raise CorruptArtifactError("bad code table size")
        rec = np.frombuffer(r.take(5 * n), dtype=[("sym", "<i4"), ("len", "u1")])
        syms = rec["sym"].astype(np.int64)
        if np.any(np.diff(syms) <= 0):
            raise CorruptArtifactError("code table symbols not increasing")
        return syms, rec["len"].astype(np.int64)
    raise CorruptArtifactError(f"unknown code table kind {kind}")


def _encode_fixed(labels: np.ndarray, lo: int, width: int) -> bytes:
    shifts = np.arange(width - 1, -1, -1, dtype=np.int64)
    bits = ((labels - lo)[:, None] >> shifts) & 1
    return struct.pack("<BiB", _FIXED_WIDTH, lo, width) + np.packbits(bits.astype(np.uint8)).tobytes()


def _decode_fixed(r: _Reader, n: int) -> np.ndarray:
    lo, width = r.unpack("iB")
    if not 1 <= width <= 16:
        raise CorruptArtifactError("bad fixed label width")
    raw = np.frombuffer(r.take((n * width + 7) // 8), dtype=np.uint8)
    bits = np.unpackbits(raw)[: n * width].reshape(n, width).astype(np.int64)
    labels = bits @ (1 << np.arange(width - 1, -1, -1, dtype=np.int64)) + lo
    if np.abs(labels).max() > LABEL_BOUND:
        raise CorruptArtifactError("label outside alphabet")
    return labels.astype(np.int32)


def encode_labels(labels) -> bytes:
    """Serialize integer labels as ``count u64 | table | nbits u64 | bits``.

    Wide, flat alphabets whose code table would outweigh the savings are
    packed at a fixed width instead.
    """
    labels = np.asarray(labels).reshape(-1)
    if labels.size and np.abs(labels.astype(np.int64)).max() > LABEL_BOUND:
        raise ValueError(f"labels exceed the alphabet bound {LABEL_BOUND}")
    head = struct.pack("<Q", labels.size)
    if labels.size == 0:
        return head
    symbols, inverse, counts = np.unique(labels.astype(np.int64), return_inverse=True, return_counts=True)
    if symbols.size == 1:
        return head + struct.pack("<Bi", _TABLE_SINGLE, int(symbols[0]))
    lengths = huffman_code_lengths(counts)
    lo = int(symbols[0])
    width = int(symbols[-1] - lo).bit_length()
    table = _write_table(symbols, lengths)
    if len(table) + 8 + (int(lengths @ counts) + 7) // 8 >= 6 + (labels.size * width + 7) // 8:
        return head + _encode_fixed(labels.astype(np.int64), lo, width)
    codes = canonical_codes(lengths)
    ln = lengths[inverse]
    cd = codes[inverse]
    total = int(ln.sum())
    starts = np.cumsum(ln) - ln
    bits = np.zeros(total, dtype=np.uint8)
    for j in range(int(ln.max())):
        live = ln > j
        bits[starts[live] + j] = (cd[live] >> (ln[live] - 1 - j)) & 1
    return head + table + struct.pack("<Q", total) + np.packbits(bits).tobytes()


def _decode_lookup(symbols, lengths, width):
    if lengths.min() < 1 or lengths.max() > MAX_CODE_LENGTH:
        raise CorruptArtifactError("code length out of range")
    # Kraft sum must be exactly one for a complete canonical code
    if sum(2 ** (width - int(n)) for n in lengths) != 2**width:
        raise CorruptArtifactError("code lengths do not form a complete prefix code")
    codes = canonical_codes(lengths)
    span = 2 ** (width - lengths)
    first = codes << (width - lengths)
    order = np.argsort(first)
    sym_table = np.repeat(symbols[order], span[order])
    len_table = np.repeat(lengths[order], span[order])
    return sym_table, len_table


def decode_labels(data, count: int | None = None, *, offset: int = 0) -> tuple[np.ndarray, int]:
    """Inverse of :func:`encode_labels`; returns ``(labels, end_offset)``."""
    r = _Reader(data, offset)
    (n,) = r.unpack("Q")
    if count is not None and n != count:
        raise CorruptArtifactError(f"label block holds {n} labels, expected {count}")
    if n == 0:
        return np.zeros(0, dtype=np.int32), r.pos
    (kind,) = r.unpack("B")
    if kind == _TABLE_SINGLE:
        (sym,) = r.unpack("i")
        if abs(sym) > LABEL_BOUND:
            raise CorruptArtifactError("label outside alphabet")
        return np.full(n, sym, dtype=np.int32), r.pos
    if kind == _FIXED_WIDTH:
        return _decode_fixed(r, n), r.pos
    r.pos -= 1
    symbols, lengths = _read_table(r)
    if symbols.size < 2 or np.abs(symbols).max() > LABEL_BOUND:
        raise CorruptArtifactError("bad code table")
    (total,) = r.unpack("Q")
    if total < n or total > n * MAX_CODE_LENGTH:
        raise CorruptArtifactError("bit count inconsistent with label count")
    raw = r.take((total + 7) // 8)
    width = int(lengths.max())
    sym_table, len_table = _decode_lookup(symbols, lengths, width)
    bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8))[:total]
    padded = np.concatenate((bits, np.zeros(width, dtype=np.uint8))).astype(np.int64)
    window = np.zeros(total, dtype=np.int64)
    for j in range(width):
        window = (window << 1) | padded[j : j + total]
    # next code start from every bit position; walk the chain by pointer doubling
    step = np.arange(total, dtype=np.int64) + len_table[window]
    step = np.minimum(step, total)
    jump = np.append(step, total)
    pos = np.zeros(1, dtype=np.int64)
    while pos.size < n:
        pos = np.concatenate((pos, jump[pos]))
        if pos.size < n:
            jump = jump[jump]
    pos = pos[:n]
    if pos[-1] >= total or pos[-1] + len_table[window[pos[-1]]] != total:
        raise CorruptArtifactError("bit stream does not end on a code boundary")
    return sym_table[window[pos]].astype(np.int32), r.pos


# ---------------------------------------------------------------- sections


def encode_outliers(positions, values) -> bytes:
    positions = np.asarray(positions, dtype="<u8")
    values = np.asarray(values, dtype="<f8")
    return struct.pack("<Q", positions.size) + positions.tobytes() + values.tobytes()


def decode_outliers(r: _Reader, limit: int) -> tuple[np.ndarray, np.ndarray]:
    (n,) = r.unpack("Q")
    if n > limit:
        raise CorruptArtifactError("more outliers than values")
    pos = r.array(np.uint64, n).astype(np.int64)
    if n and (pos.max() >= limit or np.any(np.diff(pos) <= 0)):
        raise CorruptArtifactError("outlier positions out of range")
    return pos, r.array(np.float64, n)


def encode_lorenzo(stream: LorenzoStream) -> bytes:
    esc = np.asarray(stream.escape_positions, dtype="<u8")
    return b"".join(
        (
            struct.pack("<d", stream.error_bound),
            encode_labels(stream.labels),
            struct.pack("<Q", esc.size),
            esc.tobytes(),
            np.asarray(stream.escape_labels, dtype="<i8").tobytes(),
            encode_outliers(stream.patch_positions, stream.patch_values),
        )
    )


def decode_lorenzo(data, shape) -> LorenzoStream:
    r = _Reader(data)
    (e,) = r.unpack("d")
    if not (e > 0 and np.isfinite(e)):
        raise CorruptArtifactError("bad Lorenzo error bound")
    count = int(np.prod(shape))
    labels, r.pos = decode_labels(r.data, count, offset=r.pos)
    (n,) = r.unpack("Q")
    if n > count:
        raise CorruptArtifactError("more escapes than values")
    esc = r.array(np.uint64, n).astype(np.int64)
    if n and (esc.max() >= count or np.any(np.diff(esc) <= 0)):
        raise CorruptArtifactError("escape positions out of range")
    esc_labels = r.array(np.int64, n)
    patch_pos, patch_val = decode_outliers(r, count)
    r.done()
    return LorenzoStream(tuple(shape), e, labels, esc, esc_labels, patch_pos, patch_val)


# ---------------------------------------------------------------- container


@dataclass
class CompressedArtifact:
    """Parsed container: header fields plus decoded payload sections.

    ``coarse`` is an int32 label array (methods 0) or a :class:`LorenzoStream`
    (methods 1 and 2). ``level_labels[i]`` holds level ``stop_level + 1 + i``.
    """

    dtype: np.dtype
    method: int
    dims: tuple[int, ...]
    num_levels: int
    stop_level: int
    quant_mode: str
    budget: float
    bin_widths: tuple[float, ...]
    coarse: np.ndarray | LorenzoStream
    level_labels: list[np.ndarray] = field(default_factory=list)
    outlier_positions: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    outlier_values: np.ndarray = field(default_factory=lambda: np.zeros(0, np.float64))


def header_size(ndim: int, num_levels: int, sections: int) -> int:
    return 4 + 4 + 8 * ndim + 3 + 8 + 8 * (num_levels + 1) + 1 + 8 * sections


def write_artifact(art: CompressedArtifact) -> bytes:
    if art.method == METHOD_MULTIGRID:
        coarse = encode_labels(art.coarse)
    else:
        coarse = encode_lorenzo(art.coarse)
    sections = [coarse] + [encode_labels(lab) for lab in art.level_labels]
    sections.append(encode_outliers(art.outlier_positions, art.outlier_values))
    head = bytearray(MAGIC)
    head += struct.pack(
        "<BBBB", VERSION, ELEMENT_CODES[np.dtype(art.dtype)], art.method, len(art.dims)
    )
    head += struct.pack(f"<{len(art.dims)}Q", *art.dims)
    head += struct.pack("<BBBd", art.num_levels, art.stop_level, QUANT_CODES[art.quant_mode], art.budget)
    head += struct.pack(f"<{len(art.bin_widths)}d", *art.bin_widths)
    head += struct.pack("<B", len(sections))
    head += struct.pack(f"<{len(sections)}Q", *(len(s) for s in sections))
    body = bytes(head) + b"".join(sections)
    return body + struct.pack("<I", zlib.crc32(body))


def read_artifact(data: bytes) -> CompressedArtifact:
    data = bytes(data)
    if len(data) < 5 or data[:4] != MAGIC:
        raise NotAnArtifactError("missing MGRX magic")
    if data[4] != VERSION:
        raise UnsupportedVersionError(f"container version {data[4]}, this reader handles {VERSION}")
    if len(data) < 9 or zlib.crc32(data[:-4]) != struct.unpack("<I", data[-4:])[0]:
        raise CorruptArtifactError("checksum mismatch")
    try:
        return _parse(data[:-4])
    except DecodeError:
        raise
    except (ValueError, IndexError, OverflowError, KeyError, MemoryError) as exc:
        raise CorruptArtifactError(f"malformed artifact: {exc}") from exc


def _parse(body: bytes) -> CompressedArtifact:
    from .grid import build_hierarchy

    r = _Reader(body, 5)
    elem, method, ndim = r.unpack("BBB")
    if elem not in ELEMENT_TYPES or method not in (0, 1, 2) or ndim < 1:
        raise CorruptArtifactError("bad header codes")
    dims = tuple(int(d) for d in r.unpack(f"{ndim}Q"))
    levels, stop, quant, budget = r.unpack("BBBd")
    if quant not in QUANT_MODES:
        raise CorruptArtifactError("bad quantization mode")
    h = build_hierarchy(dims, levels)
    if stop > levels:
        raise CorruptArtifactError("stop level above level count")
    widths = r.unpack(f"{levels + 1}d")
    (nsec,) = r.unpack("B")
    if nsec != levels - stop + 2:
        raise CorruptArtifactError("section count does not match levels")
    lengths = r.unpack(f"{nsec}Q")
    if r.pos + sum(lengths) != len(body):
        raise CorruptArtifactError("section lengths do not match payload size")
    secs = []
    for n in lengths:
        secs.append(r.take(n))
    coarse_shape = h.dims(stop)
    if method == METHOD_MULTIGRID:
        coarse, end = decode_labels(secs[0], int(np.prod(coarse_shape)))
        if end != len(secs[0]):
            raise CorruptArtifactError("coarse section length mismatch")
    else:
        coarse = decode_lorenzo(secs[0], coarse_shape)
    level_labels = []
    for i, level in enumerate(range(stop + 1, levels + 1)):
        lab, end = decode_labels(secs[1 + i], h.delta_count(level))
        if end != len(secs[1 + i]):
            raise CorruptArtifactError(f"level {level} section length mismatch")
        level_labels.append(lab)
    out = _Reader(secs[-1])
    pos, val = decode_outliers(out, h.total_count)
    out.done()
    return CompressedArtifact(
        ELEMENT_TYPES[elem], method, dims, levels, stop, QUANT_MODES[quant], budget, widths,
        coarse, level_labels, pos, val,
    )
