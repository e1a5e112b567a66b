"""Bit-packed fitting matrix F (units x boxes) and the exhaustive evaluator.

Layout: the bit for (p, b) lives in 64-bit word p * stride + b // 64 at bit
position b % 64, least-significant-bit first. Padding bits past column B - 1
are always zero. The file format is little-endian and bit-exact:

    magic "BOXF" | version u32 = 1 | P u64 | B u64 | stride u64
    | P * stride little-endian u64 words
"""

from __future__ import annotations

import struct
import time
from dataclasses import dataclass
from typing import BinaryIO, Callable, Iterator, Sequence

import numpy as np

from .binpack import FitVerdict, fits_dims
from .errors import FormatError
from .model import Box, Dim3, PackingUnit

_MAGIC = b"BOXF"
_VERSION = 1
_HEADER = struct.Struct("<4sIQQQ")

FitOracle = Callable[[Sequence[Dim3], Dim3], "FitVerdict | bool"]


@dataclass
class EvalStats:
    oracle_calls: int = 0
    exhausted_calls: int = 0
    wall_seconds: float = 0.0


class BitMatrix:
    """P x B boolean matrix packed 64 entries per word (1 bit per entry)."""

    def __init__(self, P: int, B: int):
        if P < 0 or B < 0:
            raise ValueError("matrix dimensions must be nonnegative")
        self.P = P
        self.B = B
        self.stride = (B + 63) // 64
        self.words = np.zeros((P, self.stride), dtype=np.uint64)

    def _check(self, p: int, b: int) -> None:
        if not (0 <= p < self.P and 0 <= b < self.B):
            raise IndexError(f"({p}, {b}) out of range for {self.P}x{self.B} matrix")

    def get(self, p: int, b: int) -> bool:
        self._check(p, b)
        return bool((int(self.words[p, b >> 6]) >> (b & 63)) & 1)

    def set(self, p: int, b: int, value: bool = True) -> None:
        self._check(p, b)
        if value:
            self.words[p, b >> 6] |= np.uint64(1 << (b & 63))
        else:
            self.words[p, b >> 6] &= np.uint64(~(1 << (b & 63)) & 0xFFFFFFFFFFFFFFFF)

    def set_row_from_bools(self, p: int, bools: np.ndarray) -> None:
        """Overwrite row p from a length-B boolean vector."""
        if bools.shape != (self.B,):
            raise ValueError(f"expected shape ({self.B},), got {bools.shape}")
        packed = np.packbits(bools.astype(np.uint8), bitorder="little")
        padded = np.zeros(self.stride * 8, dtype=np.uint8)
        padded[: packed.size] = packed
        self.words[p] = padded.view(np.uint64)

    def row_bools(self, p: int) -> np.ndarray:
        """Row p as a length-B boolean vector."""
        as_bytes = self.words[p].copy().view(np.uint8)
        return np.unpackbits(as_bytes, bitorder="little")[: self.B].astype(bool)

    def iter_row_bits(self, p: int) -> Iterator[int]:
        """Yield the set column indices of row p in increasing order."""
        for wi in range(self.stride):
            word = int(self.words[p, wi])
            base = wi << 6
            while word:
                low = word & -word
                yield base + low.bit_length() - 1
                word ^= low

    def to_bool_array(self) -> np.ndarray:
        as_bytes = self.words.copy().view(np.uint8)
        return np.unpackbits(as_bytes, axis=1, bitorder="little")[:, : self.B].astype(bool)

    @classmethod
    def from_bool_array(cls, bools: np.ndarray) -> "BitMatrix":
        bools = np.asarray(bools, dtype=bool)
        m = cls(*bools.shape)
        for p in range(m.P):
            m.set_row_from_bools(p, bools[p])
        return m

    @property
    def nbytes(self) -> int:
        return self.words.nbytes

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, BitMatrix)
            and self.P == other.P
            and self.B == other.B
            and bool(np.array_equal(self.words, other.words))
        )


def serialize(m: BitMatrix, sink: BinaryIO) -> None:
    sink.write(_HEADER.pack(_MAGIC, _VERSION, m.P, m.B, m.stride))
    sink.write(np.ascontiguousarray(m.words, dtype="<u8").tobytes())


def deserialize(source: BinaryIO) -> BitMatrix:
    header = source.read(_HEADER.size)
    if len(header) < _HEADER.size:
        raise FormatError("truncated header", offset=len(header))
    magic, version, P, B, stride = _HEADER.unpack(header)
    if magic != _MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {_MAGIC!r}", offset=0)
    if version != _VERSION:
        raise FormatError(f"unsupported version {version}", offset=4)
    if stride != (B + 63) // 64:
        raise FormatError(f"stride {stride} inconsistent with B={B}", offset=24)
    expected = P * stride * 8
    payload = source.read(expected)
    if len(payload) < expected:
        raise FormatError(
            f"truncated payload: expected {expected} bytes, got {len(payload)}",
            offset=_HEADER.size + len(payload),
        )
    m = BitMatrix(P, B)
    if expected:
        words = np.frombuffer(payload, dtype="<u8").astype(np.uint64).reshape(P, stride)
        pad_bits = stride * 64 - B
        if pad_bits:
            live = np.uint64((1 << (64 - pad_bits)) - 1)
            if np.any(words[:, -1] & ~live):
                raise FormatError("nonzero padding bits in final word column", offset=_HEADER.size)
        m.words = words
    return m


def _call_oracle(oracle: FitOracle, items: Sequence[Dim3], dims: Dim3, stats: EvalStats) -> bool:
    verdict = oracle(items, dims)
    stats.oracle_calls += 1
    if isinstance(verdict, FitVerdict):
        if verdict.exhausted:
            stats.exhausted_calls += 1
        return verdict.fits
    return bool(verdict)


def evaluate_exhaustive(
    units: Sequence[PackingUnit],
    boxes: Sequence[Box],
    oracle: FitOracle | None = None,
) -> tuple[BitMatrix, EvalStats]:
    """Fill F by calling the oracle on every (unit, box) pair: P * B calls."""
    oracle = oracle or fits_dims
    stats = EvalStats()
    start = time.perf_counter()
    m = BitMatrix(len(units), len(boxes))
    for unit in units:
        items = unit.item_dims
        for box in boxes:
            if _call_oracle(oracle, items, box.dims, stats):
                m.set(unit.id, box.id)
    stats.wall_seconds = time.perf_counter() - start
    return m, stats
