"""Analytic Benders sub-problem over the bit-packed fitting matrix.

For a box availability y the sub-problem value decomposes per packing unit:
pick the cheapest available fitting box (pi_p = V(best) - V(p)), and every
fitting box cheaper than the best one contributes a negative dual weight
w_b += V(b) - V(best). fast_dual computes this with word-level scans over
the packed matrix; naive_dual is the dense reference used as a test oracle
and benchmark baseline. The per-(unit, box) duals are never materialized:
cuts only need the per-box column sums.

Aggregate volume sums are assumed to stay below 2**63 (true for any
physical millimeter dataset).
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass
from typing import IO, Iterable

import numpy as np

from .errors import ConfigurationError, InfeasibleSubproblemError
from .fitmatrix import BitMatrix
from .model import RelTable

if sys.byteorder != "little":  # pragma: no cover - word/byte views assume LE
    raise ImportError("boxopt.subproblem requires a little-endian platform")

_ROW_BLOCK = 256
_CHUNK_WORDS = 8

# bit j of byte value v, as an int64 matrix (256 x 8)
_BYTE_BIT_LUT = ((np.arange(256)[:, None] >> np.arange(8)[None, :]) & 1).astype(np.int64)
_BYTE_BIT_LUT_F = _BYTE_BIT_LUT.astype(np.float64)


@dataclass(frozen=True)
class Availability:
    """Which boxes are selected, packed like one BitMatrix row (LSB first)."""

    bits: np.ndarray
    B: int

    @classmethod
    def from_box_ids(cls, ids: Iterable[int], B: int) -> "Availability":
        stride = (B + 63) // 64
        bits = np.zeros(stride, dtype=np.uint64)
        for b in ids:
            if not 0 <= b < B:
                raise IndexError(f"box id {b} out of range for B={B}")
            bits[b >> 6] |= np.uint64(1 << (b & 63))
        return cls(bits=bits, B=B)

    def get(self, b: int) -> bool:
        if not 0 <= b < self.B:
            raise IndexError(f"box id {b} out of range for B={self.B}")
        return bool((int(self.bits[b >> 6]) >> (b & 63)) & 1)

    def ids(self) -> list[int]:
        out = []
        for wi, word in enumerate(self.bits):
            word = int(word)
            base = wi << 6
            while word:
                low = word & -word
                out.append(base + low.bit_length() - 1)
                word ^= low
        return out

    @property
    def popcount(self) -> int:
        return int(np.bitwise_count(self.bits).sum())


@dataclass(frozen=True)
class CartonSelection:
    """The master's carton choice: a set of selected carton ids."""

    selected: frozenset[int]
    K: int

    def __post_init__(self):
        bad = [k for k in self.selected if not 0 <= k < self.K]
        if bad:
            raise ConfigurationError(f"carton ids out of range: {sorted(bad)}")

    @property
    def popcount(self) -> int:
        return len(self.selected)


@dataclass
class DualSolution:
    """Analytic dual optimum at one availability y.

    f = sum(pi) is the sub-problem value; w_boxes[b] = sum_p mu_pb <= 0 are
    the per-box cut coefficients; best_box[p] is the cheapest available
    fitting box per unit (the greedy primal assignment).
    """

    f: int
    pi: np.ndarray
    w_boxes: np.ndarray
    best_box: np.ndarray


@dataclass(frozen=True)
class Cut:
    """Optimality cut theta >= s + w' v, over cartons or over boxes."""

    s: int
    w: np.ndarray
    iteration: int
    space: str = "cartons"

    def value_at(self, selected: Iterable[int]) -> int:
        return self.s + int(sum(int(self.w[i]) for i in selected))

    def key(self) -> tuple:
        return (self.s, self.space, self.w.tobytes())


class CutPool:
    """Ordered cut collection; exact duplicates are not added."""

    def __init__(self, cuts: Iterable[Cut] = ()):
        self.cuts: list[Cut] = []
        self._seen: set[tuple] = set()
        for cut in cuts:
            self.add(cut)

    def add(self, cut: Cut) -> bool:
        key = cut.key()
        if key in self._seen:
            return False
        self._seen.add(key)
        self.cuts.append(cut)
        return True

    def __len__(self) -> int:
        return len(self.cuts)

    def __iter__(self):
        return iter(self.cuts)

    def dump_jsonl(self, sink: IO[str]) -> None:
        for cut in self.cuts:
            coeffs = {str(i): int(v) for i, v in enumerate(cut.w) if v}
            sink.write(json.dumps(
                {"iter": cut.iteration, "s": int(cut.s), "w": coeffs, "space": cut.space},
                separators=(",", ":"),
            ) + "\n")

    @classmethod
    def load_jsonl(cls, source: Iterable[str], size: int, space: str = "cartons") -> "CutPool":
        pool = cls()
        for line in source:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            w = np.zeros(size, dtype=np.int64)
            for idx, val in rec["w"].items():
                w[int(idx)] = int(val)
            pool.add(Cut(s=int(rec["s"]), w=w, iteration=int(rec["iter"]),
                         space=rec.get("space", space)))
        return pool


def expand_cartons_to_boxes(z: CartonSelection, rel: RelTable, B: int) -> Availability:
    """y_b = 1 - prod_(k,b) (1 - z_k): a box is available iff some selected
    carton folds into it."""
    ids: set[int] = set()
    for k in z.selected:
        ids.update(rel.boxes_of(k))
    return Availability.from_box_ids(ids, B)


def _check_inputs(F: BitMatrix, box_volumes: np.ndarray, unit_volumes: np.ndarray,
                  y: Availability) -> tuple[np.ndarray, np.ndarray]:
    box_volumes = np.asarray(box_volumes, dtype=np.int64)
    unit_volumes = np.asarray(unit_volumes, dtype=np.int64)
    if box_volumes.shape != (F.B,) or unit_volumes.shape != (F.P,):
        raise ConfigurationError("volume vectors do not match the matrix shape")
    if F.B and np.any(np.diff(box_volumes) < 0):
        raise ConfigurationError("boxes must be ordered by nondecreasing volume")
    if y.B != F.B:
        raise ConfigurationError(f"availability over {y.B} boxes, matrix has {F.B}")
    return box_volumes, unit_volumes


def fast_dual(
    F: BitMatrix,
    box_volumes: np.ndarray,
    unit_volumes: np.ndarray,
    y: Availability,
) -> DualSolution:
    """Word-scan dual solve: per unit, the first nonzero word of (row AND y)
    and its lowest set bit give the best box; the row bits strictly below the
    best box are then accumulated into per-box weights. Processes rows in
    blocks so scratch memory stays small regardless of P."""
    box_volumes, unit_volumes = _check_inputs(F, box_volumes, unit_volumes, y)
    P, B, stride = F.P, F.B, F.stride
    words = F.words
    ybits = y.bits

    best = np.zeros(P, dtype=np.int64)
    first_word = np.zeros(P, dtype=np.int64)
    below_mask = np.zeros(P, dtype=np.uint64)

    for r0 in range(0, P, _ROW_BLOCK):
        r1 = min(r0 + _ROW_BLOCK, P)
        avail = words[r0:r1] & ybits
        nz = avail != 0
        has_fit = nz.any(axis=1)
        if not has_fit.all():
            raise InfeasibleSubproblemError(r0 + int(np.argmin(has_fit)))
        first = nz.argmax(axis=1)
        w0 = avail[np.arange(r1 - r0), first]
        lowbit = w0 & (~w0 + np.uint64(1))
        # exact count-trailing-zeros: frexp exponent of an isolated power of two
        ctz = (np.frexp(lowbit.astype(np.float64))[1] - 1).astype(np.int64)
        best[r0:r1] = (first << 6) + ctz
        first_word[r0:r1] = first
        below_mask[r0:r1] = (np.uint64(1) << ctz.astype(np.uint64)) - np.uint64(1)

    pi = box_volumes[best] - unit_volumes
    best_vol = box_volumes[best]
    vhi = (best_vol >> 32).astype(np.float64)
    vlo = (best_vol & 0xFFFFFFFF).astype(np.float64)

    padded_cols = stride * 64
    cnt = np.zeros(padded_cols, dtype=np.int64)
    weighted = np.zeros(padded_cols, dtype=np.int64)

    for c0 in range(0, stride, _CHUNK_WORDS):
        c1 = min(c0 + _CHUNK_WORDS, stride)
        n_bytes = (c1 - c0) * 8
        hist = np.zeros((n_bytes, 256), dtype=np.int64)
        hist_hi = np.zeros((n_bytes, 256), dtype=np.float64)
        hist_lo = np.zeros((n_bytes, 256), dtype=np.float64)
        for r0 in range(0, P, _ROW_BLOCK):
            r1 = min(r0 + _ROW_BLOCK, P)
            fw = first_word[r0:r1]
            cols = words[r0:r1, c0:c1]
            masked = np.where((np.arange(c0, c1)[None, :] < fw[:, None]), cols, np.uint64(0))
            in_chunk = (fw >= c0) & (fw < c1)
            rows_in = np.nonzero(in_chunk)[0]
            if rows_in.size:
                local = fw[rows_in] - c0
                masked[rows_in, local] = cols[rows_in, local] & below_mask[r0:r1][rows_in]
            col_bytes = np.ascontiguousarray(masked).view(np.uint8).T.copy()
            for bc in range(n_bytes):
                row = col_bytes[bc]
                hist[bc] += np.bincount(row, minlength=256)
                hist_hi[bc] += np.bincount(row, weights=vhi[r0:r1], minlength=256)
                hist_lo[bc] += np.bincount(row, weights=vlo[r0:r1], minlength=256)
        lo_col = c0 * 64
        hi_col = lo_col + n_bytes * 8
        cnt[lo_col:hi_col] = (hist @ _BYTE_BIT_LUT).reshape(-1)
        s_hi = (hist_hi @ _BYTE_BIT_LUT_F).reshape(-1)
        s_lo = (hist_lo @ _BYTE_BIT_LUT_F).reshape(-1)
        weighted[lo_col:hi_col] = (s_hi.astype(np.int64) << 32) + s_lo.astype(np.int64)

    padded_vols = np.zeros(padded_cols, dtype=np.int64)
    padded_vols[:B] = box_volumes
    w_boxes = (padded_vols * cnt - weighted)[:B]
    return DualSolution(f=int(pi.sum()), pi=pi, w_boxes=w_boxes, best_box=best)


def naive_dual(
    F: BitMatrix,
    box_volumes: np.ndarray,
    unit_volumes: np.ndarray,
    y: Availability,
) -> DualSolution:
    """Dense reference: scan every column of every row, no bit tricks.

    Exists as the test oracle and benchmark baseline for fast_dual.
    """
    box_volumes, unit_volumes = _check_inputs(F, box_volumes, unit_volumes, y)
    P, B = F.P, F.B
    vols = box_volumes.tolist()
    avail = [y.get(b) for b in range(B)]
    pi = np.zeros(P, dtype=np.int64)
    w_boxes = np.zeros(B, dtype=np.int64)
    best_box = np.zeros(P, dtype=np.int64)
    for p in range(P):
        row_words = [int(w) for w in F.words[p]]
        fit = [b for b in range(B) if (row_words[b >> 6] >> (b & 63)) & 1]
        best = -1
        for b in fit:
            if avail[b] and (best < 0 or vols[b] < vols[best]):
                best = b
        if best < 0:
            raise InfeasibleSubproblemError(p)
        best_box[p] = best
        pi[p] = vols[best] - int(unit_volumes[p])
        vbest = vols[best]
        for b in fit:
            mu = vols[b] - vbest
            if mu < 0:
                w_boxes[b] += mu
    return DualSolution(f=int(pi.sum()), pi=pi, w_boxes=w_boxes, best_box=best_box)


def transform_cut(
    d: DualSolution, z: CartonSelection, rel: RelTable, iteration: int = 0
) -> Cut:
    """Chain-rule a box-space dual into a carton-space cut.

    w_k sums w_boxes over the cartons' boxes, zeroing any box that another
    selected carton also produces (the Jacobian of the carton-to-box
    expansion at binary z). s makes the cut tight at the generating z.
    """
    sel_count: dict[int, int] = {}
    for k in z.selected:
        for b in rel.boxes_of(k):
            sel_count[b] = sel_count.get(b, 0) + 1
    w = np.zeros(z.K, dtype=np.int64)
    for k in range(z.K):
        selected_k = k in z.selected
        total = 0
        for b in rel.boxes_of(k):
            others = sel_count.get(b, 0) - (1 if selected_k else 0)
            if others == 0:
                total += int(d.w_boxes[b])
        w[k] = total
    s = d.f - int(sum(int(w[k]) for k in z.selected))
    return Cut(s=s, w=w, iteration=iteration, space="cartons")


def make_box_cut(d: DualSolution, y: Availability, iteration: int = 0) -> Cut:
    """Box-space optimality cut theta >= sum(pi) + w' y; the intercept equals
    f because the duals vanish on selected boxes."""
    return Cut(s=int(d.pi.sum()), w=d.w_boxes.copy(), iteration=iteration, space="boxes")
