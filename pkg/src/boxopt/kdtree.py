"""Adaptive KD-tree evaluation of a monotone fit predicate over a box grid.

A region of grid points is resolved by probing its corners: if the smallest
corner fits, everything fits; if the largest fails, nothing does. Otherwise a
binary search along the region diagonal finds the threshold point s, the
all-fit block [s, hi] and all-unfit block [lo, s-1] are marked wholesale, and
the six mixed octants are partitioned recursively. Small regions are
evaluated point by point. Verdicts are memoized per unit so shared corners
cost one oracle call.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from itertools import product
from typing import Callable, Sequence

import numpy as np

from .binpack import FitVerdict
from .errors import ConfigurationError, NonMonotoneOracleError
from .fitmatrix import BitMatrix, EvalStats, FitOracle
from .model import Box, Dim3, PackingUnit

Point = tuple[int, int, int]
PointOracle = Callable[[Point], bool]


@dataclass(frozen=True)
class Region:
    """Inclusive grid-coordinate corners, lo <= hi componentwise."""

    lo: Point
    hi: Point

    def __post_init__(self):
        if any(l > h for l, h in zip(self.lo, self.hi)):
            raise ConfigurationError(f"region lo {self.lo} exceeds hi {self.hi}")

    @property
    def extents(self) -> Point:
        return tuple(h - l + 1 for l, h in zip(self.lo, self.hi))

    @property
    def point_count(self) -> int:
        el, ew, eh = self.extents
        return el * ew * eh


@dataclass(frozen=True)
class KdConfig:
    leaf_threshold: int = 30

    def __post_init__(self):
        if self.leaf_threshold < 1:
            raise ConfigurationError("leaf_threshold must be >= 1")


def diag_point(region: Region, t: int) -> Point:
    """The t-th point on the discrete diagonal from region.lo to region.hi.

    Component d moves proportionally: lo_d + floor(t * (hi_d - lo_d) / n)
    where n is the largest extent. Consecutive points differ by at most one
    per component.
    """
    spans = tuple(h - l for l, h in zip(region.lo, region.hi))
    n = max(spans)
    if n == 0:
        if t != 0:
            raise IndexError(f"t={t} out of range for a single-point region")
        return region.lo
    if not 0 <= t <= n:
        raise IndexError(f"t={t} outside [0, {n}]")
    return tuple(l + t * s // n for l, s in zip(region.lo, spans))


@dataclass(frozen=True)
class GridSpec:
    """Maps grid coordinates to physical box dimensions (mm)."""

    origin: Dim3
    step: int
    shape: Point

    def __post_init__(self):
        if self.step <= 0:
            raise ConfigurationError(f"grid step must be positive, got {self.step}")
        if min(self.shape) < 1:
            raise ConfigurationError(f"grid shape must be positive, got {self.shape}")

    @property
    def region(self) -> Region:
        return Region((0, 0, 0), tuple(s - 1 for s in self.shape))

    def point_dims(self, point: Point) -> Dim3:
        return Dim3(*(o + c * self.step for o, c in zip(self.origin, point)))

    def coord_of(self, dims: Dim3) -> Point:
        coord = []
        for o, d, s in zip(self.origin, dims, self.shape):
            offset = d - o
            c, rem = divmod(offset, self.step)
            if rem or not 0 <= c < s:
                raise ConfigurationError(f"dims {tuple(dims)} are not on the grid")
            coord.append(c)
        return tuple(coord)

    @classmethod
    def from_boxes(cls, boxes: Sequence[Box], step: int | None = None) -> "GridSpec":
        """Infer the bounding grid of a box list; step defaults to the gcd
        of coordinate offsets."""
        if not boxes:
            raise ConfigurationError("cannot infer a grid from an empty box list")
        los = tuple(min(box.dims[d] for box in boxes) for d in range(3))
        his = tuple(max(box.dims[d] for box in boxes) for d in range(3))
        if step is None:
            step = 0
            for box in boxes:
                for d in range(3):
                    step = math.gcd(step, box.dims[d] - los[d])
            step = step or 1
        shape = tuple((h - l) // step + 1 for l, h in zip(los, his))
        grid = cls(origin=Dim3(*los), step=step, shape=shape)
        for box in boxes:
            grid.coord_of(box.dims)
        return grid


class _UnitEvaluator:
    def __init__(self, oracle: PointOracle, region: Region, cfg: KdConfig):
        self.oracle = oracle
        self.base = region.lo
        self.cfg = cfg
        self.bits = np.zeros(region.extents, dtype=bool)
        self.memo: dict[Point, bool] = {}
        self.stats = EvalStats()

    def query(self, point: Point) -> bool:
        cached = self.memo.get(point)
        if cached is not None:
            return cached
        verdict = self.oracle(point)
        if isinstance(verdict, FitVerdict):
            if verdict.exhausted:
                self.stats.exhausted_calls += 1
            verdict = verdict.fits
        verdict = bool(verdict)
        self.stats.oracle_calls += 1
        self.memo[point] = verdict
        return verdict

    def mark(self, lo: Point, hi: Point, value: bool) -> None:
        sl = tuple(
            slice(l - b, h - b + 1) for l, h, b in zip(lo, hi, self.base)
        )
        self.bits[sl] = value

    def evaluate(self, region: Region) -> None:
        lo, hi = region.lo, region.hi
        if self.query(lo):
            self.mark(lo, hi, True)
            return
        if not self.query(hi):
            self.mark(lo, hi, False)
            return
        if region.point_count <= self.cfg.leaf_threshold:
            self._evaluate_leaf(region)
            return
        n = max(h - l for l, h in zip(lo, hi))
        t_lo, t_hi = 0, n
        while t_hi - t_lo > 1:
            mid = (t_lo + t_hi) // 2
            if self.query(diag_point(region, mid)):
                t_hi = mid
            else:
                t_lo = mid
        s = diag_point(region, t_hi)
        self.mark(s, hi, True)
        if all(sd > ld for sd, ld in zip(s, lo)):
            self.mark(lo, tuple(sd - 1 for sd in s), False)
        for mask in product((0, 1), repeat=3):
            if mask == (0, 0, 0) or mask == (1, 1, 1):
                continue
            oct_lo, oct_hi, empty = [], [], False
            for d, high_part in enumerate(mask):
                if high_part:
                    oct_lo.append(s[d])
                    oct_hi.append(hi[d])
                else:
                    if s[d] == lo[d]:
                        empty = True
                        break
                    oct_lo.append(lo[d])
                    oct_hi.append(s[d] - 1)
            if not empty:
                self.evaluate(Region(tuple(oct_lo), tuple(oct_hi)))

    def _evaluate_leaf(self, region: Region) -> None:
        verdicts: list[tuple[Point, bool]] = []
        for point in product(*(
            range(l, h + 1) for l, h in zip(region.lo, region.hi)
        )):
            value = self.query(point)
            self.mark(point, point, value)
            verdicts.append((point, value))
        fit_points = [pt for pt, v in verdicts if v]
        unfit_points = [pt for pt, v in verdicts if not v]
        for fp in fit_points:
            for up in unfit_points:
                if all(f <= u for f, u in zip(fp, up)):
                    raise NonMonotoneOracleError(fp, up)


def evaluate_unit(
    oracle: PointOracle, region: Region, cfg: KdConfig | None = None
) -> tuple[np.ndarray, EvalStats]:
    """KD-tree evaluation of one unit's fit predicate over a grid region.

    The oracle maps a grid coordinate to a fit verdict and must be monotone
    (fits at p implies fits at every q >= p); a violation observed during
    leaf evaluation raises NonMonotoneOracleError naming both points.
    Returns a boolean array over the region's extent; entries equal direct
    oracle evaluation at every point.
    """
    cfg = cfg or KdConfig()
    start = time.perf_counter()
    ev = _UnitEvaluator(oracle, region, cfg)
    ev.evaluate(region)
    ev.stats.wall_seconds = time.perf_counter() - start
    return ev.bits, ev.stats


def evaluate_all(
    units: Sequence[PackingUnit],
    boxes: Sequence[Box],
    oracle: FitOracle | None = None,
    cfg: KdConfig | None = None,
    grid: GridSpec | None = None,
    threads: int = 1,
) -> tuple[BitMatrix, EvalStats]:
    """Fill the fitting matrix one unit at a time via KD-tree evaluation.

    The tree runs over the full rectangular grid spanned by the boxes, then
    the verdicts are projected onto the actual (l >= w >= h) box list.
    """
    if oracle is None:
        from .binpack import fits_dims

        oracle = fits_dims
    cfg = cfg or KdConfig()
    grid = grid or GridSpec.from_boxes(boxes)
    coords = np.array([grid.coord_of(box.dims) for box in boxes])
    m = BitMatrix(len(units), len(boxes))
    total = EvalStats()
    start = time.perf_counter()

    def _one(unit: PackingUnit) -> tuple[int, np.ndarray, EvalStats]:
        items = unit.item_dims
        bits, stats = evaluate_unit(
            lambda pt: oracle(items, grid.point_dims(pt)), grid.region, cfg
        )
        return unit.id, bits[coords[:, 0], coords[:, 1], coords[:, 2]], stats

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_one, units))
    else:
        results = [_one(u) for u in units]
    for uid, row, stats in results:
        m.set_row_from_bools(uid, row)
        total.oracle_calls += stats.oracle_calls
        total.exhausted_calls += stats.exhausted_calls
    total.wall_seconds = time.perf_counter() - start
    return m, total


def predicted_worst_case_evals(n: int) -> int:
    """Worst-case oracle calls on an n^3 grid per the split recurrence
    T(1) = 1, T(n) = log2(n) + 6 T(n / 2); n must be a power of two."""
    if n < 1 or n & (n - 1):
        raise ValueError(f"n must be a positive power of two, got {n}")
    value = 1
    for k in range(1, n.bit_length()):
        value = k + 6 * value
    return value
