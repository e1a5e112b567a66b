"""Exact decision oracle: do these rectangular items fit into this box?

Orthogonal placements with axis-aligned 90-degree rotations. The search
covers all "normal positions" (per-axis subset sums of item edges), which is
sufficient for the yes/no decision: any feasible packing can be pushed toward
the origin until every coordinate is such a sum. Symmetry prunes (mirror
halving for the first item, lexicographic ordering of identical items) cut
the tree without losing completeness.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass
from itertools import permutations
from typing import Sequence

from .errors import ConfigurationError
from .model import Dim3

DEFAULT_NODE_BUDGET = 1_000_000


@dataclass(frozen=True)
class FitQuery:
    items: tuple[Dim3, ...]
    box: Dim3
    node_budget: int = DEFAULT_NODE_BUDGET

    def __post_init__(self):
        if not self.items:
            raise ConfigurationError("fit query needs at least one item")
        if self.node_budget < 1:
            raise ConfigurationError("node budget must be >= 1")
        for dims in (*self.items, self.box):
            if min(dims) <= 0:
                raise ConfigurationError(f"non-positive dimension in {tuple(dims)}")


@dataclass(frozen=True)
class FitVerdict:
    fits: bool
    exhausted: bool = False
    nodes: int = 0


class _BudgetExhausted(Exception):
    pass


class _TierDone(Exception):
    pass


_CORNER_TIER_CAP = 50_000


class _Search:
    def __init__(self, items: list[tuple[int, int, int]], box: tuple[int, int, int], budget: int):
        self.box = box
        self.budget = budget
        self.nodes = 0
        # Nonincreasing volume, ties by sorted dims, so identical items are
        # adjacent and the search order is independent of input permutation.
        self.items = sorted(
            (tuple(sorted(it, reverse=True)) for it in items),
            key=lambda d: (-(d[0] * d[1] * d[2]), tuple(-e for e in d)),
        )
        self.orients = [sorted(set(permutations(it))) for it in self.items]
        # Normal positions: every coordinate reachable by stacking item edges.
        sums = {0}
        limit = max(box)
        for it in self.items:
            sums |= {s + e for s in sums for e in set(it) if s + e < limit}
        self.coords = sorted(sums)
        self.placed: list[tuple[int, int, int, int, int, int]] = []

    def _axis_coords(self, edge: int, box_edge: int, half: bool) -> list[int]:
        hi = (box_edge - edge) // 2 if half else box_edge - edge
        return self.coords[: bisect_right(self.coords, hi)]

    def run(self) -> bool:
        # Tier 1: build packings corner-by-corner, branching over which item
        # is placed next, so supports can precede the items resting on them.
        # A success proves the fit and covers nearly all real instances
        # cheaply; the tier is capped because it cannot prove a non-fit.
        self.tier_cap = min(self.budget, _CORNER_TIER_CAP)
        try:
            if self._corner_search(list(range(len(self.items)))):
                return True
        except _TierDone:
            pass
        self.placed.clear()
        # Tier 2: the exhaustive fixed-order sweep over all normal positions
        # (corner positions first at each level - ordering only, complete).
        self.tier_cap = self.budget
        return self._place(0, None)

    def _corner_search(self, unplaced: list[int]) -> bool:
        if not unplaced:
            return True
        L, W, H = self.box
        cxs = sorted({0} | {p[0] + p[3] for p in self.placed})
        cys = sorted({0} | {p[1] + p[4] for p in self.placed})
        czs = sorted({0} | {p[2] + p[5] for p in self.placed})
        tried_shapes = set()
        for i in unplaced:
            if self.items[i] in tried_shapes:
                continue  # identical items are interchangeable
            tried_shapes.add(self.items[i])
            rest = [j for j in unplaced if j != i]
            for a, b, c in self.orients[i]:
                for z in czs:
                    if z + c > H:
                        continue
                    for y in cys:
                        if y + b > W:
                            continue
                        for x in cxs:
                            if x + a > L:
                                continue
                            self.nodes += 1
                            if self.nodes > self.budget:
                                raise _BudgetExhausted
                            if self.nodes > self.tier_cap:
                                raise _TierDone
                            if self._overlaps(x, y, z, a, b, c):
                                continue
                            self.placed.append((x, y, z, a, b, c))
                            if self._corner_search(rest):
                                return True
                            self.placed.pop()
        return False

    def _place(self, idx: int, prev_pos: tuple[int, int, int] | None) -> bool:
        if idx == len(self.items):
            return True
        same_as_prev = idx > 0 and self.items[idx] == self.items[idx - 1]
        # Mirror halving is only safe when item 0 is not interchangeable
        # with its successor.
        halve = idx == 0 and not (
            len(self.items) > 1 and self.items[0] == self.items[1]
        )
        L, W, H = self.box
        corner = (
            {0} | {p[0] + p[3] for p in self.placed},
            {0} | {p[1] + p[4] for p in self.placed},
            {0} | {p[2] + p[5] for p in self.placed},
        )
        for orient in self.orients[idx]:
            a, b, c = orient
            xs = self._axis_coords(a, L, halve)
            ys = self._axis_coords(b, W, halve)
            zs = self._axis_coords(c, H, halve)
            phases = [
                (
                    sorted(corner[0].intersection(xs)),
                    sorted(corner[1].intersection(ys)),
                    sorted(corner[2].intersection(zs)),
                ),
                (xs, ys, zs),
            ]
            for phase, (pxs, pys, pzs) in enumerate(phases):
                for z in pzs:
                    for y in pys:
                        for x in pxs:
                            if phase and x in corner[0] and y in corner[1] and z in corner[2]:
                                continue  # already tried in the corner phase
                            if same_as_prev and prev_pos is not None and (z, y, x) <= prev_pos:
                                continue
                            self.nodes += 1
                            if self.nodes > self.budget:
                                raise _BudgetExhausted
                            if self.nodes > self.tier_cap:
                                raise _TierDone
                            if self._overlaps(x, y, z, a, b, c):
                                continue
                            self.placed.append((x, y, z, a, b, c))
                            if self._place(idx + 1, (z, y, x)):
                                return True
                            self.placed.pop()
        return False

    def _overlaps(self, x: int, y: int, z: int, a: int, b: int, c: int) -> bool:
        for px, py, pz, pa, pb, pc in self.placed:
            if x < px + pa and px < x + a and y < py + pb and py < y + b \
                    and z < pz + pc and pz < z + c:
                return True
        return False


def _thick_footprint_overflow(items: Sequence[tuple[int, int, int]], box: tuple[int, int, int]) -> bool:
    """Axis-projection bound: items whose every feasible height exceeds half
    the box height pairwise overlap in height, so their smallest footprints
    must fit the plan area side by side. Checked for all three axes."""
    for axis in range(3):
        height = box[axis]
        plan_area = box[(axis + 1) % 3] * box[(axis + 2) % 3]
        needed = 0
        for dims in items:
            feasible = [e for e in dims if e <= height]
            if not feasible or 2 * min(feasible) <= height:
                continue
            volume = dims[0] * dims[1] * dims[2]
            needed += volume // max(feasible)
            if needed > plan_area:
                return True
    return False


def fits(query: FitQuery) -> FitVerdict:
    """Decide whether the query's items pack into its box.

    Budget exhaustion is reported as fits=False with exhausted=True: for
    shipping, an unproven fit must be treated as a non-fit.
    """
    box = tuple(query.box)
    sorted_box = sorted(box, reverse=True)
    total = 0
    for item in query.items:
        dims = sorted(item, reverse=True)
        if any(d > bd for d, bd in zip(dims, sorted_box)):
            return FitVerdict(fits=False)
        total += dims[0] * dims[1] * dims[2]
    if total > query.box.volume:
        return FitVerdict(fits=False)
    if len(query.items) == 1:
        return FitVerdict(fits=True, nodes=1)
    if _thick_footprint_overflow([tuple(it) for it in query.items], box):
        return FitVerdict(fits=False)
    search = _Search([tuple(it) for it in query.items], box, query.node_budget)
    try:
        found = search.run()
    except _BudgetExhausted:
        return FitVerdict(fits=False, exhausted=True, nodes=search.nodes)
    return FitVerdict(fits=found, nodes=search.nodes)


def fits_dims(
    items: Sequence[Dim3], box: Dim3, node_budget: int = DEFAULT_NODE_BUDGET
) -> bool:
    """Convenience wrapper returning only the boolean decision."""
    return fits(FitQuery(items=tuple(items), box=Dim3(*box), node_budget=node_budget)).fits
