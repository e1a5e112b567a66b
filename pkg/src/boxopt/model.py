"""Domain types and universe generation: boxes, cartons, packing units, REL.

All geometry is integer millimeters and all volumes are exact 64-bit integer
mm^3, so objective arithmetic downstream is exact.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, NamedTuple, Sequence, TextIO

from .errors import ConfigurationError, ParseError


class Dim3(NamedTuple):
    """Axis-aligned dimensions in integer millimeters, all strictly positive."""

    l: int
    w: int
    h: int

    @property
    def volume(self) -> int:
        return self.l * self.w * self.h

    def validate(self) -> "Dim3":
        if min(self) <= 0:
            raise ConfigurationError(f"dimensions must be positive: {self}")
        return self


def parse_dim3(text: str) -> Dim3:
    """Parse 'LxWxH' (mm) as used on the command line."""
    parts = text.lower().split("x")
    if len(parts) != 3:
        raise ConfigurationError(f"expected LxWxH, got {text!r}")
    try:
        return Dim3(*(int(p) for p in parts)).validate()
    except ValueError:
        raise ConfigurationError(f"expected integer dimensions, got {text!r}") from None


@dataclass(frozen=True)
class Box:
    """A candidate shipping box. Ids are dense and sorted by volume.

    Invariant: dims.l >= dims.w >= dims.h (symmetry breaking), and for any
    two boxes i < j, volume(i) <= volume(j) with ties broken lexicographically
    by (l, w, h). Downstream bit scans rely on this ordering.
    """

    id: int
    dims: Dim3

    @property
    def volume(self) -> int:
        return self.dims.volume


@dataclass(frozen=True)
class Item:
    dims: Dim3


@dataclass(frozen=True)
class PackingUnit:
    """One order's set of rectangular items shipped together in one box."""

    id: int
    items: tuple[Item, ...]
    external_id: str = ""

    def __post_init__(self):
        if not self.items:
            raise ConfigurationError(f"packing unit {self.id} has no items")

    @property
    def volume(self) -> int:
        return sum(item.dims.volume for item in self.items)

    @property
    def item_dims(self) -> list[Dim3]:
        return [item.dims for item in self.items]


@dataclass(frozen=True)
class Carton:
    """A flat blank folded to its tallest box, with pre-scored crease heights.

    Each crease height yields one box sharing the carton's (l, w) footprint.
    The carton's own height is always a crease height.
    """

    id: int
    dims: Dim3
    crease_heights: tuple[int, ...]

    def __post_init__(self):
        if self.dims.h not in self.crease_heights:
            raise ConfigurationError(
                f"carton {self.id}: own height {self.dims.h} missing from creases"
            )
        if list(self.crease_heights) != sorted(set(self.crease_heights)):
            raise ConfigurationError(f"carton {self.id}: creases must be sorted and distinct")

    @property
    def volume(self) -> int:
        return self.dims.volume


class RelTable:
    """The carton -> box relation: which boxes each carton can be folded into."""

    def __init__(self, pairs: Iterable[tuple[int, int]]):
        self.pairs: list[tuple[int, int]] = list(pairs)
        if len(set(self.pairs)) != len(self.pairs):
            raise ConfigurationError("REL table contains duplicate pairs")
        self._boxes_of: dict[int, list[int]] = {}
        self._cartons_of: dict[int, list[int]] = {}
        for k, b in self.pairs:
            self._boxes_of.setdefault(k, []).append(b)
            self._cartons_of.setdefault(b, []).append(k)
        for v in self._boxes_of.values():
            v.sort()
        for v in self._cartons_of.values():
            v.sort()

    def boxes_of(self, carton_id: int) -> list[int]:
        return self._boxes_of.get(carton_id, [])

    def cartons_of(self, box_id: int) -> list[int]:
        return self._cartons_of.get(box_id, [])

    @property
    def carton_ids(self) -> list[int]:
        return sorted(self._boxes_of)

    @property
    def box_ids(self) -> list[int]:
        return sorted(self._cartons_of)

    def __len__(self) -> int:
        return len(self.pairs)

    def __eq__(self, other) -> bool:
        return isinstance(other, RelTable) and sorted(self.pairs) == sorted(other.pairs)


@dataclass(frozen=True)
class CreaseRule:
    """Parameterized crease-line rule.

    For a box of height h the candidate crease heights are floor(h * q) for
    each fraction q, snapped down to the height grid (min_height + k * step).
    Candidates below min_height or without a matching box are dropped, except
    the q=1 crease (the box's own height), which always survives.
    """

    fractions: tuple[Fraction, ...] = (
        Fraction(1),
        Fraction(3, 4),
        Fraction(1, 2),
        Fraction(1, 4),
    )
    min_height: int = 1
    step: int = 1

    @property
    def max_creases(self) -> int:
        return len(self.fractions)


@dataclass
class ProblemConfig:
    """Solver-facing configuration for one optimization run."""

    M: int
    fixed_boxes: frozenset[int] = frozenset()
    backend: str = "builtin"
    solver_cmd: str = ""
    tol: float = 1e-6
    max_iter: int = 100
    time_limit: float | None = None
    direct_cap: int = 100_000
    enumeration_cap: int = 1_000_000

    def __post_init__(self):
        if self.M < 1:
            raise ConfigurationError(f"carton budget M must be >= 1, got {self.M}")

    def with_largest_box(self, num_boxes: int) -> "ProblemConfig":
        """Return a copy whose fixed set always contains the largest box id."""
        fixed = frozenset(self.fixed_boxes) | {num_boxes - 1}
        bad = [b for b in fixed if not 0 <= b < num_boxes]
        if bad:
            raise ConfigurationError(f"fixed box ids out of range: {bad}")
        return ProblemConfig(
            M=self.M, fixed_boxes=fixed, backend=self.backend,
            solver_cmd=self.solver_cmd, tol=self.tol, max_iter=self.max_iter,
            time_limit=self.time_limit, direct_cap=self.direct_cap,
            enumeration_cap=self.enumeration_cap,
        )


def generate_box_grid(min_dims: Dim3, max_dims: Dim3, step: int) -> list[Box]:
    """Enumerate every grid box with l >= w >= h, ids in volume order."""
    min_dims = Dim3(*min_dims).validate()
    max_dims = Dim3(*max_dims).validate()
    if step <= 0:
        raise ConfigurationError(f"grid step must be positive, got {step}")
    for lo, hi in zip(min_dims, max_dims):
        if lo > hi:
            raise ConfigurationError(f"grid min {min_dims} exceeds max {max_dims}")
        if (hi - lo) % step != 0:
            raise ConfigurationError(
                f"grid span {hi - lo} not divisible by step {step}"
            )
    dims_list = [
        Dim3(l, w, h)
        for l in range(min_dims.l, max_dims.l + 1, step)
        for w in range(min_dims.w, max_dims.w + 1, step)
        if l >= w
        for h in range(min_dims.h, max_dims.h + 1, step)
        if w >= h
    ]
    dims_list.sort(key=lambda d: (d.volume, d))
    return [Box(id=i, dims=d) for i, d in enumerate(dims_list)]


def _snap_down(value: int, min_height: int, step: int) -> int | None:
    """Largest grid height <= value, or None if below the grid minimum."""
    if value < min_height:
        return None
    return min_height + (value - min_height) // step * step


def derive_cartons(
    boxes: Sequence[Box], rule: CreaseRule | None = None
) -> tuple[list[Carton], RelTable]:
    """Derive the carton universe and REL from boxes under a crease rule.

    A candidate carton per box gets crease heights from the rule's fractions;
    a candidate is dropped when another candidate with the same footprint has
    a strict superset of its crease heights (covered by a bigger carton).
    """
    if not boxes:
        raise ConfigurationError("cannot derive cartons from an empty box list")
    rule = rule or CreaseRule()
    by_dims = {box.dims: box.id for box in boxes}

    candidates: dict[tuple[int, int], list[tuple[Dim3, frozenset[int]]]] = {}
    for box in boxes:
        l, w, h = box.dims
        heights = {h}
        for q in rule.fractions:
            if q == 1:
                continue
            snapped = _snap_down(int(h * q), rule.min_height, rule.step)
            if snapped is None:
                continue
            if Dim3(l, w, snapped) not in by_dims:
                continue
            heights.add(snapped)
        candidates.setdefault((l, w), []).append((box.dims, frozenset(heights)))

    cartons: list[tuple[Dim3, tuple[int, ...]]] = []
    for footprint, cands in candidates.items():
        for dims, heights in cands:
            covered = any(
                heights < other_heights for _, other_heights in cands
            )
            if not covered:
                cartons.append((dims, tuple(sorted(heights))))

    cartons.sort(key=lambda c: (c[0].volume, c[0]))
    out = [Carton(id=i, dims=d, crease_heights=hs) for i, (d, hs) in enumerate(cartons)]
    pairs = [
        (carton.id, by_dims[Dim3(carton.dims.l, carton.dims.w, h)])
        for carton in out
        for h in carton.crease_heights
    ]
    return out, RelTable(pairs)


@dataclass(frozen=True)
class RejectedUnit:
    external_id: str
    line: int
    reason: str


def ingest_packing_units(
    source: Iterable[str] | TextIO,
    largest_box: Dim3 | None = None,
    oracle: Callable[[list[Dim3], Dim3], bool] | None = None,
) -> tuple[list[PackingUnit], list[RejectedUnit]]:
    """Read JSON-lines packing units, rejecting units that cannot ship.

    Each line: {"id": str, "items": [{"l": int, "w": int, "h": int}, ...]}.
    Units whose items do not fit `largest_box` go to the rejection report
    rather than being silently dropped. Dense ids follow input order.
    """
    if oracle is None and largest_box is not None:
        from .binpack import fits_dims

        oracle = fits_dims

    units: list[PackingUnit] = []
    rejected: list[RejectedUnit] = []
    seen_ids: set[str] = set()
    for lineno, line in enumerate(source, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", line=lineno) from None
        if not isinstance(record, dict) or "items" not in record:
            raise ParseError("record must be an object with an 'items' list", line=lineno)
        ext_id = str(record.get("id", lineno))
        if ext_id in seen_ids:
            raise ParseError(f"duplicate unit id {ext_id!r}", line=lineno)
        seen_ids.add(ext_id)
        raw_items = record["items"]
        if not isinstance(raw_items, list) or not raw_items:
            raise ParseError(f"unit {ext_id!r} has no items", line=lineno)
        items = []
        for raw in raw_items:
            try:
                dims = Dim3(int(raw["l"]), int(raw["w"]), int(raw["h"]))
            except (KeyError, TypeError, ValueError):
                raise ParseError(
                    f"unit {ext_id!r}: items need integer l/w/h fields", line=lineno
                ) from None
            if min(dims) <= 0:
                raise ParseError(
                    f"unit {ext_id!r}: non-positive item dimension {tuple(dims)}",
                    line=lineno,
                )
            items.append(Item(dims))
        if largest_box is not None and oracle is not None:
            if not oracle([it.dims for it in items], largest_box):
                rejected.append(RejectedUnit(ext_id, lineno, "exceeds largest box"))
                continue
        units.append(
            PackingUnit(id=len(units), items=tuple(items), external_id=ext_id)
        )
    return units, rejected


@dataclass(frozen=True)
class SyntheticSpec:
    """Distribution parameters for the synthetic packing-unit generator."""

    largest_box: Dim3
    min_items: int = 1
    max_items: int = 7
    min_dim: int = 50
    max_dim: int = 400
    max_resamples: int = 200

    def __post_init__(self):
        if self.min_items < 1 or self.max_items < self.min_items:
            raise ConfigurationError("item count range must satisfy 1 <= min <= max")
        if self.min_dim < 1 or self.max_dim < self.min_dim:
            raise ConfigurationError("item dimension range must satisfy 1 <= min <= max")
        if self.min_dim > max(self.largest_box):
            raise ConfigurationError(
                "item dimension range exceeds the largest box; nothing can ship"
            )


def generate_synthetic_units(seed: int, count: int, spec: SyntheticSpec) -> list[PackingUnit]:
    """Deterministically generate `count` units that all fit the largest box."""
    from .binpack import fits_dims

    if count < 1:
        raise ConfigurationError(f"count must be >= 1, got {count}")
    rng = random.Random(seed)
    units: list[PackingUnit] = []
    for uid in range(count):
        for _ in range(spec.max_resamples):
            n_items = rng.randint(spec.min_items, spec.max_items)
            items = tuple(
                Item(Dim3(*(rng.randint(spec.min_dim, spec.max_dim) for _ in range(3))))
                for _ in range(n_items)
            )
            if fits_dims([it.dims for it in items], spec.largest_box):
                units.append(PackingUnit(id=uid, items=items, external_id=f"syn-{uid}"))
                break
        else:
            raise ConfigurationError(
                f"could not sample a unit fitting {tuple(spec.largest_box)} after "
                f"{spec.max_resamples} tries; narrow the ranges"
            )
    return units


# --- file formats (CSV / JSON-lines) ---------------------------------------


def write_boxes_csv(boxes: Sequence[Box], sink: TextIO) -> None:
    sink.write("id,l,w,h\n")
    for box in boxes:
        sink.write(f"{box.id},{box.dims.l},{box.dims.w},{box.dims.h}\n")


def read_boxes_csv(source: Iterable[str]) -> list[Box]:
    boxes = []
    for lineno, line in enumerate(source, start=1):
        line = line.strip()
        if not line or (lineno == 1 and line.lower().startswith("id,")):
            continue
        try:
            bid, l, w, h = (int(x) for x in line.split(","))
        except ValueError:
            raise ParseError(f"expected 'id,l,w,h', got {line!r}", line=lineno) from None
        boxes.append(Box(id=bid, dims=Dim3(l, w, h).validate()))
    boxes.sort(key=lambda b: b.id)
    if [b.id for b in boxes] != list(range(len(boxes))):
        raise ParseError("box ids must be dense 0..B-1")
    return boxes


def write_cartons_csv(cartons: Sequence[Carton], sink: TextIO) -> None:
    sink.write("id,l,w,heights\n")
    for c in cartons:
        heights = ";".join(str(h) for h in c.crease_heights)
        sink.write(f"{c.id},{c.dims.l},{c.dims.w},{heights}\n")


def read_cartons_csv(source: Iterable[str]) -> list[Carton]:
    cartons = []
    for lineno, line in enumerate(source, start=1):
        line = line.strip()
        if not line or (lineno == 1 and line.lower().startswith("id,")):
            continue
        try:
            cid, l, w, heights_field = line.split(",")
            heights = tuple(sorted(int(h) for h in heights_field.split(";")))
            cartons.append(
                Carton(id=int(cid), dims=Dim3(int(l), int(w), heights[-1]), crease_heights=heights)
            )
        except (ValueError, IndexError):
            raise ParseError(
                f"expected 'id,l,w,heights(semicolon-separated)', got {line!r}", line=lineno
            ) from None
    cartons.sort(key=lambda c: c.id)
    return cartons


def write_rel_csv(rel: RelTable, sink: TextIO) -> None:
    sink.write("carton_id,box_id\n")
    for k, b in rel.pairs:
        sink.write(f"{k},{b}\n")


def read_rel_csv(source: Iterable[str]) -> RelTable:
    pairs = []
    for lineno, line in enumerate(source, start=1):
        line = line.strip()
        if not line or (lineno == 1 and line.lower().startswith("carton_id")):
            continue
        try:
            k, b = (int(x) for x in line.split(","))
        except ValueError:
            raise ParseError(f"expected 'carton_id,box_id', got {line!r}", line=lineno) from None
        pairs.append((k, b))
    return RelTable(pairs)


def write_units_jsonl(units: Sequence[PackingUnit], sink: TextIO) -> None:
    for unit in units:
        record = {
            "id": unit.external_id or str(unit.id),
            "items": [{"l": d.l, "w": d.w, "h": d.h} for d in unit.item_dims],
        }
        sink.write(json.dumps(record, separators=(",", ":")) + "\n")
