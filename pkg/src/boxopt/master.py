"""Master problems and the Benders iteration driver.

Three model shapes share one container: the direct MIP over (x, y, z), the
box-space Benders master over (y, z, theta), and the carton-space master over
(z, theta). The builtin backend is an exact branch-and-bound specialized to
these shapes (branch on cartons, bound theta by optimistic cut completion);
the external backend round-trips through an MPS file and a configured solver
executable.
"""

from __future__ import annotations

import math
import shlex
import subprocess
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Sequence

import numpy as np

from .errors import BackendError, BoxoptError, ConfigurationError, SizeError
from .fitmatrix import BitMatrix
from .model import ProblemConfig, RelTable
from .subproblem import (
    Availability,
    CartonSelection,
    CutPool,
    DualSolution,
    expand_cartons_to_boxes,
    fast_dual,
    make_box_cut,
    transform_cut,
)


@dataclass(frozen=True)
class Variable:
    name: str
    kind: str  # "binary" | "continuous"
    lb: float = 0.0
    ub: float | None = None


@dataclass(frozen=True)
class Constraint:
    name: str
    terms: dict[str, int]
    sense: str  # "<=", ">=", "="
    rhs: int


@dataclass
class MipModel:
    name: str
    kind: str  # "direct" | "benders-x" | "benders-xy"
    variables: list[Variable] = field(default_factory=list)
    constraints: list[Constraint] = field(default_factory=list)
    objective: dict[str, int] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def var_index(self) -> dict[str, int]:
        return {v.name: i for i, v in enumerate(self.variables)}

    @property
    def num_variables(self) -> int:
        return len(self.variables)

    @property
    def num_constraints(self) -> int:
        return len(self.constraints)

    def stats(self) -> dict:
        return {
            "kind": self.kind,
            "variables": self.num_variables,
            "binary_variables": sum(1 for v in self.variables if v.kind == "binary"),
            "constraints": self.num_constraints,
            "constraint_names": sorted({c.name.split("[")[0] for c in self.constraints}),
        }

    def validate(self) -> None:
        index = self.var_index
        for c in self.constraints:
            unknown = [n for n in c.terms if n not in index]
            if unknown:
                raise ConfigurationError(
                    f"constraint {c.name} references undeclared variables {unknown}"
                )


@dataclass
class SolveResult:
    status: str  # "OPTIMAL" | "INFEASIBLE" | "LIMIT"
    objective: float | None = None
    assignment: dict[str, float] = field(default_factory=dict)

    def selected(self, prefix: str) -> list[int]:
        return sorted(
            int(name[len(prefix):])
            for name, value in self.assignment.items()
            if name.startswith(prefix) and value > 0.5
        )


# --- model builders ----------------------------------------------------------


def _coverage_constraints(rel: RelTable, fixed_boxes: Sequence[int]) -> list[Constraint]:
    out = []
    for b in sorted(fixed_boxes):
        cartons = rel.cartons_of(b)
        if not cartons:
            raise ConfigurationError(f"fixed box {b} is produced by no carton")
        out.append(Constraint(
            name=f"cover[{b}]",
            terms={f"z{k}": 1 for k in cartons},
            sense=">=",
            rhs=1,
        ))
    return out


def build_direct(
    F: BitMatrix,
    box_volumes: np.ndarray,
    unit_volumes: np.ndarray,
    rel: RelTable,
    cfg: ProblemConfig,
) -> MipModel:
    """The full MIP over packing, box and carton variables.

    x variables exist only for fitting pairs (F_pb = 1); all other x are
    implicitly zero. Guarded by cfg.direct_cap on P*B.
    """
    P, B = F.P, F.B
    if P * B > cfg.direct_cap:
        raise SizeError(
            f"direct model needs P*B = {P * B} packing variables "
            f"(cap {cfg.direct_cap}); use a Benders mode instead"
        )
    K = (max(rel.carton_ids) + 1) if rel.carton_ids else 0
    m = MipModel(name="boxopt-direct", kind="direct")
    m.variables += [Variable(f"z{k}", "binary") for k in range(K)]
    m.variables += [Variable(f"y{b}", "binary") for b in range(B)]
    for p in range(P):
        fit = list(F.iter_row_bits(p))
        if not fit:
            raise ConfigurationError(f"packing unit {p} fits no box at all")
        terms = {}
        vp = int(unit_volumes[p])
        for b in fit:
            x = f"x[{p},{b}]"
            m.variables.append(Variable(x, "binary"))
            m.objective[x] = int(box_volumes[b]) - vp
            terms[x] = 1
            m.constraints.append(Constraint(
                name=f"available[{p},{b}]", terms={x: 1, f"y{b}": -1}, sense="<=", rhs=0,
            ))
        m.constraints.append(Constraint(
            name=f"shippable[{p}]", terms=terms, sense="=", rhs=1,
        ))
    for k, b in rel.pairs:
        m.constraints.append(Constraint(
            name=f"carton_implies[{k},{b}]",
            terms={f"z{k}": 1, f"y{b}": -1}, sense="<=", rhs=0,
        ))
    for b in range(B):
        cartons = rel.cartons_of(b)
        if not cartons:
            raise ConfigurationError(f"box {b} is produced by no carton")
        terms = {f"z{k}": 1 for k in cartons}
        terms[f"y{b}"] = -1
        m.constraints.append(Constraint(
            name=f"requires_carton[{b}]", terms=terms, sense=">=", rhs=0,
        ))
    m.constraints.append(Constraint(
        name="cardinality", terms={f"z{k}": 1 for k in range(K)}, sense="=", rhs=cfg.M,
    ))
    for b in sorted(cfg.fixed_boxes):
        m.constraints.append(Constraint(
            name=f"fixed[{b}]", terms={f"y{b}": 1}, sense="=", rhs=1,
        ))
    m.meta = {"K": K, "B": B, "P": P, "cfg": cfg, "rel": rel,
              "F": F, "box_volumes": box_volumes, "unit_volumes": unit_volumes}
    return m


def build_master_xy(pool: CutPool, rel: RelTable, K: int, cfg: ProblemConfig) -> MipModel:
    """Carton-space master: K binary z plus one continuous theta."""
    m = MipModel(name="boxopt-master-xy", kind="benders-xy")
    m.variables = [Variable(f"z{k}", "binary") for k in range(K)]
    m.variables.append(Variable("theta", "continuous", lb=0.0))
    m.objective = {"theta": 1}
    for i, cut in enumerate(pool):
        if cut.space != "cartons":
            raise ConfigurationError("benders-xy master needs carton-space cuts")
        terms = {"theta": 1}
        for k in range(K):
            if cut.w[k]:
                terms[f"z{k}"] = -int(cut.w[k])
        m.constraints.append(Constraint(
            name=f"cut[{i}]", terms=terms, sense=">=", rhs=int(cut.s),
        ))
    m.constraints.append(Constraint(
        name="cardinality", terms={f"z{k}": 1 for k in range(K)}, sense="=", rhs=cfg.M,
    ))
    m.constraints += _coverage_constraints(rel, sorted(cfg.fixed_boxes))
    m.meta = {"K": K, "cfg": cfg, "rel": rel, "pool": pool}
    return m


def build_master_x(
    pool: CutPool, rel: RelTable, K: int, B: int, cfg: ProblemConfig
) -> MipModel:
    """Box-space master: y and z binaries, theta, REL coupling retained."""
    m = MipModel(name="boxopt-master-x", kind="benders-x")
    m.variables = [Variable(f"z{k}", "binary") for k in range(K)]
    m.variables += [Variable(f"y{b}", "binary") for b in range(B)]
    m.variables.append(Variable("theta", "continuous", lb=0.0))
    m.objective = {"theta": 1}
    for i, cut in enumerate(pool):
        if cut.space != "boxes":
            raise ConfigurationError("benders-x master needs box-space cuts")
        terms = {"theta": 1}
        for b in range(B):
            if cut.w[b]:
                terms[f"y{b}"] = -int(cut.w[b])
        m.constraints.append(Constraint(
            name=f"cut[{i}]", terms=terms, sense=">=", rhs=int(cut.s),
        ))
    for k, b in rel.pairs:
        m.constraints.append(Constraint(
            name=f"carton_implies[{k},{b}]",
            terms={f"z{k}": 1, f"y{b}": -1}, sense="<=", rhs=0,
        ))
    for b in range(B):
        cartons = rel.cartons_of(b)
        if not cartons:
            raise ConfigurationError(f"box {b} is produced by no carton")
        terms = {f"z{k}": 1 for k in cartons}
        terms[f"y{b}"] = -1
        m.constraints.append(Constraint(
            name=f"requires_carton[{b}]", terms=terms, sense=">=", rhs=0,
        ))
    m.constraints.append(Constraint(
        name="cardinality", terms={f"z{k}": 1 for k in range(K)}, sense="=", rhs=cfg.M,
    ))
    for b in sorted(cfg.fixed_boxes):
        m.constraints.append(Constraint(
            name=f"fixed[{b}]", terms={f"y{b}": 1}, sense="=", rhs=1,
        ))
    m.meta = {"K": K, "B": B, "cfg": cfg, "rel": rel, "pool": pool}
    return m


# --- builtin exact solver ----------------------------------------------------


class _BranchAndBound:
    """Exact search over carton subsets of size M with coverage pruning and
    optimistic cut bounds. Sound because all cut coefficients are <= 0:
    treating every undecided carton as selected can only lower a cut."""

    def __init__(self, model: MipModel):
        meta = model.meta
        self.meta = meta
        self.kind = model.kind
        self.K: int = meta["K"]
        self.cfg: ProblemConfig = meta["cfg"]
        self.rel: RelTable = meta["rel"]
        self.M = self.cfg.M
        if self.M > self.K:
            self.feasible_space = False
        else:
            self.feasible_space = True
            if math.comb(self.K, self.M) > self.cfg.enumeration_cap:
                raise SizeError(
                    f"builtin backend would enumerate C({self.K},{self.M}) "
                    f"completions (cap {self.cfg.enumeration_cap}); "
                    "use the external backend"
                )
        self.fixed_cartons = {
            b: self.rel.cartons_of(b) for b in sorted(self.cfg.fixed_boxes)
        }
        for b, cartons in self.fixed_cartons.items():
            if not cartons:
                raise ConfigurationError(f"fixed box {b} is produced by no carton")
        pool: CutPool = meta.get("pool") or CutPool()
        self.cuts = list(pool)
        if self.kind == "benders-xy":
            # suffix[i] = sum of w_k over k >= i; w <= 0 so this is the
            # optimistic contribution of all undecided cartons
            self.suffix = [
                np.concatenate([np.cumsum(cut.w[::-1])[::-1], [0]]) for cut in self.cuts
            ]
        self.best_value: int | None = None
        self.best_sel: list[int] | None = None

    def _covered(self, chosen: list[int], next_idx: int) -> bool:
        chosen_set = set(chosen)
        for cartons in self.fixed_cartons.values():
            if not any(k in chosen_set or k >= next_idx for k in cartons):
                return False
        return True

    def _value(self, chosen: list[int]) -> int:
        if self.kind == "direct":
            d = fast_dual(
                self.meta["F"],
                self.meta["box_volumes"],
                self.meta["unit_volumes"],
                expand_cartons_to_boxes(
                    CartonSelection(frozenset(chosen), self.K),
                    self.rel, self.meta["B"],
                ),
            )
            return d.f
        if self.kind == "benders-xy":
            return max([0] + [cut.value_at(chosen) for cut in self.cuts])
        # benders-x: cuts live in box space
        boxes: set[int] = set()
        for k in chosen:
            boxes.update(self.rel.boxes_of(k))
        return max([0] + [cut.value_at(boxes) for cut in self.cuts])

    def _bound(self, chosen: list[int], next_idx: int) -> int:
        if self.kind == "direct":
            return 0
        if self.kind == "benders-xy":
            best = 0
            for cut, suffix in zip(self.cuts, self.suffix):
                val = cut.s + sum(int(cut.w[k]) for k in chosen) + int(suffix[next_idx])
                if val > best:
                    best = val
            return best
        boxes: set[int] = set()
        for k in chosen:
            boxes.update(self.rel.boxes_of(k))
        for k in range(next_idx, self.K):
            boxes.update(self.rel.boxes_of(k))
        best = 0
        for cut in self.cuts:
            val = cut.value_at(boxes)
            if val > best:
                best = val
        return best

    def solve(self) -> SolveResult:
        if self.feasible_space:
            self._search(0, [])
        if self.best_sel is None:
            return SolveResult(status="INFEASIBLE")
        chosen = self.best_sel
        assignment = {f"z{k}": 1.0 if k in chosen else 0.0 for k in range(self.K)}
        if self.kind != "benders-xy":
            B = self.meta["B"]
            y = expand_cartons_to_boxes(
                CartonSelection(frozenset(chosen), self.K), self.rel, B
            )
            for b in range(B):
                assignment[f"y{b}"] = 1.0 if y.get(b) else 0.0
        if self.kind != "direct":
            assignment["theta"] = float(self.best_value)
        return SolveResult(
            status="OPTIMAL", objective=float(self.best_value), assignment=assignment
        )

    def _search(self, idx: int, chosen: list[int]) -> None:
        if len(chosen) == self.M:
            if self._covered(chosen, self.K + 1):
                value = self._value(chosen)
                if self.best_value is None or value < self.best_value:
                    self.best_value = value
                    self.best_sel = list(chosen)
            return
        if idx == self.K or len(chosen) + (self.K - idx) < self.M:
            return
        if not self._covered(chosen, idx):
            return
        if self.best_value is not None and self._bound(chosen, idx) >= self.best_value:
            return
        chosen.append(idx)
        self._search(idx + 1, chosen)
        chosen.pop()
        self._search(idx + 1, chosen)


def solve_mip(
    model: MipModel,
    backend: str | None = None,
    solver_cmd: str | None = None,
) -> SolveResult:
    """Solve a master model with the builtin exact search or an external
    solver invoked on an MPS export."""
    model.validate()
    cfg: ProblemConfig = model.meta["cfg"]
    backend = backend or cfg.backend
    if backend == "builtin":
        return _BranchAndBound(model).solve()
    if backend == "external":
        return _solve_external(model, solver_cmd or cfg.solver_cmd)
    raise ConfigurationError(f"unknown backend {backend!r}")


# --- MPS export and the external backend -------------------------------------


def write_mps(model: MipModel, sink: IO[str]) -> dict[str, str]:
    """Fixed-format MPS export; returns the MPS-name -> variable-name map.

    Binaries are wrapped in INTORG/INTEND markers and bounded with BV rows;
    the continuous theta keeps the default [0, +inf) bounds.
    """
    var_names = {v.name: f"V{i:07d}" for i, v in enumerate(model.variables)}
    row_names = {c.name: f"R{i:07d}" for i, c in enumerate(model.constraints)}
    sense_tag = {"<=": "L", ">=": "G", "=": "E"}

    def fld(f1: str, f2: str = "", f3: str = "", f4: str = "", f5: str = "", f6: str = "") -> str:
        line = f" {f1:<2} {f2:<8}  {f3:<8}  {f4:<12}   {f5:<8}  {f6:<12}"
        return line.rstrip() + "\n"

    def num(value) -> str:
        value = float(value)
        if value.is_integer() and abs(value) < 1e12:
            return str(int(value))
        return f"{value:.10g}"

    sink.write(f"NAME          {model.name.upper()[:8]}\n")
    sink.write("ROWS\n")
    sink.write(fld("N", "COST"))
    for c in model.constraints:
        sink.write(fld(sense_tag[c.sense], row_names[c.name]))
    sink.write("COLUMNS\n")
    by_var: dict[str, list[tuple[str, int]]] = {v.name: [] for v in model.variables}
    for c in model.constraints:
        for var, coeff in c.terms.items():
            by_var[var].append((row_names[c.name], coeff))
    marker_open = False
    counter = 0
    for v in model.variables:
        entries = list(by_var[v.name])
        if v.name in model.objective:
            entries.insert(0, ("COST", model.objective[v.name]))
        is_int = v.kind == "binary"
        if is_int and not marker_open:
            sink.write(fld("", f"MARK{counter:04d}", "'MARKER'", "", "'INTORG'"))
            marker_open = True
            counter += 1
        if not is_int and marker_open:
            sink.write(fld("", f"MARK{counter:04d}", "'MARKER'", "", "'INTEND'"))
            marker_open = False
            counter += 1
        name = var_names[v.name]
        for j in range(0, len(entries), 2):
            pair = entries[j:j + 2]
            if len(pair) == 2:
                sink.write(fld("", name, pair[0][0], num(pair[0][1]),
                               pair[1][0], num(pair[1][1])))
            else:
                sink.write(fld("", name, pair[0][0], num(pair[0][1])))
        if not entries:
            sink.write(fld("", name, "COST", "0"))
    if marker_open:
        sink.write(fld("", f"MARK{counter:04d}", "'MARKER'", "", "'INTEND'"))
    sink.write("RHS\n")
    for c in model.constraints:
        if c.rhs:
            sink.write(fld("", "RHS", row_names[c.name], num(c.rhs)))
    sink.write("BOUNDS\n")
    for v in model.variables:
        name = var_names[v.name]
        if v.kind == "binary":
            sink.write(fld("BV", "BND", name))
        else:
            if v.lb:
                sink.write(fld("LO", "BND", name, num(v.lb)))
            if v.ub is not None:
                sink.write(fld("UP", "BND", name, num(v.ub)))
    sink.write("ENDATA\n")
    return {mps: orig for orig, mps in var_names.items()}


def parse_solution_file(text: str, name_map: dict[str, str]) -> SolveResult:
    """Parse the documented solution format: a status line, an optional
    objective line, then 'varname value' pairs using MPS names."""
    status = None
    objective = None
    assignment: dict[str, float] = {}
    for raw in text.splitlines():
        parts = raw.split()
        if not parts:
            continue
        key = parts[0].lower()
        if key == "status" and len(parts) > 1:
            status = parts[1].upper()
        elif key == "objective" and len(parts) > 1:
            objective = float(parts[1])
        elif len(parts) == 2 and parts[0] in name_map:
            assignment[name_map[parts[0]]] = float(parts[1])
    if status not in {"OPTIMAL", "INFEASIBLE", "LIMIT"}:
        raise BackendError(f"solution file has unknown status {status!r}", text)
    return SolveResult(status=status, objective=objective, assignment=assignment)


def _solve_external(model: MipModel, solver_cmd: str) -> SolveResult:
    if not solver_cmd:
        raise BackendError("external backend selected but no solver command configured")
    with tempfile.TemporaryDirectory(prefix="boxopt-") as tmp:
        mps_path = Path(tmp) / "model.mps"
        sol_path = Path(tmp) / "model.sol"
        with open(mps_path, "w") as sink:
            name_map = write_mps(model, sink)
        cmd = [part.format(mps=mps_path, sol=sol_path) for part in shlex.split(solver_cmd)]
        try:
            proc = subprocess.run(cmd, capture_output=True, text=True, check=False)
        except OSError as exc:
            raise BackendError(f"could not launch solver {cmd[0]!r}: {exc}") from None
        if proc.returncode != 0:
            raise BackendError(
                f"solver exited with code {proc.returncode}",
                proc.stdout + proc.stderr,
            )
        if not sol_path.exists():
            raise BackendError("solver produced no solution file", proc.stdout + proc.stderr)
        return parse_solution_file(sol_path.read_text(), name_map)


# --- Benders loop -------------------------------------------------------------


@dataclass
class BendersInstance:
    """Everything the Benders loop needs about one optimization problem."""

    F: BitMatrix
    box_volumes: np.ndarray
    unit_volumes: np.ndarray
    rel: RelTable

    def __post_init__(self):
        self.box_volumes = np.asarray(self.box_volumes, dtype=np.int64)
        self.unit_volumes = np.asarray(self.unit_volumes, dtype=np.int64)

    @property
    def B(self) -> int:
        return self.F.B

    @property
    def P(self) -> int:
        return self.F.P

    @property
    def K(self) -> int:
        return (max(self.rel.carton_ids) + 1) if self.rel.carton_ids else 0

    def carton_volume(self, k: int) -> int:
        boxes = self.rel.boxes_of(k)
        return max(int(self.box_volumes[b]) for b in boxes) if boxes else 0


@dataclass
class IterationRecord:
    iteration: int
    theta: int
    f: int
    incumbent: int
    elapsed: float


@dataclass
class BendersResult:
    best_z: CartonSelection
    best_y: Availability
    incumbent: int
    theta: int
    gap: float
    iterations: list[IterationRecord]
    termination: str
    best_dual: DualSolution | None = None
    pool: CutPool | None = None

    def to_dict(self) -> dict:
        return {
            "selected_cartons": sorted(self.best_z.selected),
            "selected_boxes": self.best_y.ids(),
            "incumbent_mm3": int(self.incumbent),
            "theta_mm3": int(self.theta),
            "gap": self.gap,
            "termination": self.termination,
            "iterations": [
                {"iteration": r.iteration, "theta_mm3": int(r.theta),
                 "f_mm3": int(r.f), "incumbent_mm3": int(r.incumbent),
                 "elapsed_s": r.elapsed}
                for r in self.iterations
            ],
        }


def greedy_initial_selection(
    instance: BendersInstance, cfg: ProblemConfig
) -> CartonSelection | None:
    """Cover the fixed boxes greedily, then fill to M with the largest
    cartons. Returns None when the heuristic cover overshoots M (the exact
    master then decides feasibility itself)."""
    for b in sorted(cfg.fixed_boxes):
        if not instance.rel.cartons_of(b):
            raise ConfigurationError(f"fixed box {b} is produced by no carton")
    if cfg.M > instance.K:
        raise ConfigurationError(f"only {instance.K} cartons exist; cannot select M={cfg.M}")
    chosen: list[int] = []
    uncovered = set(cfg.fixed_boxes)
    while uncovered:
        # the carton covering the most remaining fixed boxes, ties by volume
        pick = max(
            {k for b in uncovered for k in instance.rel.cartons_of(b)},
            key=lambda k: (
                len(uncovered.intersection(instance.rel.boxes_of(k))),
                instance.carton_volume(k),
                -k,
            ),
        )
        chosen.append(pick)
        uncovered.difference_update(instance.rel.boxes_of(pick))
    if len(chosen) > cfg.M:
        return None
    remaining = sorted(
        (k for k in range(instance.K) if k not in chosen),
        key=lambda k: (-instance.carton_volume(k), k),
    )
    chosen.extend(remaining[: cfg.M - len(chosen)])
    return CartonSelection(frozenset(chosen), instance.K)


def _gap(incumbent: int, theta: int) -> float:
    if incumbent <= 0:
        return 0.0
    return max(0.0, (incumbent - theta) / incumbent)


def benders_loop(
    instance: BendersInstance,
    mode: str = "xy",
    cfg: ProblemConfig | None = None,
) -> BendersResult:
    """Alternate master solves and analytic sub-problem evaluations until the
    relative gap closes (or iteration/time limits hit).

    Iteration 0 evaluates a greedy feasible selection so the pool holds one
    tight cut before the first master solve.
    """
    if mode not in {"xy", "x"}:
        raise ConfigurationError(f"mode must be 'xy' or 'x', got {mode!r}")
    cfg = (cfg or ProblemConfig(M=1)).with_largest_box(instance.B)
    start = time.perf_counter()
    pool = CutPool()
    iterations: list[IterationRecord] = []

    def evaluate(z: CartonSelection, iteration: int):
        y = expand_cartons_to_boxes(z, instance.rel, instance.B)
        d = fast_dual(instance.F, instance.box_volumes, instance.unit_volumes, y)
        if mode == "xy":
            pool.add(transform_cut(d, z, instance.rel, iteration=iteration))
        else:
            pool.add(make_box_cut(d, y, iteration=iteration))
        return y, d

    incumbent: int | None = None
    best_z = best_y = best_d = None
    z0 = greedy_initial_selection(instance, cfg)
    if z0 is not None:
        y0, d0 = evaluate(z0, 0)
        incumbent, best_z, best_y, best_d = d0.f, z0, y0, d0
        iterations.append(IterationRecord(0, 0, d0.f, incumbent, time.perf_counter() - start))

    theta = 0
    termination = "max_iterations"
    for i in range(1, cfg.max_iter + 1):
        if mode == "xy":
            model = build_master_xy(pool, instance.rel, instance.K, cfg)
        else:
            model = build_master_x(pool, instance.rel, instance.K, instance.B, cfg)
        res = solve_mip(model)
        if res.status == "INFEASIBLE":
            raise BoxoptError(
                "master problem is infeasible: fixed boxes and the carton "
                f"budget M={cfg.M} conflict"
            )
        if res.status != "OPTIMAL":
            termination = "master_limit"
            break
        objective = res.objective if res.objective is not None else res.assignment.get("theta", 0.0)
        theta = int(round(objective))
        z = CartonSelection(frozenset(res.selected("z")), instance.K)
        y, d = evaluate(z, i)
        if incumbent is None or d.f < incumbent:
            incumbent, best_z, best_y, best_d = d.f, z, y, d
        iterations.append(IterationRecord(i, theta, d.f, incumbent, time.perf_counter() - start))
        if _gap(incumbent, theta) <= cfg.tol:
            termination = "converged"
            break
        if cfg.time_limit is not None and time.perf_counter() - start > cfg.time_limit:
            termination = "time_limit"
            break

    if best_z is None:
        raise BoxoptError("no feasible carton selection was evaluated; raise max_iter")
    return BendersResult(
        best_z=best_z,
        best_y=best_y,
        incumbent=incumbent,
        theta=theta,
        gap=_gap(incumbent, theta),
        iterations=iterations,
        termination=termination,
        best_dual=best_d,
        pool=pool,
    )


def solve_direct(instance: BendersInstance, cfg: ProblemConfig) -> tuple[SolveResult, MipModel]:
    """Build and solve the direct MIP; convenience wrapper for the CLI."""
    cfg = cfg.with_largest_box(instance.B)
    model = build_direct(
        instance.F, instance.box_volumes, instance.unit_volumes, instance.rel, cfg
    )
    return solve_mip(model), model
