"""Command-line pipeline: generate universes, compute fit, optimize, report.

Exit codes: 0 success, 1 domain error, 2 usage error. All randomness is
seeded through --seed flags, and results are deterministic under the
builtin backend.
"""

from __future__ import annotations

import configparser
import io
import json
import statistics
import sys
import time
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import click
import numpy as np

from . import binpack, fitmatrix, kdtree, master, model, subproblem
from .errors import BoxoptError, ConfigurationError


@dataclass(frozen=True)
class RunReport:
    """Normalized objective and the empty-volume KPI.

    score = objective / total unit volume; kpi = score / (1 + score), the
    fraction of shipped box volume that is air.
    """

    objective_mm3: int
    total_unit_volume_mm3: int
    score: float
    kpi: float

    def to_dict(self) -> dict:
        return {
            "objective_mm3": self.objective_mm3,
            "total_unit_volume_mm3": self.total_unit_volume_mm3,
            "score": float(f"{self.score:.4g}"),
            "kpi": float(f"{self.kpi:.4g}"),
            "kpi_percent": float(f"{100 * self.kpi:.4g}"),
        }


def make_report(objective: int, total_unit_volume: int) -> RunReport:
    if total_unit_volume <= 0:
        raise ConfigurationError("total unit volume must be positive")
    if objective < 0:
        raise ConfigurationError("objective must be nonnegative")
    score = Fraction(objective, total_unit_volume)
    kpi = score / (1 + score)
    return RunReport(
        objective_mm3=int(objective),
        total_unit_volume_mm3=int(total_unit_volume),
        score=float(score),
        kpi=float(kpi),
    )


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigurationError(f"config file {path!r} not found")
    defaults: dict = {}
    for section in parser.sections():
        defaults[section] = dict(parser.items(section))
    return defaults


@click.group()
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="INI config file; CLI flags override its values.")
@click.option("--threads", type=int, default=1, show_default=True,
              help="Worker cap for parallel stages.")
@click.pass_context
def cli(ctx, config_path, threads):
    """Variable-height transport packaging optimizer."""
    ctx.ensure_object(dict)
    ctx.obj["threads"] = threads
    ctx.default_map = _load_config(config_path)


def _write_text(path: str | None, text: str) -> None:
    if path and path != "-":
        Path(path).write_text(text)
    else:
        click.echo(text, nl=not text.endswith("\n"))


@cli.command("gen-boxes")
@click.option("--min", "min_dims", required=True, help="Smallest box, LxWxH mm.")
@click.option("--max", "max_dims", required=True, help="Largest box, LxWxH mm.")
@click.option("--step", type=int, default=10, show_default=True, help="Grid step mm.")
@click.option("--out", type=click.Path(), default="-", help="Output CSV (default stdout).")
def gen_boxes_cmd(min_dims, max_dims, step, out):
    """Enumerate the candidate box grid (l >= w >= h, volume-ordered ids)."""
    boxes = model.generate_box_grid(model.parse_dim3(min_dims), model.parse_dim3(max_dims), step)
    buf = io.StringIO()
    model.write_boxes_csv(boxes, buf)
    _write_text(out, buf.getvalue())
    click.echo(f"wrote {len(boxes)} boxes", err=True)


@cli.command("gen-cartons")
@click.option("--boxes", "boxes_path", required=True, type=click.Path(exists=True))
@click.option("--fractions", default="1,3/4,1/2,1/4", show_default=True,
              help="Comma-separated crease fractions of the box height.")
@click.option("--min-height", type=int, default=None,
              help="Grid minimum height mm (default: smallest h in the box file).")
@click.option("--step", type=int, default=None,
              help="Height grid step mm (default: inferred from the box file).")
@click.option("--out-cartons", type=click.Path(), default="cartons.csv", show_default=True)
@click.option("--out-rel", type=click.Path(), default="rel.csv", show_default=True)
def gen_cartons_cmd(boxes_path, fractions, min_height, step, out_cartons, out_rel):
    """Derive cartons and the carton-to-box REL table from a box list."""
    boxes = model.read_boxes_csv(Path(boxes_path).read_text().splitlines())
    grid = kdtree.GridSpec.from_boxes(boxes, step=step)
    rule = model.CreaseRule(
        fractions=tuple(Fraction(f) for f in fractions.split(",")),
        min_height=min_height if min_height is not None else grid.origin.h,
        step=step if step is not None else grid.step,
    )
    cartons, rel = model.derive_cartons(boxes, rule)
    with open(out_cartons, "w") as sink:
        model.write_cartons_csv(cartons, sink)
    with open(out_rel, "w") as sink:
        model.write_rel_csv(rel, sink)
    click.echo(f"wrote {len(cartons)} cartons, {len(rel)} REL pairs", err=True)


@cli.command("gen-units")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--count", type=int, required=True)
@click.option("--boxes", "boxes_path", type=click.Path(exists=True), default=None,
              help="Box CSV; the largest box bounds the generated units.")
@click.option("--largest-box", default=None, help="Explicit largest box LxWxH mm.")
@click.option("--min-items", type=int, default=1, show_default=True)
@click.option("--max-items", type=int, default=7, show_default=True)
@click.option("--min-dim", type=int, default=50, show_default=True)
@click.option("--max-dim", type=int, default=400, show_default=True)
@click.option("--out", type=click.Path(), default="-")
def gen_units_cmd(seed, count, boxes_path, largest_box, min_items, max_items,
                  min_dim, max_dim, out):
    """Generate a synthetic packing-unit sample (deterministic per seed)."""
    if largest_box:
        largest = model.parse_dim3(largest_box)
    elif boxes_path:
        boxes = model.read_boxes_csv(Path(boxes_path).read_text().splitlines())
        largest = boxes[-1].dims
    else:
        raise ConfigurationError("provide --boxes or --largest-box")
    spec = model.SyntheticSpec(
        largest_box=largest, min_items=min_items, max_items=max_items,
        min_dim=min_dim, max_dim=max_dim,
    )
    units = model.generate_synthetic_units(seed, count, spec)
    buf = io.StringIO()
    model.write_units_jsonl(units, buf)
    _write_text(out, buf.getvalue())
    click.echo(f"wrote {len(units)} units", err=True)


def _read_units(units_path: str, boxes: list[model.Box]):
    with open(units_path) as source:
        units, rejected = model.ingest_packing_units(source, largest_box=boxes[-1].dims)
    return units, rejected


@cli.command("compute-fit")
@click.option("--units", "units_path", required=True, type=click.Path(exists=True))
@click.option("--boxes", "boxes_path", required=True, type=click.Path(exists=True))
@click.option("--mode", type=click.Choice(["grid", "kdtree"]), default="kdtree",
              show_default=True)
@click.option("--leaf-threshold", type=int, default=30, show_default=True)
@click.option("--node-budget", type=int, default=binpack.DEFAULT_NODE_BUDGET,
              show_default=True, help="Bin-packing search budget per oracle call.")
@click.option("--out", type=click.Path(), default="fit.bin", show_default=True)
@click.option("--stats", "stats_path", type=click.Path(), default=None,
              help="Write oracle-call statistics JSON.")
@click.option("--rejects", "rejects_path", type=click.Path(), default=None,
              help="Write rejected units JSONL.")
@click.pass_context
def compute_fit_cmd(ctx, units_path, boxes_path, mode, leaf_threshold, node_budget,
                    out, stats_path, rejects_path):
    """Compute the bit-packed fitting matrix for units x boxes."""
    boxes = model.read_boxes_csv(Path(boxes_path).read_text().splitlines())
    units, rejected = _read_units(units_path, boxes)
    if rejected:
        click.echo(f"rejected {len(rejected)} units (do not fit the largest box)", err=True)
        if rejects_path:
            with open(rejects_path, "w") as sink:
                for r in rejected:
                    sink.write(json.dumps(
                        {"id": r.external_id, "line": r.line, "reason": r.reason}) + "\n")
    if not units:
        raise ConfigurationError("no units left after ingestion")

    def oracle(items, dims):
        return binpack.fits(binpack.FitQuery(tuple(items), dims, node_budget=node_budget))

    if mode == "grid":
        matrix, stats = fitmatrix.evaluate_exhaustive(units, boxes, oracle)
    else:
        matrix, stats = kdtree.evaluate_all(
            units, boxes, oracle, kdtree.KdConfig(leaf_threshold=leaf_threshold),
            threads=ctx.obj.get("threads", 1),
        )
    with open(out, "wb") as sink:
        fitmatrix.serialize(matrix, sink)
    payload = {
        "mode": mode,
        "P": matrix.P,
        "B": matrix.B,
        "oracle_calls": stats.oracle_calls,
        "exhausted_calls": stats.exhausted_calls,
        "grid_oracle_calls": matrix.P * matrix.B,
        "wall_seconds": stats.wall_seconds,
        "rejected_units": len(rejected),
    }
    if stats_path:
        Path(stats_path).write_text(json.dumps(payload, indent=2) + "\n")
    click.echo(json.dumps(payload), err=True)


@cli.command("optimize")
@click.option("--mode", type=click.Choice(["direct", "benders-x", "benders-xy"]),
              default="benders-xy", show_default=True)
@click.option("--fit", "fit_path", required=True, type=click.Path(exists=True))
@click.option("--boxes", "boxes_path", required=True, type=click.Path(exists=True))
@click.option("--units", "units_path", required=True, type=click.Path(exists=True))
@click.option("--cartons", "cartons_path", required=True, type=click.Path(exists=True))
@click.option("--rel", "rel_path", required=True, type=click.Path(exists=True))
@click.option("-m", "-M", "budget", type=int, default=8, show_default=True,
              help="Number of cartons to select.")
@click.option("--fixed-boxes", default="", help="Comma-separated box ids forced into "
              "the solution; the largest box is always included.")
@click.option("--backend", type=click.Choice(["builtin", "external"]), default="builtin",
              show_default=True)
@click.option("--solver-cmd", default="", help="External solver command; {mps} and "
              "{sol} placeholders are substituted.")
@click.option("--tol", type=float, default=1e-6, show_default=True)
@click.option("--max-iter", type=int, default=100, show_default=True)
@click.option("--time-limit", type=float, default=None)
@click.option("--cuts-out", type=click.Path(), default=None,
              help="Dump the final cut pool as JSON-lines (Benders modes).")
@click.option("--out", type=click.Path(), default="-")
def optimize_cmd(mode, fit_path, boxes_path, units_path, cartons_path, rel_path,
                 budget, fixed_boxes, backend, solver_cmd, tol, max_iter,
                 time_limit, cuts_out, out):
    """Select M cartons minimizing total empty shipping volume."""
    boxes = model.read_boxes_csv(Path(boxes_path).read_text().splitlines())
    units, _ = _read_units(units_path, boxes)
    cartons = model.read_cartons_csv(Path(cartons_path).read_text().splitlines())
    rel = model.read_rel_csv(Path(rel_path).read_text().splitlines())
    with open(fit_path, "rb") as source:
        matrix = fitmatrix.deserialize(source)
    if matrix.P != len(units) or matrix.B != len(boxes):
        raise ConfigurationError(
            f"fit matrix is {matrix.P}x{matrix.B} but inputs have "
            f"{len(units)} units x {len(boxes)} boxes"
        )
    fixed = frozenset(int(x) for x in fixed_boxes.split(",") if x.strip())
    cfg = model.ProblemConfig(
        M=budget, fixed_boxes=fixed, backend=backend, solver_cmd=solver_cmd,
        tol=tol, max_iter=max_iter, time_limit=time_limit,
    ).with_largest_box(len(boxes))
    box_volumes = np.array([b.volume for b in boxes], dtype=np.int64)
    unit_volumes = np.array([u.volume for u in units], dtype=np.int64)
    instance = master.BendersInstance(matrix, box_volumes, unit_volumes, rel)
    total_volume = int(unit_volumes.sum())

    start = time.perf_counter()
    if mode == "direct":
        res, mip = master.solve_direct(instance, cfg)
        if res.status != "OPTIMAL":
            raise BoxoptError(f"direct solve finished with status {res.status}")
        objective = int(round(res.objective))
        selected_cartons = res.selected("z")
        selected_boxes = res.selected("y")
        result_payload = {
            "mode": mode,
            "selected_cartons": selected_cartons,
            "selected_boxes": selected_boxes,
            "incumbent_mm3": objective,
            "theta_mm3": objective,
            "gap": 0.0,
            "termination": "optimal",
            "iterations": [],
            "model_stats": mip.stats(),
        }
    else:
        result = master.benders_loop(instance, mode.removeprefix("benders-"), cfg)
        objective = result.incumbent
        selected_cartons = sorted(result.best_z.selected)
        result_payload = {"mode": mode, **result.to_dict()}
        if cuts_out and result.pool is not None:
            with open(cuts_out, "w") as sink:
                result.pool.dump_jsonl(sink)
    elapsed = time.perf_counter() - start

    report = make_report(objective, total_volume)
    result_payload.update({
        "M": cfg.M,
        "fixed_boxes": sorted(cfg.fixed_boxes),
        "counts": {"P": matrix.P, "B": matrix.B, "K": len(cartons), "REL": len(rel)},
        "carton_dims": {
            str(k): list(cartons[k].dims) for k in result_payload["selected_cartons"]
        },
        "report": report.to_dict(),
        "elapsed_s": elapsed,
    })
    _write_text(out, json.dumps(result_payload, indent=2) + "\n")


@cli.command("report")
@click.option("--result", "result_path", type=click.Path(exists=True), default=None,
              help="Result JSON from `boxopt optimize`.")
@click.option("--objective", type=int, default=None, help="Objective in mm^3.")
@click.option("--total-volume", type=int, default=None, help="Total unit volume mm^3.")
def report_cmd(result_path, objective, total_volume):
    """Normalize an objective into the score and empty-volume KPI."""
    if result_path:
        payload = json.loads(Path(result_path).read_text())
        objective = payload["incumbent_mm3"]
        total_volume = payload["report"]["total_unit_volume_mm3"]
    if objective is None or total_volume is None:
        raise ConfigurationError("provide --result or both --objective and --total-volume")
    click.echo(json.dumps(make_report(objective, total_volume).to_dict(), indent=2))


@cli.command("fits")
@click.option("--items", required=True,
              help="Comma-separated item dims, e.g. 100x80x60,50x50x50.")
@click.option("--box", required=True, help="Box dims LxWxH mm.")
@click.option("--node-budget", type=int, default=binpack.DEFAULT_NODE_BUDGET,
              show_default=True)
def fits_cmd(items, box, node_budget):
    """Run a single bin-packing decision (debugging aid)."""
    item_dims = tuple(model.parse_dim3(part) for part in items.split(","))
    verdict = binpack.fits(binpack.FitQuery(item_dims, model.parse_dim3(box),
                                            node_budget=node_budget))
    click.echo(json.dumps(
        {"fits": verdict.fits, "exhausted": verdict.exhausted, "nodes": verdict.nodes}))


def _bench_dual(sizes: list[int], reps: int, seed: int, B: int) -> list[dict]:
    rows = []
    rng = np.random.default_rng(seed)
    for P in sizes:
        matrix, box_volumes, unit_volumes, y = _random_dual_instance(rng, P, B)
        fast_times, naive_times = [], []
        for _ in range(reps):
            t0 = time.perf_counter()
            d_fast = subproblem.fast_dual(matrix, box_volumes, unit_volumes, y)
            fast_times.append(time.perf_counter() - t0)
            t0 = time.perf_counter()
            d_naive = subproblem.naive_dual(matrix, box_volumes, unit_volumes, y)
            naive_times.append(time.perf_counter() - t0)
            if d_fast.f != d_naive.f:
                raise BoxoptError("fast_dual and naive_dual disagree")
        fast_med = statistics.median(fast_times)
        naive_med = statistics.median(naive_times)
        rows.append({
            "suite": "dual", "P": P, "B": B,
            "fast_s": fast_med, "naive_s": naive_med,
            "speedup": naive_med / fast_med if fast_med > 0 else float("inf"),
        })
    return rows


def _random_dual_instance(rng, P: int, B: int, density: float = 0.10):
    matrix = fitmatrix.BitMatrix(P, B)
    bools = rng.random((P, B)) < density
    bools[:, B - 1] = True
    for p in range(P):
        matrix.set_row_from_bools(p, bools[p])
    box_volumes = np.sort(rng.integers(10**6, 10**9, size=B)).astype(np.int64)
    unit_volumes = rng.integers(1, 10**6, size=P).astype(np.int64)
    avail = np.zeros(B, dtype=bool)
    avail[rng.random(B) < 0.05] = True
    avail[B - 1] = True
    y = subproblem.Availability.from_box_ids(np.nonzero(avail)[0].tolist(), B)
    return matrix, box_volumes, unit_volumes, y


def _bench_fit(sizes: list[int], reps: int) -> list[dict]:
    rows = []
    for n in sizes:
        region = kdtree.Region((0, 0, 0), (n - 1, n - 1, n - 1))
        threshold = n // 2

        def oracle(pt):
            return all(c >= threshold for c in pt)

        calls, times = [], []
        for _ in range(reps):
            t0 = time.perf_counter()
            _, stats = kdtree.evaluate_unit(oracle, region)
            times.append(time.perf_counter() - t0)
            calls.append(stats.oracle_calls)
        rows.append({
            "suite": "fit", "n": n, "kd_calls": calls[0],
            "grid_calls": n**3, "call_ratio": calls[0] / n**3,
            "kd_s": statistics.median(times),
        })
    return rows


def _bench_end2end(reps: int, seed: int) -> list[dict]:
    times = []
    for _ in range(reps):
        t0 = time.perf_counter()
        boxes = model.generate_box_grid(model.Dim3(100, 100, 100),
                                        model.Dim3(400, 400, 400), 100)
        cartons, rel = model.derive_cartons(boxes, model.CreaseRule(min_height=100, step=100))
        spec = model.SyntheticSpec(largest_box=boxes[-1].dims, min_dim=50, max_dim=300,
                                   min_items=1, max_items=3)
        units = model.generate_synthetic_units(seed, 20, spec)
        matrix, _ = kdtree.evaluate_all(units, boxes)
        box_volumes = np.array([b.volume for b in boxes], dtype=np.int64)
        unit_volumes = np.array([u.volume for u in units], dtype=np.int64)
        instance = master.BendersInstance(matrix, box_volumes, unit_volumes, rel)
        master.benders_loop(instance, "xy", model.ProblemConfig(M=2))
        times.append(time.perf_counter() - t0)
    return [{"suite": "end2end", "median_s": statistics.median(times), "reps": reps}]


@cli.command("bench")
@click.option("--suite", type=click.Choice(["dual", "fit", "end2end"]), required=True)
@click.option("--sizes", default="", help="Comma-separated sizes (P for dual, n for fit).")
@click.option("--repetitions", type=int, default=3, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--dual-b", "dual_B", type=int, default=2048, show_default=True,
              help="Box count for the dual suite.")
@click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="json",
              show_default=True)
@click.option("--out", type=click.Path(), default="-")
def bench_cmd(suite, sizes, repetitions, seed, dual_B, fmt, out):
    """Benchmark core kernels; reports medians over repetitions."""
    if repetitions < 1:
        raise ConfigurationError("repetitions must be >= 1")
    size_list = [int(s) for s in sizes.split(",") if s.strip()]
    if suite == "dual":
        rows = _bench_dual(size_list or [2000], repetitions, seed, dual_B)
    elif suite == "fit":
        rows = _bench_fit(size_list or [8, 16, 32], repetitions)
    else:
        rows = _bench_end2end(repetitions, seed)
    if fmt == "json":
        _write_text(out, json.dumps(rows, indent=2) + "\n")
    else:
        headers = sorted({k for row in rows for k in row})
        lines = [",".join(headers)]
        lines += [",".join(str(row.get(h, "")) for h in headers) for row in rows]
        _write_text(out, "\n".join(lines) + "\n")


def main():
    try:
        cli(standalone_mode=False)
    except click.UsageError as exc:
        exc.show()
        sys.exit(2)
    except click.exceptions.Abort:
        sys.exit(1)
    except click.exceptions.Exit as exc:
        sys.exit(exc.exit_code)
    except BoxoptError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)


if __name__ == "__main__":
    main()
