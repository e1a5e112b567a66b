"""Shared test helpers: brute-force oracles and random instance builders."""

from __future__ import annotations

from itertools import combinations, permutations

import numpy as np
import pytest

from boxopt.fitmatrix import BitMatrix
from boxopt.master import BendersInstance
from boxopt.model import ProblemConfig, RelTable
from boxopt.subproblem import Availability, CartonSelection, expand_cartons_to_boxes, fast_dual


def brute_force_fits(items, box) -> bool:
    """Reference packer: unit-step enumeration of every position and
    orientation. Exponential; only for tiny instances."""
    L, W, H = box

    def rec(idx, placed):
        if idx == len(items):
            return True
        for a, b, c in set(permutations(items[idx])):
            for x in range(L - a + 1):
                for y in range(W - b + 1):
                    for z in range(H - c + 1):
                        clash = False
                        for px, py, pz, pa, pb, pc in placed:
                            if (x < px + pa and px < x + a and y < py + pb
                                    and py < y + b and z < pz + pc and pz < z + c):
                                clash = True
                                break
                        if not clash:
                            placed.append((x, y, z, a, b, c))
                            if rec(idx + 1, placed):
                                return True
                            placed.pop()
        return False

    return rec(0, [])


def random_rel(rng, K: int, B: int) -> RelTable:
    """Random carton-box relation where every box has a carton and every
    carton has a box."""
    pairs = {(int(rng.integers(0, K)), b) for b in range(B)}
    for k in range(K):
        if not any(p[0] == k for p in pairs):
            pairs.add((k, int(rng.integers(0, B))))
    extra = rng.integers(0, K * B // 4 + 1)
    for _ in range(int(extra)):
        pairs.add((int(rng.integers(0, K)), int(rng.integers(0, B))))
    return RelTable(sorted(pairs))


def random_fit_matrix(rng, P: int, B: int, density: float = 0.4) -> BitMatrix:
    """Random matrix whose last column (largest box) is all ones."""
    bools = rng.random((P, B)) < density
    bools[:, B - 1] = True
    m = BitMatrix(P, B)
    for p in range(P):
        m.set_row_from_bools(p, bools[p])
    return m


def random_dual_instance(rng, P: int, B: int, density: float = 0.4,
                         avail_density: float = 0.3):
    m = random_fit_matrix(rng, P, B, density)
    box_volumes = np.sort(rng.integers(100, 10**9, size=B)).astype(np.int64)
    unit_volumes = rng.integers(1, 100, size=P).astype(np.int64)
    avail = rng.random(B) < avail_density
    avail[B - 1] = True
    y = Availability.from_box_ids(np.nonzero(avail)[0].tolist(), B)
    return m, box_volumes, unit_volumes, y


def random_benders_instance(rng, max_B=30, max_K=15, max_P=20, max_M=3):
    B = int(rng.integers(4, max_B + 1))
    K = int(rng.integers(2, max_K + 1))
    P = int(rng.integers(1, max_P + 1))
    M = int(rng.integers(1, min(max_M, K) + 1))
    rel = random_rel(rng, K, B)
    m = random_fit_matrix(rng, P, B)
    box_volumes = np.sort(rng.integers(100, 10**6, size=B)).astype(np.int64)
    unit_volumes = rng.integers(1, 100, size=P).astype(np.int64)
    return BendersInstance(m, box_volumes, unit_volumes, rel), M


def exhaustive_subset_optimum(instance: BendersInstance, cfg: ProblemConfig):
    """Score every feasible M-subset of cartons with the greedy primal."""
    best = None
    for combo in combinations(range(instance.K), cfg.M):
        y = expand_cartons_to_boxes(
            CartonSelection(frozenset(combo), instance.K), instance.rel, instance.B
        )
        if not all(y.get(b) for b in cfg.fixed_boxes):
            continue
        f = fast_dual(instance.F, instance.box_volumes, instance.unit_volumes, y).f
        if best is None or f < best:
            best = f
    return best


@pytest.fixture
def rng():
    return np.random.default_rng(20260808)
