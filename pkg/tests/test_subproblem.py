import io

import numpy as np
import pytest

from boxopt.errors import ConfigurationError, InfeasibleSubproblemError
from boxopt.fitmatrix import BitMatrix
from boxopt.model import RelTable
from boxopt.subproblem import (
    Availability,
    CartonSelection,
    Cut,
    CutPool,
    expand_cartons_to_boxes,
    fast_dual,
    make_box_cut,
    naive_dual,
    transform_cut,
)

from .conftest import random_dual_instance, random_rel


def greedy_primal(m: BitMatrix, box_volumes, unit_volumes, y: Availability) -> int:
    total = 0
    for p in range(m.P):
        fit = [b for b in m.iter_row_bits(p) if y.get(b)]
        best = min(fit, key=lambda b: (int(box_volumes[b]), b))
        total += int(box_volumes[best]) - int(unit_volumes[p])
    return total


class TestAvailability:
    def test_round_trip(self):
        y = Availability.from_box_ids([0, 64, 129], 200)
        assert y.ids() == [0, 64, 129]
        assert y.get(64) and not y.get(63)
        assert y.popcount == 3

    def test_out_of_range(self):
        with pytest.raises(IndexError):
            Availability.from_box_ids([5], 5)


class TestExpand:
    def test_all_zeros(self):
        rel = RelTable([(0, 0), (1, 1)])
        y = expand_cartons_to_boxes(CartonSelection(frozenset(), 2), rel, 2)
        assert y.ids() == []

    def test_single_carton(self):
        rel = RelTable([(0, 0), (0, 1), (1, 2)])
        y = expand_cartons_to_boxes(CartonSelection(frozenset({0}), 2), rel, 3)
        assert y.ids() == [0, 1]

    def test_shared_box(self):
        rel = RelTable([(0, 0), (1, 0)])
        y = expand_cartons_to_boxes(CartonSelection(frozenset({0, 1}), 2), rel, 1)
        assert y.ids() == [0]


class TestDuals:
    def test_worked_example(self):
        F = BitMatrix(1, 3)
        for b in range(3):
            F.set(0, b)
        Vb = np.array([10, 20, 30], dtype=np.int64)
        Vp = np.array([5], dtype=np.int64)
        y = Availability.from_box_ids([1, 2], 3)
        for solver in (fast_dual, naive_dual):
            d = solver(F, Vb, Vp, y)
            assert d.f == 15
            assert d.pi.tolist() == [15]
            assert d.w_boxes.tolist() == [-10, 0, 0]
            assert d.best_box.tolist() == [1]

    def test_smallest_fit_available_makes_w_zero(self, rng):
        m, Vb, Vp, _ = random_dual_instance(rng, 20, 60)
        y = Availability.from_box_ids(list(range(60)), 60)
        d = fast_dual(m, Vb, Vp, y)
        assert not d.w_boxes.any()
        assert d.f == greedy_primal(m, Vb, Vp, y)

    def test_single_box(self):
        F = BitMatrix(2, 1)
        F.set(0, 0)
        F.set(1, 0)
        y = Availability.from_box_ids([0], 1)
        d = fast_dual(F, np.array([50], dtype=np.int64), np.array([7, 3], dtype=np.int64), y)
        assert d.w_boxes.tolist() == [0]
        assert d.f == (50 - 7) + (50 - 3)

    def test_largest_box_only(self, rng):
        m, Vb, Vp, _ = random_dual_instance(rng, 15, 40)
        y = Availability.from_box_ids([39], 40)
        d = fast_dual(m, Vb, Vp, y)
        assert np.array_equal(d.pi, Vb[39] - Vp)

    def test_fast_equals_naive_equals_primal(self, rng):
        for _ in range(200):
            P = int(rng.integers(1, 51))
            B = int(rng.integers(1, 201))
            m, Vb, Vp, y = random_dual_instance(
                rng, P, B, density=float(rng.uniform(0.05, 0.7)),
                avail_density=float(rng.uniform(0.02, 0.5)),
            )
            df = fast_dual(m, Vb, Vp, y)
            dn = naive_dual(m, Vb, Vp, y)
            assert df.f == dn.f
            assert np.array_equal(df.pi, dn.pi)
            assert np.array_equal(df.w_boxes, dn.w_boxes)
            assert np.array_equal(df.best_box, dn.best_box)
            assert df.f == greedy_primal(m, Vb, Vp, y)
            assert (df.pi >= 0).all()
            assert (df.w_boxes <= 0).all()
            for b in y.ids():
                assert df.w_boxes[b] == 0

    def test_infeasible_unit_named(self):
        F = BitMatrix(3, 2)
        F.set(0, 1)
        F.set(2, 1)
        y = Availability.from_box_ids([1], 2)
        Vb = np.array([5, 9], dtype=np.int64)
        Vp = np.array([1, 1, 1], dtype=np.int64)
        for solver in (fast_dual, naive_dual):
            with pytest.raises(InfeasibleSubproblemError) as err:
                solver(F, Vb, Vp, y)
            assert err.value.unit == 1

    def test_unsorted_volumes_rejected(self):
        F = BitMatrix(1, 2)
        F.set(0, 0)
        y = Availability.from_box_ids([0], 2)
        with pytest.raises(ConfigurationError):
            fast_dual(F, np.array([9, 5], dtype=np.int64), np.array([1], dtype=np.int64), y)

    def test_wide_matrix_word_boundaries(self, rng):
        # exercise first-word scans beyond word 0 and partial final words
        P, B = 7, 131
        m, Vb, Vp, _ = random_dual_instance(rng, P, B, density=0.05)
        y = Availability.from_box_ids([128, 130], B)
        df = fast_dual(m, Vb, Vp, y)
        dn = naive_dual(m, Vb, Vp, y)
        assert df.f == dn.f
        assert np.array_equal(df.w_boxes, dn.w_boxes)


class TestCuts:
    def test_single_carton_per_box_sums_w(self, rng):
        rel = RelTable([(0, 0), (0, 1), (1, 2)])
        m, Vb, Vp, _ = random_dual_instance(rng, 10, 3, density=0.8)
        z = CartonSelection(frozenset({1}), 2)
        y = expand_cartons_to_boxes(z, rel, 3)
        # make the sub-problem feasible: carton 1 produces box 2 (largest)
        d = fast_dual(m, Vb, Vp, y)
        cut = transform_cut(d, z, rel)
        assert cut.w[0] == d.w_boxes[0] + d.w_boxes[1]
        assert cut.w[1] == d.w_boxes[2]

    def test_shared_box_jacobian_zeroing(self):
        rel = RelTable([(0, 0), (1, 0), (1, 1)])
        d_w = np.array([-7, 0], dtype=np.int64)
        from boxopt.subproblem import DualSolution

        d = DualSolution(f=11, pi=np.array([11], dtype=np.int64), w_boxes=d_w,
                         best_box=np.array([1], dtype=np.int64))
        z = CartonSelection(frozenset({0}), 2)  # box 0's other carton unselected
        cut = transform_cut(d, z, rel)
        # box 0: selected carton 0 -> J=1 for carton 0; carton 1 sees a
        # selected sibling -> J=0
        assert cut.w[0] == -7
        assert cut.w[1] == 0
        assert cut.s + cut.w[0] == 11  # tight at the generating z

    def test_cut_tightness_at_generator(self, rng):
        for _ in range(30):
            B = int(rng.integers(3, 20))
            K = int(rng.integers(2, 8))
            rel = random_rel(rng, K, B)
            m, Vb, Vp, _ = random_dual_instance(rng, int(rng.integers(1, 15)), B)
            M = int(rng.integers(1, K + 1))
            sel = frozenset(
                int(v) for v in rng.choice(K, size=M, replace=False)
            )
            largest_carton = rel.cartons_of(B - 1)[0]
            sel = frozenset(sel | {largest_carton})
            z = CartonSelection(sel, K)
            y = expand_cartons_to_boxes(z, rel, B)
            d = fast_dual(m, Vb, Vp, y)
            cut = transform_cut(d, z, rel)
            assert cut.value_at(z.selected) == d.f
            assert (cut.w <= 0).all()

    def test_cut_validity_under_other_selections(self, rng):
        for _ in range(20):
            B = int(rng.integers(4, 25))
            K = int(rng.integers(3, 10))
            rel = random_rel(rng, K, B)
            m, Vb, Vp, _ = random_dual_instance(rng, int(rng.integers(1, 15)), B)
            largest_carton = rel.cartons_of(B - 1)[0]
            M = int(rng.integers(1, K))

            def random_feasible_z():
                others = [k for k in range(K) if k != largest_carton]
                picked = rng.choice(others, size=M - 1, replace=False) if M > 1 else []
                return CartonSelection(frozenset({largest_carton, *map(int, picked)}), K)

            z0 = random_feasible_z()
            y0 = expand_cartons_to_boxes(z0, rel, B)
            d0 = fast_dual(m, Vb, Vp, y0)
            cut = transform_cut(d0, z0, rel)
            for _ in range(40):
                z = random_feasible_z()
                y = expand_cartons_to_boxes(z, rel, B)
                f = fast_dual(m, Vb, Vp, y).f
                assert cut.value_at(z.selected) <= f

    def test_jacobian_finite_difference(self, rng):
        for _ in range(30):
            B = int(rng.integers(3, 20))
            K = int(rng.integers(2, 8))
            rel = random_rel(rng, K, B)
            sel = frozenset(
                int(v) for v in rng.choice(K, size=int(rng.integers(1, K)), replace=False)
            )
            z = CartonSelection(sel, K)
            y = expand_cartons_to_boxes(z, rel, B)
            sel_count = {}
            for k in sel:
                for b in rel.boxes_of(k):
                    sel_count[b] = sel_count.get(b, 0) + 1
            for k in range(K):
                if k in sel:
                    continue
                y_plus = expand_cartons_to_boxes(CartonSelection(sel | {k}, K), rel, B)
                for b in rel.boxes_of(k):
                    jac = 1 if sel_count.get(b, 0) == 0 else 0
                    assert int(y_plus.get(b)) - int(y.get(b)) == jac

    def test_box_cut_fields(self, rng):
        m, Vb, Vp, y = random_dual_instance(rng, 10, 50)
        d = fast_dual(m, Vb, Vp, y)
        cut = make_box_cut(d, y, iteration=3)
        assert cut.s == d.f == int(d.pi.sum())
        assert np.array_equal(cut.w, d.w_boxes)
        assert cut.space == "boxes"
        # constant cut when no fitting box is below any best
        y_all = Availability.from_box_ids(list(range(50)), 50)
        d_all = fast_dual(m, Vb, Vp, y_all)
        c_all = make_box_cut(d_all, y_all)
        assert not c_all.w.any()

    def test_box_cut_convex_validity(self, rng):
        for _ in range(10):
            m, Vb, Vp, y = random_dual_instance(rng, 12, 60)
            d = fast_dual(m, Vb, Vp, y)
            cut = make_box_cut(d, y)
            for _ in range(100):
                avail = rng.random(60) < float(rng.uniform(0.05, 0.6))
                avail[59] = True
                y2 = Availability.from_box_ids(np.nonzero(avail)[0].tolist(), 60)
                f2 = fast_dual(m, Vb, Vp, y2).f
                assert cut.value_at(y2.ids()) <= f2


class TestCutPool:
    def test_dedup(self):
        w = np.array([-1, 0], dtype=np.int64)
        pool = CutPool()
        assert pool.add(Cut(5, w, 0))
        assert not pool.add(Cut(5, w.copy(), 1))
        assert pool.add(Cut(6, w, 2))
        assert len(pool) == 2

    def test_jsonl_round_trip(self):
        pool = CutPool([
            Cut(5, np.array([-1, 0, -3], dtype=np.int64), 0),
            Cut(9, np.array([0, 0, 0], dtype=np.int64), 1),
        ])
        buf = io.StringIO()
        pool.dump_jsonl(buf)
        text = buf.getvalue()
        assert '"w":{"0":-1,"2":-3}' in text.splitlines()[0]
        again = CutPool.load_jsonl(text.splitlines(), size=3)
        assert len(again) == 2
        for a, b in zip(pool, again):
            assert a.s == b.s and np.array_equal(a.w, b.w)
