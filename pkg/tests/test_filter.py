"""Constraint construction, inactivity analysis, and the safety filter."""

import numpy as np
import pytest

from cbf_guard import (
    BarrierStack,
    ClassKe,
    PolytopicInputSet,
    QuadraticBarrier,
    certify,
    constraint_form,
    epsilon_bar,
    epsilon_threshold,
    find_inactive_on_level_set,
    inactivity_map,
    is_filter_inactive,
)
from cbf_guard.errors import DegenerateInfeasible, NonpositiveMargin, NotFound
from cbf_guard.filter import (
    LABEL_ACTIVE,
    LABEL_INACTIVE,
    LABEL_OUTSIDE,
    worker_count,
    write_inactivity_csv,
)


class TestConstraintForm:
    def test_velocity_point(self, di, ellipse, gamma2):
        row = constraint_form(di, ellipse, gamma2, 0.0, [0.0, 0.5])
        assert not row.degenerate
        assert row.alpha[0] == pytest.approx(1.0)
        assert row.beta == pytest.approx(0.5)

    def test_boundary_point_degenerate_vacuous(self, di, ellipse, gamma2):
        row = constraint_form(di, ellipse, gamma2, 0.0, [-1.0, 0.0])
        assert row.degenerate
        assert row.alpha is None and row.beta is None

    def test_degenerate_infeasible_with_tightening(self, di, ellipse, gamma2):
        # At the boundary with d > 0 the drift margin gamma(-d) is negative.
        with pytest.raises(DegenerateInfeasible):
            constraint_form(di, ellipse, gamma2, 0.1, [-1.0, 0.0])

    def test_alpha_is_unit(self, di, ellipse, gamma2):
        rng = np.random.default_rng(0)
        for _ in range(50):
            x = rng.uniform([-1, -0.7], [1, 0.7])
            row = constraint_form(di, ellipse, gamma2, 0.0, x)
            if not row.degenerate:
                assert np.linalg.norm(row.alpha) == pytest.approx(1.0, abs=1e-12)

    def test_negative_tightening_rejected(self, di, ellipse, gamma2):
        with pytest.raises(ValueError):
            constraint_form(di, ellipse, gamma2, -0.1, [0.0, 0.5])


class TestEpsilonThreshold:
    def test_velocity_point(self, di, ellipse, gamma2, u_box_1d):
        eps = epsilon_threshold(di, ellipse, gamma2, [0.0, 0.5], u_box_1d)
        assert eps == pytest.approx(0.5)
        # ||L_g h|| = 2 > eps: the filter can act here.
        assert 2.0 > eps

    def test_interior_point_is_inactive(self, di, ellipse, gamma2, u_box_1d):
        x = [0.0, 0.01]
        eps = epsilon_threshold(di, ellipse, gamma2, x, u_box_1d)
        assert eps == pytest.approx((2 * 0.9998 + 0.0) / 2.0, rel=1e-9)
        assert 0.04 < eps  # ||L_g h|| = 0.04 below the threshold

    def test_degenerate_direction_rejected(self, di, ellipse, gamma2, u_box_1d):
        with pytest.raises(DegenerateInfeasible):
            epsilon_threshold(di, ellipse, gamma2, [-1.0, 0.0], u_box_1d)


class TestIsFilterInactive:
    def test_single_cbf_boundary(self, di, single_stack, u_box_1d):
        assert is_filter_inactive(di, single_stack, [-1.0, 0.0], u_box_1d)

    def test_lens_stack_boundary_active(self, di, lens_stack, u_box_1d):
        assert not is_filter_inactive(di, lens_stack, [-1.0, 0.0], u_box_1d)

    def test_strongly_active_row(self, di, single_stack, u_box_1d):
        # Near the boundary with inward velocity the row binds.
        assert not is_filter_inactive(di, single_stack, [0.0, 0.7], u_box_1d)


class TestCertify:
    def test_pass_through(self, di, single_stack, u_box_1d):
        res = certify([0.2], [0.0, 0.0], di, single_stack, u_box_1d)
        assert np.allclose(res.u_cert, [0.2])
        assert res.active_cbf_indices == []

    def test_clamp_to_cbf_row(self, di, single_stack, u_box_1d):
        res = certify([2.0], [0.0, 0.5], di, single_stack, u_box_1d)
        assert res.u_cert[0] == pytest.approx(0.5)
        assert res.active_cbf_indices == [0]

    def test_result_feasible(self, di, lens_stack, u_box_1d, gamma2):
        rng = np.random.default_rng(1)
        from conftest import sample_in_stack

        for x in sample_in_stack(lens_stack, 50, rng):
            u_des = rng.uniform(-3.0, 3.0, size=1)
            res = certify(u_des, x, di, lens_stack, u_box_1d)
            assert u_box_1d.contains(res.u_cert, tol=1e-9)
            for b, g, d in lens_stack.entries:
                row = constraint_form(di, b, g, d, x)
                if not row.degenerate:
                    assert row.alpha @ res.u_cert <= row.beta + 1e-9

    def test_idempotent(self, di, lens_stack, u_box_1d):
        rng = np.random.default_rng(2)
        from conftest import sample_in_stack

        for x in sample_in_stack(lens_stack, 20, rng):
            u1 = certify(rng.uniform(-3, 3, 1), x, di, lens_stack, u_box_1d).u_cert
            u2 = certify(u1, x, di, lens_stack, u_box_1d).u_cert
            assert np.array_equal(u1, u2)

    def test_barrier_scaling_invariance(self, di, u_box_1d, gamma2):
        """Scaling h by k > 0 (with the same linear gamma) leaves the filter
        unchanged: the CBF condition is positively homogeneous in h."""

        class ScaledBarrier:
            def __init__(self, base, k):
                self.base, self.k = base, k
                self.c = base.c
                self.n = base.n
                self.h_max = k * base.h_max

            def value(self, x):
                return self.k * self.base.value(x)

            def grad(self, x):
                return self.k * self.base.grad(x)

            def bounding_box(self, level=0.0):
                return self.base.bounding_box(level / self.k)

        base = QuadraticBarrier([0.0, 0.0], [1.0, 2.0])
        rng = np.random.default_rng(3)
        for k in (0.5, 3.0, 17.0):
            stack_a = BarrierStack([(base, gamma2, 0.0)])
            stack_b = BarrierStack([(ScaledBarrier(base, k), gamma2, 0.0)])
            for _ in range(20):
                x = rng.uniform([-1, -0.7], [1, 0.7])
                if base.value(x) < 0:
                    continue
                u_des = rng.uniform(-3, 3, 1)
                ua = certify(u_des, x, di, stack_a, u_box_1d).u_cert
                ub = certify(u_des, x, di, stack_b, u_box_1d).u_cert
                assert np.allclose(ua, ub, atol=1e-9)

    def test_was_inactive_flag(self, di, single_stack, u_box_1d):
        res = certify([-1.0], [-1.0, 0.0], di, single_stack, u_box_1d)
        assert res.was_inactive
        assert np.allclose(res.u_cert, [-1.0])


class TestEpsilonBar:
    def test_reference_value(self, di, ellipse, u_box_1d):
        stack = BarrierStack([(ellipse, ClassKe(2.0), 0.0)])
        assert epsilon_bar(stack, u_box_1d, [1.0]) == pytest.approx(1.5)

    def test_small_slope_small_mf(self, di, ellipse, u_box_1d):
        stack = BarrierStack([(ellipse, ClassKe(1e-9), 0.0)])
        assert epsilon_bar(stack, u_box_1d, [0.0]) == pytest.approx(0.0, abs=1e-9)

    def test_nonpositive_margin(self, ellipse):
        stack = BarrierStack([(ellipse, ClassKe(2.0), 0.0)])
        shifted = PolytopicInputSet.box([0.0], [4.0])  # u_c = 2, r = 2
        with pytest.raises(NonpositiveMargin):
            epsilon_bar(stack, shifted, [1.0])

    def test_max_over_barriers(self, u_box_1d, lens_stack):
        val = epsilon_bar(lens_stack, u_box_1d, [1.0, 3.0])
        assert val == pytest.approx((3.0 + 2.0) / 2.0)


class TestFindInactiveOnLevelSet:
    def test_zero_level_witnesses(self, di, ellipse):
        x = find_inactive_on_level_set(di, ellipse, 0.0)
        assert abs(x[0]) == pytest.approx(1.0, abs=1e-6)
        assert abs(x[1]) == pytest.approx(0.0, abs=1e-6)

    def test_mid_level(self, di, ellipse):
        x = find_inactive_on_level_set(di, ellipse, 0.75)
        assert abs(x[0]) == pytest.approx(0.5, abs=1e-6)
        assert abs(x[1]) == pytest.approx(0.0, abs=1e-6)

    def test_five_levels(self, di, ellipse):
        for d in np.linspace(0.0, 0.9, 5):
            x = find_inactive_on_level_set(di, ellipse, float(d))
            assert abs(ellipse.value(x) - d) <= 1e-8
            lg = ellipse.grad(x) @ di.g(x)
            assert np.linalg.norm(lg) <= 1e-8

    def test_level_near_top_approaches_center(self, di, ellipse):
        x = find_inactive_on_level_set(di, ellipse, 0.9999)
        assert np.linalg.norm(x - ellipse.c) <= 0.02

    def test_flat_barrier_not_found(self, di):
        flat = QuadraticBarrier([0.0, 0.0], [0.0, 0.0])
        with pytest.raises((NotFound, ValueError)):
            find_inactive_on_level_set(di, flat, 0.5)

    def test_invalid_level(self, di, ellipse):
        with pytest.raises(ValueError):
            find_inactive_on_level_set(di, ellipse, 1.0)


class TestInactivityMap:
    def test_inactive_cells_cluster_on_zero_velocity(self, di, single_stack, u_box_1d):
        grid = [np.linspace(-0.99, 0.99, 21), np.linspace(-0.69, 0.69, 21)]
        states, labels = inactivity_map(di, single_stack, u_box_1d, grid)
        inactive = states[labels == LABEL_INACTIVE]
        assert len(inactive) > 0
        assert np.all(np.abs(inactive[:, 1]) <= 0.3)

    def test_lens_stack_has_no_inactive_cells(self, di, lens_stack, u_box_1d):
        grid = [np.linspace(-1.2, 1.2, 25), np.linspace(-0.6, 0.6, 25)]
        _, labels = inactivity_map(di, lens_stack, u_box_1d, grid)
        assert np.sum(labels == LABEL_INACTIVE) == 0

    def test_all_outside(self, di, single_stack, u_box_1d):
        grid = [np.linspace(5.0, 6.0, 4), np.linspace(5.0, 6.0, 4)]
        _, labels = inactivity_map(di, single_stack, u_box_1d, grid)
        assert np.all(labels == LABEL_OUTSIDE)

    def test_parallel_matches_serial(self, di, single_stack, u_box_1d):
        grid = [np.linspace(-1.2, 1.2, 30), np.linspace(-0.8, 0.8, 30)]
        _, serial = inactivity_map(di, single_stack, u_box_1d, grid, workers=1)
        _, parallel = inactivity_map(di, single_stack, u_box_1d, grid, workers=4)
        assert np.array_equal(serial, parallel)

    def test_worker_count_env_cap(self, monkeypatch):
        monkeypatch.setenv("CBF_GUARD_THREADS", "2")
        assert worker_count() == 2
        assert worker_count(8) == 2
        assert worker_count(1) == 1

    def test_csv_output(self, di, single_stack, u_box_1d, tmp_path):
        grid = [np.linspace(-0.5, 0.5, 3), np.linspace(-0.5, 0.5, 3)]
        states, labels = inactivity_map(di, single_stack, u_box_1d, grid)
        path = tmp_path / "map.csv"
        write_inactivity_csv(path, states, labels)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "x1,x2,label"
        assert len(lines) == 10
        assert all(line.rsplit(",", 1)[1] in "012" for line in lines[1:])
