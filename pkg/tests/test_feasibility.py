import math

import numpy as np
import pytest

from cfpopt.feasibility import (
    SolverSpec,
    art3plus_solve,
    cfp_with_level,
    cspm_solve,
    pocs_solve,
)
from cfpopt.model import (
    AffineConstraint,
    Bounds,
    Counters,
    CustomFunction,
    Problem,
    QuadraticFunction,
)
from cfpopt.projections import ZeroSubgradientError


def halfspace_ge1():
    # g(x) = 1 - x <= 0, i.e. x >= 1
    return AffineConstraint.geq([1.0], 1.0)


class TestCspm:
    def test_single_halfspace_exact_step(self):
        out = cspm_solve([halfspace_ge1()], [0.0], lam=1.0)
        assert out.found
        assert out.x == pytest.approx([1.0])
        assert out.moves == 1
        # the certifying pass re-checks the constraint, so two visits total
        assert out.projections == 2
        assert out.sweeps == 2

    def test_feasible_start_no_moves(self):
        out = cspm_solve([halfspace_ge1()], [3.0], lam=1.5)
        assert out.found
        assert out.moves == 0
        assert out.sweeps == 1
        np.testing.assert_array_equal(out.x, [3.0])

    def test_inconsistent_times_out(self):
        cons = [AffineConstraint.leq([1.0], -1.0), AffineConstraint.geq([1.0], 1.0)]
        out = cspm_solve(cons, [0.0], lam=1.0, max_sweeps=1000)
        assert not out.found
        assert out.sweeps == 1000

    def test_empty_constraints_rejected(self):
        with pytest.raises(ValueError):
            cspm_solve([], [0.0])

    def test_counters_shared_across_solves(self):
        counters = Counters()
        cspm_solve([halfspace_ge1()], [0.0], lam=1.0, counters=counters)
        cspm_solve([halfspace_ge1()], [0.0], lam=1.0, counters=counters)
        assert counters.projections == 4

    def test_max_projections_limit_mode(self):
        cons = [AffineConstraint.leq([1.0], -1.0), AffineConstraint.geq([1.0], 1.0)]
        out = cspm_solve(cons, [0.0], lam=1.0, max_sweeps=10_000, max_projections=50)
        assert not out.found
        assert out.projections <= 50 + len(cons)

    def test_zero_subgradient_propagates(self):
        bad = CustomFunction(lambda x: 1.0, lambda x: np.zeros_like(x), name="bad")
        with pytest.raises(ZeroSubgradientError):
            cspm_solve([bad], [0.0])

    def test_fejer_distances_nonincreasing(self):
        rng = np.random.default_rng(42)
        n = 4
        z = rng.standard_normal(n)  # feasible anchor by construction
        cons = []
        for _ in range(6):
            a = rng.standard_normal(n)
            cons.append(AffineConstraint.leq(a, float(a @ z) + abs(rng.standard_normal())))
        for lam in (0.5, 1.0, 1.5, 1.9):
            hist = []
            cspm_solve(cons, rng.standard_normal(n) * 5, lam=lam, max_sweeps=50, history=hist)
            dists = [np.linalg.norm(x - z) for x in hist]
            for d0, d1 in zip(dists, dists[1:]):
                assert d1 <= d0 + 1e-9


class TestPocs:
    def test_orthogonal_hyperplanes_one_sweep(self):
        cons = [AffineConstraint.eq([1.0, 0.0], 0.0), AffineConstraint.eq([0.0, 1.0], 0.0)]
        out = pocs_solve(cons, [1.0, 1.0], lam=1.0)
        assert out.found
        np.testing.assert_allclose(out.x, [0.0, 0.0], atol=1e-15)

    def test_feasible_start(self):
        out = pocs_solve([AffineConstraint.leq([1.0, 0.0], 1.0)], [0.0, 0.5])
        assert out.found
        np.testing.assert_array_equal(out.x, [0.0, 0.5])

    def test_rejects_nonaffine(self):
        ball = QuadraticFunction(2 * np.eye(2), np.zeros(2), -1.0)
        with pytest.raises(ValueError):
            pocs_solve([ball], [0.0, 0.0])

    def test_identical_iterates_with_cspm(self):
        rng = np.random.default_rng(9)
        cons = []
        z = rng.standard_normal(5)
        for _ in range(8):
            a = rng.standard_normal(5)
            cons.append(AffineConstraint.leq(a, float(a @ z) + 0.1))
        x0 = rng.standard_normal(5) * 3
        h1, h2 = [], []
        o1 = cspm_solve(cons, x0, lam=1.5, history=h1)
        o2 = pocs_solve(cons, x0, lam=1.5, history=h2)
        assert o1.found and o2.found
        assert len(h1) == len(h2)
        for a_, b_ in zip(h1, h2):
            np.testing.assert_allclose(a_, b_, rtol=0, atol=1e-12)


class TestArt3Plus:
    def test_midpoint_rule(self):
        out = art3plus_solve([AffineConstraint.interval([1.0], 0.0, 2.0)], [5.0])
        assert out.found
        assert out.x == pytest.approx([1.0])

    def test_reflection_rule(self):
        out = art3plus_solve([AffineConstraint.interval([1.0], 0.0, 2.0)], [2.5])
        assert out.found
        assert out.x == pytest.approx([1.5])

    def test_feasible_start_certifies_in_one_pass(self):
        rows = [
            AffineConstraint.interval([1.0, 0.0], 0.0, 2.0),
            AffineConstraint.interval([0.0, 1.0], 0.0, 2.0),
        ]
        out = art3plus_solve(rows, [1.0, 1.0])
        assert out.found
        assert out.moves == 0
        assert out.sweeps == 1
        assert out.projections == 2

    def test_queue_skips_satisfied_rows(self):
        # first pass fixes row 0 only; row 0 stays queued (it moved) while
        # row 1 is dropped, so the second pass touches a shorter queue
        rows = [
            AffineConstraint.interval([1.0, 0.0], 0.0, 2.0),
            AffineConstraint.interval([0.0, 1.0], 0.0, 2.0),
        ]
        counters = Counters()
        out = art3plus_solve(rows, [2.5, 1.0], counters=counters)
        assert out.found
        # pass 1: both visited (one move); pass 2: only the moved row; then a
        # full verification pass over both
        assert out.projections == 2 + 1 + 2

    def test_rejects_nonaffine(self):
        ball = QuadraticFunction(2 * np.eye(1), np.zeros(1), -1.0)
        with pytest.raises(ValueError):
            art3plus_solve([ball], [0.0])

    def test_inconsistent_times_out(self):
        rows = [AffineConstraint.leq([1.0], -1.0), AffineConstraint.geq([1.0], 1.0)]
        out = art3plus_solve(rows, [0.0], max_sweeps=200)
        assert not out.found

    def test_agreement_with_cspm_on_wide_intervals(self):
        # split every interval into two halfspaces for CSPM; statuses agree
        rng = np.random.default_rng(17)
        rows, halves = [], []
        z = rng.standard_normal(3)
        for _ in range(5):
            a = rng.standard_normal(3)
            c = float(a @ z)
            rows.append(AffineConstraint.interval(a, c - 50.0, c + 50.0))
            halves.append(AffineConstraint.leq(a, c + 50.0))
            halves.append(AffineConstraint.geq(a, c - 50.0))
        x0 = z + rng.standard_normal(3)
        assert art3plus_solve(rows, x0).found == cspm_solve(halves, x0).found


class TestCfpWithLevel:
    def problem(self):
        # min x^2 over {x >= 1}
        return Problem(QuadraticFunction([[2.0]], [0.0]), [halfspace_ge1()], fstar=1.0, name="p")

    def test_infinite_level_is_plain_feasibility(self):
        p = self.problem()
        out = cfp_with_level(p, np.inf, "cspm", x0=[0.0], lam=1.0)
        assert out.found
        assert out.x == pytest.approx([1.0])
        assert out.obj_evals == 0  # objective never touched

    def test_feasible_band(self):
        p = self.problem()
        counters = Counters()
        out = cfp_with_level(p, 3.6, "cspm", x0=[2.0], counters=counters)
        assert out.found
        x = out.x[0]
        assert 1.0 - 1e-8 <= x <= math.sqrt(3.6) + 1e-6
        assert counters.obj_evals > 0  # level checks evaluate the objective

    def test_empty_level_set_times_out(self):
        p = self.problem()
        out = cfp_with_level(p, 0.5, "cspm", x0=[2.0], max_sweeps=300)
        assert not out.found

    def test_level_at_objective_minimum_certifies_infeasibility(self):
        # a vanishing objective subgradient at a violated level proves the
        # level set empty; starting at the minimizer of x^2 triggers it
        p = Problem(QuadraticFunction([[2.0]], [0.0]), [AffineConstraint.geq([1.0], -10.0)])
        out = cfp_with_level(p, -1.0, "cspm", x0=[0.0], lam=1.0)
        assert not out.found
        assert out.infeasibility_certified
        # from a generic start the same empty level set times out gracefully
        out = cfp_with_level(p, -1.0, "cspm", x0=[0.5], lam=1.0, max_sweeps=100)
        assert not out.found

    def test_art3_solver_with_level(self):
        p = Problem(
            QuadraticFunction([[2.0]], [0.0]),
            [AffineConstraint.interval([1.0], 1.0, 4.0)],
        )
        out = cfp_with_level(p, 3.6, "art3+", x0=[5.0])
        assert out.found
        assert 1.0 - 1e-8 <= out.x[0] <= math.sqrt(3.6) + 1e-6

    def test_bad_level_rejected(self):
        with pytest.raises(ValueError):
            cfp_with_level(self.problem(), -np.inf, "cspm")

    def test_bounds_join_the_cycle(self):
        p = Problem(
            QuadraticFunction([[0.0]], [1.0]),
            [],
            bounds=Bounds([0.0], [1.0]),
        )
        out = cfp_with_level(p, 0.6, "cspm", x0=[2.0])
        assert out.found
        assert 0.0 - 1e-8 <= out.x[0] <= 0.6 + 1e-8

    def test_solver_spec_validation(self):
        with pytest.raises(ValueError):
            SolverSpec(kind="gradient-descent")
