import csv
import dataclasses

import numpy as np
import pytest

from cfpopt.harness import (
    AGGREGATE_METRICS,
    VARIANTS,
    HarnessConfig,
    RunReport,
    aggregate,
    aggregate_by_variant,
    builtin_problems,
    emit_report,
    quality_score,
    run_variant,
    speedup_factor,
)
from cfpopt.schemes import CASE1, CASE2_OR_3

TABLE_NAMES = {
    "ls_cspm", "ls_art3+", "ls_acc_cspm", "ls_sup_cspm", "ls_sup_art3+",
    "ls_acc_sup_cspm", "bis_cspm", "bis_art3+", "bis_acc_cspm",
    "bis_sup_cspm", "bis_sup_art3+", "bis_acc_sup_cspm",
}


class TestQualityScore:
    def test_zero_optimum_branch(self):
        assert quality_score(0.5, 0.0) == pytest.approx(0.5)

    def test_small_optimum_branch(self):
        assert quality_score(0.55, 0.5) == pytest.approx(0.05)

    def test_relative_branch(self):
        assert quality_score(-90.0, -100.0) == pytest.approx(0.1)

    def test_branch_order_zero_before_small(self):
        # f* = 0 must hit the first branch even though |f*| <= 1
        assert quality_score(2.0, 0.0) == 2.0

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            quality_score(np.inf, 1.0)


class TestAggregate:
    def test_small_set(self):
        s = aggregate([0.0, 0.0, 1.0])
        assert s.average == pytest.approx(1.0 / 3.0)
        assert s.median == 0.0

    def test_single_value_degenerate(self):
        s = aggregate([7.0])
        assert s.average == s.median == s.q10 == s.q90 == 7.0

    def test_nearest_rank_quantiles(self):
        s = aggregate(range(1, 11))
        assert s.q10 == 1.0
        assert s.q90 == 9.0

    def test_even_median_is_midpoint(self):
        s = aggregate([1.0, 2.0, 3.0, 4.0])
        assert s.median == pytest.approx(2.5)

    def test_quantile_order_invariant(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            s = aggregate(rng.standard_normal(rng.integers(1, 40)))
            assert s.q10 <= s.median <= s.q90

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            aggregate([])

    def test_field_selector_over_reports(self):
        reports = [_report(projections=10), _report(projections=30)]
        s = aggregate(reports, key="projections")
        assert s.average == pytest.approx(20.0)


def _report(problem="p", variant="v", projections=10, obj_evals=5, trace=()):
    return RunReport(problem=problem, variant=variant, status=CASE2_OR_3,
                     f_hat=1.0, quality=0.0, projections=projections,
                     obj_evals=obj_evals, outer_steps=3, ms=1.0,
                     trace=list(trace))


class TestSpeedup:
    def test_equal_counts_is_zero(self):
        assert speedup_factor(_report(), _report()) == 0.0

    def test_ten_times_work_is_nine(self):
        a = _report(projections=10)
        b = _report(projections=100)
        assert speedup_factor(a, b) == pytest.approx(9.0)

    def test_decrease_rate_both_perspectives(self):
        # a drops 2 per step, b drops 1 per step
        a = _report(trace=[(0, 10.0), (1, 8.0), (2, 6.0)])
        b = _report(trace=[(0, 10.0), (1, 9.0), (2, 8.0)])
        assert speedup_factor(a, b, "objective-decrease") == pytest.approx(1.0)
        assert speedup_factor(b, a, "objective-decrease") == pytest.approx(-0.5)

    def test_zero_denominator_is_missing(self):
        a = _report(projections=0)
        assert speedup_factor(a, _report()) is None
        flat = _report(trace=[(0, 5.0), (1, 5.0)])
        assert speedup_factor(_report(trace=[(0, 2.0), (1, 1.0)]), flat,
                              "objective-decrease") is None

    def test_different_problems_rejected(self):
        with pytest.raises(ValueError):
            speedup_factor(_report(problem="a"), _report(problem="b"))

    def test_unknown_metric_rejected(self):
        with pytest.raises(ValueError):
            speedup_factor(_report(), _report(), "wall-clock")


class TestRegistry:
    def test_exactly_twelve_table_names(self):
        assert set(VARIANTS) == TABLE_NAMES
        assert len(VARIANTS) == 12

    def test_dispatch_fields_consistent(self):
        for name, v in VARIANTS.items():
            assert v.name == name
            assert ("sup" in name) == v.superiorized
            assert ("acc" in name) == v.scheme.endswith("accelerated")
            assert name.startswith("ls" if v.scheme.startswith("levelset") else "bis")
            assert v.feas_solver in name


class TestRunVariant:
    def test_levelset_cspm_quality(self):
        p = builtin_problems()["simple_qp"]
        r = run_variant("ls_cspm", p, HarnessConfig(), x0=[2.0])
        assert r.status == CASE2_OR_3
        assert r.quality is not None
        assert r.quality <= 0.1 + 1e-5

    def test_bisection_cspm_gamma_accuracy(self):
        p = builtin_problems()["simple_qp"]
        cfg = HarnessConfig(f_lower=0.0, gamma=1e-5)
        r = run_variant("bis_cspm", p, cfg, x0=[2.0])
        assert abs(r.f_hat - 1.0) <= 1e-5 + 1e-6

    def test_art3_on_nonlinear_constraints_rejected(self):
        p = builtin_problems()["imrt_small"]
        with pytest.raises(ValueError):
            run_variant("ls_art3+", p, HarnessConfig())

    def test_unknown_variant_rejected(self):
        with pytest.raises(ValueError):
            run_variant("ls_gradient", builtin_problems()["simple_qp"])

    def test_deterministic_reports(self):
        p = builtin_problems()["qp2d"]
        cfg = HarnessConfig()
        a = run_variant("ls_sup_cspm", p, cfg, x0=[2.0, 2.0])
        b = run_variant("ls_sup_cspm", p, cfg, x0=[2.0, 2.0])
        fields = {f.name for f in dataclasses.fields(RunReport)} - {"ms", "best_x", "trace"}
        for f in fields:
            assert getattr(a, f) == getattr(b, f)
        assert a.trace == b.trace
        assert a.best_x.tobytes() == b.best_x.tobytes()

    def test_projection_budget_replaces_sweep_cap(self):
        p = builtin_problems()["infeasible"]
        # the 5-sweep cap would stop after 10 projections; the budget overrides
        r = run_variant("ls_cspm", p, HarnessConfig(max_sweeps=5, max_projections=100))
        assert r.status == CASE1
        assert 99 <= r.projections <= 102

    def test_infeasible_all_variants_case1(self):
        p = builtin_problems()["infeasible"]
        cfg = HarnessConfig(max_sweeps=200)
        for name in VARIANTS:
            r = run_variant(name, p, cfg)
            assert r.status == CASE1, name
            assert r.f_hat is None


class TestEmitReport:
    def test_empty_reports_header_only(self, tmp_path):
        emit_report([], {}, tmp_path)
        lines = (tmp_path / "runs.csv").read_text().strip().splitlines()
        assert len(lines) == 1
        assert lines[0].startswith("problem,variant,status")
        assert not (tmp_path / "aggregate.csv").exists()

    def test_single_run_row_and_degenerate_stats(self, tmp_path):
        reports = [_report()]
        emit_report(reports, aggregate_by_variant(reports), tmp_path)
        rows = list(csv.DictReader(open(tmp_path / "runs.csv")))
        assert len(rows) == 1
        agg = list(csv.DictReader(open(tmp_path / "aggregate.csv")))
        metrics = {r["metric"] for r in agg}
        assert metrics == set(AGGREGATE_METRICS)
        for row in agg:
            assert row["avg"] == row["median"] == row["q10"] == row["q90"]

    def test_numeric_round_trip(self, tmp_path):
        p = builtin_problems()["simple_qp"]
        r = run_variant("ls_cspm", p, HarnessConfig(), x0=[2.0])
        emit_report([r], {}, tmp_path)
        row = next(csv.DictReader(open(tmp_path / "runs.csv")))
        assert float(row["f_hat"]) == r.f_hat
        assert float(row["Q"]) == r.quality
        assert int(row["projections"]) == r.projections
        assert int(row["obj_evals"]) == r.obj_evals
