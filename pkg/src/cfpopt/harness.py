"""Benchmark harness: the solver-variant matrix, scoring and CSV reports.

Twelve named variants combine a scheme (level set or bisection, plain or
accelerated) with a feasibility solver (CSPM or ART3+), optionally
superiorized.  Each (variant, problem) run yields a :class:`RunReport` with
the best value found, a quality score against the best known value when one
is supplied, and the projection / objective-evaluation counters that serve
as machine-independent complexity measures.
"""

from __future__ import annotations

import csv
import json
import math
import statistics
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .feasibility import SolverSpec
from .model import AffineConstraint, Bounds, CustomFunction, DoseModel, Problem, QuadraticFunction, make_pnorm, make_underdose
from .schemes import (
    AccelerationConfig,
    BisectionConfig,
    EpsilonRule,
    accelerated_level_set_solve,
    bisection_solve,
    level_set_solve,
)
from .superiorize import SuperiorizationConfig

__all__ = [
    "VariantSpec",
    "VARIANTS",
    "HarnessConfig",
    "RunReport",
    "StatsSummary",
    "quality_score",
    "run_variant",
    "aggregate",
    "aggregate_by_variant",
    "speedup_factor",
    "emit_report",
    "builtin_problems",
    "AGGREGATE_METRICS",
]


@dataclass(frozen=True)
class VariantSpec:
    """One cell of the tested-scheme matrix."""

    name: str
    scheme: str  # levelset | levelset-accelerated | bisection | bisection-accelerated
    feas_solver: str  # cspm | art3+ | pocs
    superiorized: bool = False

    def __post_init__(self):
        if self.scheme not in ("levelset", "levelset-accelerated", "bisection", "bisection-accelerated"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.feas_solver not in ("cspm", "art3+", "pocs"):
            raise ValueError(f"unknown feasibility solver {self.feas_solver!r}")


def _variant_table() -> dict[str, VariantSpec]:
    table = {}
    for name, scheme, solver, sup in (
        ("ls_cspm", "levelset", "cspm", False),
        ("ls_art3+", "levelset", "art3+", False),
        ("ls_acc_cspm", "levelset-accelerated", "cspm", False),
        ("ls_sup_cspm", "levelset", "cspm", True),
        ("ls_sup_art3+", "levelset", "art3+", True),
        ("ls_acc_sup_cspm", "levelset-accelerated", "cspm", True),
        ("bis_cspm", "bisection", "cspm", False),
        ("bis_art3+", "bisection", "art3+", False),
        ("bis_acc_cspm", "bisection-accelerated", "cspm", False),
        ("bis_sup_cspm", "bisection", "cspm", True),
        ("bis_sup_art3+", "bisection", "art3+", True),
        ("bis_acc_sup_cspm", "bisection-accelerated", "cspm", True),
    ):
        table[name] = VariantSpec(name, scheme, solver, sup)
    return table


VARIANTS: dict[str, VariantSpec] = _variant_table()


@dataclass(frozen=True)
class HarnessConfig:
    """All solver knobs in one place; defaults follow the benchmark protocol."""

    max_sweeps: int = 1000
    feas_tol: float = 1e-8
    lam: float = 1.5
    gamma: float = 1e-5
    f_lower: float | None = None
    epsilon_mode: str = "max-floor"
    epsilon_factor: float = 0.1
    epsilon_floor: float = 0.1
    accel_c: float = 1.0
    accel_s: float = 0.5
    block: int = 1000
    accel_step: float = 1.9
    accel_adaptive: bool = False
    sup_n: int = 1
    sup_a: float = 0.5
    max_outer: int = 10_000
    seed: int | None = None
    max_projections: int | None = None

    def epsilon_rule(self) -> EpsilonRule:
        return EpsilonRule(self.epsilon_mode, self.epsilon_factor, self.epsilon_floor)

    def acceleration(self) -> AccelerationConfig:
        return AccelerationConfig(self.accel_c, self.accel_s, self.block,
                                  self.accel_step, self.accel_adaptive)

    def superiorization(self) -> SuperiorizationConfig:
        return SuperiorizationConfig(N=self.sup_n, a=self.sup_a)

    def bisection(self) -> BisectionConfig:
        return BisectionConfig(self.f_lower, self.gamma)


@dataclass
class RunReport:
    """Result of one (variant, problem) run."""

    problem: str
    variant: str
    status: str
    f_hat: float | None
    quality: float | None
    projections: int
    obj_evals: int
    outer_steps: int
    ms: float
    trace: list = field(default_factory=list)  # (step, f value) per feasible point
    best_x: np.ndarray | None = None


@dataclass(frozen=True)
class StatsSummary:
    """Average, median (midpoint rule) and nearest-rank 10/90 quantiles."""

    average: float
    median: float
    q10: float
    q90: float


def quality_score(f_hat: float, fstar: float) -> float:
    """Deviation-from-optimality score; closer to 0 is better.

    The value itself when the best known value is 0, the absolute gap when
    the best known value is at most 1 in magnitude, the relative gap
    otherwise; the branches are tested in exactly that order.
    """
    if not (np.isfinite(f_hat) and np.isfinite(fstar)):
        raise ValueError("quality score needs finite values")
    if fstar == 0.0:
        return f_hat
    if abs(fstar) <= 1.0:
        return f_hat - fstar
    return (f_hat - fstar) / abs(fstar)


def _validate_pairing(variant: VariantSpec, problem: Problem) -> None:
    if variant.feas_solver in ("art3+", "pocs"):
        for c in problem.all_constraints():
            if not isinstance(c, AffineConstraint):
                raise ValueError(
                    f"variant {variant.name!r} needs affine (interval) constraints, "
                    f"but problem {problem.name!r} has {c!r}"
                )


def run_variant(variant: VariantSpec | str, problem: Problem,
                config: HarnessConfig | None = None,
                fstar: float | None = None, x0=None) -> RunReport:
    """Execute one variant on one problem and report counters and scores.

    Deterministic: identical inputs give an identical report apart from the
    wall-time field.  Raises before any compute when the variant cannot run
    on the problem's constraint kinds.
    """
    if isinstance(variant, str):
        if variant not in VARIANTS:
            raise ValueError(f"unknown variant {variant!r}; choices: {sorted(VARIANTS)}")
        variant = VARIANTS[variant]
    config = config if config is not None else HarnessConfig()
    _validate_pairing(variant, problem)

    spec = SolverSpec(
        kind=variant.feas_solver,
        superiorized=variant.superiorized,
        sup=config.superiorization() if variant.superiorized else None,
    )
    rule = config.epsilon_rule()
    if x0 is None:
        x0 = problem.start_point(config.seed)

    # in projection-budget mode the budget is the binding limit: every sweep
    # performs at least one projection, so this sweep cap can never bind first
    max_sweeps = config.max_sweeps
    if config.max_projections is not None:
        max_sweeps = max(max_sweeps, config.max_projections)
    common = dict(solver=spec, x0=x0, lam=config.lam, max_sweeps=max_sweeps,
                  tol=config.feas_tol, max_outer=config.max_outer,
                  max_projections=config.max_projections)
    start = time.perf_counter()
    if variant.scheme == "levelset":
        result = level_set_solve(problem, rule=rule, **common)
    elif variant.scheme == "levelset-accelerated":
        result = accelerated_level_set_solve(problem, rule=rule, accel=config.acceleration(), **common)
    elif variant.scheme == "bisection":
        result = bisection_solve(problem, cfg=config.bisection(), rule=rule, **common)
    else:
        result = bisection_solve(problem, cfg=config.bisection(), rule=rule,
                                 accel=config.acceleration(), **common)
    ms = (time.perf_counter() - start) * 1e3

    effective_fstar = fstar if fstar is not None else problem.fstar
    quality = None
    if effective_fstar is not None and result.best_value is not None:
        quality = quality_score(result.best_value, effective_fstar)

    return RunReport(
        problem=problem.name or "problem",
        variant=variant.name,
        status=result.case,
        f_hat=result.best_value,
        quality=quality,
        projections=result.counters.projections,
        obj_evals=result.counters.obj_evals,
        outer_steps=result.level_steps,
        ms=ms,
        trace=[(k, f) for (k, _t, f) in result.trace],
        best_x=result.best_x,
    )


def _nearest_rank(sorted_vals: list[float], p: float) -> float:
    rank = max(1, math.ceil(p * len(sorted_vals)))
    return sorted_vals[rank - 1]


def aggregate(values, key: str | None = None) -> StatsSummary:
    """Summary statistics over numbers, or over a report field via ``key``."""
    if key is not None:
        values = [getattr(r, key) for r in values if getattr(r, key) is not None]
    vals = [float(v) for v in values]
    if not vals:
        raise ValueError("cannot aggregate an empty collection")
    svals = sorted(vals)
    return StatsSummary(
        average=sum(svals) / len(svals),
        median=float(statistics.median(svals)),
        q10=_nearest_rank(svals, 0.10),
        q90=_nearest_rank(svals, 0.90),
    )


AGGREGATE_METRICS = ("quality", "projections", "obj_evals")


def aggregate_by_variant(reports: list[RunReport]) -> dict[tuple[str, str], StatsSummary]:
    """Per-variant summaries of quality scores and work counters."""
    out: dict[tuple[str, str], StatsSummary] = {}
    variants = sorted({r.variant for r in reports})
    for variant in variants:
        rows = [r for r in reports if r.variant == variant]
        for metric in AGGREGATE_METRICS:
            vals = [getattr(r, metric) for r in rows if getattr(r, metric) is not None]
            if vals:
                out[(variant, metric)] = aggregate(vals)
    return out


def _decrease_rate(report: RunReport) -> float | None:
    """Average objective decrease per feasible step along the trace."""
    if len(report.trace) < 2:
        return None
    first = report.trace[0][1]
    last = report.trace[-1][1]
    return (first - last) / (len(report.trace) - 1)


def speedup_factor(a: RunReport, b: RunReport, metric: str = "projections") -> float | None:
    """How much ``a`` beats ``b``; 0 means no difference, negative means worse.

    Counter metrics compare work: ``b.count / a.count - 1``.  The
    ``objective-decrease`` metric compares the average per-step decrease over
    the feasible-point traces: ``rate(a) / rate(b) - 1``.  Returns None when
    the comparison is undefined (zero denominator or missing trace).
    """
    if a.problem != b.problem:
        raise ValueError(f"reports compare different problems: {a.problem!r} vs {b.problem!r}")
    if metric in ("projections", "obj_evals"):
        a_val = getattr(a, metric)
        b_val = getattr(b, metric)
        if a_val == 0:
            return None
        return b_val / a_val - 1.0
    if metric == "objective-decrease":
        ra = _decrease_rate(a)
        rb = _decrease_rate(b)
        if ra is None or rb is None or rb == 0.0:
            return None
        return ra / rb - 1.0
    raise ValueError(f"unknown metric {metric!r}")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


RUN_CSV_FIELDS = ("problem", "variant", "status", "f_hat", "Q", "projections",
                  "obj_evals", "outer_steps", "ms")


def emit_report(reports: list[RunReport], stats, out_dir) -> list[Path]:
    """Write per-run and aggregate CSVs (plus a small metadata JSON).

    The per-run CSV always carries its header; the aggregate CSV is omitted
    when there are no stats.  Numbers are serialized with 17 significant
    digits so they re-parse exactly.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    runs_path = out_dir / "runs.csv"
    with open(runs_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RUN_CSV_FIELDS)
        for r in reports:
            w.writerow([
                r.problem, r.variant, r.status, _fmt(r.f_hat), _fmt(r.quality),
                r.projections, r.obj_evals, r.outer_steps, _fmt(r.ms),
            ])
    written.append(runs_path)

    if stats:
        agg_path = out_dir / "aggregate.csv"
        with open(agg_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("variant", "metric", "avg", "median", "q10", "q90"))
            for (variant, metric), s in sorted(stats.items()):
                w.writerow([variant, metric, _fmt(s.average), _fmt(s.median),
                            _fmt(s.q10), _fmt(s.q90)])
        written.append(agg_path)

    meta_path = out_dir / "report_meta.json"
    meta_path.write_text(json.dumps({
        "quantile_method": "nearest-rank",
        "median_method": "midpoint-of-central-pair",
        "runs": len(reports),
    }, indent=2) + "\n")
    written.append(meta_path)
    return written


# ---------------------------------------------------------------------------
# Built-in test problems


def _simple_qp() -> Problem:
    """min x^2 subject to x >= 1; optimum 1 at x = 1."""
    return Problem(
        QuadraticFunction([[2.0]], [0.0]),
        [AffineConstraint.geq([1.0], 1.0)],
        fstar=1.0,
        name="simple_qp",
    )


def _box_lp() -> Problem:
    """min x subject to 0 <= x <= 1 (linear objective as Q = 0); optimum 0."""
    return Problem(
        QuadraticFunction([[0.0]], [1.0]),
        [],
        bounds=Bounds([0.0], [1.0]),
        fstar=0.0,
        name="box_lp",
    )


def _qp2d() -> Problem:
    """min 1/2 (x1^2 + x2^2) - x1 s.t. x1 + x2 <= 2, x >= 0; optimum -0.5 at (1, 0)."""
    return Problem(
        QuadraticFunction(np.eye(2), [-1.0, 0.0]),
        [AffineConstraint.leq([1.0, 1.0], 2.0)],
        bounds=Bounds([0.0, 0.0], [np.inf, np.inf]),
        fstar=-0.5,
        name="qp2d",
    )


def _infeasible() -> Problem:
    """min x^2 subject to x <= -1 and x >= 1 (empty feasible set)."""
    return Problem(
        QuadraticFunction([[2.0]], [0.0]),
        [AffineConstraint.leq([1.0], -1.0), AffineConstraint.geq([1.0], 1.0)],
        name="infeasible",
    )


def _imrt_small() -> Problem:
    """Small synthetic fluence-map problem with nonlinear objective and constraint."""
    D = np.array([
        [1.0, 0.4, 0.0, 0.2],
        [0.6, 1.0, 0.3, 0.0],
        [0.0, 0.5, 1.0, 0.1],
        [0.3, 0.0, 0.2, 0.9],
        [0.1, 0.3, 0.6, 0.4],
        [0.2, 0.1, 0.1, 0.8],
    ])
    model = DoseModel(D, target=(0, 1, 2), risk=(3, 4, 5), prescription=1.0, p=2)
    objective = make_underdose(model)
    pnorm = make_pnorm(model)
    cap = 0.8
    risk_cap = CustomFunction(
        lambda x, _p=pnorm, _c=cap: _p.value(x) - _c,
        lambda x, _p=pnorm: _p.subgrad(x),
        name="risk_pnorm_cap",
    )
    return Problem(
        objective,
        [risk_cap],
        bounds=Bounds(np.zeros(4), np.full(4, 5.0)),
        n=4,
        name="imrt_small",
    )


def builtin_problems() -> dict[str, Problem]:
    """Fresh instances of the bundled test problems, keyed by name."""
    return {
        p.name: p
        for p in (_simple_qp(), _box_lp(), _qp2d(), _infeasible(), _imrt_small())
    }
