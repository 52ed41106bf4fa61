"""Feasibility solvers: cyclic subgradient projections, POCS and ART3+.

All solvers share the same outer contract: cycle over the constraint list in
order, apply one projection step per violated constraint, and declare the
point found only when a full pass measures violation <= tol for every
constraint (sweep soundness).  A consistent system that cannot be certified
within ``max_sweeps`` full sweeps times out, which callers treat as "no
feasible point exists" (the time-out rule).

Runs of affine constraints are packed into dense arrays and swept by the
kernels in :mod:`cfpopt._kernels`; any other convex constraint is handled
through its value/subgradient oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .model import AffineConstraint, ConvexFunction, Counters, Problem, as_vector
from .projections import Relaxation, ZeroSubgradientError, _NORM2_FLOOR

__all__ = [
    "FeasibilityOutcome",
    "SolverSpec",
    "cspm_solve",
    "pocs_solve",
    "art3plus_solve",
    "cfp_with_level",
    "DEFAULT_MAX_SWEEPS",
    "DEFAULT_FEAS_TOL",
    "DEFAULT_RELAXATION",
]

DEFAULT_MAX_SWEEPS = 1000
DEFAULT_FEAS_TOL = 1e-8
# over-relaxed step, midpoint of the open interval (1, 2)
DEFAULT_RELAXATION = 1.5


@dataclass
class FeasibilityOutcome:
    """Result of one feasibility attempt.

    ``found`` is True when a full sweep certified every constraint within
    tolerance; otherwise the solver timed out and ``x`` is the last iterate.
    The counters cover this solve only; ``moves`` counts the projection
    calls that actually displaced the iterate.  ``infeasibility_certified``
    marks the one provable no-solution signal: the objective level
    constraint was violated at a minimizer of the objective.
    """

    found: bool
    x: np.ndarray
    sweeps: int
    projections: int
    obj_evals: int
    moves: int
    infeasibility_certified: bool = False

    @property
    def timed_out(self) -> bool:
        return not self.found


@dataclass(frozen=True)
class SolverSpec:
    """Which feasibility solver to run, and whether to superiorize it."""

    kind: str = "cspm"  # cspm | pocs | art3+
    superiorized: bool = False
    sup: object = None  # SuperiorizationConfig when superiorized

    def __post_init__(self):
        if self.kind not in ("cspm", "pocs", "art3+"):
            raise ValueError(f"unknown feasibility solver {self.kind!r}")


class LevelConstraint(ConvexFunction):
    """The objective level constraint f(x) - t <= 0.

    Evaluations pass through the wrapped objective and are charged to the
    run's objective-evaluation counter.
    """

    kind = "level"

    def __init__(self, objective: ConvexFunction, t: float, counters: Counters | None = None):
        self.objective = objective
        self.t = float(t)
        self.counters = counters

    def value(self, x: np.ndarray) -> float:
        if self.counters is not None:
            self.counters.obj_evals += 1
        return self.objective.value(x) - self.t

    def subgrad(self, x: np.ndarray) -> np.ndarray:
        return self.objective.subgrad(x)


@dataclass
class _Packed:
    A: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    norm2: np.ndarray

    @classmethod
    def from_rows(cls, rows: list[AffineConstraint]) -> "_Packed":
        return cls(
            A=np.ascontiguousarray([r.a for r in rows], dtype=np.float64),
            lo=np.array([r.lo for r in rows], dtype=np.float64),
            hi=np.array([r.hi for r in rows], dtype=np.float64),
            norm2=np.array([r.norm2 for r in rows], dtype=np.float64),
        )


def _segment(constraints) -> list[tuple[str, object]]:
    """Split the cyclic list into packed affine runs and generic singletons."""
    segments: list[tuple[str, object]] = []
    run: list[AffineConstraint] = []
    for c in constraints:
        if isinstance(c, AffineConstraint):
            run.append(c)
        else:
            if run:
                segments.append(("rows", _Packed.from_rows(run)))
                run = []
            segments.append(("fn", c))
    if run:
        segments.append(("rows", _Packed.from_rows(run)))
    return segments


def _check_tol(tol: float) -> float:
    tol = float(tol)
    if not np.isfinite(tol) or tol < 0.0:
        raise ValueError(f"feasibility tolerance must be finite and nonnegative, got {tol}")
    return tol


class CyclicSweeper:
    """One full cyclic pass of relaxed (subgradient) projections per sweep.

    On affine constraints the subgradient projection is the orthogonal
    projection, so this single sweeper implements both CSPM and POCS.
    """

    def __init__(self, constraints, lam, tol: float, counters: Counters):
        self.constraints = list(constraints)
        self.segments = _segment(self.constraints)
        self.relaxation = lam if isinstance(lam, Relaxation) else Relaxation(float(lam))
        self.tol = _check_tol(tol)
        self.counters = counters
        self.moves = 0
        self.last_max_violation = np.inf
        self.certified = False

    def sweep(self, x: np.ndarray, k: int) -> np.ndarray:
        lam = self.relaxation.at(k)
        maxv = 0.0
        for tag, seg in self.segments:
            if tag == "rows":
                v, moved = _kernels.cspm_sweep(seg.A, seg.lo, seg.hi, seg.norm2, x, lam, self.tol)
                self.counters.projections += seg.A.shape[0]
                self.moves += moved
                if v > maxv:
                    maxv = v
            else:
                fn: ConvexFunction = seg
                self.counters.projections += 1
                v = fn.value(x)
                if v > maxv:
                    maxv = v
                if v > self.tol:
                    xi = fn.subgrad(x)
                    norm2 = float(xi @ xi)
                    if norm2 < _NORM2_FLOOR:
                        err = ZeroSubgradientError(
                            f"violated constraint (value {v}) has zero subgradient"
                        )
                        err.constraint = fn
                        raise err
                    x = x - (lam * v / norm2) * xi
                    self.moves += 1
        self.last_max_violation = maxv
        self.certified = maxv <= self.tol
        return x


class Art3Sweeper:
    """ART3+ work-queue passes over interval rows (plus an optional level set).

    Each visited row applies the automatic-relaxation rule: overshoot at most
    the interval width reflects across the violated face, larger overshoot
    projects onto the midline hyperplane.  Rows found satisfied are dropped
    from the queue; when the queue empties after any move, all rows are
    reloaded.  The point is certified feasible when a pass over the full list
    makes no move.  A non-affine level constraint, when present, rides at the
    end of the queue and is handled by an unrelaxed subgradient projection.
    """

    def __init__(self, rows: list[AffineConstraint], level: ConvexFunction | None, tol: float, counters: Counters):
        self.packed = _Packed.from_rows(rows) if rows else None
        self.n_rows = len(rows)
        self.level = level
        self.tol = _check_tol(tol)
        self.counters = counters
        total = self.n_rows + (1 if level is not None else 0)
        self.full = np.arange(total, dtype=np.int64)
        self.queue = self.full.copy()
        self.moved_since_refill = False
        self.moves = 0
        self.certified = total == 0

    def sweep(self, x: np.ndarray, k: int) -> np.ndarray:
        if self.queue.shape[0] == 0:
            if not self.moved_since_refill:
                self.certified = True
                return x
            self.queue = self.full.copy()
            self.moved_since_refill = False

        queue = self.queue
        # queues are ascending, so the level marker can only sit at the end
        has_level = self.level is not None and queue[-1] == self.n_rows
        row_queue = queue[:-1] if has_level else queue

        if row_queue.shape[0] > 0:
            kept = _kernels.art3_pass(
                self.packed.A, self.packed.lo, self.packed.hi, self.packed.norm2, x, row_queue, self.tol
            )
            self.counters.projections += row_queue.shape[0]
            self.moves += kept.shape[0]
        else:
            kept = row_queue

        if has_level:
            self.counters.projections += 1
            v = self.level.value(x)
            if v > self.tol:
                xi = self.level.subgrad(x)
                norm2 = float(xi @ xi)
                if norm2 < _NORM2_FLOOR:
                    err = ZeroSubgradientError("violated level constraint has zero subgradient")
                    err.constraint = self.level
                    raise err
                x = x - (v / norm2) * xi
                self.moves += 1
                kept = np.concatenate([kept, np.array([self.n_rows], dtype=np.int64)])

        if kept.shape[0] > 0:
            self.moved_since_refill = True
        self.queue = kept
        if kept.shape[0] == 0 and not self.moved_since_refill:
            self.certified = True
        return x


def make_sweeper(kind: str, constraints, lam, tol: float, counters: Counters):
    """Build the sweeping engine for one CFP solve."""
    if kind in ("cspm", "pocs"):
        if kind == "pocs":
            _require_affine(constraints, "pocs_solve")
        return CyclicSweeper(constraints, lam, tol, counters)
    if kind == "art3+":
        rows = list(constraints)
        level = None
        if rows and isinstance(rows[-1], LevelConstraint):
            level = rows.pop()
        _require_affine(rows, "art3plus_solve")
        return Art3Sweeper(rows, level, tol, counters)
    raise ValueError(f"unknown feasibility solver {kind!r}")


def _require_affine(constraints, who: str) -> None:
    for c in constraints:
        if not isinstance(c, AffineConstraint):
            raise ValueError(f"{who} requires affine (interval) constraints, got {c!r}")


def _run(sweeper, x0: np.ndarray, max_sweeps: int, counters: Counters,
         history: list | None, max_projections: int | None) -> FeasibilityOutcome:
    x = x0.copy()
    proj0 = counters.projections
    obj0 = counters.obj_evals
    sweeps = 0
    if sweeper.certified:  # vacuous system
        return FeasibilityOutcome(True, x, 0, 0, 0, 0)
    for k in range(max_sweeps):
        if max_projections is not None and counters.projections - proj0 >= max_projections:
            break
        try:
            x = sweeper.sweep(x, k)
        except ZeroSubgradientError as err:
            err.x = x
            err.sweeps = k
            raise
        sweeps = k + 1
        if history is not None:
            history.append(x.copy())
        if sweeper.certified:
            return FeasibilityOutcome(
                True, x, sweeps, counters.projections - proj0,
                counters.obj_evals - obj0, sweeper.moves,
            )
    return FeasibilityOutcome(
        False, x, sweeps, counters.projections - proj0,
        counters.obj_evals - obj0, sweeper.moves,
    )


def cspm_solve(constraints, x0, lam=DEFAULT_RELAXATION, max_sweeps: int = DEFAULT_MAX_SWEEPS,
               tol: float = DEFAULT_FEAS_TOL, counters: Counters | None = None,
               history: list | None = None, max_projections: int | None = None) -> FeasibilityOutcome:
    """Cyclic subgradient projections over general convex constraints."""
    constraints = list(constraints)
    if not constraints:
        raise ValueError("constraint list must be nonempty")
    counters = counters if counters is not None else Counters()
    x0 = as_vector(x0)
    sweeper = CyclicSweeper(constraints, lam, tol, counters)
    return _run(sweeper, x0, max_sweeps, counters, history, max_projections)


def pocs_solve(constraints, x0, lam=DEFAULT_RELAXATION, max_sweeps: int = DEFAULT_MAX_SWEEPS,
               tol: float = DEFAULT_FEAS_TOL, counters: Counters | None = None,
               history: list | None = None, max_projections: int | None = None) -> FeasibilityOutcome:
    """Sequential relaxed orthogonal projections onto affine sets.

    On canonically presented halfspaces/hyperplanes/slabs the orthogonal
    projection equals the subgradient projection, so the iterates coincide
    with :func:`cspm_solve` on the same system.
    """
    constraints = list(constraints)
    if not constraints:
        raise ValueError("constraint list must be nonempty")
    _require_affine(constraints, "pocs_solve")
    counters = counters if counters is not None else Counters()
    x0 = as_vector(x0)
    sweeper = CyclicSweeper(constraints, lam, tol, counters)
    return _run(sweeper, x0, max_sweeps, counters, history, max_projections)


def art3plus_solve(constraints, x0, max_sweeps: int = DEFAULT_MAX_SWEEPS,
                   tol: float = DEFAULT_FEAS_TOL, counters: Counters | None = None,
                   history: list | None = None, max_projections: int | None = None) -> FeasibilityOutcome:
    """ART3+ for systems of interval linear inequalities.

    One-sided rows are treated as infinite-width intervals (the rule then
    always reflects) and equality rows as zero-width intervals (the rule then
    always projects onto the hyperplane).  A "sweep" is one pass over the
    current work queue.
    """
    constraints = list(constraints)
    if not constraints:
        raise ValueError("constraint list must be nonempty")
    _require_affine(constraints, "art3plus_solve")
    counters = counters if counters is not None else Counters()
    x0 = as_vector(x0)
    sweeper = Art3Sweeper(constraints, None, tol, counters)
    return _run(sweeper, x0, max_sweeps, counters, history, max_projections)


def cfp_with_level(problem: Problem, t: float, solver: SolverSpec | str = "cspm",
                   x0=None, lam=DEFAULT_RELAXATION, max_sweeps: int = DEFAULT_MAX_SWEEPS,
                   tol: float = DEFAULT_FEAS_TOL, counters: Counters | None = None,
                   history: list | None = None, max_projections: int | None = None) -> FeasibilityOutcome:
    """Feasibility of the problem's constraints intersected with {f <= t}.

    The level constraint f(x) - t <= 0 joins the cyclic order as its last
    element; ``t = +inf`` drops it, giving plain feasibility.  Objective
    evaluations made through the level constraint are charged to
    ``counters.obj_evals``.
    """
    if isinstance(solver, str):
        solver = SolverSpec(kind=solver)
    t = float(t)
    if np.isnan(t) or t == -np.inf:
        raise ValueError("level must be finite or +inf")
    counters = counters if counters is not None else Counters()
    x0 = problem.start_point() if x0 is None else as_vector(x0, problem.n)

    constraints = list(problem.all_constraints())
    if np.isfinite(t):
        constraints.append(LevelConstraint(problem.objective, t, counters))
    if not constraints:
        return FeasibilityOutcome(True, x0.copy(), 0, 0, 0, 0)

    proj0 = counters.projections
    obj0 = counters.obj_evals
    try:
        if solver.superiorized:
            from .superiorize import SuperiorizationConfig, superiorized_solve

            cfg = solver.sup if solver.sup is not None else SuperiorizationConfig()
            if cfg.merit is None:
                cfg = cfg.with_merit(problem.objective, merit_is_objective=True)
            if cfg.domain is None and problem.bounds is not None:
                cfg = cfg.with_domain(problem.bounds.contains)
            return superiorized_solve(
                solver.kind, constraints, x0, cfg, lam=lam, max_outer=max_sweeps,
                tol=tol, counters=counters, history=history, max_projections=max_projections,
            )
        sweeper = make_sweeper(solver.kind, constraints, lam, tol, counters)
        return _run(sweeper, x0, max_sweeps, counters, history, max_projections)
    except ZeroSubgradientError as err:
        if not isinstance(getattr(err, "constraint", None), LevelConstraint):
            raise
        # a vanishing objective subgradient at a point violating f <= t means
        # the minimum of f exceeds t: the level set is provably empty
        return FeasibilityOutcome(
            False, getattr(err, "x", x0.copy()), getattr(err, "sweeps", 0),
            counters.projections - proj0, counters.obj_evals - obj0, 0,
            infeasibility_certified=True,
        )
