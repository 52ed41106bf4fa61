"""Optimization schemes built on repeated convex feasibility solves.

The level-set scheme constrains the objective from above, tightening the
level ``t_k = f(x^k) - eps_k`` after every feasible point until the
feasibility solver can no longer find one; the last feasible point is then
an eps-optimal solution.  The bisection scheme instead maintains bounds
``[f_lo, f_hi]`` on the optimal value and halves the bracket with one
feasibility test per step.  An accelerated variant perturbs the iterate
along the negative objective gradient when consecutive levels stall.

Termination is classified into three cases: the very first feasibility
solve already fails (``CASE1``); some later solve fails, certifying the
previous point as eps-optimal (``CASE2_OR_3`` -- projection solvers cannot
distinguish proven infeasibility from an exhausted iteration budget, so the
two theoretical sub-cases are reported jointly); or the outer iteration cap
is hit with every solve succeeding (``ITERATION_CAP``, no certificate).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .feasibility import (
    DEFAULT_FEAS_TOL,
    DEFAULT_MAX_SWEEPS,
    DEFAULT_RELAXATION,
    SolverSpec,
    cfp_with_level,
)
from .model import Counters, Problem, as_vector

__all__ = [
    "CASE1",
    "CASE2_OR_3",
    "ITERATION_CAP",
    "EpsilonRule",
    "epsilon_update",
    "AccelerationConfig",
    "BisectionConfig",
    "SchemeResult",
    "classify_termination",
    "level_set_solve",
    "accelerated_level_set_solve",
    "bisection_solve",
    "counterexample_run",
    "CounterexampleTrace",
    "default_lower_bound",
]

CASE1 = "case1"
CASE2_OR_3 = "case2-or-3"
ITERATION_CAP = "iteration-cap"


@dataclass(frozen=True)
class EpsilonRule:
    """How the slack eps_k is derived from the current objective value.

    ``max-floor`` returns ``max(factor*|f|, floor)`` (the floor keeps the
    slack series divergent, which the termination guarantee needs),
    ``multiplicative`` returns ``factor*|f|`` and ``constant`` returns the
    floor alone.
    """

    mode: str = "max-floor"
    factor: float = 0.1
    floor: float = 0.1

    def __post_init__(self):
        if self.mode not in ("max-floor", "multiplicative", "constant"):
            raise ValueError(f"unknown epsilon rule mode {self.mode!r}")
        if self.factor <= 0.0:
            raise ValueError("factor must be positive")
        if self.mode in ("max-floor", "constant") and self.floor <= 0.0:
            raise ValueError("floor must be positive")


def epsilon_update(fx: float, rule: EpsilonRule) -> float:
    """Slack for the next level, per the rule (see :class:`EpsilonRule`)."""
    if not np.isfinite(fx):
        raise ValueError(f"objective value must be finite, got {fx}")
    if rule.mode == "max-floor":
        return max(rule.factor * abs(fx), rule.floor)
    if rule.mode == "multiplicative":
        return rule.factor * abs(fx)
    return rule.floor


@dataclass(frozen=True)
class AccelerationConfig:
    """Stall detection and gradient perturbation for the accelerated schemes.

    A stall counter grows whenever consecutive levels differ by at most
    ``c * eps``; once ``delta / block > s`` the counter resets and the
    iterate is shifted by ``step_factor`` times the negative objective
    gradient -- verbatim in non-adaptive mode, with backtracking halving of
    the step until the objective does not increase in adaptive mode.
    """

    c: float = 1.0
    s: float = 0.5
    block: int = 1000
    step_factor: float = 1.9
    adaptive: bool = False

    def __post_init__(self):
        if self.c <= 0.0 or self.s <= 0.0:
            raise ValueError("c and s must be positive")
        if self.block < 1:
            raise ValueError("block must be at least 1")
        if self.step_factor <= 0.0:
            raise ValueError("step_factor must be positive")


@dataclass(frozen=True)
class BisectionConfig:
    """Bracket data for the bisection scheme.

    ``f_lower`` must underestimate the optimal value over the feasible set;
    a bad bound degrades the answer but feasible outputs stay feasible.
    Left unset, a crude bound is derived from the first feasible value.
    """

    f_lower: float | None = None
    gamma: float = 1e-5

    def __post_init__(self):
        if self.f_lower is not None and not np.isfinite(self.f_lower):
            raise ValueError("f_lower must be finite")
        if self.gamma <= 0.0:
            raise ValueError("gamma must be positive")


def default_lower_bound(f0: float) -> float:
    """Crude objective lower bound from the first feasible value."""
    return min(0.0, f0 - abs(f0))


@dataclass
class SchemeResult:
    """Outcome of one scheme run.

    ``best_x``/``best_value`` hold the last feasible point and its objective
    (None in ``CASE1``); ``epsilon`` is the optimality certificate attached
    to ``CASE2_OR_3`` (the eps of the last accepted step, or gamma for
    bisection).  ``trace`` records one ``(k, t_k, f(x^k))`` triple per
    accepted feasible point; ``iterations`` is the index of the last one and
    ``level_steps`` the number of level-constrained feasibility attempts.
    """

    case: str
    best_x: np.ndarray | None
    best_value: float | None
    epsilon: float | None
    iterations: int
    level_steps: int
    trace: list[tuple[int, float, float]]
    counters: Counters
    lower: float | None = None
    upper: float | None = None

    @property
    def found_feasible(self) -> bool:
        return self.best_x is not None


def classify_termination(trace, last_found: bool, cap_reached: bool = False) -> str:
    """Map a scheme trajectory onto the termination cases.

    ``trace`` lists the accepted feasible steps; ``last_found`` tells whether
    the final feasibility attempt succeeded; ``cap_reached`` flags runs that
    exhausted the outer iteration budget with every attempt succeeding.
    """
    if cap_reached and last_found:
        return ITERATION_CAP
    if len(trace) == 0:
        return CASE1
    return CASE2_OR_3


def _perturb(problem: Problem, x: np.ndarray, accel: AccelerationConfig, counters: Counters) -> np.ndarray:
    """Shift x along the negative objective gradient per the acceleration rule."""
    g = problem.objective_subgrad(x)
    if float(g @ g) == 0.0:
        return x
    if not accel.adaptive:
        return x - accel.step_factor * g
    fx = problem.objective_value(x, counters)
    alpha = accel.step_factor
    for _ in range(64):
        cand = x - alpha * g
        if problem.objective_value(cand, counters) <= fx:
            return cand
        alpha *= 0.5
    return x


def _level_engine(problem: Problem, solver, x0, rule: EpsilonRule, accel: AccelerationConfig | None,
                  lam, max_sweeps: int, tol: float, max_outer: int,
                  counters: Counters, max_projections: int | None = None) -> SchemeResult:
    if isinstance(solver, str):
        solver = SolverSpec(kind=solver)
    x0 = problem.start_point() if x0 is None else as_vector(x0, problem.n)

    out = cfp_with_level(problem, np.inf, solver, x0, lam=lam, max_sweeps=max_sweeps,
                         tol=tol, counters=counters, max_projections=max_projections)
    if not out.found:
        return SchemeResult(CASE1, None, None, None, -1, 0, [], counters)

    x = out.x
    fx = problem.objective_value(x, counters)
    if not np.isfinite(fx):
        raise ValueError(f"objective is non-finite ({fx}) at the first feasible point")
    eps = epsilon_update(fx, rule)
    t = fx - eps
    t_hist = [t]
    trace = [(0, t, fx)]
    delta = 0

    for k in range(1, max_outer + 1):
        if accel is not None and k >= 2:
            if abs(t_hist[k - 2] - t_hist[k - 1]) <= accel.c * eps:
                delta += 1
            if delta / accel.block > accel.s:
                delta = 0
                x = _perturb(problem, x, accel, counters)
                fx = problem.objective_value(x, counters)
                if not np.isfinite(fx):
                    raise ValueError(f"objective is non-finite ({fx}) after perturbation")
                eps = epsilon_update(fx, rule)
                t = fx - eps
                t_hist[k - 1] = t

        out = cfp_with_level(problem, t, solver, x0=x, lam=lam, max_sweeps=max_sweeps,
                             tol=tol, counters=counters, max_projections=max_projections)
        if not out.found:
            # the level set became (operationally) infeasible: the previous
            # point carries the eps certificate
            return SchemeResult(CASE2_OR_3, x, fx, eps, k - 1, k, trace, counters)
        x = out.x
        fx = problem.objective_value(x, counters)
        if not np.isfinite(fx):
            raise ValueError(f"objective is non-finite ({fx}) at step {k}")
        eps = epsilon_update(fx, rule)
        t = fx - eps
        t_hist.append(t)
        trace.append((k, t, fx))

    return SchemeResult(ITERATION_CAP, x, fx, eps, max_outer, max_outer, trace, counters)


def level_set_solve(problem: Problem, solver="cspm", x0=None, rule: EpsilonRule | None = None,
                    lam=DEFAULT_RELAXATION, max_sweeps: int = DEFAULT_MAX_SWEEPS,
                    tol: float = DEFAULT_FEAS_TOL, max_outer: int = 10_000,
                    counters: Counters | None = None,
                    max_projections: int | None = None) -> SchemeResult:
    """Minimize by repeatedly tightening the objective level set.

    Step 0 solves plain feasibility; each later step asks the feasibility
    solver for a point of the constraint set intersected with
    ``{f <= t_(k-1)}``, warm-started from the previous point, and tightens
    ``t_k = f(x^k) - eps_k`` on success.  The first failing step certifies
    the previous point as eps-optimal.
    """
    counters = counters if counters is not None else Counters()
    rule = rule if rule is not None else EpsilonRule()
    return _level_engine(problem, solver, x0, rule, None, lam, max_sweeps, tol, max_outer,
                         counters, max_projections)


def accelerated_level_set_solve(problem: Problem, solver="cspm", x0=None,
                                rule: EpsilonRule | None = None,
                                accel: AccelerationConfig | None = None,
                                lam=DEFAULT_RELAXATION, max_sweeps: int = DEFAULT_MAX_SWEEPS,
                                tol: float = DEFAULT_FEAS_TOL, max_outer: int = 10_000,
                                counters: Counters | None = None,
                                max_projections: int | None = None) -> SchemeResult:
    """Level-set scheme with stall detection and gradient perturbations.

    Identical to :func:`level_set_solve` except that stalled level progress
    (see :class:`AccelerationConfig`) triggers a negative-gradient shift of
    the iterate before the next feasibility solve re-establishes
    feasibility.  With a stall threshold that never fires this reproduces
    the plain scheme exactly.
    """
    counters = counters if counters is not None else Counters()
    rule = rule if rule is not None else EpsilonRule()
    accel = accel if accel is not None else AccelerationConfig()
    return _level_engine(problem, solver, x0, rule, accel, lam, max_sweeps, tol, max_outer,
                         counters, max_projections)


def bisection_solve(problem: Problem, solver="cspm", x0=None, cfg: BisectionConfig | None = None,
                    accel: AccelerationConfig | None = None, rule: EpsilonRule | None = None,
                    lam=DEFAULT_RELAXATION, max_sweeps: int = DEFAULT_MAX_SWEEPS,
                    tol: float = DEFAULT_FEAS_TOL, max_outer: int = 10_000,
                    counters: Counters | None = None,
                    max_projections: int | None = None) -> SchemeResult:
    """Bracket the optimal value and halve the bracket by feasibility tests.

    After an initial plain feasibility solve sets ``f_hi = f(x^0)``, each
    step tests the level ``t = (f_lo + f_hi)/2``: success lowers ``f_hi`` to
    the value found, failure (time-out) raises ``f_lo`` to ``t``.  The scheme
    stops once ``|f_hi - f_lo| <= gamma``, returning the last feasible point
    as a gamma-optimal solution.  When no lower bound is supplied, a crude
    one is derived from the first feasible value.  The optional acceleration
    perturbs the warm-start point on stalled brackets; the bracket update
    itself never changes.
    """
    if isinstance(solver, str):
        solver = SolverSpec(kind=solver)
    counters = counters if counters is not None else Counters()
    rule = rule if rule is not None else EpsilonRule()
    x0 = problem.start_point() if x0 is None else as_vector(x0, problem.n)

    out = cfp_with_level(problem, np.inf, solver, x0, lam=lam, max_sweeps=max_sweeps,
                         tol=tol, counters=counters, max_projections=max_projections)
    if not out.found:
        return SchemeResult(CASE1, None, None, None, -1, 0, [], counters)

    x = out.x
    f_hi = problem.objective_value(x, counters)
    if not np.isfinite(f_hi):
        raise ValueError(f"objective is non-finite ({f_hi}) at the first feasible point")
    cfg = cfg if cfg is not None else BisectionConfig()
    f_lo = cfg.f_lower if cfg.f_lower is not None else default_lower_bound(f_hi)
    gamma = cfg.gamma

    t = 0.5 * (f_lo + f_hi)
    t_hist = [t]
    trace = [(0, t, f_hi)]
    delta = 0
    k = 0
    while abs(f_hi - f_lo) > gamma:
        if k >= max_outer:
            return SchemeResult(ITERATION_CAP, x, f_hi, None, k, k, trace, counters,
                                lower=f_lo, upper=f_hi)
        k += 1
        if accel is not None and k >= 2:
            eps = epsilon_update(f_hi, rule)
            if abs(t_hist[k - 2] - t_hist[k - 1]) <= accel.c * eps:
                delta += 1
            if delta / accel.block > accel.s:
                delta = 0
                x = _perturb(problem, x, accel, counters)

        out = cfp_with_level(problem, t, solver, x0=x, lam=lam, max_sweeps=max_sweeps,
                             tol=tol, counters=counters, max_projections=max_projections)
        if out.found:
            x = out.x
            f_hi = problem.objective_value(x, counters)
            if not np.isfinite(f_hi):
                raise ValueError(f"objective is non-finite ({f_hi}) at step {k}")
        else:
            f_lo = t
        t = 0.5 * (f_lo + f_hi)
        t_hist.append(t)
        trace.append((k, t, f_hi))

    return SchemeResult(CASE2_OR_3, x, f_hi, gamma, k, k, trace, counters,
                        lower=f_lo, upper=f_hi)


@dataclass
class CounterexampleTrace:
    """Trajectory of the divergence diagnostic (see :func:`counterexample_run`).

    Arrays are indexed by step; ``ok_*`` summarize the checks: levels stay
    nonnegative, every objective value misses the true optimum by at least
    100, and the slack series has partial sums bounded by the first level.
    """

    xs: np.ndarray
    fs: np.ndarray
    epss: np.ndarray
    ts: np.ndarray
    t_star: float
    ok_levels_nonnegative: bool
    ok_gap_at_least_100: bool
    ok_slack_sum_bounded: bool

    @property
    def ok(self) -> bool:
        return self.ok_levels_nonnegative and self.ok_gap_at_least_100 and self.ok_slack_sum_bounded


def counterexample_run(steps: int = 100) -> CounterexampleTrace:
    """Show that a purely multiplicative slack rule can stall far from optimal.

    Minimizes f(x) = x^2 - 100 over the whole line (true optimum -100),
    starting from x = sqrt(500), with slack eps_k = 0.1*|f(x^k)| and an exact
    level oracle that returns x^k with f(x^k) = t_(k-1) at every step.  The
    levels then follow t_k = 0.9*t_(k-1) and never drop below zero, so every
    iterate stays at objective distance >= 100 from the optimum while the
    slack series sums to at most t_0: without a floor on eps the scheme runs
    forever yet converges to the wrong value.
    """
    rule = EpsilonRule(mode="multiplicative", factor=0.1)
    t_star = -100.0
    # f(x^0) = 400 exactly: x0 = sqrt(500) has x0^2 = 500 algebraically
    xs = [math.sqrt(500.0)]
    fs = [400.0]
    epss = [epsilon_update(fs[0], rule)]
    ts = [fs[0] - epss[0]]
    for _ in range(steps):
        f_k = ts[-1]  # exact oracle: f(x^k) = t_(k-1)
        xs.append(math.sqrt(100.0 + f_k))
        fs.append(f_k)
        epss.append(epsilon_update(f_k, rule))
        ts.append(f_k - epss[-1])
    xs = np.array(xs)
    fs = np.array(fs)
    epss = np.array(epss)
    ts = np.array(ts)
    return CounterexampleTrace(
        xs=xs,
        fs=fs,
        epss=epss,
        ts=ts,
        t_star=t_star,
        ok_levels_nonnegative=bool(np.all(ts >= 0.0)),
        ok_gap_at_least_100=bool(np.all(np.abs(fs - t_star) >= 100.0)),
        ok_slack_sum_bounded=bool(np.sum(epss[1:]) <= ts[0]),
    )
