"""Downhill simplex minimization with deterministic restarts.

Classic Nelder-Mead moves (reflection 1.0, expansion 2.0, contraction
0.5, shrink 0.5 by default) over an axis-aligned initial simplex.  The
algorithm is fully deterministic: no randomness, stable ordering, and
a strict evaluation budget.  ``minimize_with_restarts`` reruns the
search from each converged point with a fresh small simplex until a
restart fails to improve the best value.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ObjectiveError


@dataclass
class SimplexConfig:
    """Tuning knobs for the simplex search.

    initial_step may be a scalar or a per-axis array; convergence is
    declared when the simplex function-value spread falls below
    convergence_tol relative to the best value, or below abs_tol
    outright.
    """

    initial_step: float | np.ndarray = 0.05
    reflection: float = 1.0
    expansion: float = 2.0
    contraction: float = 0.5
    shrink: float = 0.5
    convergence_tol: float = 1e-7
    abs_tol: float = 1e-12
    max_evals: int = 400
    max_restarts: int = 3
    restart_step: float = 0.02

    def validate(self) -> None:
        if not self.reflection > 0.0:
            raise ValueError("reflection coefficient must be positive")
        if not self.expansion > 1.0:
            raise ValueError("expansion coefficient must exceed 1")
        if not 0.0 < self.contraction < 1.0:
            raise ValueError("contraction coefficient must be in (0, 1)")
        if not 0.0 < self.shrink < 1.0:
            raise ValueError("shrink coefficient must be in (0, 1)")
        if not self.convergence_tol > 0.0:
            raise ValueError("convergence_tol must be positive")
        if self.abs_tol < 0.0:
            raise ValueError("abs_tol must be nonnegative")
        if self.max_evals < 1:
            raise ValueError("max_evals must be at least 1")
        if self.max_restarts < 0:
            raise ValueError("max_restarts must be nonnegative")
        if not self.restart_step > 0.0:
            raise ValueError("restart_step must be positive")


@dataclass
class OptimResult:
    best_point: np.ndarray
    best_value: float
    evaluations: int
    converged: bool
    restarts_used: int = 0
    trace: list = field(default_factory=list)
    # One (evaluations, converged) pair per simplex leg: a single run
    # for minimize, the first run plus every retry for the restart
    # wrapper.  Budget accounting tools read this instead of guessing
    # leg boundaries from the totals.
    leg_log: list = field(default_factory=list)


class _BudgetExhausted(Exception):
    pass


class _CountingObjective:
    """Wraps the objective with budget, finiteness and trace handling."""

    def __init__(self, objective, budget: int, trace: list | None):
        self.objective = objective
        self.budget = budget
        self.calls = 0
        self.trace = trace

    def __call__(self, x: np.ndarray) -> float:
        if self.calls >= self.budget:
            raise _BudgetExhausted()
        value = float(self.objective(x))
        self.calls += 1
        if self.trace is not None:
            self.trace.append((self.calls, value))
        if not np.isfinite(value):
            raise ObjectiveError(
                f"objective returned non-finite value {value!r} at {x!r}"
            )
        return value


def _initial_simplex(x0: np.ndarray, step) -> np.ndarray:
    dim = len(x0)
    steps = np.broadcast_to(np.asarray(step, dtype=np.float64), (dim,))
    simplex = np.tile(x0, (dim + 1, 1))
    for i in range(dim):
        simplex[i + 1, i] += steps[i]
    return simplex


def minimize(
    objective,
    x0: np.ndarray,
    config: SimplexConfig | None = None,
    trace: bool = False,
) -> OptimResult:
    """Single Nelder-Mead run from x0.

    Stops when converged per the config tolerances or when the
    evaluation budget is exhausted; the best vertex seen is returned
    either way.
    """
    config = config or SimplexConfig()
    config.validate()
    x0 = np.asarray(x0, dtype=np.float64)
    dim = len(x0)
    if dim < 1:
        raise ValueError("cannot minimize over a zero-dimensional point")
    trace_list: list | None = [] if trace else None
    counted = _CountingObjective(objective, config.max_evals, trace_list)

    simplex = _initial_simplex(x0, config.initial_step)
    # +inf marks vertices the budget never allowed us to evaluate.
    values = np.full(dim + 1, np.inf)
    converged = False
    try:
        for i in range(dim + 1):
            values[i] = counted(simplex[i])
        while True:
            order = np.argsort(values, kind="stable")
            simplex = simplex[order]
            values = values[order]
            spread = values[-1] - values[0]
            if spread <= config.abs_tol or spread <= config.convergence_tol * (
                abs(values[0]) + 1e-12
            ):
                converged = True
                break
            centroid = simplex[:-1].mean(axis=0)
            worst = simplex[-1]
            reflected = centroid + config.reflection * (centroid - worst)
            f_reflected = counted(reflected)
            if f_reflected < values[0]:
                expanded = centroid + config.reflection * config.expansion * (
                    centroid - worst
                )
                f_expanded = counted(expanded)
                if f_expanded < f_reflected:
                    simplex[-1], values[-1] = expanded, f_expanded
                else:
                    simplex[-1], values[-1] = reflected, f_reflected
            elif f_reflected < values[-2]:
                simplex[-1], values[-1] = reflected, f_reflected
            else:
                if f_reflected < values[-1]:
                    contracted = centroid + config.contraction * (
                        reflected - centroid
                    )
                else:
                    contracted = centroid - config.contraction * (
                        centroid - worst
                    )
                f_contracted = counted(contracted)
                if f_contracted < min(f_reflected, values[-1]):
                    simplex[-1], values[-1] = contracted, f_contracted
                else:
                    best = simplex[0].copy()
                    for i in range(1, dim + 1):
                        shrunk = best + config.shrink * (simplex[i] - best)
                        f_shrunk = counted(shrunk)
                        simplex[i], values[i] = shrunk, f_shrunk
    except _BudgetExhausted:
        converged = False

    best = int(np.argmin(values))
    return OptimResult(
        best_point=simplex[best].copy(),
        best_value=float(values[best]),
        evaluations=counted.calls,
        converged=converged,
        trace=trace_list or [],
        leg_log=[(counted.calls, converged)],
    )


def minimize_with_restarts(
    objective,
    x0: np.ndarray,
    config: SimplexConfig | None = None,
    trace: bool = False,
) -> OptimResult:
    """Minimize, then retry from the result with a fresh small simplex.

    A retry that improves the best value by more than convergence_tol
    counts as a restart and the loop continues, up to max_restarts
    retries total; the first non-improving retry ends the search.
    """
    config = config or SimplexConfig()
    config.validate()
    first = minimize(objective, x0, config, trace=trace)
    best = first
    evaluations = first.evaluations
    full_trace = list(first.trace)
    leg_log = list(first.leg_log)
    restarts_used = 0
    attempts = 0
    while attempts < config.max_restarts and best.converged:
        retry_config = SimplexConfig(
            initial_step=config.restart_step,
            reflection=config.reflection,
            expansion=config.expansion,
            contraction=config.contraction,
            shrink=config.shrink,
            convergence_tol=config.convergence_tol,
            abs_tol=config.abs_tol,
            max_evals=config.max_evals,
            max_restarts=0,
            restart_step=config.restart_step,
        )
        attempt = minimize(objective, best.best_point, retry_config, trace=trace)
        attempts += 1
        evaluations += attempt.evaluations
        leg_log.extend(attempt.leg_log)
        if trace:
            offset = full_trace[-1][0] if full_trace else 0
            full_trace.extend(
                (offset + idx, val) for idx, val in attempt.trace
            )
        if attempt.best_value < best.best_value - config.convergence_tol:
            best = attempt
            restarts_used += 1
        else:
            if attempt.best_value < best.best_value:
                best = attempt
            break
    return OptimResult(
        best_point=best.best_point,
        best_value=best.best_value,
        evaluations=evaluations,
        converged=best.converged,
        restarts_used=restarts_used,
        trace=full_trace,
        leg_log=leg_log,
    )
