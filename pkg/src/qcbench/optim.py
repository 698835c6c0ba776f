"""Derivative-free minimisation used by the optimisation-loop metrics.

A plain, deterministic Nelder--Mead simplex with a single restart from the
best point found.  It stands in for constrained-optimisation libraries in
the benchmarking loops (the optimiser name is recorded in reports so runs
are comparable).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

__all__ = ["OptimizeOutcome", "nelder_mead", "minimize_with_restart"]


@dataclass(frozen=True)
class OptimizeOutcome:
    """Best point and value plus bookkeeping from a simplex run."""

    x: np.ndarray
    fun: float
    n_evaluations: int
    converged: bool


def nelder_mead(
    func: Callable[[np.ndarray], float],
    x0: Sequence[float],
    *,
    initial_step: float = 0.5,
    xatol: float = 1e-6,
    fatol: float = 1e-8,
    max_evaluations: int = 2000,
) -> OptimizeOutcome:
    """Minimise ``func`` from ``x0`` with the Nelder--Mead simplex.

    Standard reflection/expansion/contraction/shrink coefficients
    (1, 2, 0.5, 0.5); ties are broken by insertion order so the run is
    deterministic for a deterministic ``func``.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    ndim = x0.size
    if ndim == 0:
        raise ValueError("x0 must have at least one dimension")

    evaluations = 0

    def call(x: np.ndarray) -> float:
        nonlocal evaluations
        evaluations += 1
        return float(func(x))

    simplex = [x0.copy()]
    for i in range(ndim):
        vertex = x0.copy()
        vertex[i] += initial_step if vertex[i] == 0.0 else initial_step * max(1.0, abs(vertex[i]))
        simplex.append(vertex)
    values = [call(v) for v in simplex]

    converged = False
    while evaluations < max_evaluations:
        order = np.argsort(values, kind="stable")
        simplex = [simplex[i] for i in order]
        values = [values[i] for i in order]
        spread_x = max(np.max(np.abs(v - simplex[0])) for v in simplex[1:])
        spread_f = abs(values[-1] - values[0])
        if spread_x <= xatol and spread_f <= fatol:
            converged = True
            break

        centroid = np.mean(simplex[:-1], axis=0)
        worst = simplex[-1]
        reflected = centroid + (centroid - worst)
        f_reflected = call(reflected)
        if f_reflected < values[0]:
            expanded = centroid + 2.0 * (centroid - worst)
            f_expanded = call(expanded)
            if f_expanded < f_reflected:
                simplex[-1], values[-1] = expanded, f_expanded
            else:
                simplex[-1], values[-1] = reflected, f_reflected
        elif f_reflected < values[-2]:
            simplex[-1], values[-1] = reflected, f_reflected
        else:
            contracted = centroid + 0.5 * (worst - centroid)
            f_contracted = call(contracted)
            if f_contracted < values[-1]:
                simplex[-1], values[-1] = contracted, f_contracted
            else:
                best = simplex[0]
                for i in range(1, len(simplex)):
                    simplex[i] = best + 0.5 * (simplex[i] - best)
                    values[i] = call(simplex[i])

    order = np.argsort(values, kind="stable")
    best_x = simplex[order[0]]
    best_f = values[order[0]]
    return OptimizeOutcome(x=np.asarray(best_x), fun=float(best_f), n_evaluations=evaluations, converged=converged)


def minimize_with_restart(
    func: Callable[[np.ndarray], float],
    x0: Sequence[float],
    *,
    initial_step: float = 0.5,
    xatol: float = 1e-6,
    fatol: float = 1e-8,
    max_evaluations: int = 2000,
) -> OptimizeOutcome:
    """Nelder--Mead, then one restart from the best point with a smaller simplex."""
    first = nelder_mead(
        func,
        x0,
        initial_step=initial_step,
        xatol=xatol,
        fatol=fatol,
        max_evaluations=max_evaluations,
    )
    second = nelder_mead(
        func,
        first.x,
        initial_step=initial_step * 0.25,
        xatol=xatol,
        fatol=fatol,
        max_evaluations=max_evaluations,
    )
    best = second if second.fun <= first.fun else first
    return OptimizeOutcome(
        x=best.x,
        fun=best.fun,
        n_evaluations=first.n_evaluations + second.n_evaluations,
        converged=best.converged,
    )
