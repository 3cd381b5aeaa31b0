"""Secant search for characteristic determining values (zeros of the residual along a segment)."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

log = logging.getLogger(__name__)


class StagnationError(RuntimeError):
    """Two consecutive residuals coincide while still above tolerance."""

    def __init__(self, msg: str, trace: SecantTrace):
        super().__init__(msg)
        self.trace = trace


@dataclass
class SecantTrace:
    """Accepted iterates ``(i, eta_i, residual_i)`` in the layout of a secant table."""

    rows: list[tuple[int, float, float]] = field(default_factory=list)
    converged: bool = False
    eta_bar: float = float("nan")
    rejected: list[tuple[float, float]] = field(default_factory=list)
    evaluations: int = 0

    @property
    def etas(self) -> np.ndarray:
        return np.array([r[1] for r in self.rows])

    @property
    def residuals(self) -> np.ndarray:
        return np.array([r[2] for r in self.rows])

    def superlinear(self) -> bool:
        """``log r_{i+1} / log r_i > 1`` over the final three accepted iterates."""
        r = self.residuals
        if len(r) < 3 or np.any(r[-3:] >= 1) or np.any(r[-3:] < 0):
            return False
        # an exact zero counts as infinitely fast decay
        lr = np.log(np.maximum(r[-3:], np.finfo(float).tiny))
        return bool(np.all(lr[1:] / lr[:-1] > 1))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["i", "eta_i", "residual_i"])
            for i, eta, res in self.rows:
                w.writerow([i, f"{eta:.17g}", f"{res:.17g}"])


def secant(func: Callable[[float], float], x0: float, x1: float, tol: float = 1e-12,
           max_iter: int = 20, bounds: tuple[float, float] = (0.0, 1.0),
           growth_limit: float = 10.0, max_bisections: int = 8) -> SecantTrace:
    """Secant iteration for a zero of a nonnegative function.

    Iterates are clamped to ``bounds``. An update whose residual exceeds
    ``growth_limit`` times the current one is rejected and replaced by the
    midpoint towards the lowest-residual iterate seen so far. ``max_iter``
    bounds the number of function evaluations.
    """
    lo, hi = bounds
    if x0 == x1:
        raise ValueError("secant needs two distinct starting points")
    if not (lo <= x0 <= hi and lo <= x1 <= hi):
        raise ValueError(f"starting points must lie in {bounds}")
    trace = SecantTrace()

    def evaluate(x):
        trace.evaluations += 1
        return float(func(x))

    def accept(x, g):
        trace.rows.append((len(trace.rows), float(x), float(g)))
        if g < tol:
            trace.converged, trace.eta_bar = True, float(x)
            return True
        return False

    g0 = evaluate(x0)
    if accept(x0, g0):
        return trace
    g1 = evaluate(x1)
    if accept(x1, g1):
        return trace
    while trace.evaluations < max_iter:
        if g1 == g0:
            raise StagnationError(
                f"residual stagnated at {g1:.3e} (eta = {x1}); refine the window or loosen tol", trace)
        x = min(max(x1 - g1 * (x1 - x0) / (g1 - g0), lo), hi)
        if x == x1:
            raise StagnationError(f"secant update made no progress at eta = {x1}", trace)
        g = evaluate(x)
        best_x = x1 if g1 <= g0 else x0
        bisections = 0
        while g > growth_limit * g1:
            trace.rejected.append((x, g))
            if bisections >= max_bisections or trace.evaluations >= max_iter:
                break
            log.debug("rejected eta = %.17g (residual %.3e); bisecting", x, g)
            x = 0.5 * (x + best_x)
            g = evaluate(x)
            bisections += 1
        if g > growth_limit * g1:
            break
        x0, g0, x1, g1 = x1, g1, x, g
        if accept(x, g):
            return trace
    trace.eta_bar = trace.rows[int(np.argmin(trace.residuals))][1]
    return trace


def secant_solve(pair, eta0: float, eta1: float, tol: float, max_iter: int, prob, cfg) -> SecantTrace:
    """Secant on ``g(eta) = residual(eta v0 + (1 - eta) J u*)`` for a convex pair."""
    from .determining import residual_function

    return secant(residual_function(pair, prob, cfg), eta0, eta1, tol=tol, max_iter=max_iter)
