"""Reusable experiment recipes shared by the command line and the acceptance tests."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .determining import ConvexPair
from .nse import Integrator, OrbitResult, ReferenceProblem, SolverConfig, _nse_explicit
from .nudging import NudgedSolution, NudgingConfig, constant_projected, solve_nudged
from .spectral import SpectralField, Trajectory, l2_norm


@dataclass(frozen=True)
class SteadyCheck:
    max_drift: float
    final_drift: float
    first_step_drift: float
    steps: int
    wall_time: float

    def ok(self, tol: float = 1e-10) -> bool:
        return self.max_drift < tol


def steady_check(prob: ReferenceProblem, cfg: SolverConfig, nsteps: int = 10_000) -> SteadyCheck:
    """March from ``omega_star`` and track ``|omega - omega_star| / |omega_star|`` at every step."""
    g = cfg.grid
    ref = prob.omega_star.coeffs
    scale = l2_norm(g, ref) or 1.0
    integ = Integrator(cfg, prob.phi.coeffs, _nse_explicit(g))
    drift = np.empty(nsteps + 1)
    t0 = time.perf_counter()
    for i, _, w in integ.march(ref, nsteps):
        drift[i] = l2_norm(g, w - ref) / scale
    return SteadyCheck(float(drift.max()), float(drift[-1]), float(drift[1]) if nsteps else 0.0,
                       nsteps, time.perf_counter() - t0)


def base_window(orbit: OrbitResult, cfg: NudgingConfig, extra: float = 0.0) -> Trajectory:
    """``J u~`` restricted to ``[0, s2 + extra]``."""
    return orbit.projected.window(0.0, cfg.s2 + extra)


def star_window(prob: ReferenceProblem, cfg: NudgingConfig, like: Trajectory) -> Trajectory:
    return constant_projected(prob.omega_star, cfg.projector, like)


def collinear_pair(orbit: OrbitResult, prob: ReferenceProblem, cfg: NudgingConfig) -> ConvexPair:
    """``v0 = J(2 u~ - u*)``, whose midpoint with ``J u*`` is ``J u~``."""
    ju = base_window(orbit, cfg)
    jus = star_window(prob, cfg, ju)
    return ConvexPair(ju.combine(2.0, jus, -1.0), jus)


def perturbed_pair(orbit: OrbitResult, prob: ReferenceProblem, cfg: NudgingConfig,
                   amplitude: float = 0.5, mode: tuple[int, int] = (1, 1)) -> ConvexPair:
    """``v0 = J u~ + delta`` with ``delta`` a single resolved Fourier mode."""
    ju = base_window(orbit, cfg)
    jus = star_window(prob, cfg, ju)
    delta = SpectralField.from_modes(ju.grid, {mode: amplitude})
    return ConvexPair(Trajectory(ju.grid, ju.s_start, ju.stride, ju.coeffs + delta.coeffs), jus)


@dataclass(frozen=True)
class AssimilationReport:
    solution: NudgedSolution
    decades: float
    slope: float
    r_squared: float
    fit_window: tuple[float, float]


def assimilate(orbit: OrbitResult, prob: ReferenceProblem, cfg: NudgingConfig,
               s_end: float = 1.0, floor: float = 1e-13) -> AssimilationReport:
    """Nudge towards ``J u~`` from ``w(0) = 0`` and fit ``log10`` of the relative error.

    The fit uses the samples with ``s > 0`` above ``floor``, where the error
    is still resolvable in double precision.
    """
    ref = orbit.trajectory.window(0.0, s_end)
    v = orbit.projected.window(0.0, s_end)
    sol = solve_nudged(v, prob, cfg, s_end=s_end, store_stride=orbit.trajectory.stride,
                       full_window=True, reference=ref)
    err, t = sol.error, sol.error_times
    le = np.log10(np.maximum(err, 1e-300))
    decades = float(le[t > 0][0] - le.min()) if np.any(t > 0) else 0.0
    sel = (t > 0) & (err > floor)
    if sel.sum() < 3:
        return AssimilationReport(sol, decades, float("nan"), float("nan"), (0.0, 0.0))
    x, y = t[sel], le[sel]
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    ss_res = float(np.sum((y - A @ coef) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return AssimilationReport(sol, decades, float(coef[0]), r2, (float(x[0]), float(x[-1])))


def shift_discrepancy(orbit: OrbitResult, prob: ReferenceProblem, cfg: NudgingConfig,
                      sigma: float = 0.1, stride: float = 0.01) -> float:
    """``max_s |W(v_sigma)(s) - W(v)(s + sigma)| / |W(v)(s + sigma)|`` over ``[s1, s2]``.

    ``v = J u~`` from the stored orbit; ``v_sigma(s) = v(s + sigma)``.
    """
    v = base_window(orbit, cfg, extra=sigma)
    w = solve_nudged(v, prob, cfg, s_end=cfg.s2 + sigma, store_stride=stride).w
    w_shift = solve_nudged(v.shifted(sigma), prob, cfg, s_end=cfg.s2, store_stride=stride).w
    k = int(round(sigma / stride))
    a = w_shift.coeffs
    b = w.coeffs[k:k + len(a)]
    if len(b) != len(a):
        raise ValueError("stored window too short for this shift")
    g = w.grid
    return float(np.max(l2_norm(g, a - b) / l2_norm(g, b)))
