"""Vorticity-form 2D NSE: reference problem, AB3 integrating-factor stepper, orbits."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np

from .spectral import (
    Grid,
    ModalProjector,
    SpectralField,
    Trajectory,
    advection,
    l2_norm,
    velocity_from_vorticity,
)

log = logging.getLogger(__name__)

AB3_WEIGHTS = (23.0 / 12.0, -16.0 / 12.0, 5.0 / 12.0)


class SolverError(RuntimeError):
    """Time integration aborted (CFL violation or non-finite state)."""


class CFLError(SolverError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    grid: Grid
    nu: float = 1.0
    dt: float = 2e-4
    scheme: str = "AB3-IF"
    cfl_limit: float = 1.0

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.nu <= 0:
            raise ValueError("nu must be positive")
        if self.scheme != "AB3-IF":
            raise ValueError(f"unknown scheme {self.scheme!r}")

    @classmethod
    def desk(cls, **kw) -> SolverConfig:
        return cls(Grid(64), **{"dt": 2e-4, **kw})

    @classmethod
    def paper(cls, **kw) -> SolverConfig:
        return cls(Grid(256), **{"dt": 5e-5, **kw})

    def steps(self, duration: float) -> int:
        n = duration / self.dt
        if abs(n - round(n)) > 1e-6 * max(1.0, n):
            raise ValueError(f"duration {duration} is not a multiple of dt = {self.dt}")
        return int(round(n))


@dataclass(frozen=True, eq=False)
class ReferenceProblem:
    """Steady vorticity ``omega_star`` and the force curl ``phi`` that holds it fixed."""

    omega_star: SpectralField
    phi: SpectralField

    @classmethod
    def paper(cls, grid: Grid, nu: float = 1.0) -> ReferenceProblem:
        """Single-shell state on ``|k|^2 = 25`` with ``phi = 25 nu omega_star``."""
        ws = SpectralField.from_modes(grid, {(3, 4): 24 + 36j, (5, 0): 60 + 84j})
        return cls(ws, ws * (25.0 * nu * grid.kappa0**2))

    @classmethod
    def unforced(cls, grid: Grid) -> ReferenceProblem:
        z = SpectralField.zeros(grid)
        return cls(z, z)

    @property
    def grid(self) -> Grid:
        return self.omega_star.grid

    def perturbed_start(self, amplitude: float = 1.0) -> SpectralField:
        """Default orbit seed: ``omega_star`` plus a (1,1) vorticity mode."""
        return self.omega_star + SpectralField.from_modes(self.grid, {(1, 1): amplitude})


def nse_rhs(omega: SpectralField, phi: SpectralField, nu: float = 1.0) -> SpectralField:
    """``-u.grad(omega) + phi``; diffusion is left to the integrating factor."""
    adv, _ = advection(omega.grid, omega.coeffs)
    return SpectralField(omega.grid, phi.coeffs - adv)


def max_speed(omega: SpectralField) -> float:
    u1, u2 = velocity_from_vorticity(omega)
    a, b = u1.to_physical(), u2.to_physical()
    return float(np.sqrt(np.max(a * a + b * b)))


def step_ab3_if(history, omega: SpectralField, cfg: SolverConfig,
                forcing: SpectralField | None = None) -> SpectralField:
    """One AB3 step with exact integrating factor for ``-nu A``.

    ``history`` holds the three most recent explicit right-hand sides, newest
    first. When ``forcing`` is given it is integrated exactly (the step acts on
    the deviation from the Stokes state ``forcing / (nu |k|^2)``) and must not
    also appear in ``history``.
    """
    if len(history) != 3:
        raise ValueError("AB3 needs three history entries")
    g = cfg.grid
    cfl = cfg.dt * max_speed(omega) / g.spacing
    if cfl >= cfg.cfl_limit:
        raise CFLError(f"CFL number {cfl:.3f} >= {cfg.cfl_limit}")
    lin = cfg.nu * g.ksq
    e1 = np.exp(-lin * cfg.dt)
    stokes = 0.0 if forcing is None else forcing.coeffs * (g.inv_ksq / cfg.nu)
    z = omega.coeffs - stokes
    acc = np.zeros_like(z)
    ej = e1
    for beta, rhs in zip(AB3_WEIGHTS, history):
        acc += beta * ej * rhs.coeffs
        ej = ej * e1
    return SpectralField(g, stokes + e1 * z + cfg.dt * acc)


Explicit = Callable[[float, np.ndarray], "tuple[np.ndarray, float]"]


class Integrator:
    """AB3 integrating-factor marcher over (batched) half-spectrum arrays.

    The explicit term ``explicit(s, w) -> (N, max_speed)`` excludes diffusion
    and the constant forcing; the latter is absorbed exactly by stepping the
    deviation from the Stokes state. The first two steps use integrating-factor
    RK4 so that the startup error stays below third order.
    """

    def __init__(self, cfg: SolverConfig, forcing: np.ndarray | None, explicit: Explicit):
        g = cfg.grid
        self.cfg = cfg
        self.explicit = explicit
        dt = cfg.dt
        lin = cfg.nu * g.ksq
        self.e1 = np.exp(-lin * dt)
        self.eh = np.exp(-lin * dt / 2)
        self.e2 = self.e1 * self.e1
        self.e3 = self.e2 * self.e1
        self.stokes = 0.0 if forcing is None else forcing * (g.inv_ksq / cfg.nu)
        self.cfl_max = 0.0

    def _eval(self, s: float, w: np.ndarray) -> np.ndarray:
        n, speed = self.explicit(s, w)
        cfl = self.cfg.dt * speed / self.cfg.grid.spacing
        self.cfl_max = max(self.cfl_max, cfl)
        if not np.isfinite(cfl):
            raise SolverError(f"non-finite state at s = {s:.6g}")
        if cfl >= self.cfg.cfl_limit:
            raise CFLError(f"CFL number {cfl:.3f} >= {self.cfg.cfl_limit} at s = {s:.6g}")
        return n

    def _rk4(self, s: float, w: np.ndarray, k1: np.ndarray) -> np.ndarray:
        dt, e1, eh = self.cfg.dt, self.e1, self.eh
        z = w - self.stokes
        za = eh * (z + 0.5 * dt * k1)
        k2 = self._eval(s + 0.5 * dt, za + self.stokes)
        zb = eh * z + 0.5 * dt * k2
        k3 = self._eval(s + 0.5 * dt, zb + self.stokes)
        zc = e1 * z + dt * eh * k3
        k4 = self._eval(s + dt, zc + self.stokes)
        z1 = e1 * z + (dt / 6.0) * (e1 * k1 + 2.0 * eh * (k2 + k3) + k4)
        return z1 + self.stokes

    def march(self, w0: np.ndarray, nsteps: int, s0: float = 0.0) -> Iterator[tuple[int, float, np.ndarray]]:
        """Yield ``(step, s, w)`` for ``step = 0..nsteps``, starting with the initial state."""
        dt = self.cfg.dt
        b0, b1, b2 = AB3_WEIGHTS
        w = np.array(w0, dtype=complex)
        hist: list[np.ndarray] = []
        yield 0, s0, w
        for i in range(nsteps):
            s = s0 + i * dt
            n = self._eval(s, w)
            if i < 2:
                w = self._rk4(s, w, n)
            else:
                z = w - self.stokes
                z = self.e1 * z + dt * (b0 * self.e1 * n + b1 * self.e2 * hist[0] + b2 * self.e3 * hist[1])
                w = z + self.stokes
            hist = [n] + hist[:1]
            yield i + 1, s0 + (i + 1) * dt, w


def _nse_explicit(grid: Grid) -> Explicit:
    def explicit(s, w):
        adv, speed = advection(grid, w)
        return -adv, speed

    return explicit


def _record_every(cfg: SolverConfig, stride: float | None) -> int:
    if stride is None:
        return 1
    every = stride / cfg.dt
    if abs(every - round(every)) > 1e-6 or round(every) < 1:
        raise ValueError(f"stride {stride} must be a positive multiple of dt = {cfg.dt}")
    return int(round(every))


def solve_nse(omega0: SpectralField, prob: ReferenceProblem, cfg: SolverConfig, s_end: float,
              stride: float | None = None, projector: ModalProjector | None = None) -> Trajectory:
    """Forced NSE on ``[0, s_end]``; frames every ``stride`` (default every step).

    With ``projector`` the stored frames are ``J omega`` on the projector's compact grid.
    """
    g = cfg.grid
    if omega0.grid != g or prob.grid != g:
        raise ValueError("initial data, problem and solver must share a grid")
    nsteps = cfg.steps(s_end)
    every = _record_every(cfg, stride)
    if nsteps % every:
        raise ValueError("s_end must be a multiple of stride")
    integ = Integrator(cfg, prob.phi.coeffs, _nse_explicit(g))
    frames = []
    t0 = time.perf_counter()
    for i, _, w in integ.march(omega0.coeffs, nsteps):
        if i % every == 0:
            frames.append(w)
    coeffs = np.array(frames)
    meta = {"n_modes": g.n_modes, "nu": cfg.nu, "dt": cfg.dt, "s_end": s_end,
            "cfl_max": integ.cfl_max, "wall_time": time.perf_counter() - t0}
    traj = Trajectory(g, 0.0, every * cfg.dt, coeffs, meta)
    return traj.project(projector) if projector is not None else traj


@dataclass(eq=False)
class OrbitResult:
    """Post-spin-up attractor trajectory and its recurrence diagnostics.

    ``trajectory`` is the full field at ``stride``; ``projected`` is ``J u``
    at every solver step on the projector's compact grid, which is what the
    nudged system consumes.
    """

    trajectory: Trajectory
    projected: Trajectory
    final_state: SpectralField
    degenerate: bool
    period: float | None
    recurrence_error: float
    metadata: dict = field(default_factory=dict)

    @property
    def periodic(self) -> bool:
        return (not self.degenerate) and self.recurrence_error < 1e-3


def _dominant_period(series: np.ndarray, dt: float) -> float | None:
    x = series - series.mean()
    if not np.any(x):
        return None
    ac = np.correlate(x, x, mode="full")[len(x) - 1:]
    ac = ac / ac[0]
    neg = np.nonzero(ac < 0)[0]
    if len(neg) == 0:
        return None
    tail = ac[neg[0]:]
    j = int(np.argmax(tail))
    return float((neg[0] + j) * dt) if tail[j] > 0 else None


def recurrence(traj: Trajectory) -> tuple[float, float | None]:
    """``min_P |u(P) - u(0)| / |u(0)|`` beyond the first local maximum of that distance."""
    ref = traj.coeffs[0]
    d = l2_norm(traj.grid, traj.coeffs - ref) / l2_norm(traj.grid, ref)
    peaks = np.nonzero((d[1:-1] >= d[:-2]) & (d[1:-1] > d[2:]))[0]
    if len(peaks) == 0:
        return float(d[-1]), None
    j0 = peaks[0] + 1
    j = j0 + int(np.argmin(d[j0:]))
    return float(d[j]), float(j * traj.stride)


def generate_orbit(prob: ReferenceProblem, cfg: SolverConfig, spin_up: float = 50.0,
                   window: float = 2.0, stride: float = 0.01,
                   projector: ModalProjector = ModalProjector(5),
                   omega0: SpectralField | None = None, recipe: str | None = None) -> OrbitResult:
    """Spin up from ``omega0`` (default ``omega_star`` + unit (1,1) mode) and record ``[0, window]``."""
    g = cfg.grid
    if omega0 is None:
        omega0 = prob.perturbed_start(1.0)
        recipe = recipe or "omega_star + 1.0 * mode(1,1)"
    recipe = recipe or "user-supplied omega0"
    t0 = time.perf_counter()
    integ = Integrator(cfg, prob.phi.coeffs, _nse_explicit(g))
    w = omega0.coeffs
    for _, _, w in integ.march(w, cfg.steps(spin_up)):
        pass
    log.info("orbit spin-up to s = %g done in %.1fs", spin_up, time.perf_counter() - t0)

    every = _record_every(cfg, stride)
    nsteps = cfg.steps(window)
    if nsteps % every:
        raise ValueError("window must be a multiple of stride")
    small = projector.compact_grid(g.domain_length)
    rows = small.box_rows(small.n_modes // 2 - 1)
    big_rows = g.box_rows(small.n_modes // 2 - 1)
    cols = small.n_modes // 2
    mask = projector.mask(g)
    full, proj = [], np.zeros((nsteps + 1,) + small.half_shape, dtype=complex)
    for i, _, w in integ.march(w, nsteps):
        proj[i][np.ix_(rows, np.arange(cols))] = (w * mask)[np.ix_(big_rows, np.arange(cols))]
        if i % every == 0:
            full.append(w)
    meta = {"recipe": recipe, "spin_up": spin_up, "window": window, "n_modes": g.n_modes,
            "nu": cfg.nu, "dt": cfg.dt, "cfl_max": integ.cfl_max,
            "wall_time": time.perf_counter() - t0}
    traj = Trajectory(g, 0.0, every * cfg.dt, np.array(full), dict(meta))
    projected = Trajectory(small, 0.0, cfg.dt, proj, dict(meta))

    spread = l2_norm(g, traj.coeffs - traj.coeffs[0]) / max(l2_norm(g, traj.coeffs[0]), 1e-300)
    degenerate = bool(np.max(spread) < 1e-8)
    if degenerate:
        rec, period = 0.0, None
    else:
        rec, period = recurrence(traj)
        ac_period = _dominant_period(projected.norms(), cfg.dt)
        meta["autocorrelation_period"] = ac_period
        if rec >= 1e-3:
            log.warning("orbit is not periodic on the window: recurrence error %.3g", rec)
    meta.update(degenerate=degenerate, period=period, recurrence_error=rec)
    return OrbitResult(traj, projected, SpectralField(g, w), degenerate, period, rec, meta)
