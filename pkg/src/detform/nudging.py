"""Feedback-controlled (nudged) NSE and the map W it defines.

``dw/ds + nu A w + B(w, w) = f - mu nu kappa0^2 (J w - v)`` is solved from
``w(0) = 0``; after the relaxation time ``s1`` the solution stands in for the
unique bounded solution ``W(v)``. The residual ``||v - J W(v)||_{X^0}`` is the
scalar every determining-form evaluation reduces to.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .nse import Integrator, ReferenceProblem, SolverConfig, _record_every
from .spectral import Grid, ModalProjector, SpectralField, Trajectory, advection, l2_norm


@dataclass(frozen=True)
class NudgingConfig:
    solver: SolverConfig
    mu: float = 50.0
    projector: ModalProjector = ModalProjector(5)
    s1: float = 1.0
    s2: float = 1.5

    def __post_init__(self):
        if self.mu < 0:
            raise ValueError("mu must be nonnegative")
        if not 0 < self.s1 < self.s2:
            raise ValueError("need 0 < s1 < s2")
        self.solver.steps(self.s1)
        self.solver.steps(self.s2)

    @classmethod
    def desk(cls, **kw) -> NudgingConfig:
        return cls(SolverConfig.desk(), **{"mu": 50.0, **kw})

    @classmethod
    def paper(cls, **kw) -> NudgingConfig:
        return cls(SolverConfig.paper(), **{"mu": 150.0, **kw})

    @property
    def grid(self) -> Grid:
        return self.solver.grid


class _Drive:
    """Box-restricted samples of one or more driving trajectories, interpolated in ``s``."""

    def __init__(self, traj: Trajectory, cfg: NudgingConfig, s_end: float):
        c = cfg.projector.cutoff
        src = traj.grid
        rows = src.box_rows(c)
        outside = traj.coeffs * ~cfg.projector.mask(src)
        scale = max(float(np.max(np.abs(traj.coeffs))), 1e-300)
        if np.max(np.abs(outside)) > 1e-12 * scale:
            raise ValueError("driving trajectory is not in the projected space")
        if traj.s_start > 1e-12 or traj.s_end < s_end - 1e-9:
            raise ValueError(f"driving trajectory covers [{traj.s_start}, {traj.s_end}], need [0, {s_end}]")
        self.data = np.ascontiguousarray(traj.coeffs[:, rows, : c + 1])
        self.s_start = traj.s_start
        self.stride = traj.stride

    def at(self, s: float) -> np.ndarray:
        x = (s - self.s_start) / self.stride
        i = int(np.floor(x + 1e-9))
        a = x - i
        if abs(a) < 1e-9 or i >= len(self.data) - 1:
            return self.data[min(i, len(self.data) - 1)]
        return (1 - a) * self.data[i] + a * self.data[i + 1]


def _check_traj_pair(a: Trajectory, b: Trajectory) -> None:
    if a.grid != b.grid or len(a) != len(b) or not np.isclose(a.stride, b.stride) \
            or not np.isclose(a.s_start, b.s_start):
        raise ValueError("convex pair trajectories must share grid and window")


@dataclass(eq=False)
class NudgedSolution:
    """Output of one (possibly batched) nudged solve.

    ``residual`` is the sup over every solver step in ``[s1, s_end]``;
    ``s``, ``misfit`` and ``w_l2`` are the per-step diagnostic series.
    """

    residual: np.ndarray
    w: Trajectory | None
    s: np.ndarray
    misfit: np.ndarray
    w_l2: np.ndarray
    error: np.ndarray | None = None
    error_times: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)


def _run(drive_fn, batch_shape: tuple, prob: ReferenceProblem, cfg: NudgingConfig,
         s_end: float, store_stride: float | None, full_window: bool,
         reference: Trajectory | None = None, store: bool = True) -> NudgedSolution:
    sc = cfg.solver
    g = sc.grid
    if prob.grid != g:
        raise ValueError("reference problem grid differs from solver grid")
    c = cfg.projector.cutoff
    rows = g.box_rows(c)
    cols = slice(0, c + 1)
    weights = g.norm_weights[np.ix_(rows, np.arange(c + 1))]
    coupling = cfg.mu * sc.nu * g.kappa0**2
    scale = g.domain_length / (sc.nu * g.kappa0)

    def explicit(s, w):
        adv, speed = advection(g, w)
        n = -adv
        if coupling:
            n[..., rows, cols] -= coupling * (w[..., rows, cols] - drive_fn(s))
        return n, speed

    nsteps = sc.steps(s_end)
    i1 = sc.steps(cfg.s1)
    every = _record_every(sc, store_stride) if store else 0
    first_store = 0 if full_window else i1
    if store and (nsteps - first_store) % every:
        raise ValueError("stored window must be a multiple of store_stride")
    ref_every = None
    if reference is not None:
        ref_every = _record_every(sc, reference.stride)
        if reference.grid != g:
            raise ValueError("reference trajectory must be on the solver grid")

    integ = Integrator(sc, prob.phi.coeffs, explicit)
    w0 = np.zeros(batch_shape + g.half_shape, dtype=complex)
    sup = np.zeros(batch_shape)
    misfit = np.empty((nsteps + 1,) + batch_shape)
    w_l2 = np.empty((nsteps + 1,) + batch_shape)
    frames, err, err_t = [], [], []
    t0 = time.perf_counter()
    for i, s, w in integ.march(w0, nsteps):
        d = drive_fn(s) - w[..., rows, cols]
        m = scale * np.sqrt(np.sum(weights * (d.real**2 + d.imag**2), axis=(-2, -1)))
        misfit[i] = m
        w_l2[i] = l2_norm(g, w)
        if i >= i1:
            np.maximum(sup, m, out=sup)
        if store and i >= first_store and (i - first_store) % every == 0:
            frames.append(w)
        if ref_every and i % ref_every == 0:
            j = i // ref_every
            if j < len(reference):
                err.append(l2_norm(g, w - reference.coeffs[j]) / l2_norm(g, reference.coeffs[j]))
                err_t.append(s)
    traj = None
    if store and not batch_shape:
        traj = Trajectory(g, first_store * sc.dt, every * sc.dt, np.array(frames),
                          {"cfl_max": integ.cfl_max})
    return NudgedSolution(
        residual=sup, w=traj, s=np.arange(nsteps + 1) * sc.dt, misfit=misfit, w_l2=w_l2,
        error=np.array(err) if reference is not None else None,
        error_times=np.array(err_t) if reference is not None else None,
        metadata={"cfl_max": integ.cfl_max, "wall_time": time.perf_counter() - t0, "mu": cfg.mu},
    )


def solve_nudged(v: Trajectory, prob: ReferenceProblem, cfg: NudgingConfig, *,
                 s_end: float | None = None, store_stride: float | None = 0.01,
                 full_window: bool = False, reference: Trajectory | None = None) -> NudgedSolution:
    """Solve the nudged system driven by ``v`` from ``w(0) = 0``.

    ``w`` is stored every ``store_stride`` on ``[s1, s_end]`` (or ``[0, s_end]``
    with ``full_window``). If ``reference`` (full-resolution, stride a multiple
    of dt) is given, relative errors ``|w(s) - ref(s)| / |ref(s)|`` are recorded.
    """
    s_end = cfg.s2 if s_end is None else s_end
    drive = _Drive(v, cfg, s_end)
    return _run(drive.at, (), prob, cfg, s_end, store_stride, full_window, reference)


def map_w(v: Trajectory, prob: ReferenceProblem, cfg: NudgingConfig, *,
          s_end: float | None = None, store_stride: float = 0.01) -> Trajectory:
    """``W(v)`` on ``[s1, s_end]``, sampled every ``store_stride``."""
    return solve_nudged(v, prob, cfg, s_end=s_end, store_stride=store_stride).w


def residual(v: Trajectory, prob: ReferenceProblem, cfg: NudgingConfig) -> float:
    """``||v - J W(v)||_{X^0}`` with the sup over every solver step in ``[s1, s2]``."""
    drive = _Drive(v, cfg, cfg.s2)
    return float(_run(drive.at, (), prob, cfg, cfg.s2, None, False, store=False).residual)


def convex_residuals(v0: Trajectory, base: Trajectory, thetas, prob: ReferenceProblem,
                     cfg: NudgingConfig) -> np.ndarray:
    """Residuals of ``theta v0 + (1 - theta) base`` for a batch of ``theta`` in one solve."""
    _check_traj_pair(v0, base)
    th = np.asarray(thetas, dtype=float)
    if th.ndim != 1 or len(th) == 0:
        raise ValueError("thetas must be a nonempty 1-d sequence")
    d0, db = _Drive(v0, cfg, cfg.s2), _Drive(base, cfg, cfg.s2)
    a = th[:, None, None]

    def drive(s):
        return a * d0.at(s) + (1 - a) * db.at(s)

    return np.asarray(_run(drive, (len(th),), prob, cfg, cfg.s2, None, False, store=False).residual)


def projected_state(f: SpectralField, projector: ModalProjector) -> SpectralField:
    """``J f`` on the projector's compact grid."""
    small = projector.compact_grid(f.grid.domain_length)
    c = f.coeffs * projector.mask(f.grid)
    if small.n_modes >= f.grid.n_modes:
        return SpectralField(f.grid, c)
    return SpectralField(f.grid, c).resample(small)


def constant_projected(f: SpectralField, projector: ModalProjector, like: Trajectory) -> Trajectory:
    """``J f`` held constant over the window and stride of ``like``."""
    jf = projected_state(f, projector)
    if jf.grid != like.grid:
        jf = jf.resample(like.grid)
    return Trajectory(like.grid, like.s_start, like.stride,
                      np.broadcast_to(jf.coeffs, like.coeffs.shape).copy())
