"""Characteristic parametric determining form.

Along the segment ``v(theta) = theta v0 + (1 - theta) J u*`` everything reduces
to the scalar residual ``g(theta) = ||v - J W(v)||_{X^0}``. The parameter ODEs

    theta_squared: dtheta/dtau = -theta g^2
    theta_linear:  dtheta/dtau = -theta g
    eta:           deta/dtau   = -g

are integrated from 1 with ``g`` replaced by the piecewise-linear interpolant
of a sampled table, segment by segment.
"""

from __future__ import annotations

import csv
import enum
import functools
import logging
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, optimize

from .nse import ReferenceProblem, SolverError
from .nudging import NudgingConfig, convex_residuals
from .secant import StagnationError, secant
from .spectral import Trajectory

log = logging.getLogger(__name__)


class OdeVariant(str, enum.Enum):
    THETA_SQUARED = "theta_squared"
    THETA_LINEAR = "theta_linear"
    ETA = "eta"

    @classmethod
    def parse(cls, name: str) -> OdeVariant:
        aliases = {"theta2": cls.THETA_SQUARED, "theta1": cls.THETA_LINEAR}
        return aliases.get(name) or cls(name)


@dataclass(frozen=True, eq=False)
class ConvexPair:
    """Initial trajectory ``v0`` and the constant ``J u*``, both in the projected space."""

    v0: Trajectory
    ju_star: Trajectory

    def __post_init__(self):
        a, b = self.v0, self.ju_star
        if a.grid != b.grid or len(a) != len(b) or not np.isclose(a.stride, b.stride) \
                or not np.isclose(a.s_start, b.s_start):
            raise ValueError("v0 and ju_star must share grid, window and stride")


def convex_trajectory(theta: float, pair: ConvexPair) -> Trajectory:
    if not 0.0 <= theta <= 1.0:
        raise ValueError(f"theta = {theta} outside [0, 1]")
    return pair.v0.combine(theta, pair.ju_star, 1.0 - theta)


class PhiSampleError(SolverError):
    """Solver failure during a theta sweep.

    Carries the offending theta and the samples completed before it, sorted by
    theta, as ``partial_thetas`` and ``partial_g``.
    """

    def __init__(self, theta: float, cause: Exception, partial_thetas: np.ndarray,
                 partial_g: np.ndarray):
        super().__init__(f"residual evaluation failed at theta = {theta!r}: {cause}")
        self.theta = theta
        self.partial_thetas = partial_thetas
        self.partial_g = partial_g


@dataclass(frozen=True, eq=False)
class PhiTable:
    """Sampled ``(theta, g)`` pairs; variant independent."""

    thetas: np.ndarray
    g: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.thetas, dtype=float)
        g = np.asarray(self.g, dtype=float)
        if t.ndim != 1 or t.shape != g.shape or len(t) < 2:
            raise ValueError("thetas and g must be 1-d arrays of equal length >= 2")
        if np.any(np.diff(t) <= 0):
            raise ValueError("thetas must be strictly increasing")
        if t[0] != 0.0 or t[-1] != 1.0:
            raise ValueError("table must include theta = 0 and theta = 1")
        object.__setattr__(self, "thetas", t)
        object.__setattr__(self, "g", g)

    def __len__(self) -> int:
        return len(self.thetas)

    @property
    def floor(self) -> float:
        return max(float(self.g[0]), 0.0)

    def zero_tol(self, factor: float = 3.0) -> float:
        return factor * self.floor

    def interpolant_values(self, factor: float = 3.0) -> np.ndarray:
        """Sample values with negatives clamped and below-floor samples set to exactly zero."""
        g = self.g.copy()
        if np.any(g < 0):
            warnings.warn("negative residual samples clamped to zero", RuntimeWarning, stacklevel=2)
        g[g <= self.zero_tol(factor)] = 0.0
        g[g < 0] = 0.0
        return g

    def __call__(self, theta):
        return np.interp(theta, self.thetas, self.interpolant_values())

    def limit(self, factor: float = 3.0) -> float:
        """First zero of the interpolant met by the flow descending from ``theta = 1``."""
        g = self.interpolant_values(factor)
        zeros = np.nonzero(g == 0.0)[0]
        return float(self.thetas[zeros[-1]])

    def merge(self, thetas, g) -> PhiTable:
        t_all = np.concatenate([self.thetas, np.asarray(thetas, float)])
        g_all = np.concatenate([self.g, np.asarray(g, float)])
        t_u, idx = np.unique(t_all, return_index=True)
        return PhiTable(t_u, g_all[idx])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["theta", "g"])
            for t, g in zip(self.thetas, self.g):
                w.writerow([f"{t:.17g}", f"{g:.17g}"])

    @classmethod
    def from_csv(cls, path) -> PhiTable:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 0], data[:, 1])


# -- sampling -----------------------------------------------------------------

_worker_state: dict = {}


def _init_worker(pair, prob, cfg):
    _worker_state.update(pair=pair, prob=prob, cfg=cfg)


def _eval_batch(pair: ConvexPair, thetas: np.ndarray, prob, cfg) -> np.ndarray:
    return convex_residuals(pair.v0, pair.ju_star, thetas, prob, cfg)


def _worker_batch(thetas):
    s = _worker_state
    try:
        return _eval_batch(s["pair"], thetas, s["prob"], s["cfg"]), None
    except SolverError as exc:
        return None, exc


def _batches(thetas: np.ndarray, size: int) -> list[np.ndarray]:
    return [thetas[i:i + size] for i in range(0, len(thetas), size)]


def evaluate_residuals(pair: ConvexPair, thetas: Sequence[float], prob: ReferenceProblem,
                       cfg: NudgingConfig, workers: int = 1, batch_size: int = 8) -> np.ndarray:
    """``g(theta)`` for each theta; batches run in one vectorised solve, batches across workers."""
    th = np.asarray(thetas, dtype=float)
    if np.any((th < 0) | (th > 1)):
        raise ValueError("thetas must lie in [0, 1]")
    out = np.full(len(th), np.nan)
    if len(th) == 0:
        return out
    chunks = _batches(th, max(1, batch_size))
    if workers > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(workers, initializer=_init_worker, initargs=(pair, prob, cfg)) as ex:
            results = list(ex.map(_worker_batch, chunks))
    else:
        results = []
        for c in chunks:
            try:
                results.append((_eval_batch(pair, c, prob, cfg), None))
            except SolverError as exc:
                results.append((None, exc))
    pos = 0
    for chunk, (vals, exc) in zip(chunks, results):
        if exc is None:
            out[pos:pos + len(chunk)] = vals
        else:
            # re-run singly to pin down the failing theta
            for j, t in enumerate(chunk):
                try:
                    out[pos + j] = _eval_batch(pair, np.array([t]), prob, cfg)[0]
                except SolverError as single:
                    raise _tagged(t, single, th, out) from single
        pos += len(chunk)
    return out


def _tagged(theta, exc, th, out) -> PhiSampleError:
    ok = ~np.isnan(out)
    order = np.argsort(th[ok])
    return PhiSampleError(float(theta), exc, th[ok][order], out[ok][order])


def residual_function(pair: ConvexPair, prob: ReferenceProblem, cfg: NudgingConfig) -> Callable[[float], float]:
    """Scalar ``eta -> residual(convex_trajectory(eta, pair))`` sharing the sweep's code path."""
    def g(eta: float) -> float:
        return float(_eval_batch(pair, np.array([float(eta)]), prob, cfg)[0])

    return g


def sample_phi(pair: ConvexPair, thetas: Sequence[float], prob: ReferenceProblem,
               cfg: NudgingConfig, workers: int = 1, batch_size: int = 8) -> PhiTable:
    th = np.asarray(thetas, dtype=float)
    if np.any(np.diff(th) <= 0) or th[0] != 0.0 or th[-1] != 1.0:
        raise ValueError("thetas must be sorted, distinct and contain 0 and 1")
    return PhiTable(th, evaluate_residuals(pair, th, prob, cfg, workers, batch_size))


def refine_theta_grid(table: PhiTable, region: tuple[float, float], count: int,
                      evaluate: Callable[[np.ndarray], np.ndarray],
                      anchor: float | None = None) -> PhiTable:
    """Add ``count`` log-spaced samples in ``region``.

    Without ``anchor`` the points are ``geomspace(*region)``. With ``anchor``
    they are log-spaced in distance from it; ``region`` must lie on one side.
    Existing samples are kept bit-identical.
    """
    lo, hi = region
    if not 0.0 <= lo < hi <= 1.0:
        raise ValueError(f"region {region} must satisfy 0 <= lo < hi <= 1")
    if anchor is None:
        if lo <= 0:
            raise ValueError("log spacing needs lo > 0; pass an anchor")
        new = np.geomspace(lo, hi, count)
    elif anchor <= lo:
        new = anchor + np.geomspace(max(lo - anchor, (hi - anchor) * 1e-4), hi - anchor, count)
    elif anchor >= hi:
        new = anchor - np.geomspace(max(anchor - hi, (anchor - lo) * 1e-4), anchor - lo, count)
    else:
        raise ValueError("anchor must not lie inside the region")
    new = np.setdiff1d(np.clip(new, 0.0, 1.0), table.thetas)
    if len(new) == 0:
        return table
    return table.merge(new, evaluate(new))


def _local_minima(table: PhiTable) -> list[int]:
    g = table.g
    idx = [i for i in range(1, len(g) - 1) if g[i] <= g[i - 1] and g[i] < g[i + 1]]
    return sorted(idx, reverse=True)


def build_phi_table(pair: ConvexPair, prob: ReferenceProblem, cfg: NudgingConfig, *,
                    n_samples: int = 150, refine_count: int = 20, zero_factor: float = 3.0,
                    locate_max_iter: int = 16, workers: int = 1, batch_size: int = 8) -> PhiTable:
    """Uniform sweep plus automatic refinement near the zero the flow reaches.

    Interior local minima are examined from ``theta = 1`` downwards; each is
    handed to the secant solver, and the first one that converges below the
    zero tolerance is taken as the limit. The zero and ``refine_count``
    log-spaced points on its upper side (the side the flow comes from) are
    added. If no interior zero exists the refinement goes near ``theta = 0``.
    """
    def evaluate(ts):
        return evaluate_residuals(pair, ts, prob, cfg, workers, batch_size)

    table = sample_phi(pair, np.linspace(0.0, 1.0, n_samples), prob, cfg, workers, batch_size)
    tol = table.zero_tol(zero_factor)
    h = 1.0 / (n_samples - 1)
    if table.g[-1] <= tol:
        return table
    extra_t, extra_g = [], []

    def record(x):
        gx = evaluate(np.array([x]))[0]
        extra_t.append(x)
        extra_g.append(gx)
        return gx

    zero = None
    for i in _local_minima(table):
        t = table.thetas
        try:
            tr = secant(record, float(t[i + 1]), float(t[i]), tol=tol, max_iter=locate_max_iter,
                        bounds=(float(t[max(i - 2, 0)]), float(t[i + 1])))
        except StagnationError:
            continue
        if tr.converged:
            zero = tr.eta_bar
            log.info("interior zero located at theta = %.17g", zero)
            break
    table = table.merge(extra_t, extra_g) if extra_t else table
    if zero is not None and zero > 0:
        upper = min(zero + h, 1.0)
        return refine_theta_grid(table, (zero + (upper - zero) * 1e-4, upper), refine_count,
                                 evaluate, anchor=zero)
    return refine_theta_grid(table, (1e-6, min(1e-2, 0.5 * h)), refine_count, evaluate)


# -- parameter ODE --------------------------------------------------------------

@dataclass(eq=False)
class ParamPath:
    taus: np.ndarray
    values: np.ndarray
    variant: OdeVariant
    theta_bar_estimate: float
    node_taus: np.ndarray = field(default_factory=lambda: np.empty(0))
    note: str = ""

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["tau", "value", "variant"])
            for t, v in zip(self.taus, self.values):
                w.writerow([f"{t:.17g}", f"{v:.17g}", self.variant.value])


_QUAD_TOL = 1e-12


def _rate(variant: OdeVariant, theta, gval):
    if variant is OdeVariant.ETA:
        return gval
    if variant is OdeVariant.THETA_LINEAR:
        return theta * gval
    return theta * gval * gval


class _Segment:
    """Affine piece of the interpolant on ``[lo, hi]``; the flow enters at ``hi``."""

    def __init__(self, variant, lo, hi, g_lo, g_hi):
        self.variant, self.lo, self.hi, self.g_lo, self.g_hi = variant, lo, hi, g_lo, g_hi
        self.slope = (g_hi - g_lo) / (hi - lo)
        self.terminal = g_lo == 0.0

    def g(self, theta):
        return self.g_lo + self.slope * (theta - self.lo)

    def _quad(self, a, b):
        """``int_a^b dtheta / rate``, in the variable ``log g`` when ``g`` is sloped.

        The substitution keeps the integrand smooth on segments next to a zero,
        where ``g`` spans many decades.
        """
        s = self.slope
        ga, gb = self.g(a), self.g(b)
        if s == 0.0 or ga <= 0.0 or gb <= 0.0:
            f = lambda x: 1.0 / _rate(self.variant, x, self.g(x))  # noqa: E731
            val, _ = integrate.quad(f, a, b, epsabs=0.0, epsrel=_QUAD_TOL, limit=200)
            return val

        def f(u):
            gv = np.exp(u)
            theta = self.lo + (gv - self.g_lo) / s
            return gv / (s * _rate(self.variant, theta, gv))

        val, _ = integrate.quad(f, np.log(ga), np.log(gb), epsabs=0.0, epsrel=_QUAD_TOL, limit=200)
        return val

    @functools.cached_property
    def _duration(self) -> float:
        return self._crossing_time()

    def duration(self) -> float:
        """Time to cross the whole segment (``inf`` for the terminal one)."""
        return self._duration

    def _crossing_time(self) -> float:
        if self.terminal:
            return np.inf
        lo, hi, gl, gh = self.lo, self.hi, self.g_lo, self.g_hi
        d = hi - lo
        if self.variant is OdeVariant.ETA:
            return d / gl if gh == gl else d / (gh - gl) * np.log1p((gh - gl) / gl)
        if self.variant is OdeVariant.THETA_LINEAR:
            num = hi * gl - lo * gh
            return d / (lo * gh) if num == 0 else np.log1p(num / (lo * gh)) * d / num
        return self._quad(lo, hi)

    def position(self, dt: float) -> float:
        """Parameter value ``dt`` after entering at ``hi``."""
        lo, hi, s = self.lo, self.hi, self.slope
        if dt <= 0:
            return hi
        if self.variant is OdeVariant.ETA:
            if self.g_lo == 0.0:
                return lo + (hi - lo) * np.exp(-s * dt)
            if s == 0:
                return hi - self.g_hi * dt
            return hi + self.g_hi * np.expm1(-s * dt) / s
        if self.variant is OdeVariant.THETA_LINEAR:
            if self.g_lo == 0.0 and lo > 0.0:
                r = (hi - lo) / hi * np.exp(-s * lo * dt)
                return lo + lo * r / (1.0 - r)
            a = self.g(0.0)
            q = dt if a == 0 else -np.expm1(-a * dt) / a
            return hi * (1.0 - a * q) / (1.0 + s * hi * q)
        # theta_squared
        if self.g_lo == 0.0 and lo == 0.0:
            return hi / np.sqrt(1.0 + 2.0 * s * s * hi * hi * dt)
        if self.g_lo == 0.0:
            return self._terminal_theta_squared(dt)
        if dt >= self.duration():
            return lo
        f = lambda x: self._quad(x, hi) - dt  # noqa: E731
        return optimize.brentq(f, lo, hi, xtol=1e-15 * max(hi, 1e-300), rtol=4 * np.finfo(float).eps)

    def _terminal_theta_squared(self, dt: float) -> float:
        z, s = self.lo, self.slope

        def G(x):  # antiderivative of -1 / (x^2 (x + z)) in x = theta - z
            return 1.0 / (z * x) - np.log1p(z / x) / (z * z)

        x0 = self.hi - z
        target = G(x0) + s * s * dt
        f = lambda u: G(np.exp(u)) - target  # noqa: E731
        hi_u = np.log(x0)
        lo_u = np.log(0.5 / (z * target)) if target > 0 else hi_u - 1
        while f(lo_u) < 0:
            lo_u -= 2.0
        if f(hi_u) >= 0:
            return self.hi
        u = optimize.brentq(f, lo_u, hi_u, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        return z + np.exp(u)


def _segments(table: PhiTable, variant: OdeVariant, zero_factor: float):
    g = table.interpolant_values(zero_factor)
    t = table.thetas
    limit = table.limit(zero_factor)
    k = int(np.searchsorted(t, limit))
    return [_Segment(variant, t[j], t[j + 1], g[j], g[j + 1]) for j in range(len(t) - 2, k - 1, -1)], limit


def integrate_param_ode(table: PhiTable, variant: OdeVariant | str, tau_end: float, *,
                        n_points: int = 50, decades: int = 10, zero_factor: float = 3.0,
                        stop_tol: float = 1e-14) -> ParamPath:
    """Exact segment-wise solution of the parameter ODE from ``1`` up to ``tau_end``.

    Output times are ``decades`` log decades below ``tau_end`` with ``n_points``
    per decade, plus zero and every segment crossing time. The path stops early
    once it is within ``stop_tol`` of an interior limit; a limit at zero is
    followed all the way since its distance stays representable.
    """
    variant = OdeVariant.parse(variant) if isinstance(variant, str) else variant
    if tau_end <= 0:
        raise ValueError("tau_end must be positive")
    segs, limit = _segments(table, variant, zero_factor)
    if not segs:
        return ParamPath(np.array([0.0, tau_end]), np.array([1.0, 1.0]), variant, 1.0,
                         note="initial data is a steady state")
    starts = np.concatenate([[0.0], np.cumsum([sg.duration() for sg in segs])])
    taus = np.geomspace(tau_end * 10.0**-decades, tau_end, decades * n_points + 1)
    node_taus = starts[1:][np.isfinite(starts[1:]) & (starts[1:] <= tau_end)]
    taus = np.unique(np.concatenate([[0.0], taus, node_taus]))
    vals = np.empty_like(taus)
    seg_idx = np.searchsorted(starts, taus, side="right") - 1
    for n, (tau, j) in enumerate(zip(taus, seg_idx)):
        j = min(j, len(segs) - 1)
        vals[n] = segs[j].position(tau - starts[j]) if tau > starts[j] else segs[j].hi
    keep = np.ones(len(taus), bool)
    close = np.nonzero(vals - limit <= stop_tol)[0] if limit > 0 else np.nonzero(vals <= 0)[0]
    note = ""
    if len(close):
        keep[close[0]:] = False
        note = f"reached the limit within {stop_tol:g} at tau = {taus[close[0]]:.6g}"
    vals = np.clip(vals, 0.0, 1.0)
    # round-off guard: enforce monotonicity
    vals = np.minimum.accumulate(vals)
    return ParamPath(taus[keep], vals[keep], variant, limit, node_taus, note)


def tau_to_reach(table: PhiTable, variant: OdeVariant | str, distance: float,
                 zero_factor: float = 3.0) -> float:
    """Time at which the path first comes within ``distance`` of its limit."""
    variant = OdeVariant.parse(variant) if isinstance(variant, str) else variant
    segs, limit = _segments(table, variant, zero_factor)
    if not segs:
        return 0.0
    start = 0.0
    for sg in segs:
        if sg.lo - limit < distance or sg.terminal:
            break
        start += sg.duration()
    target = limit + distance
    if target >= sg.hi:
        return start
    f = lambda dt: sg.position(dt) - target  # noqa: E731
    hi = 1.0
    while f(hi) > 0:
        hi *= 4.0
        if hi > 1e300:
            raise ValueError("distance not reachable")
    return start + optimize.brentq(f, 0.0, hi, rtol=1e-12)


# distance to the limit used for the default horizon; a limit at zero can be
# followed far enough that the exponential variants leave their transient
_REACH = {
    (OdeVariant.THETA_SQUARED, "to_zero"): 1e-4,
    (OdeVariant.THETA_SQUARED, "to_interior"): 1e-8,
    (OdeVariant.THETA_LINEAR, "to_zero"): 1e-6,
    (OdeVariant.THETA_LINEAR, "to_interior"): 1e-10,
    (OdeVariant.ETA, "to_zero"): 1e-60,
    (OdeVariant.ETA, "to_interior"): 1e-12,
}


def limit_kind(table: PhiTable) -> str:
    return "to_zero" if table.limit() == 0.0 else "to_interior"


def default_tau_end(table: PhiTable, variant: OdeVariant | str) -> float:
    """Horizon whose final decade sits in the asymptotic regime of the path."""
    variant = OdeVariant.parse(variant) if isinstance(variant, str) else variant
    return tau_to_reach(table, variant, _REACH[(variant, limit_kind(table))])


# -- rate fitting ----------------------------------------------------------------

class RateFitError(ValueError):
    """Path too short or limit still drifting; integrate longer or sample finer."""


@dataclass(frozen=True)
class RateFit:
    case: str
    exponent: float
    r_squared: float
    residual: float
    window: tuple[float, float]

    def to_row(self) -> list[str]:
        return [self.case, f"{self.exponent:.17g}", f"{self.residual:.17g}",
                f"{self.window[0]:.17g}:{self.window[1]:.17g}"]


def write_rate_fits(fits: Sequence[RateFit], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["case", "exponent", "residual", "window"])
        for f in fits:
            w.writerow(f.to_row())


def _linfit(x, y):
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    pred = A @ coef
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(coef[0]), r2, float(np.sqrt(ss_res / len(x)))


def fit_rate(path: ParamPath, case: str, drift_tol: float = 1e-3, theta_bar: float | None = None) -> RateFit:
    """Convergence exponent over the final decade of ``tau``.

    ``to_zero``: slope of ``log theta`` against ``log tau``. ``to_interior``:
    slope of ``log(theta - theta_bar)`` against ``log tau``. Where the decay
    is exponential (``eta``, and ``theta_linear`` towards an interior zero) the
    slope is taken against ``tau`` itself, an e-folding rate, and the drift
    test becomes the distance still left to the limit.
    """
    if case not in ("to_zero", "to_interior"):
        raise ValueError(f"unknown case {case!r}")
    bar = path.theta_bar_estimate if theta_bar is None else theta_bar
    if case == "to_zero":
        bar = 0.0
    t_end = path.taus[-1]
    sel = (path.taus >= t_end / 10.0) & (path.taus > 0)
    if t_end <= 0 or path.taus[path.taus > 0][0] > t_end / 10.0 or sel.sum() < 5:
        raise RateFitError("path does not span a full final decade in tau")
    tau, val = path.taus[sel], path.values[sel]
    # linear decay near a simple zero: eta always, theta_linear at an interior limit
    exponential = path.variant is OdeVariant.ETA or (
        path.variant is OdeVariant.THETA_LINEAR and case == "to_interior")
    # an exponential path moves most in its last decade, so check the distance left instead
    drift = float(val[-1] - bar) if exponential else float(val[0] - val[-1])
    if drift > drift_tol:
        raise RateFitError(f"limit estimate unstable: final-decade drift {drift:.3g} > {drift_tol:g}; "
                           "increase tau_end or refine the theta grid")
    dist = val - bar
    if np.any(dist <= 0):
        raise RateFitError("path reached its limit inside the fitting window")
    y = np.log(dist)
    x = tau if exponential else np.log(tau)
    slope, r2, res = _linfit(x, y)
    return RateFit(case, slope, r2, res, (float(tau[0]), float(tau[-1])))


def lower_bound_ratio(path: ParamPath, table: PhiTable) -> np.ndarray:
    """``theta(tau) (1 + 2 c^2 tau)^{1/2}`` with ``c`` the largest interpolant slope."""
    g = table.interpolant_values()
    c = float(np.max(np.abs(np.diff(g) / np.diff(table.thetas))))
    return path.values * np.sqrt(1.0 + 2.0 * c * c * path.taus)
