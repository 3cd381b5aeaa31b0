import numpy as np
import pytest

from detform.nse import ReferenceProblem, SolverConfig, generate_orbit
from detform.determining import ConvexPair
from detform.nudging import (NudgingConfig, constant_projected, convex_residuals, map_w,
                             projected_state, residual, solve_nudged)
from detform.secant import secant_solve
from detform.spectral import Grid, ModalProjector, l2_norm


@pytest.fixture(scope="module")
def small():
    g = Grid(32)
    solver = SolverConfig(g, dt=2e-4)
    cfg = NudgingConfig(solver, mu=50.0)
    prob = ReferenceProblem.paper(g)
    orbit = generate_orbit(prob, solver, spin_up=2.0, window=1.6, stride=0.01)
    v = orbit.projected.window(0.0, cfg.s2)
    return cfg, prob, orbit, v


def test_nudged_solution_synchronizes(small):
    cfg, prob, orbit, v = small
    assert residual(v, prob, cfg) < 1e-9


def test_unnudged_control_does_not_synchronize(small):
    cfg, prob, orbit, v = small
    cfg0 = NudgingConfig(cfg.solver, mu=0.0)
    sol = solve_nudged(v, prob, cfg0, s_end=1.0, full_window=True,
                       reference=orbit.trajectory.window(0.0, 1.0))
    assert sol.error[-1] > 1e-2


def test_error_recorded_against_reference(small):
    cfg, prob, orbit, v = small
    sol = solve_nudged(v, prob, cfg, s_end=1.0, full_window=True,
                       reference=orbit.trajectory.window(0.0, 1.0))
    assert sol.error[0] == pytest.approx(1.0)
    assert sol.error[-1] < 1e-8
    assert len(sol.s) == cfg.solver.steps(1.0) + 1
    assert sol.misfit.shape == sol.w_l2.shape


def test_map_w_window(small):
    cfg, prob, orbit, v = small
    w = map_w(v, prob, cfg, store_stride=0.05)
    assert w.s_start == pytest.approx(cfg.s1)
    assert w.s_end == pytest.approx(cfg.s2)
    ref = orbit.trajectory.window(cfg.s1, cfg.s2).coeffs[::5]
    assert np.max(l2_norm(w.grid, w.coeffs - ref) / l2_norm(w.grid, ref)) < 1e-9


def test_batched_matches_single(small):
    cfg, prob, orbit, v = small
    jus = constant_projected(prob.omega_star, cfg.projector, v)
    v0 = v.combine(2.0, jus, -1.0)
    thetas = np.array([0.2, 0.9])
    batch = convex_residuals(v0, jus, thetas, prob, cfg)
    singles = [residual(v0.combine(t, jus, 1 - t), prob, cfg) for t in thetas]
    assert np.allclose(batch, singles, rtol=1e-10)


def test_rejects_unprojected_drive(small):
    cfg, prob, orbit, v = small
    full = orbit.trajectory.window(0.0, cfg.s2)
    with pytest.raises(ValueError, match="projected"):
        residual(full, prob, cfg)


def test_rejects_short_drive(small):
    cfg, prob, orbit, v = small
    with pytest.raises(ValueError, match="covers"):
        residual(v.window(0.0, 1.0), prob, cfg)


def test_projected_state_compact(small):
    cfg, prob, *_ = small
    js = projected_state(prob.omega_star, ModalProjector(5))
    assert js.grid.n_modes == 16
    assert js.mode(3, 4) == prob.omega_star.mode(3, 4)


def test_config_validation():
    solver = SolverConfig(Grid(16), dt=1e-3)
    with pytest.raises(ValueError):
        NudgingConfig(solver, mu=-1.0)
    with pytest.raises(ValueError):
        NudgingConfig(solver, s1=2.0, s2=1.5)
    assert NudgingConfig.paper().mu == 150.0


def test_constant_drive_gives_steady_state(small):
    cfg, prob, orbit, v = small
    jus = constant_projected(prob.omega_star, cfg.projector, v)
    w = map_w(jus, prob, cfg, store_stride=0.05)
    ref = prob.omega_star.coeffs
    assert l2_norm(w.grid, w.coeffs[-1] - ref) < 1e-6 * l2_norm(w.grid, ref)


def test_secant_on_fixed_point_stops_at_once(small):
    cfg, prob, orbit, v = small
    jus = constant_projected(prob.omega_star, cfg.projector, v)
    trace = secant_solve(ConvexPair(v, jus), 1.0, 0.98, 1e-6, 10, prob, cfg)
    assert trace.converged and len(trace.rows) == 1 and trace.eta_bar == 1.0
