import numpy as np
import pytest

from detform.secant import SecantTrace, StagnationError, secant


def test_vee_converges_to_zero():
    trace = secant(lambda x: abs(x - 0.3), 1.0, 0.9, tol=1e-12)
    assert trace.converged
    assert trace.eta_bar == pytest.approx(0.3, abs=1e-12)
    assert len(trace.rows) <= 6


def test_smooth_root_superlinear():
    trace = secant(lambda x: abs(np.exp(x) - np.exp(0.4)), 1.0, 0.9, tol=1e-14, max_iter=30)
    assert trace.converged and trace.eta_bar == pytest.approx(0.4, abs=1e-13)
    assert trace.superlinear()


def test_first_point_already_converged():
    trace = secant(lambda x: 0.0, 0.5, 0.4, tol=1e-12)
    assert trace.converged and len(trace.rows) == 1 and trace.eta_bar == 0.5


def test_stagnation_raises_with_trace():
    with pytest.raises(StagnationError) as err:
        secant(lambda x: 1.0, 1.0, 0.9)
    assert len(err.value.trace.rows) == 2


def test_iterates_clamped_to_bounds():
    seen = []

    def f(x):
        seen.append(x)
        return abs(x + 0.5)  # zero outside [0, 1]

    with pytest.raises(StagnationError) as err:
        secant(f, 1.0, 0.9, max_iter=6)
    assert min(seen) == 0.0
    assert err.value.trace.rows[-1][1] == 0.0


def test_growth_rejected_and_bisected():
    # the secant step from (1, 0.98) overshoots into a spike below 0.5
    def f(x):
        return 1e6 if x < 0.5 else np.sqrt(x - 0.5)

    trace = secant(f, 1.0, 0.98, tol=1e-10, max_iter=12)
    assert trace.rejected and trace.rejected[0][0] < 0.5
    assert np.all(trace.etas >= 0.5)


def test_max_iter_counts_evaluations():
    calls = []

    def f(x):
        calls.append(x)
        return 1e-3 + (x - 0.3) ** 2

    trace = secant(f, 1.0, 0.98, tol=1e-12, max_iter=7)
    assert len(calls) == 7 and not trace.converged
    assert trace.eta_bar == trace.etas[np.argmin(trace.residuals)]


def test_invalid_starts():
    with pytest.raises(ValueError):
        secant(abs, 0.5, 0.5)
    with pytest.raises(ValueError):
        secant(abs, 1.5, 0.5)


def test_csv(tmp_path):
    trace = SecantTrace(rows=[(0, 1.0, 2.0), (1, 0.5, 1e-13)])
    trace.to_csv(tmp_path / "s.csv")
    assert (tmp_path / "s.csv").read_text().splitlines() == ["i,eta_i,residual_i", "0,1,2", "1,0.5,1e-13"]
