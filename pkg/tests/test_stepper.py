import math

import numpy as np
import pytest

from delaystab import nonlinearity as nl
from delaystab import scenarios as sc
from delaystab.errors import ContractError
from delaystab.history import HistoryBuffer
from delaystab.spectral import GeneralOperator, SpectralOperator, apply_propagator
from delaystab.stepper import (BLEW_UP, COMPLETED, HISTORY_UNDERRUN, StepPlan, detect_blowup,
                               integrate, oracle_integrate)


def delayed_decay_exact(t):
    """u' = -u(t - 1), u = 1 on [-1, 0]."""
    if t <= 1.0:
        return 1.0 - t
    return 1.0 - t + (t - 1.0) ** 2 / 2.0


def delayed_decay_problem():
    op = GeneralOperator([[0.0]])
    return op, [nl.affine_gate(1.0, 0.0, -1.0)], HistoryBuffer.constant([1.0], 1.0)


def test_linear_run_equals_propagator(rng):
    op = SpectralOperator(np.arange(1, 9) ** 2.0)
    u0 = rng.standard_normal(8)
    plan = StepPlan(0.01, keep_states=True)
    traj = integrate(op, [], HistoryBuffer.constant(u0, 1.0), 1.0, plan)
    assert traj.terminal == COMPLETED
    for t, u in zip(traj.times, traj.states):
        assert np.allclose(u, apply_propagator(op, u0, t), rtol=1e-12, atol=1e-14)


def test_times_and_monotone_linear_norms():
    op = SpectralOperator([0.5, 2.0, 4.5])
    traj = integrate(op, [], HistoryBuffer.constant([1.0, -1.0, 0.5], 1.0), 3.0, StepPlan(0.05))
    assert traj.times[0] == 0.0
    assert np.allclose(np.diff(traj.times), 0.05, atol=1e-12)
    assert np.all(np.diff(traj.h_norms) <= 0.0)


@pytest.mark.parametrize("scheme", ["exp_euler", "exp_rk2"])
def test_delayed_decay_analytic(scheme):
    op, terms, hist = delayed_decay_problem()
    traj = integrate(op, terms, hist, 2.0, StepPlan(1e-3, scheme=scheme))
    ref = np.array([abs(delayed_decay_exact(t)) for t in traj.times])
    tol = 1e-3 if scheme == "exp_euler" else 1e-6
    assert np.max(np.abs(traj.h_norms - ref)) < tol


def test_scalar_delay_feedback_against_oracle():
    op = SpectralOperator([1.0])
    term = nl.affine_gate(1.0, 0.0, 1.0)
    hist = HistoryBuffer.from_function(lambda t: np.array([1.0 + 0.5 * np.sin(4 * t)]), 1.0, n=400,
                                       deriv=lambda t: np.array([2.0 * np.cos(4 * t)]))
    plan = StepPlan(1e-3)
    traj = integrate(op, [term], hist, 1.0, plan)
    orc = oracle_integrate(op, [term], hist, 1.0, plan, h_oracle=1e-5)
    assert traj.h_norms[-1] == pytest.approx(orc.h_norms[-1], abs=1e-5)


def test_step_larger_than_delay_rejected():
    op, terms, hist = delayed_decay_problem()
    with pytest.raises(ContractError):
        integrate(op, terms, hist, 1.0, StepPlan(1.5))


def test_delay_offsets_aligned():
    plan = StepPlan(0.01)
    offs = plan.delay_offsets([0.5, 0.25])
    assert [o * plan.h for o in offs] == pytest.approx([0.5, 0.25], rel=1e-15)


def test_blow_up_flagged_near_analytic_time():
    op = GeneralOperator([[0.0]])
    term = nl.logistic_delay(0.1, 0.0, -1.0, 0.0)
    traj = integrate(op, [term], HistoryBuffer.constant([2.0], 0.1), 1.0, StepPlan(1e-3))
    assert traj.terminal == BLEW_UP
    assert abs(traj.t_inf - 0.5) <= 0.025
    assert np.all(np.isfinite(traj.h_norms))


def test_detect_blowup_cases():
    assert detect_blowup(float("nan"))
    assert detect_blowup(1.0, float("nan"), 1e12) is False
    assert detect_blowup(1.0, 2e12)
    assert detect_blowup(float("inf"), 1.0)


def test_decaying_run_never_flags():
    scn = sc.hutchinson(-0.25, 0.5)
    traj = integrate(scn.op, scn.terms, scn.history, 10.0, StepPlan(0.01), scn.layout)
    assert traj.terminal == COMPLETED


def test_history_underrun_reported():
    op, terms, _ = delayed_decay_problem()
    short = HistoryBuffer.constant([1.0], 0.5)
    traj = integrate(op, terms, short, 1.0, StepPlan(0.01))
    assert traj.terminal == HISTORY_UNDERRUN


def test_method_of_steps_locality():
    op = SpectralOperator([1.0])
    term = nl.logistic_delay(1.0, -0.5, 0.0, 0.3)
    base = lambda t: np.array([np.cos(t)])
    bumped = lambda t: np.array([np.cos(t) + (5.0 if t < -1.5 else 0.0)])
    plan = StepPlan(0.01)
    deriv = lambda t: np.array([-np.sin(t)])
    a = integrate(op, [term], HistoryBuffer.from_function(base, 2.0, n=200, deriv=deriv), 1.0, plan)
    b = integrate(op, [term], HistoryBuffer.from_function(bumped, 2.0, n=200, deriv=deriv), 1.0, plan)
    assert np.array_equal(a.h_norms, b.h_norms)


def _order(scheme, h_values, oracle, scn, T):
    errs = []
    for h in h_values:
        traj = integrate(scn.op, scn.terms, scn.history, T, StepPlan(h, scheme=scheme), scn.layout)
        stride = int(round(h / oracle["dt"]))
        ref = oracle["h"][::stride][:len(traj.h_norms)]
        errs.append(np.max(np.abs(traj.h_norms - ref)))
    return np.polyfit(np.log(h_values), np.log(errs), 1)[0]


@pytest.fixture(scope="module")
def smooth_scalar():
    op = SpectralOperator([1.0])
    term = nl.logistic_delay(0.5, 0.0, 0.0, -1.0)  # u' = -u - u u(t - 1/2)
    hist = HistoryBuffer.from_function(lambda t: np.array([0.8 + 0.2 * np.cos(t)]), 0.5, n=500,
                                       deriv=lambda t: np.array([-0.2 * np.sin(t)]))
    scn = sc.Scenario("smooth", op, [term], sc.NodalLayout.identity(1), hist)
    orc = oracle_integrate(op, [term], hist, 2.0, h_oracle=1e-5, record_dt=1e-3)
    return scn, {"dt": 1e-3, "h": orc.h_norms}


@pytest.mark.parametrize("scheme,lo,hi", [("exp_euler", 0.7, 1.3), ("exp_rk2", 1.7, 2.3)])
def test_convergence_order(smooth_scalar, scheme, lo, hi):
    scn, oracle = smooth_scalar
    p = _order(scheme, [4e-3, 2e-3, 1e-3], oracle, scn, 2.0)
    assert lo <= p <= hi


def test_trajectory_csv(tmp_path):
    scn = sc.competition(sc.CompetitionSpec(sc.Domain1D(modes=4), sc.Domain1D(modes=4)))
    traj = integrate(scn.op, scn.terms, scn.history, 0.5, StepPlan(0.1), scn.layout)
    path = tmp_path / "t.csv"
    traj.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,h_norm,v_norm,field_0,field_1"
    assert len(lines) == len(traj.times) + 1
    traj.to_csv(path, every=2)
    rows = path.read_text().splitlines()[1:]
    assert rows[-1].startswith("0.5,")


# -- oracle ----------------------------------------------------------------------

def test_oracle_scalar_exponential():
    orc = oracle_integrate(SpectralOperator([1.0]), [], HistoryBuffer.constant([1.0], 1.0), 1.0,
                           h_oracle=1e-4, record_dt=0.1)
    assert orc.h_norms[-1] == pytest.approx(math.exp(-1.0), abs=1e-10)
    assert orc.scheme == "rk4"


def test_oracle_linear_matches_propagator(rng):
    op = SpectralOperator([1.0, 3.0, 7.0])
    u0 = rng.standard_normal(3)
    orc = oracle_integrate(op, [], HistoryBuffer.constant(u0, 1.0), 1.0, h_oracle=1e-2,
                           record_dt=0.1)
    exact = [np.linalg.norm(apply_propagator(op, u0, t)) for t in orc.times]
    h = 1e-2
    assert np.max(np.abs(orc.h_norms - exact)) < 10 * (7.0 * h) ** 4


def test_oracle_delayed_decay_analytic():
    op, terms, hist = delayed_decay_problem()
    orc = oracle_integrate(op, terms, hist, 2.0, h_oracle=1e-4, record_dt=1e-2)
    ref = np.array([abs(delayed_decay_exact(t)) for t in orc.times])
    assert np.max(np.abs(orc.h_norms - ref)) < 1e-10


def test_oracle_step_halving_delayed_logistic():
    op = GeneralOperator([[0.0]])
    term = nl.logistic_delay(0.5, 1.0, 0.0, -1.0)  # u' = u (1 - u(t - 1/2))
    hist = HistoryBuffer.constant([0.5], 0.5)
    a = oracle_integrate(op, [term], hist, 5.0, h_oracle=2e-4, record_dt=0.1)
    b = oracle_integrate(op, [term], hist, 5.0, h_oracle=1e-4, record_dt=0.1)
    assert np.max(np.abs(a.h_norms - b.h_norms)) < 1e-8


def test_oracle_compiled_and_python_kernels_agree():
    scn = sc.hutchinson(-0.25, 0.5, sc.Domain1D(modes=6))
    kw = dict(h_oracle=1e-3, record_dt=0.05)
    a = oracle_integrate(scn.op, scn.terms, scn.history, 1.0, layout=scn.layout, use_numba=True, **kw)
    b = oracle_integrate(scn.op, scn.terms, scn.history, 1.0, layout=scn.layout, use_numba=False, **kw)
    assert np.allclose(a.h_norms, b.h_norms, rtol=1e-13)


def test_oracle_callable_path_matches_table_path():
    op = SpectralOperator([1.0])
    hist = HistoryBuffer.constant([0.7], 0.3)
    table = nl.sine_lipschitz(0.3, 0.2, 0.5)
    func = nl.callable_lipschitz(0.3, lambda x, y: 0.2 * np.sin(x) + 0.5 * np.sin(y), 0.5)
    kw = dict(h_oracle=1e-3, record_dt=0.01)
    a = oracle_integrate(op, [table], hist, 2.0, **kw)
    b = oracle_integrate(op, [func], hist, 2.0, **kw)
    assert np.allclose(a.h_norms, b.h_norms, rtol=1e-12)


def test_oracle_blow_up():
    op = GeneralOperator([[0.0]])
    term = nl.logistic_delay(0.1, 0.0, -1.0, 0.0)
    orc = oracle_integrate(op, [term], HistoryBuffer.constant([2.0], 0.1), 1.0, h_oracle=1e-4,
                           record_dt=1e-3)
    assert orc.terminal == BLEW_UP
    assert abs(orc.t_inf - 0.5) < 0.01


def test_oracle_step_must_be_finer_than_plan():
    op, terms, hist = delayed_decay_problem()
    with pytest.raises(ContractError):
        oracle_integrate(op, terms, hist, 1.0, StepPlan(1e-3), h_oracle=5e-4)
