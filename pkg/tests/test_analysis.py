import math

import numpy as np
import pytest

from delaystab import certificates as cert
from delaystab import scenarios as sc
from delaystab.analysis import check_envelope, dominant_period, fit_decay_rate, window_suprema
from delaystab.errors import FitError
from delaystab.history import HistoryBuffer
from delaystab.spectral import SpectralOperator, estimate_envelope
from delaystab.stepper import StepPlan, integrate


def test_fit_pure_linear_run():
    op = SpectralOperator([1.0, 4.0])
    traj = integrate(op, [], HistoryBuffer.constant([1.0, 0.0], 1.0), 10.0, StepPlan(0.01))
    fit = fit_decay_rate(traj)
    assert fit.rate == pytest.approx(1.0, abs=1e-6)
    assert fit.r2 > 1 - 1e-10


def test_fit_synthetic_exponential():
    t = np.linspace(0, 8, 400)
    fit = fit_decay_rate((t, 3.0 * np.exp(-0.7 * t)))
    assert fit.rate == pytest.approx(0.7, abs=1e-8)
    assert fit.intercept == pytest.approx(math.log(3.0), abs=1e-8)


def test_fit_constant_is_zero_rate():
    t = np.linspace(0, 1, 50)
    assert fit_decay_rate((t, np.full(50, 2.0))).rate == pytest.approx(0.0, abs=1e-12)


def test_fit_errors():
    t = np.linspace(0, 1, 10)
    with pytest.raises(FitError):
        fit_decay_rate((t, np.exp(-t)))
    t = np.linspace(0, 1, 100)
    with pytest.raises(FitError):
        fit_decay_rate((t, np.zeros(100)))


def test_window_suprema():
    t = np.linspace(0, 10, 1001)
    ts, ys = window_suprema(t, np.abs(np.sin(t)), 2 * math.pi)
    assert len(ts) == 2 and np.all(ys > 0.99)


def test_damped_wave_windowed_fit():
    scn = sc.damped_wave(1.0, sc.Domain1D(modes=16), amplitude=0.3)
    traj = integrate(scn.op, [], scn.history, 60.0, StepPlan(0.01), scn.layout)
    period = dominant_period(scn.op)
    assert period == pytest.approx(2 * math.pi / math.sqrt(0.75), rel=1e-10)
    fit = fit_decay_rate(traj, window=period)
    env = estimate_envelope(scn.op)
    assert fit.rate == pytest.approx(env.omega, rel=0.02)


def test_envelope_check_feasible_global():
    scn = sc.hutchinson(-0.25, 0.5)
    traj = integrate(scn.op, scn.terms, scn.history, 10.0, StepPlan(0.01), scn.layout)
    c = cert.global_certificate(1.0, 1.0, [0.25], [0.5], scn.history)
    chk = check_envelope(traj, c)
    assert chk.status == "checked" and chk.passed
    assert chk.max_ratio <= 1.0


def test_envelope_check_skipped_above_threshold():
    scn = sc.hutchinson(-0.25, 1.2)
    traj = integrate(scn.op, scn.terms, scn.history, 2.0, StepPlan(0.01), scn.layout)
    c = cert.global_certificate(1.0, 1.0, [0.25], [1.2], scn.history)
    chk = check_envelope(traj, c)
    assert not c.feasible
    assert chk.status.startswith("skipped")
    assert not chk.passed


def test_zero_data_ratio_zero(tmp_path):
    scn = sc.hutchinson(-0.25, 0.5, amplitude=0.0)
    traj = integrate(scn.op, scn.terms, scn.history, 2.0, StepPlan(0.01), scn.layout)
    c = cert.global_certificate(1.0, 1.0, [0.25], [0.5], scn.history)
    chk = check_envelope(traj, c)
    assert np.all(traj.h_norms == 0) and np.all(chk.ratios == 0)
    chk.to_csv(tmp_path / "e.csv")
    assert (tmp_path / "e.csv").read_text().splitlines()[0] == "t,norm,envelope,ratio"


def test_small_data_envelope_uses_v_norm():
    scn = sc.logistic(-0.5, 1.0, -1.0, 1.0, sc.Domain1D(boundary="neumann"), small_data_run=True)
    traj = integrate(scn.op, scn.terms, scn.history, 10.0, StepPlan(0.01), scn.layout)
    chk = check_envelope(traj, scn.meta["small_data_certificate"])
    assert chk.norm == "v" and chk.passed
