"""Acceptance gate: twelve numbered criteria, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v``; the lines are repeated in the
terminal summary. Tolerances and runtime budgets are the stated ones.
"""
import math
import sys
import time

import numpy as np
import pytest
import scipy.linalg
from scipy.linalg import eigh_tridiagonal

from delaystab import certificates as cert
from delaystab import scenarios as sc
from delaystab.analysis import check_envelope, fit_decay_rate
from delaystab.cli import main
from delaystab.spectral import default_envelope_grid, estimate_envelope
from delaystab.stepper import BLEW_UP, COMPLETED, StepPlan, integrate, oracle_integrate

RESULTS = {}


def record(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}"
    RESULTS[n] = line
    print(line)
    assert ok, line


def sup_rel(a, b):
    return float(np.max(np.abs(a - b)) / np.max(np.abs(b)))


@pytest.fixture(scope="module")
def hutchinson_runs():
    """16-mode Dirichlet Hutchinson, alpha = -0.25, tau = 0.5, T = 10."""
    scn = sc.hutchinson(-0.25, 0.5, sc.Domain1D(modes=16))
    plan = StepPlan(1e-3, scheme="exp_rk2")
    t0 = time.perf_counter()
    traj = integrate(scn.op, scn.terms, scn.history, 10.0, plan, scn.layout)
    t_int = time.perf_counter() - t0
    t0 = time.perf_counter()
    orc = oracle_integrate(scn.op, scn.terms, scn.history, 10.0, plan, scn.layout,
                           h_oracle=1e-5, record_dt=1e-3)
    t_orc = time.perf_counter() - t0
    return scn, traj, orc, t_int, t_orc


def test_criterion_01_certificate_arithmetic(tmp_path, capsys):
    base = ("[operator]\nkind = diffusion\n[terms.0]\nkind = hutchinson\nalpha = -0.25\n"
            "tau = 0.5\n[certify]\ntheorems = global\nM = 1\nomega = 1\ngamma = {g}\n")
    outs = {}
    t0 = time.perf_counter()
    for g in ("1/4", "1/2", "0"):
        path = tmp_path / f"c{len(outs)}.ini"
        path.write_text(base.format(g=g))
        code = main(["certify", str(path)])
        kv = dict(line.split("=", 1) for line in capsys.readouterr().out.splitlines())
        outs[g] = (code, kv["global.tau0"])
    elapsed = time.perf_counter() - t0
    ok = (outs["1/4"] == (0, "1.098612288668") and outs["1/2"] == (0, "0")
          and outs["0"] == (0, "inf") and elapsed < 1.0)
    record(1, ok, f"tau0(1/4)={outs['1/4'][1]} tau0(1/2)={outs['1/2'][1]} "
                  f"tau0(0)={outs['0'][1]} runtime={elapsed:.3f}s")


def test_criterion_02_oracle_equivalence(hutchinson_runs):
    scn, traj, orc, t_int, t_orc = hutchinson_runs
    n = min(len(traj.h_norms), len(orc.h_norms))
    same_grid = np.allclose(traj.times[:n], orc.times[:n], atol=1e-9)
    diff = sup_rel(traj.h_norms[:n], orc.h_norms[:n])
    runtime = t_int + t_orc
    ok = (traj.terminal == orc.terminal == COMPLETED and same_grid and n == 10001
          and diff <= 1e-4 and runtime < 30.0)
    record(2, ok, f"sup-rel diff={diff:.3e} (tol 1e-4) runtime={runtime:.1f}s "
                  f"(integrate {t_int:.1f}s, oracle {t_orc:.1f}s)")


def test_criterion_03_global_envelope(hutchinson_runs):
    scn, traj, _, t_int, _ = hutchinson_runs
    t0 = time.perf_counter()
    env = estimate_envelope(scn.op)
    c = cert.global_certificate(env.M, env.omega, [t.lipschitz for t in scn.terms], scn.delays,
                                scn.history)
    chk = check_envelope(traj, c)
    fit = fit_decay_rate(traj, "h")
    rate_ref = env.omega - env.M * 0.25 * (1 + math.exp(env.omega * 0.5))
    runtime = t_int + time.perf_counter() - t0
    ok = (c.feasible and abs(c.rate - rate_ref) < 1e-14 and chk.within(1.05)
          and fit.rate >= 0.95 * c.rate and runtime < 30.0)
    record(3, ok, f"max ratio={chk.max_ratio:.4f} (<=1.05) fitted rate={fit.rate:.4f} "
                  f">= 0.95*omega'={0.95 * c.rate:.4f} alpha={c.alpha:.6g} "
                  f"(Simpson err {c.alpha_error:.1e}) runtime={runtime:.1f}s")


def _small_data_run(tau):
    a = lambda x: -0.5 - 0.5 * np.sin(x / 2) ** 2  # sup a = -0.5 at x = 0
    scn = sc.logistic(a, 1.0, -1.0, tau, sc.Domain1D(boundary="neumann", modes=16),
                      small_data_run=True)
    c = scn.meta["small_data_certificate"]
    traj = integrate(scn.op, scn.terms, scn.history, 50.0, StepPlan(min(0.01, tau / 10)),
                     scn.layout)
    chk = check_envelope(traj, c)
    hist_v = sc.v_norm_of_history(scn)
    ok = (c.feasible and c.c1 < scn.op.lambda1 and abs(hist_v - 0.9 * c.gamma0 * c.k0) < 1e-12
          and traj.terminal == COMPLETED and traj.times[-1] == pytest.approx(50.0)
          and chk.within(1.05))
    return ok, scn, c, chk


def test_criterion_04_small_data_envelope():
    t0 = time.perf_counter()
    ok, scn, c, chk = _small_data_run(0.5)
    runtime = time.perf_counter() - t0
    record(4, ok and runtime < 60.0,
           f"eps={scn.meta['eps']:.4g} C1={c.c1:.4g} < lambda1={scn.op.lambda1:.4g} "
           f"K0={c.k0:.6g} gamma0={c.gamma0:.6g} max ratio={chk.max_ratio:.4f} (<=1.05) "
           f"T=50 no blow-up runtime={runtime:.1f}s")


def test_criterion_05_large_delays():
    parts, oks = [], []
    for tau in (1.0, 10.0, 50.0):
        ok, _, _, chk = _small_data_run(tau)
        oks.append(ok)
        parts.append(f"tau={tau:g}: ratio {chk.max_ratio:.4f} {'ok' if ok else 'FAILED'}")
    record(5, all(oks), "; ".join(parts))


def test_criterion_06_linear_delay_implication():
    rng = np.random.default_rng(6)
    t0 = time.perf_counter()
    bad, n = 0, 0
    while n < 1000:
        M = rng.uniform(1.0, 10.0)
        omega = rng.uniform(0.01, 10.0)
        gamma = rng.uniform(0.0, 1.0) * omega / M
        kb = rng.uniform(0.0, 1.0) * (omega / M - gamma)
        if not kb > 0:
            continue
        t_p = cert.linear_delay_tau0(M, omega, gamma, 1.0, kb)
        if t_p is None or not t_p > 0:
            continue
        tau = rng.uniform(0.0, 1.0) * t_p
        if not tau > 0:
            continue
        n += 1
        bad += not cert.jee_condition(M, omega, gamma, 1.0, kb, tau)
    runtime = time.perf_counter() - t0
    record(6, bad == 0 and runtime < 1.0,
           f"{n} samples, {bad} counterexamples, runtime={runtime:.3f}s")


def test_criterion_07_epsilon2_construction():
    rng = np.random.default_rng(7)
    t0 = time.perf_counter()
    n, violations, rejected_osc = 0, 0, 0
    while n < 1000:
        nodes = rng.integers(1, 40)
        mu1 = rng.uniform(0.05, 10.0)
        a1 = rng.uniform(-1.0, 1.0, nodes) * mu1 * rng.uniform(0.0, 1.0)
        a2 = -rng.uniform(0.0, 3.0) * mu1 * rng.uniform(0.0, 1.0, nodes) - rng.uniform(1e-6, 1.0)
        rep = cert.admissibility_competition(2, a1, a2, mu1=mu1)
        if not rep.admissible:
            paper_only = all(c.satisfied for c in rep.conditions if not c.name.endswith("oscillation"))
            rejected_osc += paper_only
            continue
        n += 1
        eps2, delta = cert.select_epsilon2(a1, a2, mu1)
        # both sides, literally, at every node
        lower = np.max(np.vstack([a1 + delta, -a1 + delta, (delta - a2) / 2, -a2 - mu1 + delta]), axis=0)
        upper = mu1 - delta - a2
        violations += not (delta > 0 and np.all(lower <= eps2) and np.all(eps2 <= upper))
    runtime = time.perf_counter() - t0
    record(7, violations == 0 and runtime < 1.0,
           f"{n} admissible triples, {violations} violations, runtime={runtime:.3f}s "
           f"({rejected_osc} draws met the three stated conditions but not osc(a2) < 2 mu1 "
           f"and were excluded)")


def test_criterion_08_dimension_conditions():
    dom = sc.Domain1D()
    presets = {
        "logistic": (sc.logistic(-0.5, 1.0, -1.0, 1.0, dom), 3),
        "modified_hutchinson": (sc.modified_hutchinson_preset(-0.5, 1.0, 1.0, 1.0, 1.0, dom), 2),
        "cubic": (sc.cubic(1.0, dom), 2),
    }
    parts, ok = [], True
    for name, (scn, expected) in presets.items():
        term = scn.terms[0]
        reports = {d: cert.admissibility_diffusion(term.reaction, d, "dirichlet", scn.op.lambda1,
                                                   term=term) for d in (1, 2, 3, 4)}
        dims_ok = [d for d, r in reports.items()
                   if r.condition("dimension_p1").satisfied and r.condition("dimension_p2").satisfied]
        reported = reports[1].constants["max_dimension"]
        ok &= reported == expected and dims_ok == list(range(1, expected + 1))
        parts.append(f"{name} (n1={term.reaction.n1}, n2={term.reaction.n2}): d <= {reported}")
    record(8, ok, "; ".join(parts))


def test_criterion_09_spectral_fidelity(rng):
    op, tr = sc.build_diffusion_operator(sc.Domain1D())
    e_dir = abs(op.lambda1 - 1.0)
    rob = sc.Domain1D(length=1.0, boundary="robin", robin=1.0, modes=16)
    op_r, tr_r = sc.build_diffusion_operator(rob)
    # ghost-point finite differences on 2000 intervals, symmetrised tridiagonal form
    n, a = 2000, 1.0
    h = 1.0 / n
    d = np.full(n + 1, 2.0 / h ** 2)
    d[[0, -1]] += 2.0 * a / h
    e = np.full(n, -1.0 / h ** 2)
    e[[0, -1]] = -math.sqrt(2.0) / h ** 2
    fd = eigh_tridiagonal(d, e, select="i", select_range=(0, 0))[0][0]
    e_rob = abs(op_r.lambda1 - fd) / fd
    trip = 0.0
    for dom, t in ((sc.Domain1D(), tr), (rob, tr_r), (sc.Domain1D(boundary="neumann", eps=0.5), None)):
        t = t or sc.build_diffusion_operator(dom)[1]
        v = rng.standard_normal(dom.modes)
        trip = max(trip, float(np.max(np.abs(t.to_nodal(t.to_modal(v)) - v))))
    record(9, e_dir <= 1e-12 and e_rob <= 1e-4 and trip <= 1e-10,
           f"Dirichlet |lambda1-1|={e_dir:.1e} Robin rel err={e_rob:.2e} (FD {fd:.8f}) "
           f"round trip={trip:.1e}")


def test_criterion_10_stepper_order():
    scn = sc.hutchinson(-0.25, 0.5, sc.Domain1D(modes=8))
    T, dt = 2.0, 1e-3
    orc = oracle_integrate(scn.op, scn.terms, scn.history, T, layout=scn.layout, h_oracle=1e-5,
                           record_dt=dt)
    hs = [4e-3, 2e-3, 1e-3]
    orders = {}
    for scheme in ("exp_euler", "exp_rk2"):
        errs = []
        for h in hs:
            traj = integrate(scn.op, scn.terms, scn.history, T, StepPlan(h, scheme=scheme), scn.layout)
            ref = orc.h_norms[::int(round(h / dt))]
            errs.append(float(np.max(np.abs(traj.h_norms - ref))))
        orders[scheme] = float(np.polyfit(np.log(hs), np.log(errs), 1)[0])
    ok = 0.7 <= orders["exp_euler"] <= 1.3 and 1.7 <= orders["exp_rk2"] <= 2.3
    record(10, ok, f"exp_euler order={orders['exp_euler']:.3f} in [0.7,1.3], "
                   f"exp_rk2 order={orders['exp_rk2']:.3f} in [1.7,2.3]")


def test_criterion_11_blow_up():
    from delaystab import nonlinearity as nl
    from delaystab.history import HistoryBuffer
    from delaystab.spectral import GeneralOperator
    op = GeneralOperator([[0.0]])
    term = nl.DelayTerm(1.0, "logistic_delay", {"xx": 1.0})  # u' = u^2, delayed value unused
    traj = integrate(op, [term], HistoryBuffer.constant([2.0], 1.0), 1.0, StepPlan(1e-3))
    rel = abs(traj.t_inf - 0.5) / 0.5 if traj.t_inf is not None else math.inf
    record(11, traj.terminal == BLEW_UP and rel <= 0.05,
           f"terminal={traj.terminal} T_inf={traj.t_inf} (analytic 0.5, rel err {rel:.2%})")


def test_criterion_12_semigroup_envelope():
    dom = sc.Domain1D(modes=16)
    op, layout, mu = sc.build_damped_wave(dom, 1.0)
    env = estimate_envelope(op)
    grid = default_envelope_grid(op)
    dense = np.array([np.linalg.norm(scipy.linalg.expm(t * op.matrix), 2) for t in grid])
    dominated = bool(np.all(env.M * np.exp(-env.omega * grid) >= dense))
    scn = sc.damped_wave(1.0, dom, amplitude=0.3)
    scn.history = type(scn.history).constant(np.full(op.dim, 0.05), 1.0)
    traj = integrate(scn.op, [], scn.history, 30.0, StepPlan(0.01), scn.layout)
    steps = np.diff(traj.h_norms)
    monotone = bool(np.all(steps <= 0.0))
    record(12, dominated and monotone and grid.size == 200,
           f"M={env.M:.6g} omega={env.omega:.6g} dominates dense norms at {grid.size} points: "
           f"{dominated}; energy non-increasing: {monotone} (max step {steps.max():.1e})")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
