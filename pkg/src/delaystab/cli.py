"""Command-line front end: ``delaystab {certify,simulate,sweep,validate} CONFIG``.

Exit codes: 0 success, 2 configuration error, 3 infeasible certificate with
``--require-feasible``, 4 numerical failure.
"""
import argparse
import copy
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import _format
from . import certificates as cert
from .analysis import check_envelope, dominant_period, fit_decay_rate
from .config import build_scenario, load_config, number
from .errors import (ConfigurationError, ContractError, FitError, NotExponentiallyStable,
                     NotGloballyLipschitz, RootFindingError)
from .nonlinearity import LipschitzData
from .spectral import SpectralOperator, estimate_envelope
from .stepper import StepPlan, integrate, oracle_integrate

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_NUMERIC = 0, 2, 3, 4
THEOREMS = ("global", "linear_delay", "small_data", "admissibility")


class Infeasible(Exception):
    pass


# -- certificates ------------------------------------------------------------------

def _envelope_constants(cfg, scn):
    c = cfg.certify
    if c["M"] is not None and c["omega"] is not None:
        return c["M"], c["omega"], False
    env = estimate_envelope(scn.op)
    return (c["M"] if c["M"] is not None else env.M,
            c["omega"] if c["omega"] is not None else env.omega, env.capped)


def _global(cfg, scn):
    M, omega, capped = _envelope_constants(cfg, scn)
    gamma = cfg.certify["gamma"]
    if gamma is not None:
        lip = LipschitzData((gamma,), gamma)
        delays = [scn.tau_max] if scn.terms else [0.0]
        if not scn.terms:
            lip, delays = LipschitzData((), 0.0), []
    else:
        from .nonlinearity import lipschitz_sum
        lip = lipschitz_sum(scn.terms)
        delays = scn.delays
    return cert.global_certificate(M, omega, lip, delays, scn.history, m_capped=capped)


def _linear_delay(cfg, scn):
    c = cfg.certify
    if c["k"] is None or c["norm_b"] is None:
        raise ConfigurationError("linear_delay needs 'k' and 'norm_b' in [certify]")
    M, omega, _ = _envelope_constants(cfg, scn)
    tau = c["tau"] if c["tau"] is not None else scn.tau_max
    return cert.linear_delay_certificate(M, omega, c["gamma_g"], c["k"], c["norm_b"], tau)


def _admissibility(cfg, scn):
    if cfg.operator_kind == "competition":
        return scn.meta["admissibility"]
    if cfg.operator_kind != "diffusion":
        raise ConfigurationError("admissibility applies to diffusion and competition operators")
    if not scn.terms:
        raise ConfigurationError("admissibility needs a reaction term")
    dom = scn.meta["domain"]
    term = scn.terms[0]
    return cert.admissibility_diffusion(term.reaction, cfg.certify["d"], dom.boundary,
                                        scn.op.lambda1, scn.meta["eps"], term=term,
                                        scenario=cfg.terms[0][0])


def _applicable(cfg, scn):
    names = []
    if all(t.lipschitz is not None for t in scn.terms) or cfg.certify["gamma"] is not None:
        names.append("global")
    if cfg.certify["k"] is not None and cfg.certify["norm_b"] is not None:
        names.append("linear_delay")
    if isinstance(scn.op, SpectralOperator) and scn.small_data is not None:
        names.append("small_data")
    if cfg.operator_kind == "competition" or (cfg.operator_kind == "diffusion" and scn.terms):
        names.append("admissibility")
    return names


def certificates_for(cfg, scn):
    """``[(name, report)]`` for the requested (or all applicable) theorems."""
    wanted = cfg.certify["theorems"] or _applicable(cfg, scn)
    out = []
    for name in wanted:
        if name not in THEOREMS:
            raise ConfigurationError(f"unknown theorem {name!r}; choose from {THEOREMS}")
        if name == "global":
            try:
                out.append((name, _global(cfg, scn)))
            except NotGloballyLipschitz as exc:
                raise ConfigurationError(str(exc)) from None
        elif name == "linear_delay":
            out.append((name, _linear_delay(cfg, scn)))
        elif name == "small_data":
            if not (isinstance(scn.op, SpectralOperator) and scn.small_data is not None):
                raise ConfigurationError("small_data needs a self-adjoint operator with declared bounds")
            out.append((name, cert.small_data_certificate(scn.op.lambda1, scn.small_data)))
        else:
            out.append((name, _admissibility(cfg, scn)))
    return out


def _is_feasible(report):
    if isinstance(report, cert.AdmissibilityReport):
        return report.admissible
    return bool(report.feasible)


def render(reports, fmt):
    if fmt == "kv":
        return "".join(r.to_kv(prefix=f"{name}.") for name, r in reports)
    return "\n".join(r.to_table(title=name) for name, r in reports)


def _write(path, text):
    with open(path, "w") as fh:
        fh.write(text)


def _kv(pairs):
    return "".join(f"{k}={_format.fmt(v)}\n" for k, v in pairs)


# -- runs --------------------------------------------------------------------------

def _plan(cfg, scn, args):
    st = cfg.stepper
    h = args.h if args.h is not None else st["h"]
    if h is None:
        h = min(scn.delays) / 100 if scn.terms else 1e-3
    return StepPlan(h, st["scheme"], st["record_every"])


def _final_time(cfg, args):
    return args.T if args.T is not None else cfg.stepper["T"]


def _envelope_choice(cfg, reports):
    by_name = dict(reports)
    order = ("small_data", "global") if cfg.history["kind"] == "small_data" else ("global", "small_data")
    for name in order:
        if name in by_name:
            return name, by_name[name]
    return None, None


def _plot_script(has_envelope):
    lines = ["set datafile separator ','", "set logscale y", "set xlabel 't'",
             "set key top right"]
    if has_envelope:
        lines.append("plot 'envelope.csv' using 1:2 with lines title 'norm', "
                     "'' using 1:3 with lines dashtype 2 title 'certified envelope'")
    else:
        lines.append("plot 'trajectory.csv' using 1:2 with lines title 'h_norm'")
    return "\n".join(lines) + "\n"


def simulate_once(cfg, args, out_dir):
    """Run one simulation and write its files; returns the summary pairs."""
    scn = build_scenario(cfg, seed=args.seed, modes=args.modes)
    reports = certificates_for(cfg, scn)
    plan = _plan(cfg, scn, args)
    T = _final_time(cfg, args)
    traj = integrate(scn.op, scn.terms, scn.history, T, plan, scn.layout)
    os.makedirs(out_dir, exist_ok=True)
    traj.to_csv(os.path.join(out_dir, "trajectory.csv"))

    summary = [("scenario", cfg.operator_kind), ("scheme", plan.scheme), ("h", plan.h), ("T", T),
               ("terminal", traj.terminal),
               ("t_inf", float("inf") if traj.terminal == "completed" else traj.t_inf), ("n_samples", len(traj.times)),
               ("final_h_norm", float(traj.h_norms[-1]))]
    period = dominant_period(scn.op)
    try:
        fit = fit_decay_rate(traj, "h", window=period)
        summary += [("fit_rate", fit.rate), ("fit_r2", fit.r2)]
    except FitError as exc:
        summary += [("fit_rate", None), ("fit_status", str(exc))]

    name, chosen = _envelope_choice(cfg, reports)
    check = None
    if chosen is not None:
        check = check_envelope(traj, chosen)
        summary += [("envelope_certificate", name), ("envelope_status", check.status),
                    ("envelope_max_ratio", check.max_ratio),
                    ("envelope_first_violation", check.first_violation),
                    ("envelope_within_tol", check.within(1.0 + cfg.certify["tol"]))]
        if check.times.size:
            check.to_csv(os.path.join(out_dir, "envelope.csv"))
    has_env = check is not None and check.times.size > 0
    _write(os.path.join(out_dir, "plot.gp"), _plot_script(has_env))
    for rname, r in reports:
        summary += [(f"{rname}.feasible", _is_feasible(r))]
    _write(os.path.join(out_dir, "summary.kv"), _kv(summary))
    return scn, reports, traj, summary


def _parse_range(text):
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigurationError("--range must be a:b:n")
    a, b = number(parts[0]), number(parts[1])
    try:
        n = int(parts[2])
    except ValueError:
        raise ConfigurationError("--range count must be an integer") from None
    if n < 1:
        raise ConfigurationError("--range count must be >= 1")
    return np.linspace(a, b, n) if n > 1 else np.array([a])


def _sweep_point(payload):
    cfg, args, i, value, out_dir = payload
    cfg = copy.deepcopy(cfg)
    cfg.set_value(args.param, float(value))
    _, reports, traj, summary = simulate_once(cfg, args, os.path.join(out_dir, f"point_{i:03d}"))
    d = dict(summary)
    glob = dict(reports).get("global")
    return [value, d.get("terminal"), d.get("fit_rate"), d.get("fit_r2"),
            None if glob is None else glob.feasible, None if glob is None else glob.tau0,
            None if glob is None else glob.rate, d.get("envelope_max_ratio")]


# -- commands ----------------------------------------------------------------------

def cmd_certify(args):
    cfg = load_config(args.config)
    scn = build_scenario(cfg, seed=args.seed, modes=args.modes)
    reports = certificates_for(cfg, scn)
    text = render(reports, args.format)
    sys.stdout.write(text)
    if args.out_dir:
        os.makedirs(args.out_dir, exist_ok=True)
        _write(os.path.join(args.out_dir, "certificate.kv"), render(reports, "kv"))
    if args.require_feasible and not all(_is_feasible(r) for _, r in reports):
        raise Infeasible("certificate infeasible")
    return EXIT_OK


def cmd_simulate(args):
    cfg = load_config(args.config)
    _, reports, traj, summary = simulate_once(cfg, args, args.out_dir or ".")
    if args.format == "kv":
        sys.stdout.write(_kv(summary))
    else:
        w = max(len(k) for k, _ in summary)
        sys.stdout.write("".join(f"{k:<{w}}  {_format.fmt(v)}\n" for k, v in summary))
    if traj.terminal == "history_underrun":
        return EXIT_NUMERIC
    if args.require_feasible and not all(_is_feasible(r) for _, r in reports):
        raise Infeasible("certificate infeasible")
    return EXIT_OK


def cmd_sweep(args):
    cfg = load_config(args.config)
    values = _parse_range(args.range)
    out_dir = args.out_dir or "."
    os.makedirs(out_dir, exist_ok=True)
    payloads = [(cfg, args, i, v, out_dir) for i, v in enumerate(values)]
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            rows = list(pool.map(_sweep_point, payloads))
    else:
        rows = [_sweep_point(p) for p in payloads]
    header = "value,terminal,fit_rate,fit_r2,global_feasible,tau0,certified_rate,envelope_max_ratio\n"
    body = "".join(",".join(_format.fmt(v) for v in row) + "\n" for row in rows)
    _write(os.path.join(out_dir, "sweep.csv"), header + body)
    sys.stdout.write(header + body)
    return EXIT_OK


def cmd_validate(args):
    cfg = load_config(args.config)
    scn = build_scenario(cfg, seed=args.seed, modes=args.modes)
    plan = _plan(cfg, scn, args)
    T = _final_time(cfg, args)
    h_or = cfg.stepper["h_oracle"] or plan.h / 100
    traj = integrate(scn.op, scn.terms, scn.history, T, plan, scn.layout)
    orc = oracle_integrate(scn.op, scn.terms, scn.history, T, plan, scn.layout,
                           h_oracle=h_or, record_dt=plan.h * plan.record_every)
    n = min(len(traj.times), len(orc.times))
    diff = np.abs(traj.h_norms[:n] - orc.h_norms[:n])
    scale = float(np.max(np.abs(orc.h_norms[:n]))) or 1.0
    rel = float(np.max(diff)) / scale
    pairs = [("scheme", plan.scheme), ("h", plan.h), ("h_oracle", h_or), ("T", T),
             ("terminal", traj.terminal), ("oracle_terminal", orc.terminal),
             ("max_rel_diff", rel), ("tolerance", args.tol), ("passed", rel <= args.tol)]
    if args.out_dir:
        os.makedirs(args.out_dir, exist_ok=True)
        with open(os.path.join(args.out_dir, "validate.csv"), "w") as fh:
            fh.write("t,h_norm,oracle_h_norm,abs_diff\n")
            for t, a, b, d in zip(traj.times[:n], traj.h_norms[:n], orc.h_norms[:n], diff):
                fh.write(",".join(_format.fmt(v) for v in (t, a, b, d)) + "\n")
        _write(os.path.join(args.out_dir, "validate.kv"), _kv(pairs))
    sys.stdout.write(_kv(pairs))
    return EXIT_OK if rel <= args.tol else EXIT_NUMERIC


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("config", help="scenario configuration file (INI)")
    common.add_argument("--out-dir", default=None, help="directory for output files")
    common.add_argument("--format", choices=("kv", "table"), default="kv")
    common.add_argument("--require-feasible", action="store_true",
                        help="exit with status 3 if any certificate is infeasible")
    common.add_argument("--seed", type=int, default=0, help="seed for random initial data")
    common.add_argument("--modes", type=int, default=None, help="override the mode count")
    common.add_argument("--h", type=float, default=None, help="override the time step")
    common.add_argument("--T", type=float, default=None, help="override the final time")

    p = argparse.ArgumentParser(prog="delaystab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("certify", parents=[common], help="print certificate reports")
    sub.add_parser("simulate", parents=[common], help="integrate and check envelopes")
    sw = sub.add_parser("sweep", parents=[common], help="sweep one parameter")
    sw.add_argument("--param", required=True, help="parameter path, e.g. terms.0.tau")
    sw.add_argument("--range", required=True, help="a:b:n (n equispaced values)")
    sw.add_argument("--jobs", type=int, default=1, help="worker processes")
    va = sub.add_parser("validate", parents=[common], help="compare with the RK4 oracle")
    va.add_argument("--tol", type=float, default=1e-4, help="relative sup-norm tolerance")
    return p


COMMANDS = {"certify": cmd_certify, "simulate": cmd_simulate, "sweep": cmd_sweep,
            "validate": cmd_validate}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return COMMANDS[args.command](args)
    except (ConfigurationError, ContractError) as exc:
        print(f"delaystab: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Infeasible as exc:
        print(f"delaystab: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (NotExponentiallyStable, RootFindingError, FitError, FloatingPointError) as exc:
        print(f"delaystab: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
