"""Empirical decay rates and certified-envelope checks."""
import csv
import math
from dataclasses import dataclass

import numpy as np

from . import _format
from .certificates import GlobalCertificate, SmallDataCertificate
from .errors import ContractError, FitError
from .spectral import GeneralOperator


@dataclass
class DecayFit:
    """Least-squares fit ``log norm ~ intercept - rate t``."""

    rate: float
    intercept: float
    r2: float
    n_samples: int


def _linear_fit(t, y):
    A = np.column_stack([np.ones_like(t), t])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum(resid ** 2))
    r2 = 1.0 if ss_tot <= 1e-300 else 1.0 - ss_res / ss_tot
    return float(coef[0]), float(coef[1]), r2


def window_suprema(t, y, window):
    """Maxima of ``y`` over consecutive windows of length ``window``.

    Each maximum is placed at the time where it occurs.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    edges = np.arange(t[0], t[-1] + window, window)
    ts, ys = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        mask = (t >= lo) & (t < hi)
        if mask.sum() == 0:
            continue
        i = np.argmax(np.where(mask, y, -np.inf))
        ts.append(t[i])
        ys.append(y[i])
    return np.array(ts), np.array(ys)


def dominant_period(op):
    """Oscillation period of the slowest decaying eigenvalues; ``None`` if real.

    When several modes share the slowest decay rate (constant damping makes
    every underdamped mode decay alike) the longest of their periods is used.
    """
    if not isinstance(op, GeneralOperator):
        return None
    ev = np.linalg.eigvals(op.matrix)
    top = ev.real.max()
    slow = ev[ev.real >= top - 1e-9 * max(1.0, abs(top))]
    freq = np.abs(slow.imag)
    freq = freq[freq > 1e-12]
    if freq.size == 0:
        return None
    return 2.0 * math.pi / float(freq.min())


def fit_decay_rate(traj, norm="h", tail_fraction=0.5, window=None, min_samples=20):
    """Exponential decay rate of a recorded norm over the trajectory tail.

    Parameters
    ----------
    traj : Trajectory or (times, values) tuple
    norm : {"h", "v"}
    tail_fraction : float in (0, 1)
        Fraction of the time span (counted from the end) used for the fit.
    window : float, optional
        Fit per-window suprema instead of raw samples (oscillatory norms);
        at least three windows must fall in the tail.

    Returns
    -------
    DecayFit
    """
    if not 0.0 < tail_fraction <= 1.0:
        raise ContractError("tail_fraction must lie in (0, 1]")
    if isinstance(traj, tuple):
        t, y = (np.asarray(v, dtype=float) for v in traj)
    else:
        if traj.terminal != "completed":
            raise FitError(f"trajectory did not complete ({traj.terminal})")
        t, y = traj.times, traj.norm(norm)
    t0 = t[-1] - tail_fraction * (t[-1] - t[0])
    mask = t >= t0
    t, y = t[mask], y[mask]
    if window is not None:
        t, y = window_suprema(t, y, window)
    need = min_samples if window is None else 3
    if len(t) < need:
        raise FitError(f"tail window has {len(t)} samples, need {need}")
    if not (np.all(np.isfinite(y)) and np.all(y > 0)):
        raise FitError("norms in the fit window must be finite and positive")
    intercept, slope, r2 = _linear_fit(t, np.log(y))
    return DecayFit(-slope, intercept, r2, len(t))


@dataclass
class EnvelopeCheck:
    """Pointwise comparison ``norm(t) / envelope(t)``."""

    status: str
    norm: str
    max_ratio: float
    first_violation: float
    times: np.ndarray
    values: np.ndarray
    envelope: np.ndarray
    ratios: np.ndarray

    @property
    def passed(self):
        return self.status == "checked" and self.first_violation is None

    def within(self, factor):
        return self.status == "checked" and self.max_ratio <= factor

    def summary(self):
        return {"status": self.status, "norm": self.norm, "max_ratio": self.max_ratio,
                "first_violation": self.first_violation}

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "norm", "envelope", "ratio"])
            for row in zip(self.times, self.values, self.envelope, self.ratios):
                w.writerow([_format.fmt(v) for v in row])


def check_envelope(traj, certificate, K=None):
    """Compare a trajectory with the envelope of a certificate.

    A :class:`GlobalCertificate` bounds the H-norm by
    ``prefactor e^{-rate t}``; a :class:`SmallDataCertificate` bounds the
    V-norm by ``(K / 2) e^{-omega' t / 2}`` (``K = k0`` by default). An
    infeasible certificate is not checked.
    """
    empty = np.zeros(0)
    if isinstance(certificate, GlobalCertificate):
        which = "h"
    elif isinstance(certificate, SmallDataCertificate):
        which = "v"
    else:
        raise ContractError(f"no envelope for {type(certificate).__name__}")
    if not certificate.feasible:
        return EnvelopeCheck("skipped: certificate infeasible", which, float("nan"), None,
                             empty, empty, empty, empty)
    t = np.asarray(traj.times, dtype=float)
    y = np.asarray(traj.norm(which), dtype=float)
    env = certificate.envelope(t) if which == "h" else certificate.envelope(t, K)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(y == 0.0, 0.0, y / env)
    bad = np.nonzero(~(ratio <= 1.0))[0]
    first = float(t[bad[0]]) if bad.size else None
    status = "checked" if traj.terminal == "completed" else f"checked ({traj.terminal})"
    return EnvelopeCheck(status, which, float(np.max(ratio)) if ratio.size else 0.0, first,
                         t, y, env, ratio)
