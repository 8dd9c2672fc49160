"""Time-stamped state history for delayed reads.

The buffer holds samples ``(t_k, U_k)`` with strictly increasing times and
serves ``U(t)`` for any ``t`` in the stored span. The initial datum lives on
``[-tau_max, 0]``; integration starts at ``t = 0``.

Cubic Hermite interpolation uses one-sided derivatives stored per node:
``dleft`` for the interval ending at the node and ``dright`` for the interval
starting there, so a derivative jump at ``t = 0`` (history slope versus
equation slope) is represented exactly. Missing derivatives fall back to
finite-difference slopes.
"""
import bisect
import csv

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ContractError, HistoryUnderrun

_EDGE_TOL = 1e-12


class HistoryBuffer:
    """Append-only history with dense interpolation.

    Parameters
    ----------
    tau_max : float
        Longest delay served by the buffer.
    interpolation : {"cubic_hermite", "linear"}
    h_retain : float
        Safety margin; :meth:`trim` keeps samples newer than
        ``t_now - tau_max - 2 h_retain``.
    """

    def __init__(self, tau_max, interpolation="cubic_hermite", h_retain=0.0):
        if not tau_max > 0:
            raise ContractError(f"tau_max must be positive, got {tau_max}")
        if interpolation not in ("cubic_hermite", "linear"):
            raise ContractError(f"unknown interpolation {interpolation!r}")
        self.tau_max = float(tau_max)
        self.interpolation = interpolation
        self.h_retain = float(h_retain)
        self.times = []
        self.states = []
        self.dleft = []
        self.dright = []

    # -- construction -------------------------------------------------------

    @classmethod
    def from_function(cls, func, tau_max, n=200, deriv=None, **kwargs):
        """Sample ``func(t)`` on ``n + 1`` equispaced nodes of ``[-tau_max, 0]``."""
        buf = cls(tau_max, **kwargs)
        for t in np.linspace(-tau_max, 0.0, n + 1):
            d = None if deriv is None else np.asarray(deriv(t), dtype=float)
            buf.record(float(t), np.asarray(func(t), dtype=float), d)
        return buf

    @classmethod
    def constant(cls, state, tau_max, **kwargs):
        """History constant in time; the derivative is zero everywhere."""
        state = np.asarray(state, dtype=float)
        zero = np.zeros_like(state)
        buf = cls(tau_max, **kwargs)
        buf.record(-float(tau_max), state, zero)
        buf.record(0.0, state.copy(), zero)
        return buf

    @classmethod
    def from_table(cls, times, states, tau_max=None, n=None, **kwargs):
        """Resample tabulated states onto an equispaced grid by a cubic spline.

        The table must cover ``[-tau_max, 0]``; by default ``tau_max`` is
        ``-times[0]``.
        """
        times = np.asarray(times, dtype=float)
        states = np.asarray(states, dtype=float)
        if states.ndim == 1:
            states = states[:, None]
        if times.ndim != 1 or len(times) != len(states) or len(times) < 2:
            raise ContractError("history table needs matching times and at least two rows")
        if np.any(np.diff(times) <= 0):
            raise ContractError("history table times must be strictly increasing")
        tau_max = -times[0] if tau_max is None else float(tau_max)
        if times[0] > -tau_max + _EDGE_TOL or abs(times[-1]) > _EDGE_TOL:
            raise ContractError(f"history table must span [-{tau_max:g}, 0]")
        spline = CubicSpline(times, states, axis=0)
        n = max(len(times) - 1, 2) if n is None else n
        return cls.from_function(spline, tau_max, n=n, deriv=spline.derivative(), **kwargs)

    @classmethod
    def from_csv(cls, path, tau_max=None, n=None, **kwargs):
        """Read a ``t,c_0,c_1,...`` table (header row optional)."""
        rows = []
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].strip().startswith("#"):
                    continue
                try:
                    rows.append([float(v) for v in row])
                except ValueError:
                    if rows:
                        raise ContractError(f"non-numeric row in {path}: {row}") from None
        data = np.array(rows)
        if data.ndim != 2 or data.shape[1] < 2:
            raise ContractError(f"{path} must hold a time column and state columns")
        return cls.from_table(data[:, 0], data[:, 1:], tau_max=tau_max, n=n, **kwargs)

    def copy(self):
        out = HistoryBuffer(self.tau_max, self.interpolation, self.h_retain)
        out.times = list(self.times)
        out.states = list(self.states)
        out.dleft = list(self.dleft)
        out.dright = list(self.dright)
        return out

    # -- writing ------------------------------------------------------------

    @property
    def t_now(self):
        return self.times[-1]

    @property
    def t_start(self):
        return self.times[0]

    def __len__(self):
        return len(self.times)

    def record(self, t, state, deriv=None):
        """Append a sample; ``t`` must exceed the last stored time."""
        if self.times and not t > self.times[-1]:
            raise ContractError(f"record time {t} does not exceed last stored time {self.times[-1]}")
        self.times.append(float(t))
        self.states.append(np.asarray(state, dtype=float))
        self.dleft.append(deriv)
        self.dright.append(deriv)

    def set_right_derivative(self, deriv, left=False):
        """Attach the forward derivative of the newest sample.

        With ``left=True`` the same value is used for the interval ending at
        the sample (no derivative jump there).
        """
        self.dright[-1] = deriv
        if left:
            self.dleft[-1] = deriv

    def trim(self):
        """Drop samples no longer reachable by any delayed read."""
        cutoff = self.t_now - self.tau_max - 2.0 * self.h_retain
        # keep one sample at or before the cutoff so the span still covers it
        k = bisect.bisect_right(self.times, cutoff) - 1
        if k > 0:
            del self.times[:k], self.states[:k], self.dleft[:k], self.dright[:k]

    # -- reading ------------------------------------------------------------

    def _slope(self, i, side):
        d = self.dright[i] if side == "right" else self.dleft[i]
        if d is not None:
            return d
        n = len(self.times)
        if n == 1:
            return np.zeros_like(self.states[0])
        if i == 0:
            j, k = 0, 1
        elif i == n - 1:
            j, k = n - 2, n - 1
        else:
            j, k = i - 1, i + 1
        return (self.states[k] - self.states[j]) / (self.times[k] - self.times[j])

    def sample(self, t):
        """State at time ``t`` (exact at stored nodes).

        Raises
        ------
        HistoryUnderrun
            If ``t`` lies outside the stored span.
        """
        times = self.times
        if not times or t < times[0] - _EDGE_TOL or t > times[-1] + _EDGE_TOL:
            span = (times[0], times[-1]) if times else (None, None)
            raise HistoryUnderrun(f"history underrun: t={t} outside stored span {span}")
        i = bisect.bisect_left(times, t)
        if i < len(times) and times[i] == t:
            return self.states[i]
        if i == 0:
            return self.states[0]
        if i == len(times):
            return self.states[-1]
        t0, t1 = times[i - 1], times[i]
        u0, u1 = self.states[i - 1], self.states[i]
        dt = t1 - t0
        s = (t - t0) / dt
        if self.interpolation == "linear":
            return (1.0 - s) * u0 + s * u1
        m0 = self._slope(i - 1, "right")
        m1 = self._slope(i, "left")
        s2, s3 = s * s, s * s * s
        return ((2 * s3 - 3 * s2 + 1) * u0 + (s3 - 2 * s2 + s) * dt * m0
                + (-2 * s3 + 3 * s2) * u1 + (s3 - s2) * dt * m1)

    def require_span(self, t_from, t_to):
        if self.times[0] > t_from + _EDGE_TOL or self.times[-1] < t_to - _EDGE_TOL:
            raise HistoryUnderrun(
                f"history underrun: need [{t_from}, {t_to}], have [{self.times[0]}, {self.times[-1]}]")

    def uniform_samples(self, t_from, t_to, n):
        """States on ``n + 1`` equispaced times of ``[t_from, t_to]``."""
        ts = np.linspace(t_from, t_to, n + 1)
        return ts, np.array([self.sample(t) for t in ts])
