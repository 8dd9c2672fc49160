"""Method-of-steps integration with exact linear propagators.

On each block ``[k tau_min, (k + 1) tau_min]`` every delayed argument
``U(t - tau_i)`` refers to an already computed time, so the delay equation is
an ordinary semilinear evolution problem on that block. Within a block the
mild-solution recursion is discretised by exponential time differencing:

* ``exp_euler``  ``U+ = e^{hA} U + h phi1(hA) N(U, t)``
* ``exp_rk2``    predictor ``a = e^{hA} U + h phi1(hA) N0``, corrector
  ``U+ = a + h phi2(hA) (N(a, t + h) - N0)``

where ``N`` is the summed nonlinearity with delayed states read from the
:class:`~delaystab.history.HistoryBuffer`. The independent validation
integrator :func:`oracle_integrate` is classical RK4 on the full right-hand
side with linearly interpolated history.
"""
import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import _format
from ._oracle_kernel import rk4_tables
from .errors import ContractError, HistoryUnderrun
from .nonlinearity import BASIS
from .spectral import SpectralOperator, norms as state_norms
from .system import DelayProblem

SCHEMES = ("exp_euler", "exp_rk2")
B_MAX = 1e12

COMPLETED = "completed"
BLEW_UP = "blew_up"
HISTORY_UNDERRUN = "history_underrun"


@dataclass(frozen=True)
class StepPlan:
    """Step size and scheme.

    Parameters
    ----------
    h : float
        Time step; must not exceed the smallest delay.
    scheme : {"exp_euler", "exp_rk2"}
    record_every : int
        Store norms every ``record_every`` steps (the final step is always kept).
    keep_states : bool
        Also store the state vectors at recorded times.
    b_max : float
        Blow-up threshold on the V-norm (H-norm for dense generators).
    """

    h: float
    scheme: str = "exp_rk2"
    record_every: int = 1
    keep_states: bool = False
    b_max: float = B_MAX

    def __post_init__(self):
        if not self.h > 0:
            raise ContractError(f"step must be positive, got {self.h}")
        if self.scheme not in SCHEMES:
            raise ContractError(f"unknown scheme {self.scheme!r}; choose from {SCHEMES}")
        if int(self.record_every) < 1:
            raise ContractError("record_every must be >= 1")

    @classmethod
    def for_delays(cls, delays, n_per_delay=100, **kwargs):
        """Plan with ``h = tau_min / n_per_delay``."""
        return cls(min(delays) / n_per_delay, **kwargs)

    def delay_offsets(self, delays):
        """Delays in units of ``h``; integral values are step-aligned."""
        return [tau / self.h for tau in delays]

    def validate(self, delays):
        if delays and self.h > min(delays) * (1 + 1e-12):
            raise ContractError(f"h = {self.h} exceeds the smallest delay {min(delays)}")


@dataclass
class Trajectory:
    """Recorded norms of one run.

    ``terminal`` is ``"completed"``, ``"blew_up"`` or ``"history_underrun"``;
    after a blow-up ``t_inf`` holds the last time with a finite state below
    the threshold (a lower estimate of the blow-up time).
    """

    times: np.ndarray
    h_norms: np.ndarray
    v_norms: np.ndarray
    field_norms: np.ndarray
    states: list = None
    terminal: str = COMPLETED
    t_inf: float = None
    scheme: str = ""
    h: float = float("nan")
    message: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def final_state(self):
        return None if not self.states else self.states[-1]

    def norm(self, which):
        if which == "h":
            return self.h_norms
        if which == "v":
            return self.v_norms
        raise ContractError(f"norm must be 'h' or 'v', got {which!r}")

    def to_csv(self, path, every=1):
        """Write ``t,h_norm,v_norm[,field_0,...]`` rows (every ``every``-th row)."""
        n_fields = self.field_norms.shape[1] if self.field_norms.ndim == 2 else 0
        header = ["t", "h_norm", "v_norm"]
        if n_fields > 1:
            header += [f"field_{f}" for f in range(n_fields)]
        idx = list(range(0, len(self.times), every))
        if idx and idx[-1] != len(self.times) - 1:
            idx.append(len(self.times) - 1)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for i in idx:
                row = [self.times[i], self.h_norms[i], self.v_norms[i]]
                if n_fields > 1:
                    row += list(self.field_norms[i])
                w.writerow([_format.fmt(v) for v in row])


def detect_blowup(h_norm, v_norm=float("nan"), b_max=B_MAX):
    """True when the monitored norm is non-finite or exceeds ``b_max``.

    The V-norm is monitored when available, the H-norm otherwise.
    """
    monitored = v_norm if not math.isnan(v_norm) else h_norm
    return not math.isfinite(monitored) or monitored > b_max or not math.isfinite(h_norm)


class _Recorder:
    def __init__(self, problem, plan):
        self.problem = problem
        self.plan = plan
        self.times, self.h, self.v, self.fields, self.states = [], [], [], [], []

    def measure(self, u):
        if not np.all(np.isfinite(u)):
            return float("nan"), float("nan"), [float("nan")] * len(self.problem.layout.state_blocks)
        n = state_norms(self.problem.op, u)
        return n.h_norm, n.v_norm, self.problem.layout.field_norms(u)

    def add(self, t, u, measured):
        self.times.append(t)
        self.h.append(measured[0])
        self.v.append(measured[1])
        self.fields.append(measured[2])
        if self.plan.keep_states:
            self.states.append(np.array(u))

    def build(self, terminal, t_inf=None, message=""):
        return Trajectory(np.array(self.times), np.array(self.h), np.array(self.v),
                          np.array(self.fields), self.states if self.plan.keep_states else None,
                          terminal, t_inf, self.plan.scheme, self.plan.h, message)


def _problem(op, terms, layout):
    if isinstance(op, DelayProblem):
        return op
    return DelayProblem(op, terms, layout)


def integrate(op, terms, history, T, plan=None, layout=None):
    """Integrate ``U' = AU + sum_i F_i(U(t), U(t - tau_i))`` on ``[0, T]``.

    Parameters
    ----------
    op : SpectralOperator or GeneralOperator
    terms : list of DelayTerm
    history : HistoryBuffer
        Initial datum on ``[-tau_max, 0]``; it is copied, not modified.
    T : float
    plan : StepPlan, optional
        Defaults to ``h = tau_min / 100`` (or ``T / 1000`` without delays).
    layout : NodalLayout, optional
        Modal-to-nodal maps; the identity by default.

    Returns
    -------
    Trajectory
        Norms at ``t_n = n h``; a blow-up or a history underrun ends the run
        early and is reported in ``terminal`` rather than raised.
    """
    problem = _problem(op, terms, layout)
    op = problem.op
    if not T > 0:
        raise ContractError(f"final time must be positive, got {T}")
    if plan is None:
        plan = StepPlan(problem.tau_min / 100 if problem.terms else T / 1000)
    plan.validate(problem.delays)
    h = plan.h
    n_steps = int(math.ceil(T / h - 1e-9))
    taus = problem.delays
    E, P1, P2 = op.step_factors(h)
    spectral = isinstance(op, SpectralOperator)

    def lin(F, u):
        return F * u if spectral else F @ u

    buf = history.copy()
    buf.h_retain = h
    rec = _Recorder(problem, plan)

    try:
        if taus:
            buf.require_span(-problem.tau_max, 0.0)
        u = np.array(buf.sample(0.0), dtype=float)
    except HistoryUnderrun as exc:
        return rec.build(HISTORY_UNDERRUN, message=str(exc))
    if u.shape != (op.dim,):
        raise ContractError(f"history state has shape {u.shape}, operator dimension is {op.dim}")

    measured = rec.measure(u)
    if detect_blowup(measured[0], measured[1], plan.b_max):
        rec.add(0.0, u, measured)
        return rec.build(BLEW_UP, t_inf=0.0)
    rec.add(0.0, u, measured)

    def delayed(t):
        return [buf.sample(t - tau) for tau in taus]

    tau_min = problem.tau_min if taus else T
    with np.errstate(over="ignore", invalid="ignore"):
        return _march(problem, plan, buf, rec, u, n_steps, tau_min, lin, E, P1, P2, delayed)


def _march(problem, plan, buf, rec, u, n_steps, tau_min, lin, E, P1, P2, delayed):
    op, h, taus = problem.op, plan.h, problem.delays
    n = 0
    block = 0
    try:
        while n < n_steps:
            # one method-of-steps block: steps ending in (block, block + 1] * tau_min
            block_end = min(n_steps, int(math.floor((block + 1) * tau_min / h + 1e-9)))
            block_end = max(block_end, n + 1)
            while n < block_end:
                t = n * h
                N0 = problem.nonlinear(u, delayed(t))
                buf.set_right_derivative(op.generator(u) + N0, left=n > 0)
                a = lin(E, u) + lin(P1, N0)
                if plan.scheme == "exp_rk2" and taus:
                    N1 = problem.nonlinear(a, delayed(t + h))
                    u_new = a + lin(P2, N1 - N0)
                else:
                    u_new = a
                n += 1
                t_new = n * h
                measured = rec.measure(u_new)
                if detect_blowup(measured[0], measured[1], plan.b_max):
                    return rec.build(BLEW_UP, t_inf=t, message=f"blow-up after t = {t:.6g}")
                buf.record(t_new, u_new)
                u = u_new
                if n % plan.record_every == 0 or n == n_steps:
                    rec.add(t_new, u, measured)
            buf.trim()
            block += 1
    except HistoryUnderrun as exc:
        return rec.build(HISTORY_UNDERRUN, message=str(exc))
    return rec.build(COMPLETED)


# -- validation oracle -------------------------------------------------------

def _record_stride(T, h_oracle, record_dt):
    stride = max(1, int(round(record_dt / h_oracle)))
    if abs(stride * h_oracle - record_dt) > 1e-9 * record_dt:
        raise ContractError("record interval must be a multiple of the oracle step")
    return stride


def oracle_integrate(op, terms, history, T, plan=None, layout=None, h_oracle=None,
                     record_dt=None, use_numba=True):
    """Classical RK4 on ``AU + sum_i F_i`` with linearly interpolated history.

    Parameters
    ----------
    plan : StepPlan, optional
        The plan of the run being validated; sets the default record interval
        (``plan.h``) and the default oracle step (``plan.h / 10``).
    h_oracle : float, optional
        Oracle step; at most ``plan.h / 10`` when a plan is given.
    record_dt : float, optional
        Spacing of the recorded samples; a multiple of ``h_oracle``.
    use_numba : bool
        Use the compiled kernel when every term has a coefficient table.
    """
    problem = _problem(op, terms, layout)
    op = problem.op
    if h_oracle is None:
        if plan is None:
            raise ContractError("oracle needs h_oracle or a plan")
        h_oracle = plan.h / 10
    if plan is not None and h_oracle > plan.h / 10 * (1 + 1e-12):
        raise ContractError(f"oracle step {h_oracle} exceeds h/10 = {plan.h / 10}")
    if problem.terms and h_oracle > problem.tau_min:
        raise ContractError("oracle step exceeds the smallest delay")
    record_dt = (plan.h if plan is not None else h_oracle) if record_dt is None else record_dt
    stride = _record_stride(T, h_oracle, record_dt)
    n_steps = int(math.ceil(T / h_oracle - 1e-9))
    b_max = plan.b_max if plan is not None else B_MAX

    tau_max = problem.tau_max
    n_hist = int(math.ceil(tau_max / h_oracle)) + 2 if problem.terms else 1
    lay = problem.layout
    try:
        if problem.terms:
            history.require_span(-tau_max, 0.0)
        pre_t = -np.arange(n_hist - 1, -1, -1) * h_oracle
        pre = np.array([history.sample(max(t, history.t_start)) for t in pre_t])
    except HistoryUnderrun as exc:
        rec = _Recorder(problem, plan or StepPlan(h_oracle))
        return rec.build(HISTORY_UNDERRUN, message=str(exc))

    A = op.matrix() if isinstance(op, SpectralOperator) else np.array(op.matrix)
    weights = op.eigenvalues if isinstance(op, SpectralOperator) else np.zeros(0)
    tabular = all(t.func is None for t in problem.terms)
    if tabular:
        n_nodes = lay.n_nodes
        tables = np.array([t.table(n_nodes) for t in problem.terms]).reshape(
            len(problem.terms), len(BASIS), n_nodes)
        route = np.array([[t.target_field, t.current_field, t.delayed_field]
                          for t in problem.terms], dtype=np.int64).reshape(-1, 3)
        lags = np.array([t.delay / h_oracle for t in problem.terms])
        states, status, n_done = rk4_tables(
            A, lay.inputs, lay.outputs, tables, route, lags, pre, n_steps, stride, weights,
            b_max, h_oracle, use_numba)
    else:
        states, status, n_done = _rk4_python(problem, pre, h_oracle, n_steps, stride,
                                             weights, b_max)

    plan_like = StepPlan(h_oracle, keep_states=True if plan is None else plan.keep_states)
    rec = _Recorder(problem, plan_like)
    for k, u in enumerate(states):
        rec.add(k * stride * h_oracle, u, rec.measure(u))
    traj = rec.build(COMPLETED)
    traj.scheme = "rk4"
    if status:
        traj.terminal = BLEW_UP
        traj.t_inf = (n_done - 1) * h_oracle
    return traj


def _rk4_python(problem, pre, h, n_steps, stride, weights, b_max):
    """Reference RK4 for callable terms (same conventions as the kernel)."""
    n_hist = len(pre)
    ring_len = n_hist + 2
    dim = pre.shape[1]
    ring = np.zeros((ring_len, dim))
    # index 0 of the stored sequence is time -(n_hist - 1) h
    offset = n_hist - 1
    for j in range(n_hist):
        ring[j % ring_len] = pre[j]
    lags = [tau / h for tau in problem.delays]

    def read(p):
        q = p + offset
        j = int(math.floor(q))
        frac = q - j
        if frac < 1e-12:
            return ring[j % ring_len]
        return (1 - frac) * ring[j % ring_len] + frac * ring[(j + 1) % ring_len]

    def f(n, c, u):
        return problem.rhs(u, [read(n + c - lag) for lag in lags])

    u = pre[-1].copy()
    out = [u.copy()]
    for n in range(n_steps):
        k1 = f(n, 0.0, u)
        k2 = f(n, 0.5, u + 0.5 * h * k1)
        k3 = f(n, 0.5, u + 0.5 * h * k2)
        k4 = f(n, 1.0, u + h * k3)
        u = u + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        mon = math.sqrt(np.sum(weights * u * u)) if weights.size else math.sqrt(u @ u)
        if not math.isfinite(mon) or mon > b_max:
            return out, 1, n + 1
        ring[(n + 1 + offset) % ring_len] = u
        if (n + 1) % stride == 0:
            out.append(u.copy())
    return out, 0, n_steps
