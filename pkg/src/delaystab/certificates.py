"""Closed-form exponential-stability certificates and admissibility checks.

Four families are provided:

* :func:`global_certificate` -- globally Lipschitz delay terms and an
  exponentially stable semigroup ``||e^{tA}|| <= M e^{-omega t}``: a delay
  threshold ``tau0``, the perturbed rate ``omega - M gamma (1 + e^{omega tau})``
  and the envelope prefactor ``M (||U^0|| + alpha)``.
* :func:`linear_delay_tau0` / :func:`jee_condition` -- a linear delayed
  feedback ``k B U(t - tau)`` plus a globally Lipschitz remainder.
* :func:`small_data_certificate` -- locally Lipschitz terms with a self-adjoint
  generator: a data radius ``gamma0 K0`` below which solutions exist for all
  time and decay, for delays of any size.
* :func:`admissibility_diffusion`, :func:`admissibility_competition` and
  :func:`select_epsilon2` -- structural hypotheses of the reaction-diffusion
  examples (spatial dimension, linear-coefficient margins, shift selection).

Reports serialise to flat ``key=value`` text through :meth:`to_kv`.
"""
import math
from dataclasses import dataclass, field, fields

import numpy as np
from scipy.integrate import simpson

from . import _format
from .errors import ConfigurationError, ContractError
from .nonlinearity import LipschitzData, ReactionBounds, SmallDataBounds, corner_bound, evaluate

K_CAP = 1e6


class _Report:
    """Mixin: ordered key-value serialisation."""

    _skip = ()

    def items(self):
        for f in fields(self):
            if f.name in self._skip or f.name.startswith("_"):
                continue
            value = getattr(self, f.name)
            if isinstance(value, (list, tuple, dict)):
                continue
            yield f.name, value

    def to_kv(self, prefix=""):
        return "".join(f"{prefix}{k}={_format.fmt(v)}\n" for k, v in self.items())

    def to_table(self, title=None):
        rows = [(k, _format.fmt(v)) for k, v in self.items()]
        width = max((len(k) for k, _ in rows), default=0)
        lines = [title, "-" * len(title)] if title else []
        lines += [f"{k:<{width}}  {v}" for k, v in rows]
        return "\n".join(lines) + "\n"


# -- global Lipschitz theory ---------------------------------------------------

@dataclass
class GlobalCertificate(_Report):
    """Verdict of the global-Lipschitz decay theorem.

    ``tau0`` is ``inf`` without nonlinearity and ``None`` (undefined) when
    ``gamma`` exceeds ``omega / (2 M)``.
    """

    feasible: bool
    M: float
    omega: float
    gamma: float
    tau: float
    tau0: float
    rate: float
    alpha: float
    alpha_error: float
    u0_norm: float
    prefactor: float
    gamma_condition: bool
    delay_condition: bool
    m_capped: bool = False
    notes: str = ""

    def envelope(self, t):
        """``M (||U^0|| + alpha) e^{-rate t}``."""
        return self.prefactor * np.exp(-self.rate * np.asarray(t, dtype=float))


def delay_threshold(M, omega, gamma):
    """``tau0 = ln(omega / (M gamma) - 1) / omega``; ``inf`` for ``gamma = 0``.

    Returns ``None`` when the logarithm's argument is not positive.
    """
    if gamma == 0:
        return math.inf
    arg = omega / (M * gamma) - 1.0
    if arg <= 0:
        return None
    return math.log(arg) / omega


def decay_rate(M, omega, gamma, tau):
    """``omega - M gamma (1 + e^{omega tau})``."""
    return omega - M * gamma * (1.0 + math.exp(omega * tau))


def history_weight_integral(history, omega, tau, n=400):
    """``int_0^tau e^{omega s} ||U(s - tau)|| ds`` by composite Simpson.

    The history is resampled on ``n + 1`` equispaced points of
    ``[-tau, 0]``; the returned error estimate is the Richardson difference
    against the half-resolution rule, ``|S_n - S_{n/2}| / 15``.
    """
    n = n + (n % 2)
    s = np.linspace(0.0, tau, n + 1)
    vals = np.array([np.linalg.norm(history.sample(si - tau)) for si in s]) * np.exp(omega * s)
    fine = simpson(vals, x=s)
    coarse = simpson(vals[::2], x=s[::2])
    return float(fine), float(abs(fine - coarse) / 15.0)


def global_certificate(M, omega, lipschitz, delays, history, m_capped=False, n_quad=400):
    """Certificate for ``U' = AU + sum_i F_i(U, U(t - tau_i))`` with global constants.

    Parameters
    ----------
    M, omega : float
        Semigroup envelope constants (``M >= 1``, ``omega > 0``).
    lipschitz : LipschitzData or sequence of float
        Per-term constants ``gamma_i``.
    delays : sequence of float
        ``tau_i``, one per term; the threshold is tested against the largest.
    history : HistoryBuffer
        Initial datum on ``[-max(delays), 0]``.
    """
    if not (M >= 1.0 and omega > 0.0):
        raise ContractError(f"need M >= 1 and omega > 0, got M={M}, omega={omega}")
    if not isinstance(lipschitz, LipschitzData):
        g = tuple(float(v) for v in lipschitz)
        lipschitz = LipschitzData(g, float(sum(g)))
    if any(g < 0 for g in lipschitz.gamma_i):
        raise ContractError("Lipschitz constants must be non-negative")
    delays = [float(t) for t in delays]
    if len(delays) != len(lipschitz.gamma_i):
        raise ContractError("one delay per Lipschitz constant is required")
    gamma = lipschitz.gamma
    tau = max(delays) if delays else 0.0
    u0 = float(np.linalg.norm(history.sample(0.0)))

    alpha, alpha_err = 0.0, 0.0
    for g, t in zip(lipschitz.gamma_i, delays):
        if g > 0:
            val, err = history_weight_integral(history, omega, t, n_quad)
            alpha += g * val
            alpha_err += g * err

    gamma_ok = gamma < omega / (2.0 * M)
    tau0 = delay_threshold(M, omega, gamma)
    if gamma > omega / (2.0 * M):
        tau0 = None
    delay_ok = tau0 is not None and tau < tau0
    rate = decay_rate(M, omega, gamma, tau)
    notes = []
    if m_capped:
        notes.append("envelope M limited by the fit cap")
    return GlobalCertificate(
        feasible=bool(gamma_ok and delay_ok), M=float(M), omega=float(omega), gamma=gamma,
        tau=tau, tau0=tau0, rate=rate, alpha=alpha, alpha_error=alpha_err, u0_norm=u0,
        prefactor=M * (u0 + alpha), gamma_condition=bool(gamma_ok),
        delay_condition=bool(delay_ok), m_capped=bool(m_capped), notes="; ".join(notes))


# -- linear delayed feedback ---------------------------------------------------

@dataclass
class LinearDelayCertificate(_Report):
    feasible: bool
    M: float
    omega: float
    gamma: float
    k_norm_b: float
    tau: float
    tau0_prime: float
    jee: bool


def linear_delay_tau0(M, omega, gamma_g, k, norm_b):
    """Delay threshold for ``U' = AU + k B U(t - tau) + G(U)``.

    ``tau0' = ln((omega / M - gamma) / (k ||B||)) / omega``, so that
    ``tau < tau0'`` is equivalent to ``k ||B|| e^{omega tau} + gamma < omega / M``.
    A negative value means no positive delay qualifies. Returns ``None`` when
    ``omega / M <= gamma``.
    """
    kb = k * norm_b
    if not kb > 0:
        raise ContractError("k * ||B|| must be positive")
    slack = omega / M - gamma_g
    if slack <= 0:
        return None
    return math.log(slack / kb) / omega


def jee_condition(M, omega, gamma, k, norm_b, tau):
    """``k ||B|| e^{omega tau} + gamma < (e^{omega tau} - 1) / (M tau)``."""
    if not tau > 0:
        raise ContractError("tau must be positive")
    x = omega * tau
    rhs = math.expm1(x) / (M * tau)
    return bool(k * norm_b * math.exp(x) + gamma < rhs)


def linear_delay_certificate(M, omega, gamma_g, k, norm_b, tau):
    t0 = linear_delay_tau0(M, omega, gamma_g, k, norm_b)
    return LinearDelayCertificate(
        feasible=t0 is not None and tau < t0, M=M, omega=omega, gamma=gamma_g,
        k_norm_b=k * norm_b, tau=tau, tau0_prime=t0,
        jee=jee_condition(M, omega, gamma_g, k, norm_b, tau))


# -- small data ----------------------------------------------------------------

@dataclass
class SmallDataCertificate(_Report):
    """Constants of the small-data decay theorem.

    For history with ``||U(t)||_V < gamma0 K`` on ``[-tau, 0]`` and
    ``0 < K <= k0`` the solution is global and
    ``||U(t)||_V <= (K / 2) e^{-omega_prime t / 2}``.
    """

    feasible: bool
    lambda1: float
    c1: float
    k0: float
    k0_capped: bool
    c4_at_k0: float
    omega_eff: float
    omega_prime: float
    c_omega_lambda: float
    gamma0: float
    data_radius: float
    notes: str = ""

    def envelope(self, t, K=None):
        K = self.k0 if K is None else K
        return 0.5 * K * np.exp(-0.5 * self.omega_prime * np.asarray(t, dtype=float))


def _k0_bisection(c4, target, k_cap, rtol):
    if c4(k_cap) <= target:
        return k_cap, True
    lo, hi = 0.0, k_cap
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if c4(mid) <= target:
            lo = mid
        else:
            hi = mid
    return lo, False


def small_data_certificate(lambda1, bounds, k_cap=K_CAP, rtol=1e-9):
    """Small-data radius, rate and envelope.

    ``K0`` is the largest ``K`` with ``C4(K) / sqrt(lambda1) <= (1 - C1/lambda1) / 2``
    (bisection), ``omega = 1 - C1/lambda1 - C4(K0)/sqrt(lambda1)``,
    ``omega' = min(omega, lambda1 omega)``,
    ``C = (1 + omega / (2 lambda1 omega - omega')) / (2 omega' lambda1)`` and
    ``gamma0^-2 = 4 (1 + (omega' + (C1/sqrt(lambda1) + C4(K0))^2) C)``.
    """
    if not lambda1 > 0:
        raise ContractError("lambda1 must be positive")
    if not isinstance(bounds, SmallDataBounds):
        raise ContractError("small-data certificate needs SmallDataBounds")
    c1 = bounds.c1
    nan = float("nan")
    if c1 >= lambda1:
        return SmallDataCertificate(False, lambda1, c1, nan, False, nan, nan, nan, nan, nan, nan,
                                    "C1 >= lambda1")
    sq = math.sqrt(lambda1)
    target = 0.5 * (1.0 - c1 / lambda1)

    def c4_scaled(K):
        return corner_bound(bounds, K) / sq

    k0, capped = _k0_bisection(c4_scaled, target, k_cap, rtol)
    c4 = corner_bound(bounds, k0)
    omega = 1.0 - c1 / lambda1 - c4 / sq
    omega_p = min(omega, lambda1 * omega)
    if not omega_p < 2.0 * lambda1 * omega:
        omega_p *= 0.999
    C = (1.0 + omega / (2.0 * lambda1 * omega - omega_p)) / (2.0 * omega_p * lambda1)
    g0 = 1.0 / math.sqrt(4.0 * (1.0 + (omega_p + (c1 / sq + c4) ** 2) * C))
    notes = ["rate uses C4(K0)/sqrt(lambda1)"]
    if capped:
        notes.append(f"K0 reached the cap {k_cap:g}")
    return SmallDataCertificate(True, lambda1, c1, k0, capped, c4, omega, omega_p, C, g0,
                                g0 * k0, "; ".join(notes))


# -- admissibility -------------------------------------------------------------

@dataclass
class Condition:
    name: str
    satisfied: bool
    margin: float
    statement: str = ""


@dataclass
class AdmissibilityReport(_Report):
    scenario: str
    admissible: bool
    conditions: list = field(default_factory=list)
    constants: dict = field(default_factory=dict)

    def condition(self, name):
        for c in self.conditions:
            if c.name == name:
                return c
        raise KeyError(name)

    def items(self):
        yield "scenario", self.scenario
        yield "admissible", self.admissible
        for c in self.conditions:
            yield f"{c.name}.satisfied", c.satisfied
            yield f"{c.name}.margin", c.margin
        for k, v in self.constants.items():
            yield k, v


def max_dimension(n1, n2):
    """Largest integer ``d`` with ``d <= 2(1 + 1/n1)`` and ``d < 2(1 + 1/n2)``."""
    lim1 = math.inf if n1 == 0 else 2.0 * (1.0 + 1.0 / n1)
    lim2 = math.inf if n2 == 0 else 2.0 * (1.0 + 1.0 / n2)
    if math.isinf(lim1) and math.isinf(lim2):
        return math.inf
    d = math.floor(min(lim1, lim2))
    while d >= lim2:
        d -= 1
    return d


def _dimension_conditions(bounds, d):
    n1, n2 = bounds.n1, bounds.n2
    lim1 = math.inf if n1 == 0 else 2.0 * (1.0 + 1.0 / n1)
    lim2 = math.inf if n2 == 0 else 2.0 * (1.0 + 1.0 / n2)
    return [
        Condition("dimension_p1", d <= lim1, lim1 - d, f"d <= 2(1 + 1/n1) with n1 = {n1}"),
        Condition("dimension_p2", d < lim2, lim2 - d, f"d < 2(1 + 1/n2) with n2 = {n2}"),
    ]


def vanishes_on_zero_current(term, n_samples=101, scale=10.0):
    """Largest ``|f(0, y)|`` over sampled ``y`` (a zero value passes)."""
    # a column of samples broadcasts against nodal coefficient arrays
    y = np.linspace(-scale, scale, n_samples)[:, None]
    return float(np.max(np.abs(evaluate(term, np.zeros_like(y), y))))


def admissibility_diffusion(bounds, d, boundary, lambda1, eps=0.0, term=None, scenario=""):
    """Hypotheses for a scalar reaction-diffusion equation with delay.

    Checks the dimension conditions on the polynomial degrees, the linear
    margin ``alpha0 < eps`` (Neumann) or ``alpha0 < lambda1`` (otherwise),
    and, when ``term`` is given, ``f(0, y) = 0``.
    """
    if not isinstance(bounds, ReactionBounds):
        raise ContractError("admissibility needs ReactionBounds")
    if boundary not in ("dirichlet", "neumann", "robin"):
        raise ConfigurationError(f"unknown boundary kind {boundary!r}")
    conds = _dimension_conditions(bounds, d)
    ref = eps if boundary == "neumann" else lambda1
    label = "eps" if boundary == "neumann" else "lambda1"
    conds.append(Condition("linear_margin", bounds.alpha0 < ref, ref - bounds.alpha0,
                           f"alpha0 < {label}"))
    if term is not None:
        worst = vanishes_on_zero_current(term)
        conds.append(Condition("vanishes_at_zero", worst == 0.0, 0.0 - worst, "f(0, y) = 0"))
    consts = {"d": d, "n1": bounds.n1, "n2": bounds.n2, "alpha0": bounds.alpha0,
              "lambda1": lambda1, "eps": eps, "max_dimension": max_dimension(bounds.n1, bounds.n2)}
    return AdmissibilityReport(scenario, all(c.satisfied for c in conds), conds, consts)


def _sup_inf(a):
    a = np.asarray(a, dtype=float)
    return float(np.max(a)), float(np.min(a))


def _case2_slacks(a1, a2, mu1):
    s1, i1 = _sup_inf(a1)
    s2, i2 = _sup_inf(a2)
    return {
        "upper_a1": mu1 - s1,
        "lower_a1": mu1 + i1,
        "negative_a2": -s2,
        "spread_a2": (2.0 * mu1 - 2.0 * s2 + i2) / 3.0,
        "oscillation_a2": (2.0 * mu1 - (s2 - i2)) / 2.0,
    }


def epsilon2_bracket(a1, a2, mu1, delta, eps2):
    """Pointwise lower and upper bounds of the admissible shift interval.

    Returns ``(lower, upper)`` nodal arrays; ``eps2`` is admissible when
    ``lower <= eps2 <= upper`` at every node.
    """
    a1 = np.broadcast_to(np.asarray(a1, dtype=float), np.broadcast(a1, a2).shape)
    a2 = np.broadcast_to(np.asarray(a2, dtype=float), a1.shape)
    lower = np.maximum.reduce([a1 + delta, -a1 + delta, (delta - a2) / 2.0, -a2 - mu1 + delta])
    upper = mu1 - delta - a2
    return lower, upper


def select_epsilon2(a1, a2, mu1):
    """Shift ``eps2`` for a Neumann field coupled to a Dirichlet/Robin field.

    ``delta`` is half the smallest slack of the strict inequalities that make
    the shift interval non-empty, and ``eps2 = mu1 - sup a2 - delta``.

    Raises
    ------
    ConfigurationError
        ``"case-2 conditions violated"`` when no admissible shift exists.
    """
    if not mu1 > 0:
        raise ContractError("mu1 must be positive")
    slacks = _case2_slacks(a1, a2, mu1)
    worst = min(slacks.values())
    if not worst > 0:
        bad = sorted(k for k, v in slacks.items() if not v > 0)
        raise ConfigurationError(f"case-2 conditions violated: {', '.join(bad)}")
    delta = 0.5 * worst
    # mu1 - sup a2 - delta, evaluated along the upper bound so the tie at the
    # maximising node is exact in floating point
    eps2 = float(np.min(mu1 - delta - np.asarray(a2, dtype=float)))
    lower, upper = epsilon2_bracket(a1, a2, mu1, delta, eps2)
    if not (eps2 > 0 and np.all(lower <= eps2) and np.all(eps2 <= upper)):
        raise ConfigurationError("case-2 conditions violated: shift bracket not satisfied")
    c1 = max(float(np.max(np.abs(a1))), float(np.max(np.abs(np.asarray(a2) + eps2))))
    if not c1 < min(mu1, eps2):
        raise ConfigurationError("case-2 conditions violated: C1 >= lambda1")
    return eps2, delta


CASES = {1: ("dirichlet", "dirichlet"), 2: ("dirichlet", "neumann"),
         3: ("neumann", "dirichlet"), 4: ("neumann", "neumann")}


def competition_case(boundary1, boundary2):
    """Case index from the two boundary kinds (Robin counts as Dirichlet)."""
    key = tuple("neumann" if b == "neumann" else "dirichlet" for b in (boundary1, boundary2))
    for k, v in CASES.items():
        if v == key:
            return k
    raise ConfigurationError(f"unknown boundary pairing {boundary1}/{boundary2}")


def admissibility_competition(case, a1, a2, mu1=None, mu2=None, d=1, boundaries=None,
                              scenario="competition"):
    """Hypotheses for the two-species system.

    Case 1: both fields Dirichlet/Robin, ``sup|a_i| < min(mu1, mu2)``.
    Case 2: field 1 Dirichlet/Robin, field 2 Neumann: ``sup|a1| < mu1``,
    ``sup a2 < 0``, ``2 sup a2 - inf a2 < 2 mu1`` and ``osc a2 < 2 mu1``.
    Case 3: the mirror image of case 2. Case 4: both Neumann,
    ``sup a_i < 0``.
    """
    if case not in CASES:
        raise ConfigurationError(f"competition case must be 1..4, got {case}")
    if boundaries is not None and competition_case(*boundaries) != case:
        raise ConfigurationError(f"case {case} does not match boundaries {boundaries}")
    s1, i1 = _sup_inf(a1)
    s2, i2 = _sup_inf(a2)
    abs1 = float(np.max(np.abs(a1)))
    abs2 = float(np.max(np.abs(a2)))
    conds = [Condition("dimension", d <= 3, 3 - d, "d <= 3")]
    consts = {"case": case, "d": d}
    eps = {}

    def need(value, name):
        if value is None:
            raise ConfigurationError(f"case {case} needs {name}")
        return value

    if case == 1:
        lam = min(need(mu1, "mu1"), need(mu2, "mu2"))
        conds += [Condition("a1_margin", abs1 < lam, lam - abs1, "sup|a1| < lambda1"),
                  Condition("a2_margin", abs2 < lam, lam - abs2, "sup|a2| < lambda1")]
        consts.update(lambda1=lam, mu1=mu1, mu2=mu2)
    elif case in (2, 3):
        if case == 2:
            ad, an, mu, tag = a1, a2, need(mu1, "mu1"), "2"
        else:
            ad, an, mu, tag = a2, a1, need(mu2, "mu2"), "1"
        sd = _case2_slacks(ad, an, mu)
        absd = float(np.max(np.abs(ad)))
        sn, inn = _sup_inf(an)
        dn = "a1" if case == 2 else "a2"
        nn = "a2" if case == 2 else "a1"
        conds += [
            Condition(f"{dn}_margin", absd < mu, mu - absd, f"sup|{dn}| < mu"),
            Condition(f"{nn}_negative", sn < 0, -sn, f"sup {nn} < 0"),
            Condition(f"{nn}_spread", 2 * sn - inn < 2 * mu, 2 * mu - (2 * sn - inn),
                      f"2 sup {nn} - inf {nn} < 2 mu"),
            Condition(f"{nn}_oscillation", sn - inn < 2 * mu, 2 * mu - (sn - inn),
                      f"sup {nn} - inf {nn} < 2 mu"),
        ]
        consts.update(mu1=mu1, mu2=mu2)
        if all(c.satisfied for c in conds) and min(sd.values()) > 0:
            e, delta = select_epsilon2(ad, an, mu)
            eps[f"eps{tag}"] = e
            consts["delta"] = delta
            consts["lambda1"] = min(mu, e)
    else:
        conds += [Condition("a1_negative", s1 < 0, -s1, "sup a1 < 0"),
                  Condition("a2_negative", s2 < 0, -s2, "sup a2 < 0")]
        # a common shift eps = -(S + I)/2 with S = max sup a_i, I = min inf a_i
        S, I = max(s1, s2), min(i1, i2)
        if S < 0:
            e = -(S + I) / 2.0
            eps.update(eps1=e, eps2=e)
            consts["lambda1"] = e
    consts.update(eps)
    return AdmissibilityReport(scenario, all(c.satisfied for c in conds), conds, consts)


def neumann_shift(a):
    """Shift ``eps = -(sup a + inf a) / 2`` minimising ``sup|a + eps| / eps``.

    Requires ``sup a < 0`` so that the result is positive and
    ``sup|a + eps| < eps``.
    """
    s, i = _sup_inf(a)
    if not s < 0:
        raise ConfigurationError("Neumann shift needs sup a < 0")
    return -(s + i) / 2.0

