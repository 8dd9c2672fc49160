"""Delay nonlinearities ``F_i(u, u(t - tau_i))`` and their bound metadata.

Every built-in kind is a pointwise map ``F(x, y)`` of the current value ``x``
and the delayed value ``y`` at each grid node. They are all expressed through
one coefficient table over the basis

    x, y, x^2, x y, x y^2, x y^3, x^2 y, sin(x), sin(y)

so that the fast oracle kernel and the reference evaluator share a single
definition. Coefficients may be scalars or nodal arrays (spatially varying
``a(x)``, ``b(x)``, ...). A ``globally_lipschitz_scalar`` term may instead wrap
an arbitrary vectorised callable.

Bounds are declared by the scenario builders, never derived symbolically:

* ``lipschitz`` -- the global constant ``gamma_i`` (global-Lipschitz theory),
* :class:`ReactionBounds` -- ``alpha0`` and the polynomials ``P1, P2`` that
  control local Lipschitz growth,
* :class:`SmallDataBounds` -- ``C1`` and the polynomial ``h3`` used by the
  small-data certificate.
"""
from collections import namedtuple
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, NotGloballyLipschitz

BASIS = ("x", "y", "xx", "xy", "xyy", "xyyy", "xxy", "sinx", "siny")
KINDS = ("affine_gate", "logistic_delay", "modified_hutchinson", "cubic_delay",
         "globally_lipschitz_scalar", "competition_coupling")

LipschitzData = namedtuple("LipschitzData", "gamma_i gamma")


def _basis_values(x, y):
    return (x, y, x * x, x * y, x * y * y, x * y * y * y, x * x * y, np.sin(x), np.sin(y))


@dataclass(frozen=True)
class ReactionBounds:
    """Local Lipschitz data: ``|F(x1,y1)-F(x2,y2)| <= (alpha0 + P1(S))|dx| + P2(S)|dy|``.

    ``S = |x1|+|y1|+|x2|+|y2|`` and ``P_i(X) = sum_j coeffs[j-1] X^j``.
    The degrees ``n1, n2`` are the coefficient-list lengths.
    """

    alpha0: float
    p1_coeffs: tuple
    p2_coeffs: tuple

    def __post_init__(self):
        if self.alpha0 < 0 or any(c < 0 for c in self.p1_coeffs + self.p2_coeffs):
            raise ContractError("reaction-bound coefficients must be non-negative")

    @property
    def n1(self):
        return len(self.p1_coeffs)

    @property
    def n2(self):
        return len(self.p2_coeffs)

    def p1(self, X):
        return sum(c * X ** (j + 1) for j, c in enumerate(self.p1_coeffs))

    def p2(self, X):
        return sum(c * X ** (j + 1) for j, c in enumerate(self.p2_coeffs))


@dataclass(frozen=True)
class SmallDataBounds:
    """Bound ``|sum_i (W, F_i(U, V_i))| <= |W| (C1 |U|_H + h3(|U|_V, |V_1|_V, ...) |U|_V)``.

    ``h3`` maps exponent tuples (one entry per variable, current state first)
    to non-negative coefficients; a zero constant term is required.
    """

    c1: float
    h3: dict = field(default_factory=dict)
    n_vars: int = 2

    def __post_init__(self):
        if self.c1 < 0:
            raise ContractError("C1 must be non-negative")
        for exps, coef in self.h3.items():
            if len(exps) != self.n_vars:
                raise ContractError(f"h3 monomial {exps} does not have {self.n_vars} variables")
            if coef < 0:
                raise ContractError("h3 coefficients must be non-negative")
            if sum(exps) == 0 and coef != 0:
                raise ContractError("h3 must vanish at the origin")

    def h3_value(self, *args):
        if len(args) != self.n_vars:
            raise ContractError(f"h3 takes {self.n_vars} arguments")
        total = 0.0
        for exps, coef in self.h3.items():
            total += coef * np.prod([a ** e for a, e in zip(args, exps)])
        return total


@dataclass(frozen=True, eq=False)
class DelayTerm:
    """One nonlinearity ``F_i`` with its delay and field routing.

    ``target_field`` receives the output. ``current_field`` supplies ``x``
    and ``delayed_field`` supplies ``y = u_field(t - delay)``; both default to
    ``target_field``.
    """

    delay: float
    kind: str
    coeffs: dict
    target_field: int = 0
    current_field: int = None
    delayed_field: int = None
    func: object = None
    lipschitz: float = None
    reaction: ReactionBounds = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.delay > 0:
            raise ContractError(f"delay must be positive, got {self.delay}")
        if self.kind not in KINDS:
            raise ContractError(f"unknown term kind {self.kind!r}")
        unknown = set(self.coeffs) - set(BASIS)
        if unknown:
            raise ContractError(f"unknown basis monomials {sorted(unknown)}")
        for name, c in self.coeffs.items():
            if not np.all(np.isfinite(c)):
                raise ContractError(f"coefficient {name} is not finite")
        if self.func is not None and self.kind != "globally_lipschitz_scalar":
            raise ContractError("only globally_lipschitz_scalar terms may wrap a callable")
        if self.lipschitz is not None and self.lipschitz < 0:
            raise ContractError("Lipschitz constant must be non-negative")
        if self.current_field is None:
            object.__setattr__(self, "current_field", self.target_field)
        if self.delayed_field is None:
            object.__setattr__(self, "delayed_field", self.target_field)
        if self.kind == "globally_lipschitz_scalar":
            if self.lipschitz is None:
                raise ContractError("globally_lipschitz_scalar needs a declared constant")
            zero = np.zeros(1)
            if np.any(evaluate(self, zero, zero) != 0.0):
                raise ContractError("globally_lipschitz_scalar must satisfy F(0, 0) = 0")

    def table(self, n_nodes):
        """Coefficient table of shape ``(len(BASIS), n_nodes)``."""
        if self.func is not None:
            raise ContractError("callable terms have no coefficient table")
        out = np.zeros((len(BASIS), n_nodes))
        for k, name in enumerate(BASIS):
            if name in self.coeffs:
                out[k] = np.broadcast_to(self.coeffs[name], (n_nodes,))
        return out

    def sup_abs(self, name):
        return float(np.max(np.abs(self.coeffs.get(name, 0.0))))


def evaluate(term, x, y):
    """Pointwise ``F(x, y)`` without shape checks."""
    if term.func is not None:
        return np.asarray(term.func(x, y), dtype=float)
    vals = _basis_values(x, y)
    out = np.zeros_like(x, dtype=float)
    for k, name in enumerate(BASIS):
        c = term.coeffs.get(name)
        if c is not None:
            out = out + c * vals[k]
    return out


def eval_term(term, u_nodal, v_nodal):
    """Evaluate ``F_i`` at nodal values ``u`` (current) and ``v`` (delayed)."""
    u = np.asarray(u_nodal, dtype=float)
    v = np.asarray(v_nodal, dtype=float)
    if u.shape != v.shape or u.ndim != 1:
        raise ContractError(f"grid length mismatch: {u.shape} vs {v.shape}")
    for name, c in term.coeffs.items():
        if np.ndim(c) and np.shape(c) != u.shape:
            raise ContractError(f"coefficient {name} has shape {np.shape(c)}, grid is {u.shape}")
    return evaluate(term, u, v)


# -- kind constructors -------------------------------------------------------

def affine_gate(delay, x_coef=0.0, y_coef=1.0, **routing):
    """``F = x_coef * x + y_coef * y``; globally Lipschitz with ``max(|x_coef|, |y_coef|)``."""
    gamma = max(float(np.max(np.abs(x_coef))), float(np.max(np.abs(y_coef))))
    return DelayTerm(delay, "affine_gate", {"x": x_coef, "y": y_coef}, lipschitz=gamma,
                     params={"x_coef": x_coef, "y_coef": y_coef}, **routing)


def logistic_delay(delay, a, b, c, eps=0.0, lipschitz=None, **routing):
    """``F = (a + eps) x - b x^2 + c x y`` (diffusive logistic, Hutchinson for b=0, c=-a)."""
    sa = float(np.max(np.abs(np.asarray(a) + eps)))
    sb, sc = float(np.max(np.abs(b))), float(np.max(np.abs(c)))
    reaction = ReactionBounds(sa, (max(sb, sc),), (sc,))
    coeffs = {"x": np.asarray(a, dtype=float) + eps, "xx": -np.asarray(b, dtype=float),
              "xy": np.asarray(c, dtype=float)}
    return DelayTerm(delay, "logistic_delay", coeffs, lipschitz=lipschitz, reaction=reaction,
                     params={"a": a, "b": b, "c": c, "eps": eps}, **routing)


def modified_hutchinson(delay, alpha, beta, gamma, delta, eps=0.0, **routing):
    """``F = alpha x (1 + beta y + gamma y^2 + delta y^3) + eps x``."""
    p = (abs(alpha * beta), abs(alpha * gamma), abs(alpha * delta))
    reaction = ReactionBounds(abs(alpha + eps), p, p)
    coeffs = {"x": alpha + eps, "xy": alpha * beta, "xyy": alpha * gamma, "xyyy": alpha * delta}
    return DelayTerm(delay, "modified_hutchinson", coeffs, reaction=reaction,
                     params={"alpha": alpha, "beta": beta, "gamma": gamma, "delta": delta,
                             "eps": eps}, **routing)


def cubic_delay(delay, eps=0.0, **routing):
    """``F = -x^2 y + eps x``."""
    reaction = ReactionBounds(abs(eps), (0.0, 1.0), (0.0, 1.0))
    return DelayTerm(delay, "cubic_delay", {"x": eps, "xxy": -1.0}, reaction=reaction,
                     params={"eps": eps}, **routing)


def sine_lipschitz(delay, x_coef, y_coef, **routing):
    """``F = x_coef sin(x) + y_coef sin(y)``, globally Lipschitz."""
    gamma = max(abs(x_coef), abs(y_coef))
    return DelayTerm(delay, "globally_lipschitz_scalar", {"sinx": x_coef, "siny": y_coef},
                     lipschitz=gamma, params={"x_coef": x_coef, "y_coef": y_coef}, **routing)


def callable_lipschitz(delay, func, gamma, **routing):
    """Wrap a vectorised ``func(x, y)`` with declared global constant ``gamma``."""
    return DelayTerm(delay, "globally_lipschitz_scalar", {}, func=func, lipschitz=gamma, **routing)


def competition_coupling(delay, linear=0.0, quadratic=0.0, coupling=0.0, **routing):
    """``F = linear x + quadratic x^2 + coupling x y`` routed between fields."""
    sl, sq, sc = (float(np.max(np.abs(v))) for v in (linear, quadratic, coupling))
    reaction = ReactionBounds(sl, (max(sq, sc),), (sc,))
    coeffs = {"x": linear, "xx": quadratic, "xy": coupling}
    return DelayTerm(delay, "competition_coupling", coeffs, reaction=reaction,
                     params={"linear": linear, "quadratic": quadratic, "coupling": coupling},
                     **routing)


def with_lipschitz(term, gamma):
    """Copy of ``term`` carrying a declared Lipschitz constant."""
    return DelayTerm(term.delay, term.kind, term.coeffs, term.target_field, term.current_field,
                     term.delayed_field, term.func, gamma, term.reaction, term.params)


# -- bound arithmetic --------------------------------------------------------

def lipschitz_sum(terms):
    """Collect the declared constants ``gamma_i`` and their sum."""
    gammas = []
    for term in terms:
        if term.lipschitz is None:
            raise NotGloballyLipschitz(f"not globally Lipschitz: {term.kind} term has no declared constant")
        gammas.append(float(term.lipschitz))
    return LipschitzData(tuple(gammas), float(sum(gammas)))


def corner_bound(bounds, K):
    """Maximum of the bound polynomial over the box ``[0, K]^n``.

    Coefficients are non-negative, so the maximum sits at the corner where
    every variable equals ``K``. For :class:`SmallDataBounds` this is
    ``C4(K)``; for :class:`ReactionBounds` it is ``P1(4K) + P2(4K)``, the
    excess local Lipschitz constant when all four arguments are bounded by
    ``K``.
    """
    if not K >= 0:
        raise ContractError(f"K must be non-negative, got {K}")
    if isinstance(bounds, SmallDataBounds):
        return float(sum(c * K ** sum(e) for e, c in bounds.h3.items()))
    if isinstance(bounds, ReactionBounds):
        return float(bounds.p1(4.0 * K) + bounds.p2(4.0 * K))
    raise ContractError(f"no corner bound for {type(bounds).__name__}")


def probe_lipschitz(term, gamma, n_pairs=10_000, scale=5.0, rng=None):
    """Largest sampled ratio ``|dF| / (|dx| + |dy|)`` divided by ``gamma``.

    A value above one falsifies the declared constant.
    """
    rng = np.random.default_rng(rng)
    x1, y1, x2, y2 = rng.uniform(-scale, scale, size=(4, n_pairs))
    num = np.abs(evaluate(term, x1, y1) - evaluate(term, x2, y2))
    den = np.abs(x1 - x2) + np.abs(y1 - y2)
    return float(np.max(num / den) / gamma) if gamma > 0 else float(np.max(num))
