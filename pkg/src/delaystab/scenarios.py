"""Operators, delay terms and initial data for the model problems.

Spatial domains are intervals ``[0, L]`` with diffusion ``-d u''`` and
Dirichlet, shifted Neumann (``-d u'' + eps u``) or Robin
(``d u'(0) = alpha' u(0)``, ``-u'(L) = alpha' u(L)``, i.e. ``du/dn + alpha' u = 0``)
boundary conditions. Each operator comes with an :class:`EigenTransform`
between modal coefficients and nodal values:

* Dirichlet -- ``N`` interior nodes ``x_j = j L / (N + 1)``; the sine basis is
  discretely orthogonal there, so the projection is ``(L / (N + 1)) Phi^T``.
* Neumann -- cell centres ``(j + 1/2) L / N``; the cosine basis is discretely
  orthogonal with weight ``L / N``.
* Robin (and mixed systems) -- Gauss-Legendre collocation with ``P = Phi^{-1}``.

Presets bundle an operator, terms with declared bound metadata and a default
history into a :class:`Scenario`.
"""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import polygamma

from . import certificates as cert
from .errors import ConfigurationError, ContractError, RootFindingError
from .history import HistoryBuffer
from .nonlinearity import (SmallDataBounds, affine_gate, competition_coupling, cubic_delay,
                           logistic_delay, modified_hutchinson, sine_lipschitz, with_lipschitz)
from .spectral import GeneralOperator, SpectralOperator, estimate_envelope, norms
from .system import DelayProblem, NodalLayout

BOUNDARIES = ("dirichlet", "neumann", "robin")


@dataclass(frozen=True)
class Domain1D:
    """Interval ``[0, length]`` with ``modes`` retained eigenmodes.

    ``eps`` is the Neumann shift; building an operator requires it to be
    positive so that ``-A`` is invertible. ``robin`` is the Robin
    coefficient ``alpha' > 0``.
    """

    length: float = math.pi
    d_coef: float = 1.0
    boundary: str = "dirichlet"
    modes: int = 16
    eps: float = 0.0
    robin: float = 0.0

    def __post_init__(self):
        if not (self.length > 0 and self.d_coef > 0):
            raise ConfigurationError("length and diffusion coefficient must be positive")
        if self.boundary not in BOUNDARIES:
            raise ConfigurationError(f"boundary must be one of {BOUNDARIES}, got {self.boundary!r}")
        if int(self.modes) != self.modes or self.modes < 1:
            raise ConfigurationError("modes must be a positive integer")
        if not self.eps >= 0:
            raise ConfigurationError("the Neumann shift eps must be non-negative")
        if self.boundary == "robin" and not (math.isfinite(self.robin) and self.robin > 0):
            raise ConfigurationError("Robin coefficient must be finite and positive")

    def with_eps(self, eps):
        return Domain1D(self.length, self.d_coef, self.boundary, self.modes, eps, self.robin)

    def with_modes(self, modes):
        return Domain1D(self.length, self.d_coef, self.boundary, modes, self.eps, self.robin)


@dataclass(frozen=True, eq=False)
class EigenTransform:
    """Nodal evaluation ``Phi`` (nodes x modes) and projection ``P`` (modes x nodes)."""

    nodes: np.ndarray
    phi: np.ndarray
    proj: np.ndarray
    sup_norms: np.ndarray

    def to_nodal(self, c):
        return self.phi @ c

    def to_modal(self, v):
        return self.proj @ v


# -- eigenfunctions ------------------------------------------------------------

def robin_wavenumbers(length, robin, n, xtol=1e-12):
    """First ``n`` positive roots of ``(k^2 - a^2) sin(kL) - 2 a k cos(kL) = 0``.

    There is exactly one root in each interval ``((j - 1) pi / L, j pi / L)``.
    """
    a, L = robin, length

    def f(k):
        return (k * k - a * a) * math.sin(k * L) - 2.0 * a * k * math.cos(k * L)

    roots = []
    for j in range(1, n + 1):
        lo = (j - 1) * math.pi / L + (1e-12 if j == 1 else 0.0)
        hi = j * math.pi / L
        flo, fhi = f(lo), f(hi)
        if flo == 0.0:
            roots.append(lo)
            continue
        if flo * fhi > 0:
            raise RootFindingError(
                f"Robin root {j} not bracketed on ({lo:.6g}, {hi:.6g}): f = {flo:.3g}, {fhi:.3g}")
        roots.append(brentq(f, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps))
    return np.array(roots)


def _robin_basis(k, a, L, x):
    """Normalised ``cos(kx) + (a/k) sin(kx)`` at ``x`` and its squared norm."""
    r = a / k
    s2 = math.sin(2 * k * L)
    norm2 = (0.5 * L * (1 + r * r) + s2 / (4 * k) * (1 - r * r)
             + r * math.sin(k * L) ** 2 / k)
    vals = (np.cos(k * x) + r * np.sin(k * x)) / math.sqrt(norm2)
    return vals, norm2


def basis_values(dom, x):
    """Eigenfunction values ``phi_k(x_j)`` (rows: nodes) and wavenumbers of ``dom``."""
    x = np.asarray(x, dtype=float)
    L, N = dom.length, dom.modes
    if dom.boundary == "dirichlet":
        k = np.arange(1, N + 1) * math.pi / L
        return math.sqrt(2.0 / L) * np.sin(np.outer(x, k)), k
    if dom.boundary == "neumann":
        k = np.arange(N) * math.pi / L
        phi = math.sqrt(2.0 / L) * np.cos(np.outer(x, k))
        phi[:, 0] = 1.0 / math.sqrt(L)
        return phi, k
    k = robin_wavenumbers(L, dom.robin, N)
    phi = np.column_stack([_robin_basis(kk, dom.robin, L, x)[0] for kk in k])
    return phi, k


def eigenvalues(dom):
    _, k = basis_values(dom, np.zeros(0))
    return dom.d_coef * k ** 2 + (dom.eps if dom.boundary == "neumann" else 0.0)


def native_nodes(dom):
    L, N = dom.length, dom.modes
    if dom.boundary == "dirichlet":
        return np.arange(1, N + 1) * L / (N + 1)
    if dom.boundary == "neumann":
        return (np.arange(N) + 0.5) * L / N
    return gauss_nodes(L, N)


def gauss_nodes(length, n):
    x, _ = np.polynomial.legendre.leggauss(n)
    return 0.5 * length * (x + 1.0)


def _sup_norms(dom, k):
    L = dom.length
    if dom.boundary == "dirichlet":
        return np.full(k.size, math.sqrt(2.0 / L))
    if dom.boundary == "neumann":
        out = np.full(k.size, math.sqrt(2.0 / L))
        out[0] = 1.0 / math.sqrt(L)
        return out
    # |cos + r sin| <= sqrt(1 + r^2)
    return np.array([math.sqrt(1 + (dom.robin / kk) ** 2) / math.sqrt(_robin_basis(kk, dom.robin, L, 0.0)[1])
                     for kk in k])


def build_diffusion_operator(dom, nodes=None):
    """Spectral operator of ``-d u'' (+ eps u)`` and its eigen-transform.

    Parameters
    ----------
    dom : Domain1D
    nodes : array_like, optional
        Collocation nodes; by default the boundary-specific native grid.

    Returns
    -------
    (SpectralOperator, EigenTransform)
    """
    if dom.boundary == "neumann" and not dom.eps > 0:
        raise ConfigurationError("Neumann operator needs a positive shift eps")
    _, k = basis_values(dom, np.zeros(0))
    lam = dom.d_coef * k ** 2 + (dom.eps if dom.boundary == "neumann" else 0.0)
    op = SpectralOperator(lam, shift=dom.eps if dom.boundary == "neumann" else 0.0)
    L, N = dom.length, dom.modes
    if nodes is None:
        x = native_nodes(dom)
        phi, _ = basis_values(dom, x)
        if dom.boundary == "dirichlet":
            proj = (L / (N + 1)) * phi.T
        elif dom.boundary == "neumann":
            proj = (L / N) * phi.T
        else:
            proj = np.linalg.inv(phi)
    else:
        x = np.asarray(nodes, dtype=float)
        if x.size != N:
            raise ContractError("collocation needs as many nodes as modes")
        phi, _ = basis_values(dom, x)
        proj = np.linalg.inv(phi)
    return op, EigenTransform(x, phi, proj, _sup_norms(dom, k))


def sup_embedding_constant(dom):
    """``C`` with ``sup|u| <= C ||u||_V`` for ``u`` in the form domain of ``dom``.

    ``C^2 = sum_k sup|phi_k|^2 / lambda_k`` over all modes (not only the
    retained ones); closed forms for Dirichlet and Neumann, a computed sum plus
    a tail bound for Robin.
    """
    L, d = dom.length, dom.d_coef
    if dom.boundary == "dirichlet":
        return math.sqrt(L / (3.0 * d))
    if dom.boundary == "neumann":
        eps = dom.eps
        a2 = eps * L * L / (d * math.pi ** 2)
        a = math.sqrt(a2)
        series = (math.pi * a / math.tanh(math.pi * a) - 1.0) / (2.0 * a2)
        return math.sqrt(1.0 / (L * eps) + (2.0 * L / (d * math.pi ** 2)) * series)
    n = max(dom.modes, 64)
    k = robin_wavenumbers(L, dom.robin, n)
    s = np.array([(1 + (dom.robin / kk) ** 2) / _robin_basis(kk, dom.robin, L, 0.0)[1] for kk in k])
    head = float(np.sum(s / (d * k ** 2)))
    # for j > n: k_j > (j - 1) pi / L and sup^2 / norm^2 <= 1 / (L/2 - 1/(4 k_j))
    k_min = n * math.pi / L
    c_tail = 1.0 / (0.5 * L - 1.0 / (4.0 * k_min))
    tail = c_tail * (L / math.pi) ** 2 / d * float(polygamma(1, n))
    return math.sqrt(head + tail)


def build_damped_wave(dom, a0):
    """Damped wave ``u_tt + a0 u_t - d u_xx = f`` in energy coordinates.

    The state per mode is ``(sqrt(mu_k) c_k, c_k')``, so the Euclidean norm is
    the energy norm and each block is ``[[0, sqrt(mu)], [-sqrt(mu), -a0]]``.

    Returns
    -------
    (GeneralOperator, NodalLayout, mu)
        The layout reads the displacement and writes into the velocity block.
    """
    if dom.boundary != "dirichlet":
        raise ConfigurationError("the damped wave is built on a Dirichlet interval")
    if not a0 > 0:
        raise ConfigurationError("damping a0 must be positive")
    op_d, tr = build_diffusion_operator(dom)
    mu = op_d.eigenvalues
    N = mu.size
    A = np.zeros((2 * N, 2 * N))
    for i, m in enumerate(mu):
        r = math.sqrt(m)
        A[2 * i:2 * i + 2, 2 * i:2 * i + 2] = [[0.0, r], [-r, -a0]]
    inputs = np.zeros((1, N, 2 * N))
    outputs = np.zeros((1, 2 * N, N))
    inputs[0][:, 0::2] = tr.phi / np.sqrt(mu)
    outputs[0][1::2, :] = tr.proj
    layout = NodalLayout(inputs, outputs, nodes=tr.nodes)
    return GeneralOperator(A, block_size=2), layout, mu


# -- scenarios -----------------------------------------------------------------

@dataclass(eq=False)
class Scenario:
    """A fully assembled problem with its declared metadata."""

    name: str
    op: object
    terms: list
    layout: NodalLayout
    history: HistoryBuffer
    meta: dict = field(default_factory=dict)
    small_data: SmallDataBounds = None
    reactions: list = field(default_factory=list)

    @property
    def problem(self):
        return DelayProblem(self.op, self.terms, self.layout)

    @property
    def delays(self):
        return [t.delay for t in self.terms]

    @property
    def tau_max(self):
        return max(self.delays) if self.terms else 0.0

    def initial_state(self):
        return np.array(self.history.sample(0.0))

    def envelope(self):
        return estimate_envelope(self.op)


def _nodal(coef, x):
    if callable(coef):
        return np.asarray(np.broadcast_to(coef(x), x.shape), dtype=float)
    c = np.asarray(coef, dtype=float)
    if c.ndim and c.shape != x.shape:
        raise ContractError(f"coefficient has shape {c.shape}, grid has {x.shape}")
    return c


def _constant(c):
    c = np.asarray(c)
    return float(c) if c.ndim == 0 else c


def _first_mode_history(dim, c0, tau, index=0):
    state = np.zeros(dim)
    state[index] = c0
    return HistoryBuffer.constant(state, tau)


def _diffusion_layout(tr):
    return NodalLayout(tr.phi[None], tr.proj[None], nodes=tr.nodes)


def _single_field(dom):
    op, tr = build_diffusion_operator(dom)
    return op, tr, _diffusion_layout(tr)


def small_data_history(scn, fraction=0.9):
    """Replace the history by ``c0 phi_1`` with ``||.||_V = fraction * gamma0 K0``."""
    c = cert.small_data_certificate(scn.op.lambda1, scn.small_data)
    if not c.feasible:
        raise ConfigurationError("small-data history requested but C1 >= lambda1")
    target = fraction * c.data_radius
    lam_first = scn.op.eigenvalues[0]
    scn.history = _first_mode_history(scn.op.dim, target / math.sqrt(lam_first), scn.tau_max)
    scn.meta["small_data_certificate"] = c
    scn.meta["amplitude"] = target / math.sqrt(lam_first)
    return scn


def heat(domain=None, amplitude=0.1, span=1.0):
    """Linear problem ``u_t = d u_xx`` (no delay terms), first-mode history."""
    dom = Domain1D() if domain is None else domain
    op, tr, layout = _single_field(dom)
    return Scenario("heat", op, [], layout, _first_mode_history(op.dim, amplitude, span),
                    {"domain": dom, "eps": dom.eps, "transform": tr})


def hutchinson(alpha, tau, domain=None, amplitude=0.1, radius=0.0):
    """Diffusive Hutchinson equation ``u_t = d u_xx + alpha u (1 - u(t - tau))``.

    ``radius`` bounds the expected ``sup|u|``; the declared Lipschitz constant
    ``|alpha| (1 + radius)`` is exact for the linearisation (``radius = 0``)
    and valid for solutions staying within the radius.
    """
    return logistic(alpha, 0.0, -alpha, tau, domain=domain, amplitude=amplitude,
                    radius=radius, name="hutchinson")


def logistic(a, b, c, tau, domain=None, eps=None, amplitude=0.1, radius=None,
             small_data_run=False, name="logistic"):
    """Delayed logistic reaction ``f = a u - b u^2 + c u u(t - tau)``.

    For a Neumann domain without a preset shift, ``eps`` defaults to
    ``-(sup a + inf a) / 2`` (requires ``sup a < 0``). If ``radius`` is given
    the term declares the Lipschitz constant
    ``sup|a + eps| + (2 sup|b| + sup|c|) radius``, valid while
    ``sup|u| <= radius``; ``radius = 0`` is the linearisation at zero.
    """
    dom = Domain1D() if domain is None else domain
    x = native_nodes(dom)
    a_n, b_n, c_n = (_nodal(v, x) for v in (a, b, c))
    if dom.boundary == "neumann":
        if eps is None:
            eps = dom.eps if dom.eps > 0 else cert.neumann_shift(a_n)
        dom = dom.with_eps(eps)
    else:
        eps = 0.0 if eps is None else eps
        if eps != 0.0:
            raise ConfigurationError("a shift is only used with Neumann boundary conditions")
    op, tr, layout = _single_field(dom)
    sa = float(np.max(np.abs(a_n + eps)))
    sb, sc = float(np.max(np.abs(b_n))), float(np.max(np.abs(c_n)))
    lip = None if radius is None else sa + (2 * sb + sc) * radius
    term = logistic_delay(tau, _constant(a_n), _constant(b_n), _constant(c_n), eps=eps, lipschitz=lip)
    C = sup_embedding_constant(dom)
    sq = math.sqrt(op.lambda1)
    h3 = {}
    if sb:
        h3[(1, 0)] = C * sb / sq
    if sc:
        h3[(0, 1)] = C * sc / sq
    bounds = SmallDataBounds(sa, h3)
    scn = Scenario(name, op, [term], layout, _first_mode_history(op.dim, amplitude, tau),
                   {"domain": dom, "eps": eps, "sup_embedding": C, "transform": tr,
                    "lipschitz_radius": radius},
                   bounds, [term.reaction])
    return small_data_history(scn) if small_data_run else scn


def modified_hutchinson_preset(alpha, beta, gamma, delta, tau, domain=None, eps=None,
                               amplitude=0.1, small_data_run=False):
    """``f = alpha u (1 + beta u(t-tau) + gamma u(t-tau)^2 + delta u(t-tau)^3)``."""
    dom = Domain1D() if domain is None else domain
    if dom.boundary == "neumann":
        eps = dom.eps if eps is None else eps
        dom = dom.with_eps(eps)
    else:
        eps = 0.0
    op, tr, layout = _single_field(dom)
    term = modified_hutchinson(tau, alpha, beta, gamma, delta, eps=eps)
    C = sup_embedding_constant(dom)
    sq = math.sqrt(op.lambda1)
    h3 = {}
    for p, co in ((1, beta), (2, gamma), (3, delta)):
        if co:
            h3[(0, p)] = abs(alpha) * abs(co) * C ** p / sq
    bounds = SmallDataBounds(abs(alpha + eps), h3)
    scn = Scenario("modified_hutchinson", op, [term], layout,
                   _first_mode_history(op.dim, amplitude, tau),
                   {"domain": dom, "eps": eps, "sup_embedding": C, "transform": tr},
                   bounds, [term.reaction])
    return small_data_history(scn) if small_data_run else scn


def cubic(tau, domain=None, eps=None, amplitude=0.1, small_data_run=False):
    """``f = -u^2 u(t - tau)``."""
    dom = Domain1D() if domain is None else domain
    if dom.boundary == "neumann":
        eps = dom.eps if eps is None else eps
        if small_data_run and not eps > 0:
            raise ConfigurationError("cubic nonlinearity under Neumann needs a positive shift")
        dom = dom.with_eps(eps)
    else:
        eps = 0.0
    op, tr, layout = _single_field(dom)
    term = cubic_delay(tau, eps=eps)
    C = sup_embedding_constant(dom)
    bounds = SmallDataBounds(abs(eps), {(1, 1): C * C / math.sqrt(op.lambda1)})
    scn = Scenario("cubic", op, [term], layout, _first_mode_history(op.dim, amplitude, tau),
                   {"domain": dom, "eps": eps, "sup_embedding": C, "transform": tr},
                   bounds, [term.reaction])
    return small_data_history(scn) if small_data_run else scn


def damped_wave(a0, domain=None, terms=(), amplitude=0.1, tau=1.0):
    """Damped wave scenario; ``terms`` are ``(kind, delay, coeffs)`` tuples of
    globally Lipschitz nodal maps (``affine`` or ``sine``).

    A nodal map with constant ``gamma`` acts in the energy space with
    constant ``gamma / sqrt(mu_1)``.
    """
    dom = Domain1D() if domain is None else domain
    op, layout, mu = build_damped_wave(dom, a0)
    built = []
    for kind, delay, coeffs in terms:
        if kind == "affine":
            t = affine_gate(delay, *coeffs)
        elif kind == "sine":
            t = sine_lipschitz(delay, *coeffs)
        else:
            raise ConfigurationError(f"damped wave terms must be affine or sine, got {kind!r}")
        built.append(with_lipschitz(t, t.lipschitz / math.sqrt(mu[0])))
    taus = [t.delay for t in built] or [tau]
    state = np.zeros(op.dim)
    state[0] = amplitude
    return Scenario("damped_wave", op, built, layout, HistoryBuffer.constant(state, max(taus)),
                    {"domain": dom, "a0": a0, "mu": mu})


def scalar(lam, terms, history_value=1.0, tau=None, general=False):
    """Scalar problem ``u' = -lam u + sum F_i`` (``general=True``: ``u' = lam u + ...``).

    With ``general`` the generator is the 1x1 dense matrix ``[[lam]]``, which
    allows ``lam = 0`` (no linear decay)."""
    op = GeneralOperator([[lam]]) if general else SpectralOperator([lam])
    taus = [t.delay for t in terms]
    span = max(taus) if taus else (tau or 1.0)
    hist = HistoryBuffer.constant([history_value], span)
    return Scenario("scalar", op, list(terms), NodalLayout.identity(1), hist)


# -- competition ---------------------------------------------------------------

@dataclass(frozen=True)
class CompetitionSpec:
    """Two-species system ``u_i' = d_i u_i'' + u_i (a_i + a_ii u_i + sum_j a'_ij u_j(t - tau_ij))``."""

    field1: Domain1D
    field2: Domain1D
    a1: object = -1.0
    a2: object = -1.0
    a11: object = 0.0
    a22: object = 0.0
    ap11: object = 0.0
    ap12: object = 0.0
    ap21: object = 0.0
    ap22: object = 0.0
    tau11: float = 1.0
    tau12: float = 1.0
    tau21: float = 1.0
    tau22: float = 1.0

    def __post_init__(self):
        if min(self.tau11, self.tau12, self.tau21, self.tau22) <= 0:
            raise ConfigurationError("all competition delays must be positive")
        if self.field1.length != self.field2.length:
            raise ConfigurationError("both species live on the same interval")

    @property
    def tau(self):
        return max(self.tau11, self.tau12, self.tau21, self.tau22)

    @property
    def case(self):
        return cert.competition_case(self.field1.boundary, self.field2.boundary)


def _unshifted_mu(dom):
    return None if dom.boundary == "neumann" else float(eigenvalues(dom)[0])


def competition(spec, amplitude=0.1, small_data_run=False, d=1):
    """Assemble the competition system with its case-dependent shifts.

    The terms follow the split: ``F1`` carries ``(a1 + eps1) u1 + a11 u1^2``
    together with the longer of the two delayed couplings of species 1,
    ``F2`` carries ``(a2 + eps2) u2 + a22 u2^2 + a'21 u2 v1``, ``F3`` is the
    other coupling of species 1 and ``F4 = a'22 u2 v2``.
    """
    case = spec.case
    L = spec.field1.length
    same_grid = (spec.field1.boundary == spec.field2.boundary and spec.field1.modes == spec.field2.modes
                 and spec.field1.robin == spec.field2.robin)
    x = native_nodes(spec.field1) if same_grid else gauss_nodes(L, spec.field1.modes)
    if not same_grid and spec.field1.modes != spec.field2.modes:
        raise ConfigurationError("fields on different boundary grids need equal mode counts")
    a1, a2 = _nodal(spec.a1, x), _nodal(spec.a2, x)
    mu1, mu2 = _unshifted_mu(spec.field1), _unshifted_mu(spec.field2)
    report = cert.admissibility_competition(case, a1, a2, mu1, mu2, d=d)
    eps1 = report.constants.get("eps1", 0.0)
    eps2 = report.constants.get("eps2", 0.0)
    doms = []
    for dom, e in ((spec.field1, eps1), (spec.field2, eps2)):
        if dom.boundary == "neumann":
            if not e > 0:
                e = dom.eps
            if not e > 0:
                raise ConfigurationError(
                    "Neumann species needs a positive shift; the case conditions are not met")
            dom = dom.with_eps(e)
        doms.append(dom)
    eps1 = doms[0].eps if doms[0].boundary == "neumann" else 0.0
    eps2 = doms[1].eps if doms[1].boundary == "neumann" else 0.0
    ops, trs = zip(*(build_diffusion_operator(dm, None if same_grid else x) for dm in doms))
    op = SpectralOperator.stack(ops)
    n1, n2 = doms[0].modes, doms[1].modes
    n_nodes = x.size
    inputs = np.zeros((2, n_nodes, n1 + n2))
    outputs = np.zeros((2, n1 + n2, n_nodes))
    inputs[0][:, :n1] = trs[0].phi
    inputs[1][:, n1:] = trs[1].phi
    outputs[0][:n1, :] = trs[0].proj
    outputs[1][n1:, :] = trs[1].proj
    layout = NodalLayout(inputs, outputs, [slice(0, n1), slice(n1, n1 + n2)], nodes=x)

    k = {n: _constant(_nodal(getattr(spec, n), x)) for n in ("a11", "a22", "ap11", "ap12", "ap21", "ap22")}
    if spec.tau11 >= spec.tau12:
        first = (spec.tau11, k["ap11"], 0)
        third = (spec.tau12, k["ap12"], 1)
    else:
        first = (spec.tau12, k["ap12"], 1)
        third = (spec.tau11, k["ap11"], 0)
    terms = [
        competition_coupling(first[0], _constant(a1 + eps1), k["a11"], first[1], target_field=0,
                             current_field=0, delayed_field=first[2]),
        competition_coupling(spec.tau21, _constant(a2 + eps2), k["a22"], k["ap21"], target_field=1,
                             current_field=1, delayed_field=0),
        competition_coupling(third[0], 0.0, 0.0, third[1], target_field=0, current_field=0,
                             delayed_field=third[2]),
        competition_coupling(spec.tau22, 0.0, 0.0, k["ap22"], target_field=1, current_field=1,
                             delayed_field=1),
    ]
    C = max(sup_embedding_constant(dm) for dm in doms)
    sq = math.sqrt(op.lambda1)
    c1 = max(float(np.max(np.abs(a1 + eps1))), float(np.max(np.abs(a2 + eps2))))
    quad = float(np.max(np.abs(k["a11"]))) + float(np.max(np.abs(k["a22"])))
    h3 = {}
    if quad:
        h3[(1, 0, 0, 0, 0)] = C * quad / sq
    for i, t in enumerate(terms):
        cpl = float(np.max(np.abs(t.coeffs["xy"])))
        if cpl:
            exps = [0] * 5
            exps[i + 1] = 1
            h3[tuple(exps)] = C * cpl / sq
    bounds = SmallDataBounds(c1, h3, n_vars=5)
    hist_state = np.zeros(op.dim)
    hist_state[0] = amplitude
    hist_state[n1] = amplitude
    scn = Scenario("competition", op, terms, layout, HistoryBuffer.constant(hist_state, spec.tau),
                   {"spec": spec, "case": case, "eps1": eps1, "eps2": eps2, "mu1": mu1, "mu2": mu2,
                    "admissibility": report, "sup_embedding": C, "domains": doms,
                    "transforms": trs},
                   bounds, [t.reaction for t in terms])
    if small_data_run:
        c = cert.small_data_certificate(op.lambda1, bounds)
        if not c.feasible:
            raise ConfigurationError("small-data history requested but C1 >= lambda1")
        # split the V-norm budget equally between the two first modes
        target = 0.9 * c.data_radius / math.sqrt(2.0)
        st = np.zeros(op.dim)
        st[0] = target / math.sqrt(op.eigenvalues[0])
        st[n1] = target / math.sqrt(op.eigenvalues[n1])
        scn.history = HistoryBuffer.constant(st, spec.tau)
        scn.meta["small_data_certificate"] = c
    return scn


def v_norm_of_history(scn, n=50):
    """Largest V-norm of the stored history on ``[-tau, 0]``."""
    ts = np.linspace(-scn.tau_max, 0.0, n + 1)
    return max(norms(scn.op, scn.history.sample(t)).v_norm for t in ts)
