"""Linear generators, their exact propagators, and state norms.

Two representations are supported:

* :class:`SpectralOperator` -- a negative self-adjoint generator stored through
  the eigenvalues of ``-A`` in an orthonormal eigenbasis. States are modal
  coefficient vectors, so propagation is a diagonal scaling and the
  fractional norms ``||(-A)^beta u||`` are weighted sums.
* :class:`GeneralOperator` -- any dense real generator (used for the damped
  wave in energy coordinates). Propagation goes through :func:`expm`.

States are plain 1-D ``numpy`` arrays of length ``op.dim``.
"""
from collections import namedtuple
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, NotExponentiallyStable
from .linalg import expm, phi1, phi2, phi_matrices

Norms = namedtuple("Norms", "h_norm v_norm beta_norm")


@dataclass(frozen=True)
class SemigroupEnvelope:
    """Constants of an exponential bound ``||exp(tA)|| <= M exp(-omega t)``."""

    M: float
    omega: float
    capped: bool = False

    def __post_init__(self):
        if not (self.M >= 1.0 and self.omega > 0.0):
            raise ContractError(f"invalid envelope M={self.M}, omega={self.omega}")

    def __call__(self, t):
        return self.M * np.exp(-self.omega * np.asarray(t, dtype=float))


def _as_state(u, dim):
    u = np.asarray(u, dtype=float)
    if u.shape != (dim,):
        raise ContractError(f"state has shape {u.shape}, operator dimension is {dim}")
    return u


def _check_time(t):
    if not t >= 0.0:
        raise ContractError(f"propagation time must be non-negative, got {t}")


@dataclass(frozen=True, eq=False)
class SpectralOperator:
    """Diagonal generator ``A = -diag(eigenvalues)``.

    Parameters
    ----------
    eigenvalues : array_like
        Eigenvalues of ``-A`` in state order. Each block listed in
        ``block_sizes`` (one block per field of a system) must be
        non-decreasing; all values must be strictly positive.
    shift : float
        The constant added to the unshifted operator (Neumann ``epsilon``).
    block_sizes : tuple of int, optional
        Field sizes for multi-field systems; defaults to one block.
    """

    eigenvalues: np.ndarray
    shift: float = 0.0
    block_sizes: tuple = None

    def __post_init__(self):
        lam = np.array(self.eigenvalues, dtype=float).ravel()
        if lam.size == 0:
            raise ContractError("operator needs at least one eigenvalue")
        if not np.all(np.isfinite(lam)) or np.any(lam <= 0.0):
            raise ContractError("eigenvalues of -A must be finite and strictly positive")
        sizes = (lam.size,) if self.block_sizes is None else tuple(int(s) for s in self.block_sizes)
        if sum(sizes) != lam.size or any(s < 1 for s in sizes):
            raise ContractError(f"block sizes {sizes} do not partition {lam.size} eigenvalues")
        start = 0
        for s in sizes:
            if np.any(np.diff(lam[start:start + s]) < 0.0):
                raise ContractError("eigenvalues must be non-decreasing within each field")
            start += s
        if self.shift < 0.0:
            raise ContractError("shift must be non-negative")
        lam.setflags(write=False)
        object.__setattr__(self, "eigenvalues", lam)
        object.__setattr__(self, "block_sizes", sizes)

    @property
    def dim(self):
        return self.eigenvalues.size

    @property
    def lambda1(self):
        """Smallest eigenvalue of ``-A`` (the Poincare constant)."""
        return float(self.eigenvalues.min())

    @property
    def has_v_norm(self):
        return True

    @classmethod
    def stack(cls, ops):
        """Block-diagonal operator for a system whose fields are ``ops``."""
        lam = np.concatenate([op.eigenvalues for op in ops])
        sizes = sum((op.block_sizes for op in ops), ())
        return cls(lam, shift=max(op.shift for op in ops), block_sizes=sizes)

    def matrix(self):
        return np.diag(-self.eigenvalues)

    def generator(self, u):
        return -self.eigenvalues * u

    def propagate(self, u, t):
        return np.exp(-self.eigenvalues * t) * u

    def step_factors(self, h):
        z = -h * self.eigenvalues
        return np.exp(z), h * phi1(z), h * phi2(z)

    def envelope(self):
        """Exact semigroup envelope: ``M = 1``, ``omega = lambda1``."""
        return SemigroupEnvelope(1.0, self.lambda1)


@dataclass(frozen=True, eq=False)
class GeneralOperator:
    """Dense generator. ``block_size`` marks a block-diagonal structure."""

    matrix: np.ndarray
    block_size: int = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        mat = np.array(self.matrix, dtype=float)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or mat.shape[0] == 0:
            raise ContractError(f"generator must be a non-empty square matrix, got {mat.shape}")
        if not np.all(np.isfinite(mat)):
            raise ContractError("generator has non-finite entries")
        if self.block_size is not None and mat.shape[0] % self.block_size:
            raise ContractError("block size does not divide the dimension")
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)

    @property
    def dim(self):
        return self.matrix.shape[0]

    @property
    def has_v_norm(self):
        return False

    def blocks(self):
        b = self.block_size or self.dim
        return [self.matrix[i:i + b, i:i + b] for i in range(0, self.dim, b)]

    def generator(self, u):
        return self.matrix @ u

    def exp(self, t):
        key = ("exp", float(t))
        if key not in self._cache:
            if self.block_size is None:
                self._cache[key] = expm(t * self.matrix)
            else:
                out = np.zeros_like(self.matrix)
                b = self.block_size
                for i, blk in zip(range(0, self.dim, b), self.blocks()):
                    out[i:i + b, i:i + b] = expm(t * blk)
                self._cache[key] = out
        return self._cache[key]

    def propagate(self, u, t):
        return self.exp(t) @ u

    def step_factors(self, h):
        key = ("phi", float(h))
        if key not in self._cache:
            self._cache[key] = phi_matrices(self.matrix, h)
        return self._cache[key]

    def spectral_abscissa(self):
        return float(np.max(np.linalg.eigvals(self.matrix).real))

    def propagator_norms(self, t_grid):
        """Spectral norms ``||exp(tA)||_2`` on ``t_grid`` (blockwise when possible)."""
        out = np.empty(len(t_grid))
        for k, t in enumerate(t_grid):
            if self.block_size is None:
                out[k] = np.linalg.norm(expm(t * self.matrix), 2)
            else:
                out[k] = max(np.linalg.norm(expm(t * blk), 2) for blk in self.blocks())
        return out


def apply_propagator(op, u, t):
    """Return ``exp(tA) u``."""
    _check_time(t)
    return op.propagate(_as_state(u, op.dim), t)


def beta_norm(op, u, beta):
    """Fractional norm ``||(-A)^beta u||`` for ``0 <= beta <= 1/2``."""
    if not 0.0 <= beta <= 0.5:
        raise ContractError(f"beta must lie in [0, 1/2], got {beta}")
    if not isinstance(op, SpectralOperator):
        raise ContractError("fractional norms need a SpectralOperator")
    u = _as_state(u, op.dim)
    return float(np.sqrt(np.sum(op.eigenvalues ** (2.0 * beta) * u * u)))


def norms(op, u, beta=0.5):
    """H-norm, V-norm and the beta-norm of a state.

    For a :class:`GeneralOperator` only the H-norm is defined; the other two
    entries are ``nan``.
    """
    u = _as_state(u, op.dim)
    h = float(np.sqrt(u @ u))
    if not isinstance(op, SpectralOperator):
        return Norms(h, float("nan"), float("nan"))
    v = float(np.sqrt(np.sum(op.eigenvalues * u * u)))
    return Norms(h, v, beta_norm(op, u, beta))


ENVELOPE_MARGIN = 1e-12


def default_envelope_grid(op, n=200):
    s = op.spectral_abscissa()
    if s >= 0.0:
        raise NotExponentiallyStable(
            f"not exponentially stable on horizon: spectral abscissa {s:.6g} >= 0")
    return np.geomspace(1e-3, 50.0 / abs(s), n)


def estimate_envelope(op, t_grid=None, m_cap=1e6):
    """Fit ``(M, omega)`` with ``||exp(tA)|| <= M exp(-omega t)`` on a time grid.

    Candidate rates are swept downward from ``|spectral abscissa|`` in 1 %
    steps; for each the smallest valid ``M`` is the maximum of
    ``||exp(tA)|| exp(omega t)`` over the grid, and the first rate whose
    ``M`` does not exceed ``m_cap`` is returned.

    Raises
    ------
    NotExponentiallyStable
        If the abscissa is non-negative or the sampled norms do not decay.
    """
    if isinstance(op, SpectralOperator):
        return op.envelope()
    s = op.spectral_abscissa()
    if s >= 0.0:
        raise NotExponentiallyStable(
            f"not exponentially stable on horizon: spectral abscissa {s:.6g} >= 0")
    grid = default_envelope_grid(op) if t_grid is None else np.asarray(t_grid, dtype=float)
    if np.any(grid <= 0.0):
        raise ContractError("envelope grid must be positive")
    sampled = op.propagator_norms(grid)
    if not sampled[-1] < sampled[0] or not np.all(np.isfinite(sampled)):
        raise NotExponentiallyStable("not exponentially stable on horizon: sampled norms do not decay")
    for j in range(100):
        omega = abs(s) * (1.0 - 0.01 * j)
        # relative margin so the bound survives re-evaluation of the norms
        M = max(1.0, float(np.max(sampled * np.exp(omega * grid))) * (1.0 + ENVELOPE_MARGIN))
        if M <= m_cap:
            # capped: the M limit forced a rate below the spectral abscissa
            return SemigroupEnvelope(M, omega, capped=j > 0)
    raise NotExponentiallyStable(
        f"no decay rate with M <= {m_cap:g} found on the sampled horizon")
