"""Dense matrix exponential and the phi-functions used by exponential integrators.

``expm`` is the scaling-and-squaring algorithm with diagonal Padé approximants
(orders 3, 5, 7, 9 and 13, selected from the 1-norm), following Higham's 2005
scheme without the later backward-error refinements.
"""
import math

import numpy as np
from scipy.linalg import solve

_PADE_COEFFS = {
    3: (120.0, 60.0, 12.0, 1.0),
    5: (30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0),
    7: (17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0),
    9: (17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
        2162160.0, 110880.0, 3960.0, 90.0, 1.0),
    13: (64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
         1187353796428800.0, 129060195264000.0, 10559470521600.0,
         670442572800.0, 33522128640.0, 1323241920.0, 40840800.0, 960960.0,
         16380.0, 182.0, 1.0),
}

# largest 1-norm for which the order-m approximant is accurate to unit roundoff
_THETA = {3: 1.495585217958292e-2, 5: 2.539398330063230e-1,
          7: 9.504178996162932e-1, 9: 2.097847961257068e0,
          13: 5.371920351148152e0}


def _pade(A, m):
    b = _PADE_COEFFS[m]
    ident = np.eye(A.shape[0])
    A2 = A @ A
    if m == 13:
        A4 = A2 @ A2
        A6 = A4 @ A2
        U = A @ (A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2)
                 + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * ident)
        V = (A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2)
             + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * ident)
    else:
        powers = [ident, A2]
        for _ in range(2, m // 2 + 1):
            powers.append(powers[-1] @ A2)
        U = A @ sum(b[2 * j + 1] * powers[j] for j in range(m // 2 + 1))
        V = sum(b[2 * j] * powers[j] for j in range(m // 2 + 1))
    return solve(V - U, V + U)


def expm(A):
    """Matrix exponential of a dense square matrix.

    Parameters
    ----------
    A : array_like, shape (n, n)

    Returns
    -------
    ndarray, shape (n, n)
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expm needs a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("expm input has non-finite entries")
    if A.shape[0] == 0:
        return A.copy()
    norm1 = np.linalg.norm(A, 1)
    for m in (3, 5, 7, 9):
        if norm1 <= _THETA[m]:
            return _pade(A, m)
    s = max(0, math.ceil(math.log2(norm1 / _THETA[13])))
    X = _pade(A / 2.0 ** s, 13)
    for _ in range(s):
        X = X @ X
    return X


def phi1(z):
    """Elementwise ``(exp(z) - 1) / z`` with the removable singularity filled in."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 1e-5
    safe = np.where(small, 1.0, z)
    out = np.expm1(safe) / safe
    zs = z[small]
    out[small] = 1.0 + zs / 2.0 + zs * zs / 6.0
    return out


def phi2(z):
    """Elementwise ``(exp(z) - 1 - z) / z**2``."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 0.1
    safe = np.where(small, 1.0, z)
    out = (np.expm1(safe) - safe) / (safe * safe)
    zs = z[small]
    # sum_k z^k / (k+2)!, truncation error below 1e-16 for |z| < 0.1
    acc = np.zeros_like(zs)
    term = np.full_like(zs, 0.5)
    for k in range(10):
        acc += term
        term = term * zs / (k + 3)
    out[small] = acc
    return out


def phi_matrices(A, h):
    """Return ``(exp(hA), h*phi1(hA), h*phi2(hA))`` for a dense matrix.

    Uses one exponential of the block-augmented matrix
    ``[[hA, I, 0], [0, 0, I], [0, 0, 0]]``.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    big = np.zeros((3 * n, 3 * n))
    big[:n, :n] = h * A
    big[:n, n:2 * n] = np.eye(n)
    big[n:2 * n, 2 * n:] = np.eye(n)
    E = expm(big)
    return E[:n, :n], h * E[:n, n:2 * n], h * E[:n, 2 * n:]
