"""Compiled RK4 kernel for the validation oracle.

The right-hand side is ``A u + sum_f outputs[f] @ src_f`` with nodal sources
built from coefficient tables over the monomial basis shared with
:mod:`delaystab.nonlinearity`. History lives in a ring buffer on the uniform
oracle grid and is read by linear interpolation.
"""
import math

import numba
import numpy as np


def _rhs(A, inputs, outputs, tables, route, ring, offset, p_now, lags, u, out, src):
    n_fields, n_nodes, dim = inputs.shape
    ring_len = ring.shape[0]
    for i in range(dim):
        acc = 0.0
        for j in range(dim):
            acc += A[i, j] * u[j]
        out[i] = acc
    if tables.shape[0] == 0:
        return
    src[:, :] = 0.0
    for k in range(tables.shape[0]):
        tgt, fc, fd = route[k, 0], route[k, 1], route[k, 2]
        # position of t - tau_k on the stored grid, in steps
        q = p_now - lags[k] + offset
        jq = int(math.floor(q))
        frac = q - jq
        if frac < 1e-12:
            frac = 0.0
        a = jq % ring_len
        b = (jq + 1) % ring_len
        t = tables[k]
        for m in range(n_nodes):
            x = 0.0
            y = 0.0
            for j in range(dim):
                x += inputs[fc, m, j] * u[j]
                if frac == 0.0:
                    vd = ring[a, j]
                else:
                    vd = (1.0 - frac) * ring[a, j] + frac * ring[b, j]
                y += inputs[fd, m, j] * vd
            val = (t[0, m] * x + t[1, m] * y + t[2, m] * x * x + t[3, m] * x * y
                   + t[4, m] * x * y * y + t[5, m] * x * y * y * y + t[6, m] * x * x * y
                   + t[7, m] * math.sin(x) + t[8, m] * math.sin(y))
            src[tgt, m] += val
    for f in range(n_fields):
        for i in range(dim):
            acc = 0.0
            for m in range(n_nodes):
                acc += outputs[f, i, m] * src[f, m]
            out[i] += acc


def _make_runner(rhs):
    def run(A, inputs, outputs, tables, route, lags, pre, n_steps, stride, weights, b_max, h):
        n_fields, n_nodes, dim = inputs.shape
        n_hist = pre.shape[0]
        ring_len = n_hist + 2
        offset = n_hist - 1
        ring = np.zeros((ring_len, dim))
        for j in range(n_hist):
            ring[j % ring_len, :] = pre[j]
        rec = np.zeros((n_steps // stride + 1, dim))
        u = pre[n_hist - 1].copy()
        rec[0, :] = u
        src = np.zeros((n_fields, n_nodes))
        k1 = np.zeros(dim)
        k2 = np.zeros(dim)
        k3 = np.zeros(dim)
        k4 = np.zeros(dim)
        tmp = np.zeros(dim)
        for n in range(n_steps):
            rhs(A, inputs, outputs, tables, route, ring, offset, n * 1.0, lags, u, k1, src)
            for i in range(dim):
                tmp[i] = u[i] + 0.5 * h * k1[i]
            rhs(A, inputs, outputs, tables, route, ring, offset, n + 0.5, lags, tmp, k2, src)
            for i in range(dim):
                tmp[i] = u[i] + 0.5 * h * k2[i]
            rhs(A, inputs, outputs, tables, route, ring, offset, n + 0.5, lags, tmp, k3, src)
            for i in range(dim):
                tmp[i] = u[i] + h * k3[i]
            rhs(A, inputs, outputs, tables, route, ring, offset, n + 1.0, lags, tmp, k4, src)
            mon = 0.0
            for i in range(dim):
                u[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
                w = weights[i] if weights.shape[0] > 0 else 1.0
                mon += w * u[i] * u[i]
            if not mon <= b_max * b_max:
                return rec[: n // stride + 1].copy(), 1, n + 1
            slot = (n + 1 + offset) % ring_len
            for i in range(dim):
                ring[slot, i] = u[i]
            if (n + 1) % stride == 0:
                rec[(n + 1) // stride, :] = u
        return rec, 0, n_steps
    return run


_py_run = _make_runner(_rhs)
_jit_run = None


def _compiled():
    global _jit_run
    if _jit_run is None:
        rhs = numba.njit(_rhs)
        _jit_run = numba.njit(_make_runner(rhs))
    return _jit_run


def rk4_tables(A, inputs, outputs, tables, route, lags, pre, n_steps, stride, weights, b_max,
               h, use_numba=True):
    """Run the oracle; returns ``(recorded states, status, steps done)``.

    ``lags`` are the delays in units of ``h``; ``pre`` holds the history on
    the uniform grid ending at ``t = 0``. ``status`` is 1 after a blow-up.
    """
    args = (np.ascontiguousarray(A, dtype=float), np.ascontiguousarray(inputs, dtype=float),
            np.ascontiguousarray(outputs, dtype=float), np.ascontiguousarray(tables, dtype=float),
            np.ascontiguousarray(route, dtype=np.int64), np.ascontiguousarray(lags, dtype=float),
            np.ascontiguousarray(pre, dtype=float), int(n_steps), int(stride),
            np.ascontiguousarray(weights, dtype=float), float(b_max), float(h))
    run = _compiled() if use_numba else _py_run
    rec, status, n_done = run(*args)
    return rec, int(status), int(n_done)
