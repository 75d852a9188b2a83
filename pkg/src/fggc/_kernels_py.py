"""Pure numpy versions of the compiled kernels.

Signatures and results match ``fggc._kernels``; the ``threads`` argument is
accepted and ignored.  Accumulation runs over packets in input order, so
outputs agree with the compiled path to rounding.
"""

from __future__ import annotations

import numpy as np

FREE, HARMONIC, COSINE, GAUSSIAN_WELL = 0, 1, 2, 3


def _potential(kind: int, par: np.ndarray, x: np.ndarray):
    """V, grad V and Hessian for a batch of points x of shape (M, d)."""
    M, d = x.shape
    grad = np.zeros((M, d))
    hess = np.zeros((M, d, d))
    diag = np.arange(d)
    if kind == HARMONIC:
        w2 = par[0] ** 2
        V = 0.5 * w2 * np.sum(x * x, axis=1)
        grad = w2 * x
        hess[:, diag, diag] = w2
    elif kind == COSINE:
        amp, k = par[0], par[1]
        V = amp * np.sum(1.0 - np.cos(k * x), axis=1)
        grad = amp * k * np.sin(k * x)
        hess[:, diag, diag] = amp * k * k * np.cos(k * x)
    elif kind == GAUSSIAN_WELL:
        alpha = par[0]
        e = np.exp(alpha * np.sum(x * x, axis=1))
        V = 1.0 - e
        grad = -2.0 * alpha * x * e[:, None]
        hess = -2.0 * alpha * e[:, None, None] * (np.eye(d) + 2.0 * alpha * x[:, :, None] * x[:, None, :])
    else:
        V = np.zeros(M)
    return V, grad, hess


def _rhs(kind, par, q, p, X, Y, a):
    V, grad, hess = _potential(kind, par, q)
    dX = Y
    dY = -hess @ X
    Z = X + 1j * Y
    dZ = dX + 1j * dY
    tr = np.trace(np.linalg.solve(Z, dZ), axis1=1, axis2=2)
    return p, -grad, 0.5 * np.sum(p * p, axis=1) - V, dX, dY, 0.5 * a * tr


def rk4_flow(q0, p0, kind, params, dt, nsteps, threads=1):
    q = np.array(q0, dtype=np.float64, copy=True)
    p = np.array(p0, dtype=np.float64, copy=True)
    M, d = q.shape
    par = np.asarray(params, dtype=np.float64)
    S = np.zeros(M)
    X = np.tile(np.eye(d, dtype=np.complex128), (M, 1, 1))
    Y = -1j * X
    a = np.ones(M, dtype=np.complex128)
    min_det = np.full(M, 2.0**d)
    alive = np.ones(M, dtype=bool)
    if M == 0:
        return q, p, S, X, Y, a, min_det
    for _ in range(int(nsteps)):
        if not alive.any():
            break
        idx = np.flatnonzero(alive)
        state = [q[idx], p[idx], S[idx], X[idx], Y[idx], a[idx]]
        k1 = _rhs(kind, par, state[0], state[1], state[3], state[4], state[5])
        ks = [k1]
        for c in (0.5, 0.5, 1.0):
            prev = ks[-1]
            t = [s + c * dt * k for s, k in zip(state, prev)]
            ks.append(_rhs(kind, par, t[0], t[1], t[3], t[4], t[5]))
        new = [
            s + dt / 6.0 * (k1_ + 2.0 * k2_ + 2.0 * k3_ + k4_)
            for s, k1_, k2_, k3_, k4_ in zip(state, *ks)
        ]
        q[idx], p[idx], S[idx], X[idx], Y[idx], a[idx] = new
        adet = np.abs(np.linalg.det(X[idx] + 1j * Y[idx]))
        bad = ~(np.isfinite(adet) & np.isfinite(q[idx, 0]) & np.isfinite(p[idx, 0]))
        min_det[idx] = np.where(bad, -1.0, np.minimum(min_det[idx], adet))
        alive[idx[bad]] = False
    return q, p, S, X, Y, a, min_det


def _windows(qpos, lo, dx, shape, radius):
    first = np.ceil((qpos - radius - np.asarray(lo)) / dx).astype(np.int64)
    last = np.floor((qpos + radius - np.asarray(lo)) / dx).astype(np.int64)
    return np.maximum(first, 0), np.minimum(last, np.asarray(shape) - 1)


def _factors(j, first, last, lo, dx, center, eps, momentum=None):
    """Per-axis 1D window factors and index ranges for packet j."""
    out = []
    for ax in range(len(lo)):
        idx = np.arange(first[j, ax], last[j, ax] + 1)
        x = lo[ax] + idx * dx - center[j, ax]
        f = np.exp(-x * x / (2 * eps))
        if momentum is not None:
            f = f * np.exp(1j * momentum[j, ax] * x / eps)
        out.append((idx, f))
    return out


def _outer(factors):
    arr = factors[0]
    for f in factors[1:]:
        arr = np.multiply.outer(arr, f)
    return arr


def gauss_sum(field, shape, lo, dx, Q, P, coef, eps, radius, threads=1):
    Q = np.asarray(Q, dtype=float)
    P = np.asarray(P, dtype=float)
    view = field.reshape(shape)
    lo = [float(v) for v in lo]
    first, last = _windows(Q, lo, dx, shape, radius)
    for j in range(Q.shape[0]):
        if np.any(first[j] > last[j]):
            continue
        fac = _factors(j, first, last, lo, dx, Q, eps, P)
        sl = tuple(slice(idx[0], idx[-1] + 1) for idx, _ in fac)
        view[sl] += coef[j] * _outer([f for _, f in fac])


def tile_blocks(field, shape, lo, dx, qpos, blocks, nfold, eps, radius, scale, threads=1):
    qpos = np.asarray(qpos, dtype=float)
    d = qpos.shape[1]
    view = field.reshape(shape)
    lo = [float(v) for v in lo]
    first, last = _windows(qpos, lo, dx, shape, radius)
    for j in range(qpos.shape[0]):
        if np.any(first[j] > last[j]):
            continue
        fac = _factors(j, first, last, lo, dx, qpos, eps)
        block = blocks[j].reshape((nfold,) * d)
        wrapped = block[np.ix_(*[idx % nfold for idx, _ in fac])]
        sl = tuple(slice(idx[0], idx[-1] + 1) for idx, _ in fac)
        view[sl] += scale * _outer([f for _, f in fac]) * wrapped


def fold_blocks(u, shape, lo, dx, qpos, nfold, eps, radius, threads=1):
    qpos = np.asarray(qpos, dtype=float)
    nq, d = qpos.shape
    view = np.asarray(u).reshape(shape)
    lo = [float(v) for v in lo]
    out = np.zeros((nq, nfold**d), dtype=np.complex128)
    first, last = _windows(qpos, lo, dx, shape, radius)
    for j in range(nq):
        if np.any(first[j] > last[j]):
            continue
        fac = _factors(j, first, last, lo, dx, qpos, eps)
        sl = tuple(slice(idx[0], idx[-1] + 1) for idx, _ in fac)
        vals = view[sl] * _outer([f for _, f in fac])
        flat = np.ravel_multi_index(np.ix_(*[idx % nfold for idx, _ in fac]), (nfold,) * d)
        out[j] = np.bincount(
            np.broadcast_to(flat, vals.shape).ravel(), weights=vals.real.ravel(), minlength=nfold**d
        ) + 1j * np.bincount(
            np.broadcast_to(flat, vals.shape).ravel(), weights=vals.imag.ravel(), minlength=nfold**d
        )
    return out
