# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops: packet RK4 flow, Gaussian sums and windowed folds.

Every routine works on problems padded to three axes (missing axes have
length 1 and a unit envelope).  Output-writing routines split axis 0 into
one slab per thread; each slab visits the packets in input order, so the
result is bitwise independent of the thread count.
"""

import numpy as np
cimport numpy as cnp
from cython.parallel cimport prange, parallel, threadid
from libc.math cimport exp, cos, sin, sqrt, floor, ceil, fabs, isfinite
from libc.stdlib cimport malloc, free

cnp.import_array()

ctypedef double complex cplx

cdef enum:
    MAXD = 3

cdef enum:
    FREE = 0
    HARMONIC = 1
    COSINE = 2
    GAUSSIAN_WELL = 3


cdef inline void potential_eval(int kind, const double* par, int d, const double* x,
                                double* V, double* grad, double* hess) noexcept nogil:
    cdef int i, j
    cdef double r2 = 0.0, e, w2, amp, k
    for i in range(d):
        grad[i] = 0.0
        for j in range(d):
            hess[i * d + j] = 0.0
    V[0] = 0.0
    if kind == HARMONIC:
        w2 = par[0] * par[0]
        for i in range(d):
            V[0] += 0.5 * w2 * x[i] * x[i]
            grad[i] = w2 * x[i]
            hess[i * d + i] = w2
    elif kind == COSINE:
        amp = par[0]
        k = par[1]
        for i in range(d):
            V[0] += amp * (1.0 - cos(k * x[i]))
            grad[i] = amp * k * sin(k * x[i])
            hess[i * d + i] = amp * k * k * cos(k * x[i])
    elif kind == GAUSSIAN_WELL:
        amp = par[0]
        for i in range(d):
            r2 += x[i] * x[i]
        e = exp(amp * r2)
        V[0] = 1.0 - e
        for i in range(d):
            grad[i] = -2.0 * amp * x[i] * e
            for j in range(d):
                hess[i * d + j] = -2.0 * amp * e * ((1.0 if i == j else 0.0) + 2.0 * amp * x[i] * x[j])


cdef inline cplx det_c(const cplx* Z, int d) noexcept nogil:
    if d == 1:
        return Z[0]
    if d == 2:
        return Z[0] * Z[3] - Z[1] * Z[2]
    return (Z[0] * (Z[4] * Z[8] - Z[5] * Z[7])
            - Z[1] * (Z[3] * Z[8] - Z[5] * Z[6])
            + Z[2] * (Z[3] * Z[7] - Z[4] * Z[6]))


cdef inline cplx trace_inv_prod(const cplx* Z, const cplx* W, int d) noexcept nogil:
    """tr(Z^{-1} W) through the adjugate of Z."""
    cdef cplx det, t
    cdef cplx adj[9]
    if d == 1:
        return W[0] / Z[0]
    if d == 2:
        det = Z[0] * Z[3] - Z[1] * Z[2]
        t = Z[3] * W[0] - Z[1] * W[2] - Z[2] * W[1] + Z[0] * W[3]
        return t / det
    adj[0] = Z[4] * Z[8] - Z[5] * Z[7]
    adj[1] = Z[2] * Z[7] - Z[1] * Z[8]
    adj[2] = Z[1] * Z[5] - Z[2] * Z[4]
    adj[3] = Z[5] * Z[6] - Z[3] * Z[8]
    adj[4] = Z[0] * Z[8] - Z[2] * Z[6]
    adj[5] = Z[2] * Z[3] - Z[0] * Z[5]
    adj[6] = Z[3] * Z[7] - Z[4] * Z[6]
    adj[7] = Z[1] * Z[6] - Z[0] * Z[7]
    adj[8] = Z[0] * Z[4] - Z[1] * Z[3]
    det = Z[0] * adj[0] + Z[1] * adj[3] + Z[2] * adj[6]
    t = 0
    cdef int i, k
    for i in range(3):
        for k in range(3):
            t = t + adj[i * 3 + k] * W[k * 3 + i]
    return t / det


cdef inline void flow_rhs(int kind, const double* par, int d,
                          const double* q, const double* p, const cplx* X, const cplx* Y, cplx a,
                          double* dq, double* dp, double* dS, cplx* dX, cplx* dY, cplx* da) noexcept nogil:
    cdef double V
    cdef double grad[MAXD]
    cdef double hess[MAXD * MAXD]
    cdef cplx Z[MAXD * MAXD]
    cdef cplx dZ[MAXD * MAXD]
    cdef int i, j, k
    cdef double kin = 0.0
    cdef cplx acc
    potential_eval(kind, par, d, q, &V, grad, hess)
    for i in range(d):
        dq[i] = p[i]
        dp[i] = -grad[i]
        kin += p[i] * p[i]
    dS[0] = 0.5 * kin - V
    for i in range(d):
        for j in range(d):
            dX[i * d + j] = Y[i * d + j]
            acc = 0
            for k in range(d):
                acc = acc + hess[i * d + k] * X[k * d + j]
            dY[i * d + j] = -acc
            Z[i * d + j] = X[i * d + j] + 1j * Y[i * d + j]
            dZ[i * d + j] = dX[i * d + j] + 1j * dY[i * d + j]
    da[0] = 0.5 * a * trace_inv_prod(Z, dZ, d)


cdef inline void rk4_one(int kind, const double* par, int d, double dt, long nsteps,
                  double* q, double* p, double* S, cplx* X, cplx* Y, cplx* a,
                  double* min_det) noexcept nogil:
    cdef double k_q[4][MAXD]
    cdef double k_p[4][MAXD]
    cdef double k_S[4]
    cdef cplx k_X[4][MAXD * MAXD]
    cdef cplx k_Y[4][MAXD * MAXD]
    cdef cplx k_a[4]
    cdef double tq[MAXD]
    cdef double tp[MAXD]
    cdef cplx tX[MAXD * MAXD]
    cdef cplx tY[MAXD * MAXD]
    cdef cplx ta
    cdef cplx Z[MAXD * MAXD]
    cdef double c, m, adet
    cdef long step
    cdef int s, i, dd = d * d
    cdef double coef[3]
    coef[0] = 0.5
    coef[1] = 0.5
    coef[2] = 1.0
    m = min_det[0]
    for step in range(nsteps):
        flow_rhs(kind, par, d, q, p, X, Y, a[0],
                 k_q[0], k_p[0], &k_S[0], k_X[0], k_Y[0], &k_a[0])
        for s in range(1, 4):
            c = coef[s - 1] * dt
            for i in range(d):
                tq[i] = q[i] + c * k_q[s - 1][i]
                tp[i] = p[i] + c * k_p[s - 1][i]
            for i in range(dd):
                tX[i] = X[i] + c * k_X[s - 1][i]
                tY[i] = Y[i] + c * k_Y[s - 1][i]
            ta = a[0] + c * k_a[s - 1]
            flow_rhs(kind, par, d, tq, tp, tX, tY, ta,
                     k_q[s], k_p[s], &k_S[s], k_X[s], k_Y[s], &k_a[s])
        for i in range(d):
            q[i] += dt / 6.0 * (k_q[0][i] + 2.0 * k_q[1][i] + 2.0 * k_q[2][i] + k_q[3][i])
            p[i] += dt / 6.0 * (k_p[0][i] + 2.0 * k_p[1][i] + 2.0 * k_p[2][i] + k_p[3][i])
        S[0] += dt / 6.0 * (k_S[0] + 2.0 * k_S[1] + 2.0 * k_S[2] + k_S[3])
        for i in range(dd):
            X[i] = X[i] + dt / 6.0 * (k_X[0][i] + 2.0 * k_X[1][i] + 2.0 * k_X[2][i] + k_X[3][i])
            Y[i] = Y[i] + dt / 6.0 * (k_Y[0][i] + 2.0 * k_Y[1][i] + 2.0 * k_Y[2][i] + k_Y[3][i])
            Z[i] = X[i] + 1j * Y[i]
        a[0] = a[0] + dt / 6.0 * (k_a[0] + 2.0 * k_a[1] + 2.0 * k_a[2] + k_a[3])
        adet = abs(det_c(Z, d))
        if not (isfinite(adet) and isfinite(q[0]) and isfinite(p[0])):
            m = -1.0
            break
        if adet < m:
            m = adet
    min_det[0] = m


def rk4_flow(double[:, ::1] q0, double[:, ::1] p0, int kind, double[::1] params,
             double dt, long nsteps, int threads=1):
    """Advance every packet by ``nsteps`` RK4 steps of size ``dt``.

    Returns (Q, P, S, dQdz, dPdz, a, min_det) where ``a`` is the amplitude
    factor for unit initial amplitude and ``min_det`` the smallest |det Z|
    seen along the path (-1 marks a non-finite state).
    """
    cdef Py_ssize_t M = q0.shape[0], j
    cdef int d = q0.shape[1], i
    Q = np.array(q0, dtype=np.float64, copy=True)
    P = np.array(p0, dtype=np.float64, copy=True)
    S = np.zeros(M, dtype=np.float64)
    X = np.zeros((M, d, d), dtype=np.complex128)
    Y = np.zeros((M, d, d), dtype=np.complex128)
    A = np.ones(M, dtype=np.complex128)
    md = np.empty(M, dtype=np.float64)
    cdef double[:, ::1] Qv = Q
    cdef double[:, ::1] Pv = P
    cdef double[::1] Sv = S
    cdef cplx[:, :, ::1] Xv = X
    cdef cplx[:, :, ::1] Yv = Y
    cdef cplx[::1] Av = A
    cdef double[::1] mdv = md
    for j in range(M):
        for i in range(d):
            Xv[j, i, i] = 1.0
            Yv[j, i, i] = -1j
        mdv[j] = 2.0 ** d
    cdef const double* par = &params[0]
    if M == 0 or nsteps == 0:
        return Q, P, S, X, Y, A, md
    for j in prange(M, nogil=True, num_threads=max(threads, 1), schedule="static"):
        # literal dimensions let the compiler unroll the small matrix loops
        if d == 1:
            rk4_one(kind, par, 1, dt, nsteps, &Qv[j, 0], &Pv[j, 0], &Sv[j],
                    &Xv[j, 0, 0], &Yv[j, 0, 0], &Av[j], &mdv[j])
        elif d == 2:
            rk4_one(kind, par, 2, dt, nsteps, &Qv[j, 0], &Pv[j, 0], &Sv[j],
                    &Xv[j, 0, 0], &Yv[j, 0, 0], &Av[j], &mdv[j])
        else:
            rk4_one(kind, par, 3, dt, nsteps, &Qv[j, 0], &Pv[j, 0], &Sv[j],
                    &Xv[j, 0, 0], &Yv[j, 0, 0], &Av[j], &mdv[j])
    return Q, P, S, X, Y, A, md


cdef inline void slab_bounds(Py_ssize_t n, int nslab, int s, Py_ssize_t* lo, Py_ssize_t* hi) noexcept nogil:
    lo[0] = (n * s) // nslab
    hi[0] = (n * (s + 1)) // nslab


cdef inline void axis_window(double c, double lo, double dx, Py_ssize_t n, double radius,
                             Py_ssize_t* first, Py_ssize_t* last) noexcept nogil:
    cdef Py_ssize_t f = <Py_ssize_t> ceil((c - radius - lo) / dx)
    cdef Py_ssize_t l = <Py_ssize_t> floor((c + radius - lo) / dx)
    if f < 0:
        f = 0
    if l > n - 1:
        l = n - 1
    first[0] = f
    last[0] = l


def _pad3(values, fill):
    return list(values) + [fill] * (3 - len(values))


def gauss_sum(cplx[::1] field, shape, lo, double dx, double[:, ::1] Q, double[:, ::1] P,
              cplx[::1] coef, double eps, double radius, int threads=1):
    """field += sum_j coef_j * exp(i P_j.(x-Q_j)/eps - |x-Q_j|^2/(2 eps)), windowed."""
    cdef int d = Q.shape[1]
    cdef Py_ssize_t M = Q.shape[0]
    n = _pad3(shape, 1)
    lo3 = _pad3(lo, 0.0)
    cdef Py_ssize_t n0 = n[0], n1 = n[1], n2 = n[2]
    cdef double l0 = lo3[0], l1 = lo3[1], l2 = lo3[2]
    cdef int nslab = max(1, min(threads, <int> n0))
    cdef int s
    cdef Py_ssize_t wmax = <Py_ssize_t> (2 * radius / dx) + 3
    cdef cplx* f0
    cdef cplx* f1
    cdef cplx* f2
    cdef Py_ssize_t j, a0, b0, a1, b1, a2, b2, i0, i1, i2, s0, s1, base
    cdef double x, t, inv2e = 0.5 / eps, inve = 1.0 / eps
    cdef cplx c0, c01
    if M == 0:
        return
    with nogil, parallel(num_threads=nslab):
        f0 = <cplx*> malloc(wmax * sizeof(cplx))
        f1 = <cplx*> malloc(wmax * sizeof(cplx))
        f2 = <cplx*> malloc(wmax * sizeof(cplx))
        for s in prange(nslab, schedule="static"):
            slab_bounds(n0, nslab, s, &s0, &s1)
            for j in range(M):
                axis_window(Q[j, 0], l0, dx, n0, radius, &a0, &b0)
                if a0 < s0:
                    a0 = s0
                if b0 > s1 - 1:
                    b0 = s1 - 1
                if a0 > b0:
                    continue
                if d > 1:
                    axis_window(Q[j, 1], l1, dx, n1, radius, &a1, &b1)
                    if a1 > b1:
                        continue
                else:
                    a1 = 0
                    b1 = 0
                if d > 2:
                    axis_window(Q[j, 2], l2, dx, n2, radius, &a2, &b2)
                    if a2 > b2:
                        continue
                else:
                    a2 = 0
                    b2 = 0
                for i0 in range(a0, b0 + 1):
                    x = l0 + i0 * dx - Q[j, 0]
                    t = P[j, 0] * x * inve
                    f0[i0 - a0] = exp(-x * x * inv2e) * (cos(t) + 1j * sin(t))
                for i1 in range(a1, b1 + 1):
                    if d > 1:
                        x = l1 + i1 * dx - Q[j, 1]
                        t = P[j, 1] * x * inve
                        f1[i1 - a1] = exp(-x * x * inv2e) * (cos(t) + 1j * sin(t))
                    else:
                        f1[0] = 1.0
                for i2 in range(a2, b2 + 1):
                    if d > 2:
                        x = l2 + i2 * dx - Q[j, 2]
                        t = P[j, 2] * x * inve
                        f2[i2 - a2] = exp(-x * x * inv2e) * (cos(t) + 1j * sin(t))
                    else:
                        f2[0] = 1.0
                for i0 in range(a0, b0 + 1):
                    c0 = coef[j] * f0[i0 - a0]
                    for i1 in range(a1, b1 + 1):
                        c01 = c0 * f1[i1 - a1]
                        base = (i0 * n1 + i1) * n2
                        for i2 in range(a2, b2 + 1):
                            field[base + i2] = field[base + i2] + c01 * f2[i2 - a2]
        free(f0)
        free(f1)
        free(f2)


def tile_blocks(cplx[::1] field, shape, lo, double dx, double[:, ::1] qpos,
                cplx[:, ::1] blocks, Py_ssize_t nfold, double eps, double radius,
                double scale, int threads=1):
    """field += scale * sum_q env(x - q) * block_q[x index mod nfold].

    ``blocks`` holds one flattened nfold^d periodic array per q.
    """
    cdef int d = qpos.shape[1]
    cdef Py_ssize_t nq = qpos.shape[0]
    n = _pad3(shape, 1)
    lo3 = _pad3(lo, 0.0)
    cdef Py_ssize_t n0 = n[0], n1 = n[1], n2 = n[2]
    cdef Py_ssize_t N1 = nfold if d > 1 else 1
    cdef Py_ssize_t N2 = nfold if d > 2 else 1
    cdef double l0 = lo3[0], l1 = lo3[1], l2 = lo3[2]
    cdef int nslab = max(1, min(threads, <int> n0))
    cdef int s
    cdef Py_ssize_t wmax = <Py_ssize_t> (2 * radius / dx) + 3
    cdef double* e0
    cdef double* e1
    cdef double* e2
    cdef Py_ssize_t j, a0, b0, a1, b1, a2, b2, i0, i1, i2, s0, s1, base, bbase
    cdef double x, inv2e = 0.5 / eps, w0, w01
    if nq == 0:
        return
    with nogil, parallel(num_threads=nslab):
        e0 = <double*> malloc(wmax * sizeof(double))
        e1 = <double*> malloc(wmax * sizeof(double))
        e2 = <double*> malloc(wmax * sizeof(double))
        for s in prange(nslab, schedule="static"):
            slab_bounds(n0, nslab, s, &s0, &s1)
            for j in range(nq):
                axis_window(qpos[j, 0], l0, dx, n0, radius, &a0, &b0)
                if a0 < s0:
                    a0 = s0
                if b0 > s1 - 1:
                    b0 = s1 - 1
                if a0 > b0:
                    continue
                if d > 1:
                    axis_window(qpos[j, 1], l1, dx, n1, radius, &a1, &b1)
                    if a1 > b1:
                        continue
                else:
                    a1 = 0
                    b1 = 0
                if d > 2:
                    axis_window(qpos[j, 2], l2, dx, n2, radius, &a2, &b2)
                    if a2 > b2:
                        continue
                else:
                    a2 = 0
                    b2 = 0
                for i0 in range(a0, b0 + 1):
                    x = l0 + i0 * dx - qpos[j, 0]
                    e0[i0 - a0] = exp(-x * x * inv2e)
                for i1 in range(a1, b1 + 1):
                    if d > 1:
                        x = l1 + i1 * dx - qpos[j, 1]
                        e1[i1 - a1] = exp(-x * x * inv2e)
                    else:
                        e1[0] = 1.0
                for i2 in range(a2, b2 + 1):
                    if d > 2:
                        x = l2 + i2 * dx - qpos[j, 2]
                        e2[i2 - a2] = exp(-x * x * inv2e)
                    else:
                        e2[0] = 1.0
                for i0 in range(a0, b0 + 1):
                    w0 = scale * e0[i0 - a0]
                    for i1 in range(a1, b1 + 1):
                        w01 = w0 * e1[i1 - a1]
                        base = (i0 * n1 + i1) * n2
                        bbase = ((i0 % nfold) * N1 + (i1 % N1)) * N2
                        for i2 in range(a2, b2 + 1):
                            field[base + i2] = field[base + i2] + w01 * e2[i2 - a2] * blocks[j, bbase + (i2 % N2)]
        free(e0)
        free(e1)
        free(e2)


def fold_blocks(const cplx[::1] u, shape, lo, double dx, double[:, ::1] qpos,
                Py_ssize_t nfold, double eps, double radius, int threads=1):
    """Gaussian-windowed samples around each q, folded modulo nfold per axis.

    Returns an array (nq, nfold^d): block_q[r] = sum_{j = r mod nfold} u[j] env(x_j - q).
    """
    cdef int d = qpos.shape[1]
    cdef Py_ssize_t nq = qpos.shape[0]
    n = _pad3(shape, 1)
    lo3 = _pad3(lo, 0.0)
    cdef Py_ssize_t n0 = n[0], n1 = n[1], n2 = n[2]
    cdef Py_ssize_t N1 = nfold if d > 1 else 1
    cdef Py_ssize_t N2 = nfold if d > 2 else 1
    cdef double l0 = lo3[0], l1 = lo3[1], l2 = lo3[2]
    out = np.zeros((nq, nfold * N1 * N2), dtype=np.complex128)
    cdef cplx[:, ::1] ov = out
    cdef Py_ssize_t wmax = <Py_ssize_t> (2 * radius / dx) + 3
    cdef double* e0
    cdef double* e1
    cdef double* e2
    cdef Py_ssize_t j, a0, b0, a1, b1, a2, b2, i0, i1, i2, base, bbase
    cdef double x, inv2e = 0.5 / eps, w0, w01
    if nq == 0:
        return out
    with nogil, parallel(num_threads=max(threads, 1)):
        e0 = <double*> malloc(wmax * sizeof(double))
        e1 = <double*> malloc(wmax * sizeof(double))
        e2 = <double*> malloc(wmax * sizeof(double))
        for j in prange(nq, schedule="static"):
            axis_window(qpos[j, 0], l0, dx, n0, radius, &a0, &b0)
            if d > 1:
                axis_window(qpos[j, 1], l1, dx, n1, radius, &a1, &b1)
            else:
                a1 = 0
                b1 = 0
            if d > 2:
                axis_window(qpos[j, 2], l2, dx, n2, radius, &a2, &b2)
            else:
                a2 = 0
                b2 = 0
            if a0 > b0 or a1 > b1 or a2 > b2:
                continue
            for i0 in range(a0, b0 + 1):
                x = l0 + i0 * dx - qpos[j, 0]
                e0[i0 - a0] = exp(-x * x * inv2e)
            for i1 in range(a1, b1 + 1):
                if d > 1:
                    x = l1 + i1 * dx - qpos[j, 1]
                    e1[i1 - a1] = exp(-x * x * inv2e)
                else:
                    e1[0] = 1.0
            for i2 in range(a2, b2 + 1):
                if d > 2:
                    x = l2 + i2 * dx - qpos[j, 2]
                    e2[i2 - a2] = exp(-x * x * inv2e)
                else:
                    e2[0] = 1.0
            for i0 in range(a0, b0 + 1):
                w0 = e0[i0 - a0]
                for i1 in range(a1, b1 + 1):
                    w01 = w0 * e1[i1 - a1]
                    base = (i0 * n1 + i1) * n2
                    bbase = ((i0 % nfold) * N1 + (i1 % N1)) * N2
                    for i2 in range(a2, b2 + 1):
                        ov[j, bbase + (i2 % N2)] = ov[j, bbase + (i2 % N2)] + w01 * e2[i2 - a2] * u[base + i2]
        free(e0)
        free(e1)
        free(e2)
    return out
