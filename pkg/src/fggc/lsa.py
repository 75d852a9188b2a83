"""Least-squares splitting of off-grid packets onto on-grid neighbours.

With the inner product conjugating its second argument, the Gram system
``A_jk = <psi_j, psi_k>``, ``f_j = <psi_j, phi>`` is Hermitian and the
coefficients minimising ``|| phi - sum_k c_k psi_k ||`` are

    c = conj(pinv(A) f).

After dropping the common factor ``(pi eps)^(d/2)`` and translating the
target into its unit cell, ``A`` and ``f`` depend only on ``cq``, ``cp`` and
the cell fractions ``s = fracQ/dq``, ``t = fracP/dp``, so one pseudo-inverse
serves every packet and every epsilon.  The translation contributes the
phase ``exp(-i (Q - Q_k).intP / eps)`` to ``c_k``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import MeshSpec, NeighborStrategy, PhaseIndex, floor_index, neighbor_indices
from .packets import GaussianParams, WavePacket, grad_overlap, overlap

# Relative singular-value cutoff of the pseudo-inverse.
RCOND = 1.5e-10

SAMPLES_PER_AXIS = 33

# Elements per (packets, neighbours, d) temporary when splitting in chunks.
SPLIT_CHUNK = 2**22


@dataclass(frozen=True)
class NormalSystem:
    A: np.ndarray
    f: np.ndarray

    def solve(self, rcond: float = RCOND) -> np.ndarray:
        """Minimum-norm least-squares coefficients."""
        return np.conj(np.linalg.pinv(self.A, rcond=rcond) @ self.f)


@dataclass(frozen=True)
class PrecomputedLSA:
    strategy: NeighborStrategy
    cq: float
    cp: float
    A_tilde: np.ndarray
    A_tilde_pinv: np.ndarray
    rcond: float


@dataclass(frozen=True)
class SplitResult:
    base: PhaseIndex
    coeffs: np.ndarray
    residual: float


@dataclass(frozen=True)
class SplitBatch:
    """Vectorised split of M packets: floor corners, (M, n) coefficients and residuals."""

    base_q: np.ndarray
    base_p: np.ndarray
    coeffs: np.ndarray
    residual: np.ndarray


def _neighbor_points(target: GaussianParams, strategy: NeighborStrategy, mesh: MeshSpec):
    iq, _ = floor_index(target.Q, mesh.dq)
    ip, _ = floor_index(target.P, mesh.dp)
    Qn = (iq + strategy.shifts_q) * mesh.dq
    Pn = (ip + strategy.shifts_p) * mesh.dp
    return Qn, Pn


def build_normal_system(target: GaussianParams, strategy: NeighborStrategy, mesh: MeshSpec) -> NormalSystem:
    """Gram matrix and right-hand side from the closed-form packet overlaps."""
    Qn, Pn = _neighbor_points(target, strategy, mesh)
    eps = target.epsilon
    A = overlap(Qn[:, None], Pn[:, None], Qn[None], Pn[None], eps)
    f = overlap(Qn, Pn, target.Q[None], target.P[None], eps)
    return NormalSystem(A, f)


def gram_tilde(strategy: NeighborStrategy, cq: float, cp: float) -> np.ndarray:
    """Epsilon-free Gram matrix of the neighbour shifts."""
    sq = strategy.shifts_q.astype(float)
    sp = strategy.shifts_p.astype(float)
    dq = sq[:, None, :] - sq[None, :, :]
    dp = sp[:, None, :] - sp[None, :, :]
    psum = sp[:, None, :] + sp[None, :, :]
    expo = (
        -(cq**2 / 4) * np.sum(dq * dq, -1)
        - (cp**2 / 4) * np.sum(dp * dp, -1)
        - 0.5j * cq * cp * np.sum(dq * psum, -1)
    )
    return np.exp(expo)


def rhs_tilde(strategy: NeighborStrategy, cq: float, cp: float, s, t) -> np.ndarray:
    """Epsilon-free right-hand sides for cell fractions ``s``, ``t`` of shape (M, d); returns (M, n)."""
    s = np.atleast_2d(s)[:, None, :]
    t = np.atleast_2d(t)[:, None, :]
    sq = strategy.shifts_q[None].astype(float)
    sp = strategy.shifts_p[None].astype(float)
    expo = (
        -(cq**2 / 4) * np.sum((sq - s) ** 2, -1)
        - (cp**2 / 4) * np.sum((sp - t) ** 2, -1)
        + 0.5j * cq * cp * np.sum((s - sq) * (sp + t), -1)
    )
    return np.exp(expo)


def precompute(strategy: NeighborStrategy, cq: float, cp: float, rcond: float = RCOND) -> PrecomputedLSA:
    if not 0 < rcond < 1:
        raise ValueError(f"rcond must lie in (0, 1), got {rcond}")
    A = gram_tilde(strategy, cq, cp)
    return PrecomputedLSA(strategy, float(cq), float(cp), A, np.linalg.pinv(A, rcond=rcond), float(rcond))


def _residual(C: np.ndarray, F: np.ndarray, A: np.ndarray, norm2: float = 1.0) -> np.ndarray:
    """Relative L2 residual of targets with overlaps ``F`` against a Gram matrix ``A``.

    The quadratic form is evaluated for ``delta = phi - psi_k0`` with ``k0``
    the neighbour of largest overlap.  ``psi_k0`` lies in the span, so the
    residual is unchanged, while the cancellation now happens at the scale of
    ``||delta||`` and a target sitting on a neighbour gives exactly zero.
    """
    rows = np.arange(len(F))
    k0 = np.argmax(np.abs(F), axis=1)
    Fd = F - A[:, k0].T
    Cd = C - np.eye(A.shape[0])[k0]
    d2 = 2 * np.real(A[k0, k0] - F[rows, k0])
    r2 = d2 - 2 * np.real(np.sum(Cd * Fd, axis=-1)) + np.real(np.einsum("mj,jk,mk->m", Cd, A, np.conj(Cd)))
    return np.sqrt(np.maximum(r2, 0.0) / norm2)


def _check_mesh(pre: PrecomputedLSA, mesh: MeshSpec) -> None:
    if not (math.isclose(pre.cq, mesh.cq) and math.isclose(pre.cp, mesh.cp)):
        raise ValueError("precomputed system was built for different mesh constants")
    if pre.strategy.dim != mesh.dim:
        raise ValueError("strategy and mesh dimensions differ")


def split_ensemble(Q, P, pre: PrecomputedLSA, mesh: MeshSpec) -> SplitBatch:
    """Split M packets at ``(Q, P)`` (shape (M, d)) with the shared pseudo-inverse."""
    _check_mesh(pre, mesh)
    Q = np.atleast_2d(np.asarray(Q, float))
    P = np.atleast_2d(np.asarray(P, float))
    iq, s = floor_index(Q, mesh.dq)
    ip, t = floor_index(P, mesh.dp)
    n, d = pre.strategy.n, mesh.dim
    coeffs = np.empty((len(Q), n), complex)
    residual = np.empty(len(Q))
    sq = pre.strategy.shifts_q[None].astype(float)
    rows = max(1, SPLIT_CHUNK // (n * d))
    for a in range(0, len(Q), rows):
        b = min(a + rows, len(Q))
        F = rhs_tilde(pre.strategy, pre.cq, pre.cp, s[a:b], t[a:b])
        C = np.conj(F @ pre.A_tilde_pinv.T)
        residual[a:b] = _residual(C, F, pre.A_tilde)
        arg = pre.cq * pre.cp * np.sum(ip[a:b, None, :] * (s[a:b, None, :] - sq), -1)
        coeffs[a:b] = C * np.exp(-1j * arg)
    return SplitBatch(iq, ip, coeffs, residual)


def split_packet(packet: WavePacket, pre: PrecomputedLSA, mesh: MeshSpec) -> SplitResult:
    g = packet.params
    batch = split_ensemble(g.Q[None], g.P[None], pre, mesh)
    base = PhaseIndex(tuple(int(v) for v in batch.base_q[0]), tuple(int(v) for v in batch.base_p[0]))
    return SplitResult(base, batch.coeffs[0], float(batch.residual[0]))


def _mesh_for(epsilon: float, dim: int, cq: float, cp: float) -> MeshSpec:
    return MeshSpec(epsilon, dim, epsilon, cq, cp, (-2.0,) * dim, (2.0,) * dim)


def e_lsa(epsilon, Q, P, strategy: NeighborStrategy, cq: float, cp: float, rcond: float = RCOND) -> float:
    """Relative L2 splitting error of one packet, from its full Gram system.

    Overlaps are formed after moving the floor corner to the origin of phase
    space.  Translation and modulation are unitary, so the error is
    unaffected, but the overlap phases stay of order one.
    """
    mesh = _mesh_for(epsilon, strategy.dim, cq, cp)
    Q = np.atleast_1d(np.asarray(Q, float))
    P = np.atleast_1d(np.asarray(P, float))
    _, s = floor_index(Q, mesh.dq)
    _, t = floor_index(P, mesh.dp)
    Qn = strategy.shifts_q * mesh.dq
    Pn = strategy.shifts_p * mesh.dp
    A = overlap(Qn[:, None], Pn[:, None], Qn[None], Pn[None], epsilon)
    f = overlap(Qn, Pn, (s * mesh.dq)[None], (t * mesh.dp)[None], epsilon)
    c = NormalSystem(A, f).solve(rcond)
    norm2 = (math.pi * epsilon) ** (strategy.dim / 2)
    return float(_residual(c[None], f[None], A, norm2)[0])


def cell_samples(dim: int, samples_per_axis: int) -> tuple[np.ndarray, np.ndarray]:
    """Uniform (s, t) samples of the unit cell [0,1]^d x [0,1]^d, endpoints included."""
    if samples_per_axis < 2:
        raise ValueError("samples_per_axis must be at least 2")
    axis = np.linspace(0.0, 1.0, samples_per_axis)
    grids = np.meshgrid(*([axis] * (2 * dim)), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    return pts[:, :dim], pts[:, dim:]


def m_lsa(
    strategy: NeighborStrategy,
    cq: float,
    cp: float,
    d: int | None = None,
    samples_per_axis: int = SAMPLES_PER_AXIS,
    *,
    epsilon: float | None = None,
    rcond: float = RCOND,
) -> float:
    """Sampled supremum of the relative splitting error over the unit cell.

    Without ``epsilon`` the epsilon-free system is used.  With ``epsilon``
    the full Gram system is assembled from packet overlaps on the mesh
    ``dq = cq sqrt(eps)``, ``dp = cp sqrt(eps)``.
    """
    dim = strategy.dim if d is None else d
    if dim != strategy.dim:
        raise ValueError("strategy dimension does not match d")
    s, t = cell_samples(dim, samples_per_axis)
    if epsilon is None:
        pre = precompute(strategy, cq, cp, rcond)
        F = rhs_tilde(strategy, cq, cp, s, t)
        C = np.conj(F @ pre.A_tilde_pinv.T)
        return float(_residual(C, F, pre.A_tilde).max())
    root = math.sqrt(epsilon)
    dq, dp = cq * root, cp * root
    Qn = strategy.shifts_q * dq
    Pn = strategy.shifts_p * dp
    A = overlap(Qn[:, None], Pn[:, None], Qn[None], Pn[None], epsilon)
    pinv = np.linalg.pinv(A, rcond=rcond)
    Qt, Pt = s * dq, t * dp
    F = overlap(Qn[None], Pn[None], Qt[:, None], Pt[:, None], epsilon)
    C = np.conj(F @ pinv.T)
    return float(_residual(C, F, A, (math.pi * epsilon) ** (dim / 2)).max())


def m_lsa_h1(
    strategy: NeighborStrategy,
    cq: float,
    cp: float,
    d: int | None = None,
    epsilon: float = 2.0**-6,
    samples_per_axis: int = SAMPLES_PER_AXIS,
    *,
    rcond: float = RCOND,
) -> float:
    """Sampled supremum of ``||grad G - sum c_k grad G_k|| / ||G||_H1`` over the unit cell.

    The coefficients are the L2 splitting coefficients.  The target lies in
    the cell at the origin, so its H1 norm uses its own momentum ``t dp``.
    """
    dim = strategy.dim if d is None else d
    if dim != strategy.dim:
        raise ValueError("strategy dimension does not match d")
    s, t = cell_samples(dim, samples_per_axis)
    pre = precompute(strategy, cq, cp, rcond)
    F = rhs_tilde(strategy, cq, cp, s, t)
    C = np.conj(F @ pre.A_tilde_pinv.T)
    root = math.sqrt(epsilon)
    dq, dp = cq * root, cp * root
    Qn = strategy.shifts_q * dq
    Pn = strategy.shifts_p * dp
    Qt, Pt = s * dq, t * dp
    # ||grad(G - sum c_k G_k)||^2 = g_tt - 2 Re(sum_k conj(c_k) <grad G, grad G_k>) + c^T Gnn conj(c)
    Gnn = grad_overlap(Qn[:, None], Pn[:, None], Qn[None], Pn[None], epsilon)
    Gtn = grad_overlap(Qt[:, None], Pt[:, None], Qn[None], Pn[None], epsilon)
    ptp = np.sum(Pt * Pt, -1)
    base = (math.pi * epsilon) ** (dim / 2)
    g_tt = base * (ptp / epsilon**2 + dim / (2 * epsilon))
    num = g_tt - 2 * np.real(np.sum(np.conj(C) * Gtn, -1)) + np.real(np.einsum("mj,jk,mk->m", C, Gnn, np.conj(C)))
    den = base * (1 + ptp / epsilon**2 + dim / (2 * epsilon))
    return float(np.sqrt(np.maximum(num, 0.0) / den).max())


def neighbors_of(packet: WavePacket, strategy: NeighborStrategy, mesh: MeshSpec) -> list[PhaseIndex]:
    g = packet.params
    return neighbor_indices(g.Q, g.P, strategy, mesh)
