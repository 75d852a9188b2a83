"""Initial data and its decomposition into on-grid packet amplitudes.

For an on-grid centre ``q`` the transform

    u_hat(q, p) = dx^d * sum_y u0(y) exp(-i p.(y-q)/eps - |y-q|^2/(2 eps))

is periodic in the momentum index with period ``n_fold`` on every axis, so a
single length-``n_fold`` FFT of the Gaussian-windowed, folded samples gives
all momenta at once.  The packet amplitude is ``A = 2^(d/2) u_hat``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterator

import numpy as np

from . import kernels
from .core import MeshSpec, PhaseIndex, lattice_points
from .packets import GaussianParams, WavePacket

R_CUT = 9.0
TAU = 1e-6

# Upper bound on the memory used by one batch of folded blocks.
BATCH_BYTES = 64 * 2**20


class EmptyEnsembleError(ValueError):
    """Every amplitude fell below the truncation threshold."""


def grid_points(mesh: MeshSpec) -> np.ndarray:
    """Spatial grid as an array of shape ``mesh.shape + (d,)``."""
    return np.stack(mesh.grid(), axis=-1)


@dataclass(frozen=True)
class InitialCondition:
    """Initial wave function ``u0`` given as a preset or as samples.

    ``gaussian``  (2 alpha/pi)^(d/4) exp(-alpha |x-x0|^2 + i p0.(x-x0)/eps)
    ``wkb``       sqrt(n0(x)) exp(i S0(x)/eps) for user callables
    ``field``     externally supplied samples on the mesh grid
    """

    kind: str
    params: dict = field(default_factory=dict)
    n0: Callable | None = None
    S0: Callable | None = None
    sampled: np.ndarray | None = None

    @classmethod
    def gaussian(cls, alpha: float = 32.0, x0=0.0, p0=1.0) -> "InitialCondition":
        return cls("gaussian", {"alpha": float(alpha), "x0": x0, "p0": p0})

    @classmethod
    def wkb(cls, n0: Callable, S0: Callable) -> "InitialCondition":
        return cls("wkb", n0=n0, S0=S0)

    @classmethod
    def from_samples(cls, samples) -> "InitialCondition":
        return cls("field", sampled=np.asarray(samples, dtype=complex))

    @classmethod
    def from_dict(cls, spec: dict) -> "InitialCondition":
        spec = dict(spec)
        kind = spec.pop("kind")
        if kind != "gaussian":
            raise ValueError(f"only the gaussian preset can be built from parameters, got {kind!r}")
        return cls.gaussian(**spec)

    def sample(self, mesh: MeshSpec) -> np.ndarray:
        """Values of u0 on the mesh grid, shape ``mesh.shape``."""
        if self.kind == "field":
            if self.sampled.shape != mesh.shape:
                raise ValueError(f"sampled field has shape {self.sampled.shape}, mesh has {mesh.shape}")
            return self.sampled.copy()
        x = grid_points(mesh)
        eps, d = mesh.epsilon, mesh.dim
        if self.kind == "gaussian":
            alpha = self.params["alpha"]
            x0 = np.broadcast_to(np.asarray(self.params["x0"], float), (d,))
            p0 = np.broadcast_to(np.asarray(self.params["p0"], float), (d,))
            y = x - x0
            norm = (2 * alpha / math.pi) ** (d / 4)
            return norm * np.exp(-alpha * np.sum(y * y, axis=-1) + 1j * (y @ p0) / eps)
        if self.kind == "wkb":
            return np.sqrt(self.n0(x)) * np.exp(1j * self.S0(x) / eps)
        raise ValueError(f"unknown initial condition {self.kind!r}")


@dataclass(frozen=True)
class PacketEnsemble:
    """Struct-of-arrays packet ensemble.

    ``iq``/``ip`` are the on-grid indices the packets were created at;
    ``Q``/``P``/``S``/``A`` are their current state.  ``Z`` is ``None``
    for fresh packets (Z = 2I).
    """

    iq: np.ndarray
    ip: np.ndarray
    A: np.ndarray
    mesh: MeshSpec
    Q: np.ndarray = None
    P: np.ndarray = None
    S: np.ndarray = None
    Z: np.ndarray | None = None

    def __post_init__(self):
        iq = np.asarray(self.iq, dtype=np.int64).reshape(-1, self.mesh.dim)
        ip = np.asarray(self.ip, dtype=np.int64).reshape(-1, self.mesh.dim)
        object.__setattr__(self, "iq", iq)
        object.__setattr__(self, "ip", ip)
        object.__setattr__(self, "A", np.asarray(self.A, dtype=complex).reshape(-1))
        if self.Q is None:
            object.__setattr__(self, "Q", iq * self.mesh.dq)
        if self.P is None:
            object.__setattr__(self, "P", ip * self.mesh.dp)
        if self.S is None:
            object.__setattr__(self, "S", np.zeros(len(iq)))

    def __len__(self) -> int:
        return len(self.A)

    @property
    def weight(self) -> float:
        return self.mesh.weight

    def with_state(self, **changes) -> "PacketEnsemble":
        return replace(self, **changes)

    def Z_matrices(self) -> np.ndarray:
        if self.Z is not None:
            return self.Z
        return np.broadcast_to(2 * np.eye(self.mesh.dim, dtype=complex), (len(self), self.mesh.dim, self.mesh.dim))

    def __iter__(self) -> Iterator[tuple[PhaseIndex, WavePacket]]:
        Z = self.Z_matrices()
        for j in range(len(self)):
            key = PhaseIndex(tuple(int(v) for v in self.iq[j]), tuple(int(v) for v in self.ip[j]))
            g = GaussianParams(self.Q[j], self.P[j], self.mesh.epsilon)
            yield key, WavePacket(g, complex(self.A[j]), float(self.S[j]), np.array(Z[j]))


def dft_phase(m, s, n: int) -> np.ndarray:
    """``exp(2 pi i m s / n)``, reducing ``m * s`` modulo ``n`` in integers.

    ``s`` (broadcast against ``m``) is split into an integer part and a
    fraction; fractions within 1e-9 of an integer are snapped so that grid
    aligned shifts give exact integer arithmetic.
    """
    m = np.asarray(m, dtype=np.int64)
    s = np.asarray(s, dtype=float)
    k = np.floor(s)
    frac = s - k
    up = frac > 1 - 1e-9
    k = np.where(up, k + 1, k).astype(np.int64)
    frac = np.where(up | (frac < 1e-9), 0.0, frac)
    arg = (m * (k % n)) % n + m * frac
    return np.exp(2j * math.pi * arg / n)


def _q_shift(iq: np.ndarray, mesh: MeshSpec) -> np.ndarray:
    """``(q - lo) / dx`` per axis for on-grid q."""
    return (iq * mesh.dq - np.asarray(mesh.domain_lo)) / mesh.dx


def _lift(r: np.ndarray, center: np.ndarray, n: int) -> np.ndarray:
    """Lift residues ``r`` (mod n) into the length-n window centred on ``center``."""
    return center + np.mod(r - center + n // 2, n) - n // 2


def _fold_fft(u0: np.ndarray, iq: np.ndarray, mesh: MeshSpec, r_cut: float, threads: int) -> np.ndarray:
    """FFT of the windowed folded samples for each q; shape ``(nq,) + (N,)*d``."""
    N, d = mesh.n_fold, mesh.dim
    qpos = np.ascontiguousarray(iq * mesh.dq, dtype=np.float64)
    flat = np.ascontiguousarray(u0.reshape(-1), dtype=np.complex128)
    blocks = kernels.fold_blocks(
        flat, mesh.shape, mesh.domain_lo, mesh.dx, qpos, N, mesh.epsilon, mesh.window_radius(r_cut), threads
    )
    return np.fft.fftn(blocks.reshape((len(iq),) + (N,) * d), axes=tuple(range(1, d + 1)))


def _residues(N: int, d: int) -> np.ndarray:
    return lattice_points([(0, N)] * d)


def _amplitudes_for(F: np.ndarray, iq: np.ndarray, mesh: MeshSpec):
    """Lift one batch of FFT blocks to momentum indices and apply the q phase.

    Returns ``(ip, uhat)`` with shapes ``(nq, N^d, d)`` and ``(nq, N^d)``.
    """
    N, d = mesh.n_fold, mesh.dim
    nq = len(iq)
    flatF = F.reshape(nq, -1)
    res = _residues(N, d)
    peak = res[np.argmax(np.abs(flatF), axis=1)]
    center = np.where(peak < N // 2, peak, peak - N)
    ip = _lift(res[None, :, :], center[:, None, :], N)
    shifts = _q_shift(iq, mesh)
    phase = np.ones((nq, N**d), dtype=complex)
    for a in range(d):
        phase *= dft_phase(ip[:, :, a], shifts[:, a, None], N)
    return ip, mesh.dx**d * phase * flatF


def transform_u0(u0, q, mesh: MeshSpec, *, r_cut: float = R_CUT, threads: int = 1):
    """Windowed transform of ``u0`` at one on-grid centre ``q`` for all momenta.

    Returns ``(ip, uhat)``: the ``N^d`` momentum indices (a window of
    ``n_fold`` per axis centred on the dominant momentum) and the values.
    """
    u0 = np.asarray(u0, dtype=complex)
    if u0.shape != mesh.shape:
        raise ValueError(f"u0 has shape {u0.shape}, mesh grid is {mesh.shape}")
    if mesh.n_fold is None:
        raise ValueError("mesh must be validated first")
    iq = np.atleast_2d(np.rint(np.asarray(q, float) / mesh.dq).astype(np.int64))
    F = _fold_fft(u0, iq, mesh, r_cut, threads)
    ip, uhat = _amplitudes_for(F, iq, mesh)
    return ip[0], uhat[0]


def amplitude_bound(u0: np.ndarray, iq: np.ndarray, mesh: MeshSpec, r_cut: float = R_CUT) -> np.ndarray:
    """``dx^d * sum |u0| * window`` at each q, an upper bound on every |u_hat(q, .)|."""
    B = np.abs(u0)
    radius = mesh.window_radius(r_cut)
    axes_q = []
    for a in range(mesh.dim):
        lo, hi = int(iq[:, a].min()), int(iq[:, a].max()) + 1
        qa = np.arange(lo, hi) * mesh.dq
        x = mesh.axis(a)
        diff = x[None, :] - qa[:, None]
        W = np.where(np.abs(diff) <= radius, np.exp(-diff * diff / (2 * mesh.epsilon)), 0.0)
        B = np.moveaxis(np.tensordot(W, B, axes=(1, a)), 0, a)
        axes_q.append(lo)
    idx = tuple(iq[:, a] - axes_q[a] for a in range(mesh.dim))
    return mesh.dx**mesh.dim * B[idx]


def initial_decompose(
    u0,
    mesh: MeshSpec,
    tau: float = TAU,
    *,
    r_cut: float = R_CUT,
    threads: int = 1,
) -> PacketEnsemble:
    """Packets ``A(0,q,p) = 2^(d/2) u_hat(q,p)`` with ``|A| >= tau * max|A|``.

    Every q of the box is considered; q whose amplitude bound is already
    below the threshold are skipped without being transformed.
    """
    if not 0 <= tau < 1:
        raise ValueError(f"tau must lie in [0, 1), got {tau}")
    if mesh.n_fold is None:
        raise ValueError("mesh must be validated first")
    u0 = np.asarray(u0, dtype=complex)
    if u0.shape != mesh.shape:
        raise ValueError(f"u0 has shape {u0.shape}, mesh grid is {mesh.shape}")
    d, N = mesh.dim, mesh.n_fold
    scale = 2.0 ** (d / 2)
    iq_all = lattice_points([mesh.q_index_range(a) for a in range(d)])
    bound = scale * amplitude_bound(u0, iq_all, mesh, r_cut)
    if not np.any(bound > 0):
        raise EmptyEnsembleError("initial data is identically zero on the grid")

    best = iq_all[[int(np.argmax(bound))]]
    _, uref = _amplitudes_for(_fold_fft(u0, best, mesh, r_cut, threads), best, mesh)
    a_ref = scale * float(np.abs(uref).max())
    iq_keep = iq_all[bound >= tau * a_ref] if tau > 0 else iq_all

    batch = max(1, BATCH_BYTES // (16 * N**d))
    parts_iq, parts_ip, parts_A = [], [], []
    for start in range(0, len(iq_keep), batch):
        iq_b = iq_keep[start : start + batch]
        ip_b, uhat = _amplitudes_for(_fold_fft(u0, iq_b, mesh, r_cut, threads), iq_b, mesh)
        A_b = scale * uhat
        keep = np.abs(A_b) >= tau * a_ref
        rows = np.nonzero(keep)
        parts_iq.append(iq_b[rows[0]])
        parts_ip.append(ip_b[rows])
        parts_A.append(A_b[rows])
    iq = np.concatenate(parts_iq) if parts_iq else np.zeros((0, d), np.int64)
    ip = np.concatenate(parts_ip) if parts_ip else np.zeros((0, d), np.int64)
    A = np.concatenate(parts_A) if parts_A else np.zeros(0, complex)
    if len(A):
        final = np.abs(A) >= tau * np.abs(A).max()
        iq, ip, A = iq[final], ip[final], A[final]
    if len(A) == 0 or not np.any(A):
        raise EmptyEnsembleError("no packet amplitude reaches the truncation threshold")
    return PacketEnsemble(iq, ip, A, mesh)
