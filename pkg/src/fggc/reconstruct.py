"""Wave reconstruction and the FGA / FGGC solver drivers.

Direct reconstruction sums every evolved packet on the grid.  The corrected
path splits packets onto grid points, merges amplitudes that share a grid
point, and evaluates the on-grid sum with one inverse FFT per q: at fixed q
the momentum sum is periodic in x with period ``n_fold * dx``, so it is
tiled under the truncated Gaussian envelope.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .config import ExperimentConfig
from .core import MeshSpec, PhaseIndex, named_strategy
from .decompose import BATCH_BYTES, R_CUT, PacketEnsemble, dft_phase, initial_decompose
from .flow import Potential, evolve, propagate
from .lsa import PrecomputedLSA, precompute, split_ensemble

TIMING_KEYS = ("decompose_s", "evolve_s", "lsa_s", "reconstruct_s", "total_s", "packet_count", "cache_hits")


def _layout(lo: np.ndarray, hi: np.ndarray):
    """Mixed-radix strides packing integer rows in ``[lo, hi]`` into one int64, or None."""
    span = hi - lo + 1
    if float(np.prod(span.astype(float))) >= 2.0**62:
        return None
    strides = np.ones(len(span), np.int64)
    for j in range(len(span) - 2, -1, -1):
        strides[j] = strides[j + 1] * span[j + 1]
    return span, strides


def _merge_packed(packed, values, lo, span, strides, d, mesh):
    """Sum values sharing a packed key; keys come back in lexicographic (iq, ip) order."""
    uniq, inverse = np.unique(packed, return_inverse=True)
    inverse = inverse.reshape(-1)
    re = np.bincount(inverse, weights=values.real, minlength=len(uniq))
    im = np.bincount(inverse, weights=values.imag, minlength=len(uniq))
    keys = lo + (uniq[:, None] // strides) % span
    return PhaseGridAmplitudes(keys[:, :d].copy(), keys[:, d:].copy(), re + 1j * im, mesh)


@dataclass(frozen=True)
class PhaseGridAmplitudes:
    """Merged on-grid amplitudes, sorted by (iq, ip)."""

    iq: np.ndarray
    ip: np.ndarray
    values: np.ndarray
    mesh: MeshSpec

    @classmethod
    def merge(cls, iq, ip, values, mesh: MeshSpec) -> "PhaseGridAmplitudes":
        """Sum contributions that share a grid point.

        Duplicates are added in input order, so the result does not depend
        on anything but the order of the contributions.
        """
        d = mesh.dim
        iq = np.asarray(iq, np.int64).reshape(-1, d)
        ip = np.asarray(ip, np.int64).reshape(-1, d)
        values = np.asarray(values, complex).reshape(-1)
        if len(values) == 0:
            return cls(iq, ip, values, mesh)
        lo = np.concatenate([iq.min(axis=0), ip.min(axis=0)])
        hi = np.concatenate([iq.max(axis=0), ip.max(axis=0)])
        layout = _layout(lo, hi)
        if layout is not None:
            span, strides = layout
            packed = (iq - lo[:d]) @ strides[:d] + (ip - lo[d:]) @ strides[d:]
            return _merge_packed(packed, values, lo, span, strides, d, mesh)
        uniq, inverse = np.unique(np.concatenate([iq, ip], axis=1), axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        re = np.bincount(inverse, weights=values.real, minlength=len(uniq))
        im = np.bincount(inverse, weights=values.imag, minlength=len(uniq))
        return cls(uniq[:, :d].copy(), uniq[:, d:].copy(), re + 1j * im, mesh)

    @classmethod
    def from_dict(cls, table: dict, mesh: MeshSpec) -> "PhaseGridAmplitudes":
        d = mesh.dim
        if not table:
            return cls(np.zeros((0, d), np.int64), np.zeros((0, d), np.int64), np.zeros(0, complex), mesh)
        keys = list(table)
        iq = np.array([k.iq for k in keys], np.int64)
        ip = np.array([k.ip for k in keys], np.int64)
        return cls.merge(iq, ip, np.array([table[k] for k in keys], complex), mesh)

    def __len__(self) -> int:
        return len(self.values)

    def as_dict(self) -> dict[PhaseIndex, complex]:
        return {
            PhaseIndex(tuple(int(v) for v in a), tuple(int(v) for v in b)): complex(c)
            for a, b, c in zip(self.iq, self.ip, self.values)
        }

    def as_ensemble(self) -> PacketEnsemble:
        """On-grid packets carrying the merged amplitudes (S = 0)."""
        return PacketEnsemble(self.iq, self.ip, self.values, self.mesh)

    def scaled(self, factor) -> "PhaseGridAmplitudes":
        return PhaseGridAmplitudes(self.iq, self.ip, self.values * factor, self.mesh)


@dataclass(frozen=True)
class FlowMapEntry:
    key: PhaseIndex
    final_base: PhaseIndex
    combined_coeffs: np.ndarray


class FlowMap:
    """Memo from initial grid points to (floor corner, unit-amplitude coefficients)."""

    def __init__(self, dim: int, n: int):
        self.dim, self.n = dim, n
        self._index: dict[tuple, int] = {}
        self._base_q = np.zeros((0, dim), np.int64)
        self._base_p = np.zeros((0, dim), np.int64)
        self._coeffs = np.zeros((0, n), complex)

    def __len__(self) -> int:
        return len(self._index)

    def lookup(self, iq: np.ndarray, ip: np.ndarray) -> np.ndarray:
        """Row of each key in the memo, or -1 when absent."""
        keys = np.concatenate([iq, ip], axis=1)
        get = self._index.get
        return np.fromiter((get(tuple(k), -1) for k in keys.tolist()), dtype=np.int64, count=len(keys))

    def insert(self, iq, ip, base_q, base_p, coeffs) -> np.ndarray:
        start = len(self._index)
        for j, k in enumerate(np.concatenate([iq, ip], axis=1).tolist()):
            self._index[tuple(k)] = start + j
        self._base_q = np.concatenate([self._base_q, base_q])
        self._base_p = np.concatenate([self._base_p, base_p])
        self._coeffs = np.concatenate([self._coeffs, coeffs])
        return np.arange(start, start + len(iq))

    def rows(self, idx: np.ndarray):
        return self._base_q[idx], self._base_p[idx], self._coeffs[idx]

    def entry(self, key: PhaseIndex) -> FlowMapEntry:
        r = self._index[tuple(key.iq) + tuple(key.ip)]
        base = PhaseIndex(tuple(int(v) for v in self._base_q[r]), tuple(int(v) for v in self._base_p[r]))
        return FlowMapEntry(key, base, self._coeffs[r].copy())


@dataclass
class SolveResult:
    field: np.ndarray
    mesh: MeshSpec
    timing: dict
    stats: dict = field(default_factory=dict)


# reconstruction ---------------------------------------------------------------


def reconstruct_direct(ensemble: PacketEnsemble, mesh: MeshSpec, *, r_cut: float = R_CUT, threads: int = 1) -> np.ndarray:
    """Windowed direct sum of all packets on the spatial grid."""
    out = np.zeros(int(np.prod(mesh.shape)), dtype=np.complex128)
    if len(ensemble):
        coef = np.ascontiguousarray(mesh.weight * ensemble.A * np.exp(1j * ensemble.S / mesh.epsilon))
        kernels.gauss_sum(
            out,
            mesh.shape,
            mesh.domain_lo,
            mesh.dx,
            np.ascontiguousarray(ensemble.Q, dtype=np.float64),
            np.ascontiguousarray(ensemble.P, dtype=np.float64),
            coef,
            mesh.epsilon,
            mesh.window_radius(r_cut),
            threads,
        )
    return out.reshape(mesh.shape)


def _contributions(base_q, base_p, coeffs, amplitude, strategy, mesh) -> PhaseGridAmplitudes:
    d = mesh.dim
    vals = (amplitude[:, None] * coeffs).reshape(-1)
    if len(vals) == 0:
        return PhaseGridAmplitudes.merge(np.zeros((0, d)), np.zeros((0, d)), vals, mesh)
    shifts = np.concatenate([strategy.shifts_q, strategy.shifts_p], axis=1)
    base = np.concatenate([base_q, base_p], axis=1)
    lo = base.min(axis=0) + shifts.min(axis=0)
    layout = _layout(lo, base.max(axis=0) + shifts.max(axis=0))
    if layout is None:
        iq = (base_q[:, None, :] + strategy.shifts_q[None]).reshape(-1, d)
        ip = (base_p[:, None, :] + strategy.shifts_p[None]).reshape(-1, d)
        return PhaseGridAmplitudes.merge(iq, ip, vals, mesh)
    # packing is linear, so each neighbour adds a fixed offset to its corner's key
    span, strides = layout
    packed = ((base - lo) @ strides)[:, None] + (shifts @ strides)[None]
    return _merge_packed(packed.reshape(-1), vals, lo, span, strides, d, mesh)


def accumulate_corrected(ensemble: PacketEnsemble, pre: PrecomputedLSA, mesh: MeshSpec) -> PhaseGridAmplitudes:
    """Split every packet and merge ``A e^{iS/eps} c_k`` at each neighbour."""
    split = split_ensemble(ensemble.Q, ensemble.P, pre, mesh)
    amp = ensemble.A * np.exp(1j * ensemble.S / mesh.epsilon)
    return _contributions(split.base_q, split.base_p, split.coeffs, amp, pre.strategy, mesh)


def reconstruct_fft(amps: PhaseGridAmplitudes, mesh: MeshSpec, *, r_cut: float = R_CUT, threads: int = 1) -> np.ndarray:
    """On-grid packet sum with one inverse FFT of length ``n_fold`` per axis and q."""
    if mesh.n_fold is None:
        raise ValueError("mesh must be validated first")
    N, d = mesh.n_fold, mesh.dim
    out = np.zeros(int(np.prod(mesh.shape)), dtype=np.complex128)
    if len(amps) == 0:
        return out.reshape(mesh.shape)
    iq, ip, vals = amps.iq, amps.ip, amps.values
    change = np.any(iq[1:] != iq[:-1], axis=1)
    starts = np.concatenate([[0], np.flatnonzero(change) + 1])
    group = np.cumsum(np.concatenate([[0], change.astype(np.int64)]))
    qs = iq[starts]
    shifts = (qs * mesh.dq - np.asarray(mesh.domain_lo)) / mesh.dx
    phase = np.ones(len(vals), complex)
    for a in range(d):
        phase *= dft_phase(-ip[:, a], shifts[group, a], N)
    weighted = vals * phase
    res = np.mod(ip, N)
    flat = np.zeros(len(vals), np.int64)
    for a in range(d):
        flat = flat * N + res[:, a]
    batch = max(1, BATCH_BYTES // (16 * N**d))
    radius = mesh.window_radius(r_cut)
    bounds = np.concatenate([starts, [len(vals)]])
    for g0 in range(0, len(qs), batch):
        g1 = min(g0 + batch, len(qs))
        lo, hi = bounds[g0], bounds[g1]
        slot = (group[lo:hi] - g0) * N**d + flat[lo:hi]
        size = (g1 - g0) * N**d
        w = weighted[lo:hi]
        B = np.bincount(slot, weights=w.real, minlength=size) + 1j * np.bincount(slot, weights=w.imag, minlength=size)
        blocks = np.fft.ifftn(B.reshape((g1 - g0,) + (N,) * d), axes=tuple(range(1, d + 1)), norm="forward")
        kernels.tile_blocks(
            out,
            mesh.shape,
            mesh.domain_lo,
            mesh.dx,
            np.ascontiguousarray(qs[g0:g1] * mesh.dq, dtype=np.float64),
            np.ascontiguousarray(blocks.reshape(g1 - g0, -1)),
            N,
            mesh.epsilon,
            radius,
            mesh.weight,
            threads,
        )
    return out.reshape(mesh.shape)


# drivers -----------------------------------------------------------------------


def _timing() -> dict:
    return {k: 0 if k in ("packet_count", "cache_hits") else 0.0 for k in TIMING_KEYS}


def solve_fga(config: ExperimentConfig) -> SolveResult:
    """Decompose, evolve every packet and reconstruct by the direct sum."""
    config.validate()
    mesh, V = config.mesh(), config.make_potential()
    timing = _timing()
    t0 = time.perf_counter()
    u0 = config.make_initial().sample(mesh)
    ens = initial_decompose(u0, mesh, config.tau, r_cut=config.r_cut, threads=config.threads)
    t1 = time.perf_counter()
    ens = evolve(ens, V, config.T_final, config.dt, threads=config.threads)
    t2 = time.perf_counter()
    u = reconstruct_direct(ens, mesh, r_cut=config.r_cut, threads=config.threads)
    t3 = time.perf_counter()
    timing.update(decompose_s=t1 - t0, evolve_s=t2 - t1, reconstruct_s=t3 - t2, total_s=t3 - t0, packet_count=len(ens))
    return SolveResult(u, mesh, timing)


def _unit_segment(iq, ip, V: Potential, T_evo: float, dt: float, pre: PrecomputedLSA, mesh: MeshSpec, threads: int):
    """Evolve unit packets from grid points and split them; returns corners, coefficients and timings."""
    t0 = time.perf_counter()
    st = propagate(iq * mesh.dq, ip * mesh.dp, V, T_evo, dt, threads=threads)
    t1 = time.perf_counter()
    split = split_ensemble(st.Q, st.P, pre, mesh)
    combined = (st.A * np.exp(1j * st.S / mesh.epsilon))[:, None] * split.coeffs
    t2 = time.perf_counter()
    return split.base_q, split.base_p, combined, t1 - t0, t2 - t1


def solve_fggc_multistep(config: ExperimentConfig, T_multi: int | None = None, T_evo: float | None = None) -> SolveResult:
    """Segmented corrected solver with a memoised grid-point flow map.

    Each segment decomposes the current field, looks up (or computes and
    stores) the evolved split of every unit packet, merges ``A0 *
    coefficients`` on the grid and reconstructs with the FFT path.
    """
    if T_multi is not None or T_evo is not None:
        T_multi = config.T_multi if T_multi is None else T_multi
        T_evo = config.T_final / T_multi if T_evo is None else T_evo
        config = config.replace(solver="fggc-multistep", T_multi=int(T_multi), T_evo=T_evo)
    config.validate()
    T_multi, T_evo = config.segments()
    mesh, V = config.mesh(), config.make_potential()
    strategy = named_strategy(config.strategy, mesh.dim)
    pre = precompute(strategy, mesh.cq, mesh.cp, config.rcond)
    memo = FlowMap(mesh.dim, strategy.n)
    timing = _timing()
    per_segment = []
    start = time.perf_counter()
    t = time.perf_counter()
    u = config.make_initial().sample(mesh)
    timing["decompose_s"] += time.perf_counter() - t
    for _ in range(T_multi):
        t = time.perf_counter()
        ens = initial_decompose(u, mesh, config.tau, r_cut=config.r_cut, threads=config.threads)
        timing["decompose_s"] += time.perf_counter() - t
        rows = memo.lookup(ens.iq, ens.ip)
        missing = rows < 0
        hits = int(len(rows) - missing.sum())
        if missing.any():
            bq, bp, cc, te, tl = _unit_segment(
                ens.iq[missing], ens.ip[missing], V, T_evo, config.dt, pre, mesh, config.threads
            )
            rows[missing] = memo.insert(ens.iq[missing], ens.ip[missing], bq, bp, cc)
            timing["evolve_s"] += te
            timing["lsa_s"] += tl
        t = time.perf_counter()
        base_q, base_p, coeffs = memo.rows(rows)
        amps = _contributions(base_q, base_p, coeffs, ens.A, strategy, mesh)
        timing["lsa_s"] += time.perf_counter() - t
        t = time.perf_counter()
        u = reconstruct_fft(amps, mesh, r_cut=config.r_cut, threads=config.threads)
        timing["reconstruct_s"] += time.perf_counter() - t
        timing["packet_count"] += len(ens)
        timing["cache_hits"] += hits
        per_segment.append({"packets": len(ens), "cache_hits": hits, "evolved": int(missing.sum()), "grid_amplitudes": len(amps)})
    timing["total_s"] = time.perf_counter() - start
    return SolveResult(u, mesh, timing, {"segments": per_segment, "memo_size": len(memo)})


def solve_fggc(config: ExperimentConfig) -> SolveResult:
    """Single-segment corrected solver (precomputed pseudo-inverse, FFT reconstruction)."""
    return solve_fggc_multistep(config.replace(solver="fggc-multistep", T_multi=1, T_evo=config.T_final))


def solve(config: ExperimentConfig) -> SolveResult:
    """Dispatch on ``config.solver``."""
    from .tssp import solve_tssp

    config.validate()
    if config.solver == "tssp":
        return solve_tssp(config)
    if config.solver == "fga":
        return solve_fga(config)
    if config.solver == "fggc":
        return solve_fggc(config)
    return solve_fggc_multistep(config)
