"""Mesh geometry, neighbor strategies and phase-space index arithmetic.

All phase-space grids are integer lattices: a position center ``q`` is
``iq * dq`` and a momentum center ``p`` is ``ip * dp``.  Spatial grids are the
periodic boxes ``[lo, hi)`` sampled at ``lo + j * dx``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np

# Named strategies use these per-axis shift sets.
SHIFT_SETS = {2: (0, 1), 4: (-1, 0, 1, 2)}

# Floor guard: t - floor(t) this close to 1 is treated as the next grid point.
FLOOR_GUARD = 1e-12

# Relative slack allowed when checking that a ratio is an integer.
INTEGER_RTOL = 1e-9


class MeshError(ValueError):
    """Raised when a mesh configuration violates its invariants."""


def _as_vec(x, dim: int, name: str) -> tuple[float, ...]:
    arr = np.broadcast_to(np.asarray(x, dtype=float), (dim,))
    return tuple(float(v) for v in arr)


def _near_integer(x: float) -> int | None:
    n = round(x)
    if n != 0 and abs(x - n) <= INTEGER_RTOL * abs(x):
        return int(n)
    return None


@dataclass(frozen=True)
class MeshSpec:
    """Spatial and phase-space discretization for one value of epsilon.

    ``dq`` and ``dp`` are derived from ``cq`` and ``cp`` so that the
    epsilon-scaled mesh relation holds exactly as stored.  ``n_fold`` is
    filled in by :func:`validate_mesh`.
    """

    epsilon: float
    dim: int
    dx: float
    cq: float
    cp: float
    domain_lo: tuple[float, ...]
    domain_hi: tuple[float, ...]
    dt: float = 1e-4
    n_fold: int | None = None
    dq: float = field(init=False)
    dp: float = field(init=False)
    nx: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "domain_lo", _as_vec(self.domain_lo, self.dim, "domain_lo"))
        object.__setattr__(self, "domain_hi", _as_vec(self.domain_hi, self.dim, "domain_hi"))
        root = math.sqrt(self.epsilon) if self.epsilon > 0 else float("nan")
        object.__setattr__(self, "dq", self.cq * root)
        object.__setattr__(self, "dp", self.cp * root)
        nx = []
        for lo, hi in zip(self.domain_lo, self.domain_hi):
            ratio = (hi - lo) / self.dx if self.dx > 0 else float("nan")
            n = round(ratio) if math.isfinite(ratio) else 0
            nx.append(int(n))
        object.__setattr__(self, "nx", tuple(nx))

    @classmethod
    def recommended(
        cls,
        epsilon: float,
        dim: int = 1,
        *,
        cq: float = 0.5,
        cp: float = math.pi / 8,
        domain: tuple[float, float] = (-2.0, 2.0),
        dx: float | None = None,
        dt: float = 1e-4,
    ) -> "MeshSpec":
        """Mesh with dx = epsilon, dq = sqrt(eps)/2, dp = pi*sqrt(eps)/8 on [-2, 2]^d."""
        return validate_mesh(
            cls(
                epsilon=epsilon,
                dim=dim,
                dx=epsilon if dx is None else dx,
                cq=cq,
                cp=cp,
                domain_lo=(domain[0],) * dim,
                domain_hi=(domain[1],) * dim,
                dt=dt,
            )
        )

    @property
    def weight(self) -> float:
        """Prefactor (dq*dp)^d / (2*pi*eps)^(3d/2) of the discrete packet sum."""
        d = self.dim
        return (self.dq * self.dp) ** d / (2 * math.pi * self.epsilon) ** (1.5 * d)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.nx

    def axis(self, i: int) -> np.ndarray:
        return self.domain_lo[i] + self.dx * np.arange(self.nx[i])

    def axes(self) -> list[np.ndarray]:
        return [self.axis(i) for i in range(self.dim)]

    def grid(self) -> list[np.ndarray]:
        return np.meshgrid(*self.axes(), indexing="ij")

    def window_radius(self, r_cut: float) -> float:
        return r_cut * math.sqrt(self.epsilon)

    def q_index_range(self, axis: int) -> tuple[int, int]:
        """Inclusive-exclusive range of q indices whose centers lie in the box."""
        lo = math.ceil(self.domain_lo[axis] / self.dq - FLOOR_GUARD)
        hi = math.ceil(self.domain_hi[axis] / self.dq - FLOOR_GUARD)
        return lo, hi


def validate_mesh(spec: MeshSpec) -> MeshSpec:
    """Check the mesh invariants and record ``n_fold = 2*pi*eps/(dp*dx)``.

    Raises :class:`MeshError` for non-positive steps, unsupported dimensions,
    a box that is not a whole number of ``dx`` steps, or a non-integer
    ``n_fold`` (the per-q momentum sums are then not exact DFTs).
    """
    if spec.dim not in (1, 2, 3):
        raise MeshError(f"dim must be 1, 2 or 3, got {spec.dim}")
    for name in ("epsilon", "dx", "cq", "cp", "dt"):
        value = getattr(spec, name)
        if not (math.isfinite(value) and value > 0):
            raise MeshError(f"{name} must be positive and finite, got {value}")
    for i, (lo, hi) in enumerate(zip(spec.domain_lo, spec.domain_hi)):
        if not hi > lo:
            raise MeshError(f"empty domain on axis {i}: [{lo}, {hi})")
        if _near_integer((hi - lo) / spec.dx) is None:
            raise MeshError(f"domain extent on axis {i} is not a multiple of dx={spec.dx}")
    ratio = 2 * math.pi * spec.epsilon / (spec.dp * spec.dx)
    n_fold = _near_integer(ratio)
    if n_fold is None or n_fold < 1:
        raise MeshError(
            f"2*pi*eps/(dp*dx) = {ratio!r} is not a positive integer; "
            "momentum sums would not be exact DFTs"
        )
    return replace(spec, n_fold=n_fold)


class PhaseIndex(NamedTuple):
    """Integer lattice coordinates of an on-grid phase-space point."""

    iq: tuple[int, ...]
    ip: tuple[int, ...]

    def coords(self, mesh: MeshSpec) -> tuple[np.ndarray, np.ndarray]:
        return np.asarray(self.iq) * mesh.dq, np.asarray(self.ip) * mesh.dp


@dataclass(frozen=True)
class NeighborStrategy:
    """Integer shift sequences (delta q^(k), delta p^(k)) for k = 0..n-1."""

    name: str
    shifts_q: np.ndarray
    shifts_p: np.ndarray

    def __post_init__(self):
        sq = np.asarray(self.shifts_q, dtype=np.int64)
        sp = np.asarray(self.shifts_p, dtype=np.int64)
        if sq.ndim != 2 or sq.shape != sp.shape:
            raise ValueError("shifts_q and shifts_p must both have shape (n, d)")
        pairs = {tuple(a) + tuple(b) for a, b in zip(sq, sp)}
        if len(pairs) != len(sq):
            raise ValueError("neighbor shifts must be distinct")
        sq.setflags(write=False)
        sp.setflags(write=False)
        object.__setattr__(self, "shifts_q", sq)
        object.__setattr__(self, "shifts_p", sp)

    @property
    def n(self) -> int:
        return len(self.shifts_q)

    @property
    def dim(self) -> int:
        return self.shifts_q.shape[1]


def named_strategy(name: str, dim: int = 1) -> NeighborStrategy:
    """Tensor-product strategy ``QmPn`` with m q-shifts and n p-shifts per axis.

    Q2/P2 use shifts {0, 1}; Q4/P4 use {-1, 0, 1, 2}.  Neighbors are ordered
    with the q multi-index outermost, so ``n = (m * n_p) ** dim``.
    """
    key = name.upper()
    try:
        m = int(key[1 : key.index("P")])
        n = int(key[key.index("P") + 1 :])
        qset, pset = SHIFT_SETS[m], SHIFT_SETS[n]
    except (ValueError, KeyError):
        raise ValueError(f"unknown neighbor strategy {name!r}") from None
    if not key.startswith("Q"):
        raise ValueError(f"unknown neighbor strategy {name!r}")
    qs = list(itertools.product(qset, repeat=dim))
    ps = list(itertools.product(pset, repeat=dim))
    shifts_q = [a for a in qs for _ in ps]
    shifts_p = [b for _ in qs for b in ps]
    return NeighborStrategy(key, np.array(shifts_q), np.array(shifts_p))


STRATEGY_NAMES = ("Q2P2", "Q4P2", "Q2P4", "Q4P4")


class FracDecomp(NamedTuple):
    int_q: np.ndarray
    int_p: np.ndarray
    frac_q: np.ndarray
    frac_p: np.ndarray


def floor_index(values, step: float) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(i, r)`` with ``values = (i + r) * step`` and ``0 <= r < 1``.

    Quotients within ``FLOOR_GUARD`` below the next integer are rounded up so
    on-grid inputs never produce ``r`` that is almost 1.
    """
    t = np.asarray(values, dtype=float) / step
    i = np.floor(t)
    r = t - i
    bump = r >= 1.0 - FLOOR_GUARD
    i = np.where(bump, i + 1, i)
    r = np.where(bump, 0.0, r)
    return i.astype(np.int64), r


def frac_decompose(Q, P, spec: MeshSpec) -> FracDecomp:
    iq, rq = floor_index(Q, spec.dq)
    ip, rp = floor_index(P, spec.dp)
    return FracDecomp(iq * spec.dq, ip * spec.dp, rq * spec.dq, rp * spec.dp)


def neighbor_map(Q, P, k: int, strategy: NeighborStrategy, spec: MeshSpec):
    """The k-th on-grid neighbor (0-based) of the phase-space point (Q, P)."""
    if not 0 <= k < strategy.n:
        raise IndexError(f"neighbor index {k} out of range for {strategy.n} neighbors")
    iq, _ = floor_index(Q, spec.dq)
    ip, _ = floor_index(P, spec.dp)
    return (iq + strategy.shifts_q[k]) * spec.dq, (ip + strategy.shifts_p[k]) * spec.dp


def neighbor_indices(Q, P, strategy: NeighborStrategy, spec: MeshSpec) -> list[PhaseIndex]:
    """All n neighbor lattice indices of one point, in strategy order."""
    iq, _ = floor_index(np.atleast_1d(Q), spec.dq)
    ip, _ = floor_index(np.atleast_1d(P), spec.dp)
    return [
        PhaseIndex(tuple(int(v) for v in iq + dq), tuple(int(v) for v in ip + dp))
        for dq, dp in zip(strategy.shifts_q, strategy.shifts_p)
    ]


def window_bounds(center, lo: float, dx: float, n: int, radius: float) -> tuple[np.ndarray, np.ndarray]:
    """First and last grid index within ``radius`` of ``center``, clipped to [0, n-1].

    Empty windows come back with ``first > last``.
    """
    c = np.asarray(center, dtype=float)
    first = np.ceil((c - radius - lo) / dx).astype(np.int64)
    last = np.floor((c + radius - lo) / dx).astype(np.int64)
    return np.maximum(first, 0), np.minimum(last, n - 1)


def lattice_points(ranges: Sequence[tuple[int, int]]) -> np.ndarray:
    """All integer points of a box given per-axis [lo, hi) ranges, shape (K, d)."""
    axes = [np.arange(lo, hi) for lo, hi in ranges]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1).astype(np.int64)
