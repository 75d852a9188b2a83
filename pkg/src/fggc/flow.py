"""Hamiltonian packet flow with classical RK4.

Each packet carries ``(Q, P, S, dQdz, dPdz, a)`` where ``a`` is the
amplitude factor for unit initial amplitude; the physical amplitude is
``A = A0 * a`` because the amplitude equation is linear in A.  The
variational matrices start at ``dQdz = I`` and ``dPdz = -iI`` so that
``Z = dQdz + i dPdz = 2I``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from ._kernels_py import _potential

# |det Z| below CAUSTIC_RTOL * 2**d aborts the evolution.
CAUSTIC_RTOL = 1e-8

# Relative slack when checking that T / dt is a whole number of steps.
STEP_RTOL = 1e-9

_KINDS = {
    "free": kernels.FREE,
    "harmonic": kernels.HARMONIC,
    "cosine": kernels.COSINE,
    "gaussian_well": kernels.GAUSSIAN_WELL,
}


class CausticError(ArithmeticError):
    """|det Z| fell below the monitor threshold or the state became non-finite."""


@dataclass(frozen=True)
class Potential:
    """Preset potential with analytic value, gradient and Hessian.

    ==============  ==================================  ================
    kind            V(x)                                params
    ==============  ==================================  ================
    free            0                                   ()
    harmonic        omega^2 |x|^2 / 2                   (omega,)
    cosine          amp * sum_i (1 - cos(k x_i))        (amp, k)
    gaussian_well   1 - exp(alpha |x|^2)                (alpha,)
    ==============  ==================================  ================
    """

    kind: str
    params: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown potential {self.kind!r}; choose from {sorted(_KINDS)}")
        object.__setattr__(self, "params", tuple(float(v) for v in self.params))

    @classmethod
    def free(cls) -> "Potential":
        return cls("free")

    @classmethod
    def harmonic(cls, omega: float = 1.0) -> "Potential":
        return cls("harmonic", (omega,))

    @classmethod
    def cosine(cls, amplitude: float = 1.0, wavenumber: float = math.pi) -> "Potential":
        return cls("cosine", (amplitude, wavenumber))

    @classmethod
    def gaussian_well(cls, alpha: float = 1.0) -> "Potential":
        return cls("gaussian_well", (alpha,))

    @classmethod
    def from_dict(cls, spec: dict) -> "Potential":
        kind = spec["kind"]
        params = {k: v for k, v in spec.items() if k != "kind"}
        return getattr(cls, kind)(**params) if params else getattr(cls, kind)()

    @property
    def code(self) -> int:
        return _KINDS[self.kind]

    def _packed(self) -> np.ndarray:
        defaults = {"free": (), "harmonic": (1.0,), "cosine": (1.0, math.pi), "gaussian_well": (1.0,)}
        vals = list(self.params or defaults[self.kind])
        return np.array(vals + [0.0] * (2 - len(vals)), dtype=np.float64)

    def _eval(self, x):
        x = np.asarray(x, dtype=float)
        pts = np.atleast_2d(x) if x.ndim <= 1 else x.reshape(-1, x.shape[-1])
        V, g, H = _potential(self.code, self._packed(), pts)
        lead = x.shape[:-1] if x.ndim > 1 else ()
        if x.ndim <= 1:
            return V[0], g[0], H[0]
        d = x.shape[-1]
        return V.reshape(lead), g.reshape(lead + (d,)), H.reshape(lead + (d, d))

    def value(self, x):
        """V at points of shape (..., d)."""
        return self._eval(x)[0]

    def grad(self, x):
        return self._eval(x)[1]

    def hessian(self, x):
        return self._eval(x)[2]


@dataclass
class FlowState:
    """State of a batch of packets; arrays have a leading packet axis of length M."""

    Q: np.ndarray
    P: np.ndarray
    S: np.ndarray
    A: np.ndarray
    dQdz: np.ndarray
    dPdz: np.ndarray
    min_det: np.ndarray = field(default=None)

    @classmethod
    def initial(cls, q, p, A=None) -> "FlowState":
        q = np.atleast_2d(np.asarray(q, dtype=float))
        p = np.atleast_2d(np.asarray(p, dtype=float))
        M, d = q.shape
        eye = np.tile(np.eye(d, dtype=complex), (M, 1, 1))
        A = np.ones(M, complex) if A is None else np.broadcast_to(np.asarray(A, complex), (M,)).copy()
        return cls(q.copy(), p.copy(), np.zeros(M), A, eye, -1j * eye, np.full(M, 2.0**d))

    @property
    def Z(self) -> np.ndarray:
        return self.dQdz + 1j * self.dPdz

    def scaled(self, A0) -> "FlowState":
        """Same trajectories with the amplitudes multiplied by ``A0``."""
        return replace(self, A=self.A * np.asarray(A0, complex))


def rhs(state: FlowState, V: Potential) -> FlowState:
    """Time derivative of every field of ``state``.

    ``min_det`` of the result is ``|det Z|`` at the current state so callers
    can monitor proximity to singular Z.
    """
    Vq, g, H = _potential(V.code, V._packed(), np.atleast_2d(state.Q))
    dX = state.dPdz
    dY = -H @ state.dQdz
    Z = state.Z
    dZ = dX + 1j * dY
    tr = np.trace(np.linalg.solve(Z, dZ), axis1=-2, axis2=-1)
    return FlowState(
        Q=state.P.copy(),
        P=-g,
        S=0.5 * np.sum(state.P**2, axis=-1) - Vq,
        A=0.5 * state.A * tr,
        dQdz=dX,
        dPdz=dY,
        min_det=np.abs(np.linalg.det(Z)),
    )


def step_count(T: float, dt: float) -> int:
    """Number of steps ``T / dt``; raises if it is not a whole number."""
    if not dt > 0 or not T >= 0:
        raise ValueError(f"need T >= 0 and dt > 0, got T={T}, dt={dt}")
    ratio = T / dt
    n = round(ratio)
    if abs(ratio - n) > STEP_RTOL * max(1.0, ratio):
        raise ValueError(f"T / dt = {ratio!r} is not a whole number of steps")
    return int(n)


def propagate(q, p, V: Potential, T: float, dt: float, *, threads: int = 1, check: bool = True) -> FlowState:
    """Evolve unit-amplitude packets started at ``(q, p)`` for time ``T``."""
    q = np.ascontiguousarray(np.atleast_2d(q), dtype=np.float64)
    p = np.ascontiguousarray(np.atleast_2d(p), dtype=np.float64)
    n = step_count(T, dt)
    Q, P, S, X, Y, a, md = kernels.rk4_flow(q, p, V.code, V._packed(), float(dt), n, int(threads))
    state = FlowState(Q, P, S, a, X, Y, md)
    if check:
        check_caustic(state)
    return state


def check_caustic(state: FlowState) -> None:
    d = state.Q.shape[-1]
    md = state.min_det
    if md is None or md.size == 0:
        return
    bad = ~(md >= CAUSTIC_RTOL * 2.0**d)
    if bad.any():
        j = int(np.flatnonzero(bad)[0])
        what = "non-finite state" if md[j] < 0 or not np.isfinite(md[j]) else f"|det Z| = {md[j]:.3e}"
        raise CausticError(
            f"{int(bad.sum())} packet(s) left the safe region ({what} for packet {j}); "
            "reduce dt or T, or check the potential"
        )


def evolve(ensemble, V: Potential, T: float, dt: float, *, threads: int = 1):
    """Advance every packet of an ensemble by ``T``; returns a new ensemble.

    The ensemble must be fresh (Z = 2I), since Z alone does not determine
    the variational matrices needed to continue an earlier flow.
    """
    d = ensemble.mesh.dim
    if ensemble.Z is not None and not np.allclose(ensemble.Z, 2 * np.eye(d)):
        raise ValueError("evolve needs packets with Z = 2I; re-decompose before evolving again")
    st = propagate(ensemble.Q, ensemble.P, V, T, dt, threads=threads)
    return ensemble.with_state(Q=st.Q, P=st.P, S=ensemble.S + st.S, A=ensemble.A * st.A, Z=st.Z)
