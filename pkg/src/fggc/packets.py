"""Frozen Gaussian wave-packets and their closed-form inner products.

A packet is ``G(x; Q, P) = exp(i P.(x-Q)/eps - |x-Q|^2/(2 eps))``.  Inner
products conjugate the *second* argument::

    <g, h> = integral of g(x) * conj(h(x)) dx

and every Gram matrix in the package is built with this convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GaussianParams:
    Q: np.ndarray
    P: np.ndarray
    epsilon: float

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        Q = np.atleast_1d(np.asarray(self.Q, dtype=float))
        P = np.atleast_1d(np.asarray(self.P, dtype=float))
        if Q.shape != P.shape or Q.ndim != 1:
            raise ValueError("Q and P must be vectors of equal length")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "P", P)

    @property
    def dim(self) -> int:
        return self.Q.shape[0]


@dataclass(frozen=True)
class WavePacket:
    """One carrier of the ensemble: centers, amplitude A, action S and Z = d_z(Q + iP)."""

    params: GaussianParams
    A: complex
    S: float
    Z: np.ndarray


def _same_eps(g: GaussianParams, h: GaussianParams) -> float:
    if g.epsilon != h.epsilon:
        raise ValueError(f"mismatched epsilon: {g.epsilon} vs {h.epsilon}")
    return g.epsilon


def eval_packet(g: GaussianParams, x) -> np.ndarray | complex:
    """Evaluate G at points ``x`` of shape (..., d) (or a bare d-vector)."""
    x = np.asarray(x, dtype=float)
    dx = x - g.Q
    val = np.exp(1j * (dx @ g.P) / g.epsilon - np.sum(dx * dx, axis=-1) / (2 * g.epsilon))
    return val[()] if np.ndim(val) == 0 else val


def overlap(Qa, Pa, Qb, Pb, epsilon: float) -> np.ndarray:
    """Vectorized ``<G(Qa,Pa), G(Qb,Pb)>``; coordinates broadcast with last axis d."""
    Qa, Pa, Qb, Pb = (np.asarray(v, dtype=float) for v in (Qa, Pa, Qb, Pb))
    d = np.shape(Qa)[-1]
    dq = Qb - Qa
    dp = Pb - Pa
    expo = (
        -np.sum(dq * dq, axis=-1) / (4 * epsilon)
        - np.sum(dp * dp, axis=-1) / (4 * epsilon)
        + 0.5j * np.sum(dq * (Pb + Pa), axis=-1) / epsilon
    )
    return (math.pi * epsilon) ** (d / 2) * np.exp(expo)


def grad_overlap(Qa, Pa, Qb, Pb, epsilon: float) -> np.ndarray:
    """Vectorized ``<grad G(Qa,Pa), grad G(Qb,Pb)>`` summed over axes.

    Uses ``grad G = (iP - (x-Q))/eps * G`` and the first two moments of the
    complex Gaussian weight ``Ga * conj(Gb)``, whose mean is
    ``(Qa+Qb)/2 + i(Pa-Pb)/2`` and whose variance is ``eps/2`` per axis.
    """
    Qa, Pa, Qb, Pb = (np.asarray(v, dtype=float) for v in (Qa, Pa, Qb, Pb))
    mean = 0.5 * (Qa + Qb) + 0.5j * (Pa - Pb)
    a = Qa + 1j * Pa
    b = Qb - 1j * Pb
    per_axis = a * b - (a + b) * mean + mean * mean + epsilon / 2
    return overlap(Qa, Pa, Qb, Pb, epsilon) * np.sum(per_axis, axis=-1) / epsilon**2


def inner_product(g: GaussianParams, h: GaussianParams) -> complex:
    eps = _same_eps(g, h)
    return complex(overlap(g.Q, g.P, h.Q, h.P, eps))


def grad_inner_product(g: GaussianParams, h: GaussianParams) -> complex:
    eps = _same_eps(g, h)
    return complex(grad_overlap(g.Q, g.P, h.Q, h.P, eps))


def l2_norm(g: GaussianParams) -> float:
    return (math.pi * g.epsilon) ** (g.dim / 4)


def h1_norm(g: GaussianParams) -> float:
    eps, d = g.epsilon, g.dim
    return math.sqrt((math.pi * eps) ** (d / 2) * (1 + float(g.P @ g.P) / eps**2 + d / (2 * eps)))
