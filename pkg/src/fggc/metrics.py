"""Grid error norms and JSON error reports."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .core import MeshSpec


def _check(a, b, mesh: MeshSpec):
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.shape != tuple(mesh.shape):
        raise ValueError(f"grid mismatch: {a.shape} vs {b.shape} on mesh {mesh.shape}")
    return a, b


def l2_norm(u, mesh: MeshSpec) -> float:
    """Riemann-sum L2 norm ``sqrt(dx^d sum |u|^2)``."""
    return math.sqrt(mesh.dx**mesh.dim * float(np.sum(np.abs(u) ** 2)))


def l2_error(a, b, mesh: MeshSpec) -> tuple[float, float]:
    """Absolute and relative (to ``b``) discrete L2 error."""
    a, b = _check(a, b, mesh)
    err = l2_norm(a - b, mesh)
    ref = l2_norm(b, mesh)
    return err, (err / ref if ref > 0 else (0.0 if err == 0 else math.inf))


def _h1_sq(u, mesh: MeshSpec) -> float:
    uh = np.fft.fftn(u)
    ks = np.meshgrid(*[2 * np.pi * np.fft.fftfreq(n, mesh.dx) for n in mesh.shape], indexing="ij")
    grad_sq = 0.0
    for k in ks:
        grad_sq += float(np.sum(np.abs(np.fft.ifftn(1j * k * uh)) ** 2))
    return mesh.dx**mesh.dim * (float(np.sum(np.abs(u) ** 2)) + grad_sq)


def h1_error(a, b, mesh: MeshSpec) -> float:
    """Relative H1 error ``||a-b||_H1 / ||b||_H1`` with spectral gradients on the periodic box."""
    a, b = _check(a, b, mesh)
    ref = _h1_sq(b, mesh)
    err = _h1_sq(a - b, mesh)
    if ref == 0:
        return 0.0 if err == 0 else math.inf
    return math.sqrt(err / ref)


@dataclass(frozen=True)
class ErrorReport:
    l2_abs: float
    l2_rel: float
    h1_rel: float | None
    reference: str
    candidate: str
    config_digest: str

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def compare(candidate, reference, mesh: MeshSpec, *, labels=("candidate", "reference"), digest: str = "", h1: bool = True) -> ErrorReport:
    l2_abs, l2_rel = l2_error(candidate, reference, mesh)
    return ErrorReport(
        l2_abs=l2_abs,
        l2_rel=l2_rel,
        h1_rel=h1_error(candidate, reference, mesh) if h1 else None,
        reference=labels[1],
        candidate=labels[0],
        config_digest=digest,
    )
