import math

import numpy as np
import pytest

from fggc.config import ExperimentConfig
from fggc.core import MeshSpec
from fggc.decompose import InitialCondition, grid_points
from fggc.flow import Potential
from fggc.metrics import l2_error, l2_norm
from fggc.tssp import SpectralState, run_tssp, solve_tssp, tssp_step, wavenumbers

MESH = MeshSpec.recommended(2.0**-6, 1)


def test_wavenumbers():
    k = wavenumbers(MESH)[0]
    assert len(k) == MESH.shape[0]
    assert k[1] == pytest.approx(2 * math.pi / (MESH.shape[0] * MESH.dx))


def test_plane_wave_is_exact():
    eps = MESH.epsilon
    k = wavenumbers(MESH)[0][7]
    p = eps * k
    x = grid_points(MESH)[..., 0]
    t = 0.37
    u = run_tssp(np.exp(1j * p * x / eps), MESH, Potential.free(), t, 1e-3)
    exact = np.exp(1j * (p * x - 0.5 * p * p * t) / eps)
    assert np.max(np.abs(u - exact)) <= 1e-11


class _Constant:
    def __init__(self, c):
        self.c = c

    def value(self, x):
        return np.full(x.shape[:-1], self.c)


def test_constant_potential_is_a_global_phase():
    c, T, dt = 0.25, 0.2, 1e-3
    u0 = InitialCondition.gaussian().sample(MESH)
    free = run_tssp(u0, MESH, Potential.free(), T, dt)
    got = run_tssp(u0, MESH, _Constant(c), T, dt)
    assert np.max(np.abs(got - free * np.exp(-1j * c * T / MESH.epsilon))) <= 1e-12
    assert np.max(np.abs(np.abs(got) - np.abs(free))) <= 1e-13


def test_mass_is_conserved():
    u0 = InitialCondition.gaussian().sample(MESH)
    s = SpectralState.from_field(u0, MESH)
    m0 = l2_norm(u0, MESH)
    for _ in range(50):
        s = tssp_step(s, Potential.cosine(), 1e-3)
        assert abs(l2_norm(s.field, MESH) - m0) <= 1e-12


def test_coherent_state_follows_classical_path():
    eps = MESH.epsilon
    q, p, T = 0.3, 0.5, 0.8
    u0 = InitialCondition.gaussian(1 / (2 * eps), q, p).sample(MESH)
    u = run_tssp(u0, MESH, Potential.harmonic(), T, 1e-4)
    x = grid_points(MESH)[..., 0]
    rho = np.abs(u) ** 2
    centre = np.sum(x * rho) / np.sum(rho)
    assert abs(centre - (q * math.cos(T) + p * math.sin(T))) <= 1e-6


def test_second_order():
    u0 = InitialCondition.gaussian().sample(MESH)
    ref = run_tssp(u0, MESH, Potential.cosine(), 0.4, 1e-4)
    e1 = l2_error(run_tssp(u0, MESH, Potential.cosine(), 0.4, 4e-3), ref, MESH)[1]
    e2 = l2_error(run_tssp(u0, MESH, Potential.cosine(), 0.4, 2e-3), ref, MESH)[1]
    assert 3.5 <= e1 / e2 <= 4.5


def test_time_reversal():
    u0 = InitialCondition.gaussian().sample(MESH)
    s = SpectralState.from_field(u0, MESH)
    for _ in range(20):
        s = tssp_step(s, Potential.cosine(), 1e-3)
    for _ in range(20):
        s = tssp_step(s, Potential.cosine(), -1e-3)
    assert l2_error(s.field, u0, MESH)[1] <= 1e-12


def test_shape_checks():
    with pytest.raises(ValueError):
        SpectralState.from_field(np.zeros(5), MESH)
    with pytest.raises(ValueError):
        run_tssp(np.zeros(5), MESH, Potential.free(), 0.1, 1e-3)


def test_step_count_must_be_integral():
    with pytest.raises(ValueError):
        run_tssp(np.zeros(MESH.shape), MESH, Potential.free(), 0.1, 3e-2)


def test_solve_tssp_reports_time():
    res = solve_tssp(ExperimentConfig(solver="tssp", T_final=0.01, dt=1e-3))
    assert res.timing["total_s"] > 0
    assert res.field.shape == res.mesh.shape
