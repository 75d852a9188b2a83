import math

import numpy as np
import pytest
from hypothesis import example, given
from hypothesis import strategies as st

from fggc.core import MeshSpec
from fggc.decompose import (
    EmptyEnsembleError,
    InitialCondition,
    PacketEnsemble,
    dft_phase,
    grid_points,
    initial_decompose,
    transform_u0,
)
from fggc.metrics import l2_error, l2_norm
from fggc.packets import overlap
from fggc.reconstruct import reconstruct_direct

SMALL = MeshSpec.recommended(2.0**-4, 1)


def _brute(u0, iq, ip, mesh):
    """dx^d sum_y u0(y) exp(-i p.(y-q)/eps - |y-q|^2/(2 eps)) without any window."""
    y = grid_points(mesh) - iq * mesh.dq
    p = ip * mesh.dp
    eps = mesh.epsilon
    kern = np.exp(-1j * (y @ p) / eps - np.sum(y * y, -1) / (2 * eps))
    return mesh.dx**mesh.dim * np.sum(u0 * kern)


class TestTransform:
    @pytest.mark.parametrize("mesh", [SMALL, MeshSpec.recommended(2.0**-6, 1), MeshSpec.recommended(2.0**-4, 2, domain=(-1.0, 1.0))], ids=["1d-4", "1d-6", "2d-4"])
    def test_matches_direct_sum(self, mesh, rng):
        u0 = InitialCondition.gaussian(32.0, 0.1, 0.8).sample(mesh) * (1 + 0.3 * rng.normal(size=mesh.shape))
        for _ in range(3):
            iq = rng.integers(-4, 5, mesh.dim)
            ip, uhat = transform_u0(u0, iq * mesh.dq, mesh)
            sel = rng.choice(len(ip), 8, replace=False)
            ref = np.array([_brute(u0, iq, ip[k], mesh) for k in sel])
            scale = np.abs(uhat).max()
            assert np.max(np.abs(uhat[sel] - ref)) <= 1e-12 * scale

    def test_gaussian_closed_form(self):
        mesh = MeshSpec.recommended(2.0**-6, 1)
        eps = mesh.epsilon
        p0 = 40 * mesh.dp
        u0 = np.exp(1j * p0 * mesh.axis(0) / eps - mesh.axis(0) ** 2 / (2 * eps))
        ip, uhat = transform_u0(u0, 0.0, mesh)
        exact = overlap(np.zeros((len(ip), 1)), np.full((len(ip), 1), p0), np.zeros((len(ip), 1)), ip * mesh.dp, eps)
        assert np.max(np.abs(uhat - exact)) <= 1e-12 * np.abs(exact).max()

    def test_zero_field(self):
        ip, uhat = transform_u0(np.zeros(SMALL.shape, complex), 0.0, SMALL)
        assert not np.any(uhat)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            transform_u0(np.zeros(7, complex), 0.0, SMALL)

    def test_momentum_window_is_centred_on_peak(self):
        mesh = MeshSpec.recommended(2.0**-6, 1)
        u0 = InitialCondition.gaussian(32.0, 0.0, 1.0).sample(mesh)
        ip, uhat = transform_u0(u0, 0.0, mesh)
        assert len(np.unique(ip)) == mesh.n_fold
        peak = ip[np.argmax(np.abs(uhat)), 0]
        assert peak == round(1.0 / mesh.dp)
        assert abs(peak - np.median(ip)) <= 1


class TestPhase:
    @given(st.integers(-10**6, 10**6), st.integers(-10**4, 10**4), st.integers(1, 4096))
    def test_integer_shifts_exact(self, m, s, n):
        got = dft_phase(np.array([m]), np.array([float(s)]), n)[0]
        ref = np.exp(2j * math.pi * ((m * s) % n) / n)
        assert abs(got - ref) <= 1e-15

    @given(st.integers(-1000, 1000), st.floats(-100, 100), st.integers(1, 512))
    @example(2, 1.5e-10, 1)
    def test_fractional_shifts(self, m, s, n):
        got = dft_phase(np.array([m]), np.array([s]), n)[0]
        err = abs(got - np.exp(2j * math.pi * m * s / n))
        if abs(s - round(s)) < 1e-9:
            # near-integer shifts are snapped, moving the phase by at most 2 pi |m| 1e-9 / n
            assert err <= 2 * math.pi * abs(m) * 1e-9 / n + 1e-12
        else:
            assert err <= 1e-9 * (1 + abs(m * s))


class TestInitialDecompose:
    def test_amplitude_formula(self):
        mesh = MeshSpec.recommended(2.0**-6, 2, domain=(-1.0, 1.0))
        u0 = InitialCondition.gaussian(32.0, 0.0, 1.0).sample(mesh)
        ens = initial_decompose(u0, mesh)
        k = int(np.argmax(np.abs(ens.A)))
        _, uhat = transform_u0(u0, ens.Q[k], mesh)
        assert abs(ens.A[k]) == pytest.approx(2.0 * np.abs(uhat).max(), rel=1e-14)

    def test_fresh_state(self):
        mesh = MeshSpec.recommended(2.0**-6, 1)
        ens = initial_decompose(InitialCondition.gaussian().sample(mesh), mesh)
        np.testing.assert_array_equal(ens.Q, ens.iq * mesh.dq)
        np.testing.assert_array_equal(ens.P, ens.ip * mesh.dp)
        assert not np.any(ens.S) and ens.Z is None
        np.testing.assert_array_equal(ens.Z_matrices()[0], 2 * np.eye(1))
        keys = np.concatenate([ens.iq, ens.ip], axis=1)
        assert len(np.unique(keys, axis=0)) == len(ens)

    def test_threshold(self):
        mesh = MeshSpec.recommended(2.0**-6, 1)
        tau = 1e-4
        ens = initial_decompose(InitialCondition.gaussian().sample(mesh), mesh, tau)
        assert np.abs(ens.A).min() >= tau * np.abs(ens.A).max()
        full = initial_decompose(InitialCondition.gaussian().sample(mesh), mesh, 1e-8)
        assert len(full) > len(ens)

    def test_no_truncation_keeps_full_grid(self):
        u0 = InitialCondition.gaussian(8.0).sample(SMALL)
        ens = initial_decompose(u0, SMALL, tau=0.0)
        lo, hi = SMALL.q_index_range(0)
        assert len(ens) == (hi - lo) * SMALL.n_fold

    def test_zero_field_is_an_error(self):
        with pytest.raises(EmptyEnsembleError):
            initial_decompose(np.zeros(SMALL.shape, complex), SMALL)

    def test_bad_tau(self):
        with pytest.raises(ValueError):
            initial_decompose(np.ones(SMALL.shape, complex), SMALL, tau=1.0)

    def test_peak_momentum_follows_initial_phase(self):
        mesh = MeshSpec.recommended(2.0**-6, 1)
        ens = initial_decompose(InitialCondition.gaussian(32.0, 0.0, 1.0).sample(mesh), mesh)
        mass = np.abs(ens.A)
        for iq in np.unique(ens.iq[:, 0]):
            rows = ens.iq[:, 0] == iq
            if mass[rows].max() < 1e-3 * mass.max():
                continue
            best = ens.ip[rows][np.argmax(mass[rows]), 0]
            assert abs(best * mesh.dp - 1.0) <= mesh.dp

    def test_linearity(self):
        # on this mesh q/dx is an integer, so amplitudes are n_fold-periodic in ip and
        # differently centred momentum windows can be compared by residue
        N = SMALL.n_fold
        u = InitialCondition.gaussian(8.0, 0.2, 0.5).sample(SMALL)
        v = InitialCondition.gaussian(16.0, -0.3, -0.7).sample(SMALL)
        a, b = 0.3 - 1.1j, 2.0 + 0.5j

        def table(ens):
            return {(int(q), int(p) % N): A for q, p, A in zip(ens.iq[:, 0], ens.ip[:, 0], ens.A)}

        tu = table(initial_decompose(u, SMALL, tau=0.0))
        tv = table(initial_decompose(v, SMALL, tau=0.0))
        tw = table(initial_decompose(a * u + b * v, SMALL, tau=0.0))
        assert tw.keys() == tu.keys() == tv.keys()
        scale = max(abs(x) for x in tw.values())
        assert max(abs(tw[k] - a * tu[k] - b * tv[k]) for k in tw) <= 1e-13 * scale

    def test_window_radius_insensitivity(self):
        mesh = MeshSpec.recommended(2.0**-6, 1)
        u0 = InitialCondition.gaussian().sample(mesh)
        a = initial_decompose(u0, mesh, r_cut=9.0)
        b = initial_decompose(u0, mesh, r_cut=12.0)
        np.testing.assert_array_equal(a.iq, b.iq)
        np.testing.assert_array_equal(a.ip, b.ip)
        assert np.max(np.abs(a.A - b.A)) <= 1e-14 * np.abs(a.A).max()

    def test_thread_count_does_not_change_result(self):
        mesh = MeshSpec.recommended(2.0**-6, 2, domain=(-1.0, 1.0))
        u0 = InitialCondition.gaussian(32.0, 0.0, 1.0).sample(mesh)
        a = initial_decompose(u0, mesh, threads=1)
        b = initial_decompose(u0, mesh, threads=3)
        np.testing.assert_array_equal(a.A, b.A)

    @pytest.mark.parametrize("k", [6, 8])
    def test_round_trip(self, k):
        mesh = MeshSpec.recommended(2.0**-k, 1)
        u0 = InitialCondition.gaussian().sample(mesh)
        ens = initial_decompose(u0, mesh)
        assert l2_error(reconstruct_direct(ens, mesh), u0, mesh)[1] <= 1e-3


class TestInitialCondition:
    def test_gaussian_normalised(self):
        for d in (1, 2):
            mesh = MeshSpec.recommended(2.0**-4, d)
            assert l2_norm(InitialCondition.gaussian().sample(mesh), mesh) == pytest.approx(1.0, rel=1e-10)

    def test_wkb(self):
        mesh = MeshSpec.recommended(2.0**-4, 1)
        n0 = lambda x: np.exp(-np.sum(x * x, -1))
        S0 = lambda x: np.sin(x[..., 0])
        u = InitialCondition.wkb(n0, S0).sample(mesh)
        x = grid_points(mesh)
        np.testing.assert_allclose(u, np.sqrt(n0(x)) * np.exp(1j * S0(x) / mesh.epsilon), rtol=1e-15)

    def test_samples(self):
        mesh = MeshSpec.recommended(2.0**-4, 1)
        u = np.arange(mesh.shape[0]) * (1 + 1j)
        np.testing.assert_array_equal(InitialCondition.from_samples(u).sample(mesh), u)
        with pytest.raises(ValueError):
            InitialCondition.from_samples(u[:-1]).sample(mesh)

    def test_from_dict(self):
        ic = InitialCondition.from_dict({"kind": "gaussian", "alpha": 16.0, "p0": 0.5})
        assert ic.params["alpha"] == 16.0
        with pytest.raises(ValueError):
            InitialCondition.from_dict({"kind": "wkb"})


def test_ensemble_iteration():
    mesh = MeshSpec.recommended(2.0**-6, 1)
    ens = PacketEnsemble(np.array([[1], [2]]), np.array([[3], [4]]), np.array([1.0, 2j]), mesh)
    items = list(ens)
    assert items[1][0].iq == (2,) and items[1][0].ip == (4,)
    assert items[1][1].A == 2j and items[1][1].params.Q[0] == 2 * mesh.dq
    assert ens.weight == mesh.weight
