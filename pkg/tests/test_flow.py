import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fggc.core import MeshSpec
from fggc.decompose import PacketEnsemble
from fggc.flow import (
    CAUSTIC_RTOL,
    CausticError,
    FlowState,
    Potential,
    check_caustic,
    evolve,
    propagate,
    rhs,
    step_count,
)
from oracles import free_flow as _free_exact
from oracles import harmonic_flow as _harmonic_exact

POTENTIALS = [Potential.free(), Potential.harmonic(), Potential.cosine(), Potential.gaussian_well(), Potential.harmonic(1.7)]


class TestPotential:
    @pytest.mark.parametrize("V", POTENTIALS, ids=lambda v: v.kind)
    def test_derivatives_by_finite_differences(self, V, rng):
        x = rng.uniform(-0.8, 0.8, (6, 2))
        h = 1e-6
        for i in range(2):
            e = np.zeros(2)
            e[i] = h
            fd = (V.value(x + e) - V.value(x - e)) / (2 * h)
            np.testing.assert_allclose(V.grad(x)[:, i], fd, rtol=1e-6, atol=1e-8)
            fdg = (V.grad(x + e) - V.grad(x - e)) / (2 * h)
            np.testing.assert_allclose(V.hessian(x)[:, :, i], fdg, rtol=1e-6, atol=1e-8)

    def test_presets(self):
        x = np.array([[0.3, -0.4]])
        assert Potential.harmonic().value(x)[0] == pytest.approx(0.125)
        assert Potential.cosine().value(np.array([0.5])) == pytest.approx(1 - math.cos(math.pi / 2))
        assert Potential.gaussian_well().value(x)[0] == pytest.approx(1 - math.exp(0.25))
        assert Potential.free().value(x)[0] == 0.0

    def test_from_dict(self):
        assert Potential.from_dict({"kind": "harmonic", "omega": 2.0}) == Potential.harmonic(2.0)
        assert Potential.from_dict({"kind": "cosine"}) == Potential.cosine()
        with pytest.raises(ValueError):
            Potential("quartic")


class TestAnalytic:
    @pytest.mark.parametrize("d", [1, 2, 3])
    @pytest.mark.parametrize("name,V,exact", [("free", Potential.free(), _free_exact), ("harmonic", Potential.harmonic(), _harmonic_exact)])
    def test_closed_form(self, d, name, V, exact, rng):
        q = rng.uniform(-1, 1, (5, d))
        p = rng.uniform(-1, 1, (5, d))
        st_ = propagate(q, p, V, 0.8, 1e-4)
        Q, P, S, Z, A = exact(q, p, 0.8)
        np.testing.assert_allclose(st_.Q, Q, atol=1e-10)
        np.testing.assert_allclose(st_.P, P, atol=1e-10)
        np.testing.assert_allclose(st_.S, S, atol=1e-10)
        np.testing.assert_allclose(st_.Z, np.broadcast_to(Z, st_.Z.shape), atol=1e-10)
        np.testing.assert_allclose(st_.A, A, atol=1e-10)

    def test_full_period(self):
        q = np.array([[0.4], [-0.1]])
        p = np.array([[1.0], [0.3]])
        st_ = propagate(q, p, Potential.harmonic(), 2 * math.pi, 2 * math.pi / 62832)
        assert np.max(np.abs(st_.Q - q)) <= 1e-12
        assert np.max(np.abs(st_.P - p)) <= 1e-12

    def test_rk4_order(self):
        q, p = np.array([[0.7]]), np.array([[0.9]])
        Q, P, _, Z, A = _harmonic_exact(q, p, 0.8)

        def err(dt):
            st_ = propagate(q, p, Potential.harmonic(), 0.8, dt)
            return max(abs(st_.Q - Q).max(), abs(st_.P - P).max(), abs(st_.Z - Z).max(), abs(st_.A - A).max())

        assert 12 <= err(0.05) / err(0.025) <= 20

    def test_zero_duration_is_identity(self):
        q, p = np.array([[0.1, 0.2]]), np.array([[0.3, -0.4]])
        st_ = propagate(q, p, Potential.cosine(), 0.0, 1e-4)
        np.testing.assert_array_equal(st_.Q, q)
        np.testing.assert_array_equal(st_.P, p)
        np.testing.assert_array_equal(st_.Z, 2 * np.eye(2)[None])
        assert st_.A[0] == 1 and st_.S[0] == 0

    def test_harmonic_determinant(self):
        st_ = propagate(np.array([[0.5, -0.2]]), np.array([[1.0, 0.7]]), Potential.harmonic(), 0.8, 1e-4)
        assert abs(abs(np.linalg.det(st_.Z[0])) - 4) <= 1e-8


class TestInvariants:
    @pytest.mark.parametrize("V", POTENTIALS, ids=lambda v: v.kind)
    def test_energy(self, V, rng):
        # the gaussian well repels to infinity in finite time, so keep its packets near the top
        reach = 0.2 if V.kind == "gaussian_well" else 1.0
        q = rng.uniform(-0.5, 0.5, (4, 2)) * reach
        p = rng.uniform(-1, 1, (4, 2)) * reach
        st_ = propagate(q, p, V, 0.8, 1e-4)
        e0 = 0.5 * np.sum(p * p, -1) + V.value(q)
        e1 = 0.5 * np.sum(st_.P**2, -1) + V.value(st_.Q)
        assert np.max(np.abs(e1 - e0)) <= 1e-10

    @pytest.mark.parametrize("V", [Potential.cosine(), Potential.gaussian_well(), Potential.harmonic()], ids=lambda v: v.kind)
    def test_amplitude_is_continuous_root_of_det(self, V):
        q, p = np.array([[0.1, -0.1]]), np.array([[0.3, 0.2]])
        root = 1.0 + 0j
        for k in range(1, 81):
            st_ = propagate(q, p, V, 0.01 * k, 1e-4)
            r = np.sqrt(np.linalg.det(st_.Z[0]) / 4.0 + 0j)
            root = r if abs(r - root) < abs(r + root) else -r
        assert abs(st_.A[0] - root) <= 1e-8 * max(1.0, abs(root))

    @given(st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False))
    def test_amplitude_linearity(self, a):
        mesh = MeshSpec.recommended(2.0**-6, 1)
        ens = PacketEnsemble(np.array([[3]]), np.array([[40]]), np.array([a]), mesh)
        out = evolve(ens, Potential.cosine(), 0.01, 1e-3)
        unit = propagate(ens.Q, ens.P, Potential.cosine(), 0.01, 1e-3).scaled(a)
        assert out.A[0] == pytest.approx(unit.A[0], rel=1e-15, abs=0)

    def test_rhs_matches_kernel_step(self):
        st0 = FlowState.initial(np.array([[0.2]]), np.array([[0.8]]))
        der = rhs(st0, Potential.cosine())
        h = 1e-6
        st1 = propagate(st0.Q, st0.P, Potential.cosine(), h, h)
        np.testing.assert_allclose((st1.Q - st0.Q) / h, der.Q, rtol=1e-5)
        np.testing.assert_allclose((st1.A - st0.A) / h, der.A, rtol=1e-4, atol=1e-9)
        assert der.min_det[0] == pytest.approx(2.0)


class TestErrors:
    def test_step_count(self):
        assert step_count(0.8, 1e-4) == 8000
        assert step_count(0.0, 1e-4) == 0
        with pytest.raises(ValueError):
            step_count(0.8, 3e-4)
        with pytest.raises(ValueError):
            step_count(1.0, 0.0)

    def test_blow_up_is_reported(self):
        with pytest.raises(CausticError):
            propagate(np.array([[1.5]]), np.array([[3.0]]), Potential.gaussian_well(), 5.0, 1e-3)

    def test_small_determinant_is_reported(self):
        st_ = FlowState.initial(np.zeros((2, 1)), np.zeros((2, 1)))
        st_.min_det[1] = 0.5 * CAUSTIC_RTOL * 2
        with pytest.raises(CausticError, match="1 packet"):
            check_caustic(st_)

    def test_evolve_needs_fresh_packets(self):
        mesh = MeshSpec.recommended(2.0**-6, 1)
        ens = PacketEnsemble(np.array([[0]]), np.array([[0]]), np.array([1.0]), mesh)
        moved = evolve(ens, Potential.harmonic(), 0.1, 1e-3)
        with pytest.raises(ValueError):
            evolve(moved, Potential.harmonic(), 0.1, 1e-3)

    def test_evolve_accumulates_action(self):
        mesh = MeshSpec.recommended(2.0**-6, 1)
        ens = PacketEnsemble(np.array([[0]]), np.array([[8]]), np.array([1.0]), mesh, S=np.array([0.25]))
        out = evolve(ens, Potential.free(), 0.1, 1e-3)
        assert out.S[0] == pytest.approx(0.25 + 0.5 * (8 * mesh.dp) ** 2 * 0.1, rel=1e-12)
