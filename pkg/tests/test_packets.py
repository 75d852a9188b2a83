import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fggc.packets import (
    GaussianParams,
    eval_packet,
    grad_inner_product,
    grad_overlap,
    h1_norm,
    inner_product,
    l2_norm,
    overlap,
)
from oracles import packet_fn, trapezoid_inner


def _g(Q, P, eps):
    return GaussianParams(np.atleast_1d(Q), np.atleast_1d(P), eps)


def _quad(Qa, Pa, Qb, Pb, eps, grad=False):
    """Trapezoid oracle with spacing sqrt(eps)/32, truncated at 12 sqrt(eps) about both centres."""
    r = math.sqrt(eps)
    lo = min(Qa, Qb) - 12 * r
    hi = max(Qa, Qb) + 12 * r
    f, g = packet_fn(Qa, Pa, eps), packet_fn(Qb, Pb, eps)
    if grad:
        fa = lambda x: (1j * Pa - (x - Qa)) / eps * f(x)
        gb = lambda x: (1j * Pb - (x - Qb)) / eps * g(x)
        return trapezoid_inner(fa, gb, lo, hi, r / 32)
    return trapezoid_inner(f, g, lo, hi, r / 32)


params = st.tuples(
    st.floats(-1, 1), st.floats(-3, 3), st.floats(-1, 1), st.floats(-3, 3), st.floats(-4, 0)
)


class TestClosedForm:
    def test_self_overlap(self):
        eps = 0.3
        g = _g(0.2, -1.0, eps)
        assert inner_product(g, g) == pytest.approx(math.sqrt(math.pi * eps), rel=1e-15)
        assert l2_norm(g) ** 2 == pytest.approx(math.sqrt(math.pi * eps), rel=1e-15)

    def test_literal_formula(self):
        # (pi eps)^(d/2) exp(-|dQ|^2/(4eps) - |dP|^2/(4eps) + i dQ.(Pa+Pb)/(2eps))
        eps, Qa, Pa, Qb, Pb = 0.05, 0.1, 0.7, -0.2, 1.3
        expected = math.sqrt(math.pi * eps) * np.exp(
            -((Qb - Qa) ** 2) / (4 * eps) - (Pb - Pa) ** 2 / (4 * eps) + 1j * (Qb - Qa) * (Pa + Pb) / (2 * eps)
        )
        assert inner_product(_g(Qa, Pa, eps), _g(Qb, Pb, eps)) == pytest.approx(expected, rel=1e-14)

    def test_random_pairs_match_quadrature(self, rng):
        worst = 0.0
        for _ in range(100):
            eps = 10 ** rng.uniform(-4, 0)
            r = math.sqrt(eps)
            Qa, Qb = rng.uniform(-1, 1, 2) * 2 * r
            Pa, Pb = rng.uniform(-1, 1, 2) * 2 * r
            exact = inner_product(_g(Qa, Pa, eps), _g(Qb, Pb, eps))
            ref = _quad(Qa, Pa, Qb, Pb, eps)
            worst = max(worst, abs(exact - ref) / abs(ref))
        assert worst <= 1e-8

    def test_gradient_matches_quadrature(self, rng):
        for _ in range(30):
            eps = 10 ** rng.uniform(-3, 0)
            r = math.sqrt(eps)
            Qa, Qb, Pa, Pb = rng.uniform(-1, 1, 4) * 2 * r
            exact = grad_inner_product(_g(Qa, Pa, eps), _g(Qb, Pb, eps))
            ref = _quad(Qa, Pa, Qb, Pb, eps, grad=True)
            assert abs(exact - ref) <= 1e-8 * abs(ref)

    def test_h1_norm_zero_momentum(self):
        g = _g(0.0, 0.0, 1.0)
        assert h1_norm(g) == pytest.approx(math.sqrt(math.sqrt(math.pi) * 1.5), rel=1e-15)

    def test_h1_norm_definition(self, rng):
        for _ in range(10):
            eps = rng.uniform(0.01, 1)
            g = _g(rng.normal(), rng.normal(), eps)
            sq = l2_norm(g) ** 2 + grad_inner_product(g, g).real
            assert h1_norm(g) ** 2 == pytest.approx(sq, rel=1e-12)
            assert h1_norm(g) >= l2_norm(g)

    def test_vectorised_overlap_shapes(self, rng):
        Q = rng.normal(size=(5, 1, 2))
        P = rng.normal(size=(1, 4, 2))
        assert overlap(Q, P, Q, P, 0.5).shape == (5, 4)
        assert grad_overlap(Q, P, Q, P, 0.5).shape == (5, 4)

    def test_two_dimensional_factorises(self, rng):
        eps = 0.1
        Qa, Pa, Qb, Pb = (rng.normal(size=2) * 0.3 for _ in range(4))
        full = overlap(Qa, Pa, Qb, Pb, eps)
        parts = [overlap(Qa[i : i + 1], Pa[i : i + 1], Qb[i : i + 1], Pb[i : i + 1], eps) for i in range(2)]
        assert full == pytest.approx(parts[0] * parts[1], rel=1e-14)

    def test_epsilon_mismatch(self):
        with pytest.raises(ValueError):
            inner_product(_g(0, 0, 0.1), _g(0, 0, 0.2))

    def test_invalid_params(self):
        with pytest.raises(ValueError):
            GaussianParams(np.zeros(2), np.zeros(3), 0.1)
        with pytest.raises(ValueError):
            GaussianParams(np.zeros(1), np.zeros(1), 0.0)

    def test_eval_packet(self):
        g = _g(0.3, 1.1, 0.2)
        x = np.linspace(-1, 1, 7)[:, None]
        np.testing.assert_allclose(eval_packet(g, x), packet_fn(0.3, 1.1, 0.2)(x[:, 0]), rtol=1e-15)
        assert eval_packet(g, np.array([0.3])) == pytest.approx(1.0)


class TestProperties:
    @given(params)
    def test_hermitian(self, p):
        Qa, Pa, Qb, Pb, k = p
        eps = 10.0**k
        g, h = _g(Qa, Pa, eps), _g(Qb, Pb, eps)
        assert inner_product(g, h) == pytest.approx(np.conj(inner_product(h, g)), rel=1e-13, abs=1e-300)
        assert grad_inner_product(g, h) == pytest.approx(np.conj(grad_inner_product(h, g)), rel=1e-12, abs=1e-300)

    @given(params)
    def test_cauchy_schwarz(self, p):
        Qa, Pa, Qb, Pb, k = p
        eps = 10.0**k
        g, h = _g(Qa, Pa, eps), _g(Qb, Pb, eps)
        assert abs(inner_product(g, h)) <= l2_norm(g) * l2_norm(h) * (1 + 1e-12)

    @given(params, st.floats(-2, 2))
    def test_depends_on_position_difference_only(self, p, shift):
        Qa, Pa, Qb, Pb, k = p
        eps = 10.0**k
        a = inner_product(_g(Qa, Pa, eps), _g(Qb, Pb, eps))
        b = inner_product(_g(Qa + shift, Pa, eps), _g(Qb + shift, Pb, eps))
        assert abs(a - b) <= 1e-9 * math.sqrt(math.pi * eps)
