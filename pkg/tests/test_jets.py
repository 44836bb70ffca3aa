import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bianchi_lab.jets import Jet, jet_matrix_inverse


def test_variable_and_value():
    x, y = Jet.variables(np.array([1.5, -0.5]), order=3)
    f = x * x * y + 2.0 * x
    assert np.isclose(f.value, 1.5 * 1.5 * (-0.5) + 3.0)
    assert np.isclose(f.deriv((1, 0)), 2 * 1.5 * (-0.5) + 2.0)
    assert np.isclose(f.deriv((2, 0)), 2 * (-0.5))
    assert np.isclose(f.deriv((1, 1)), 2 * 1.5)
    assert np.isclose(f.deriv((0, 2)), 0.0)


def test_polynomial_derivatives_exact_to_truncation():
    x, y, z = Jet.variables(np.array([0.3, 0.7, -1.2]), order=4)
    f = (x ** 2) * (y ** 2) + z ** 4

    def fd(alpha):
        # analytic partials of x^2 y^2 + z^4 at the base point
        a, b, c = 0.3, 0.7, -1.2
        table = {
            (2, 2, 0): 4.0,
            (1, 2, 0): 4.0 * a,
            (2, 1, 0): 4.0 * b,
            (0, 0, 4): 24.0,
            (0, 0, 3): 24.0 * c,
        }
        return table[alpha]

    for alpha in [(2, 2, 0), (1, 2, 0), (2, 1, 0), (0, 0, 4), (0, 0, 3)]:
        assert np.isclose(f.deriv(alpha), fd(alpha), atol=1e-12)


def test_partial_matches_coefficients():
    x, y = Jet.variables(np.array([0.2, 0.4]), order=4)
    f = (x * y).exp()
    fx = f.partial(0)
    assert np.isclose(fx.value, f.deriv((1, 0)))
    assert np.isclose(fx.deriv((0, 1)), f.deriv((1, 1)))
    assert np.isclose(fx.deriv((2, 1)), f.deriv((3, 1)))


@settings(max_examples=30, deadline=None)
@given(st.floats(0.3, 3.0), st.floats(-1.0, 1.0))
def test_smooth_primitives_against_closed_forms(v, w):
    x, y = Jet.variables(np.array([v, w]), order=4)
    f = (x * x + y * y + 0.5).sqrt()
    g = f * f
    target = x * x + y * y + 0.5
    assert np.allclose(g.c, target.c, atol=1e-10)

    h = (x.exp() * x.reciprocal()).log() - (x - x.log())
    assert np.allclose(h.c, 0.0, atol=1e-10)

    trig = x.sin() ** 2 + x.cos() ** 2
    one = Jet.const(2, 4, 1.0)
    assert np.allclose(trig.c, one.c, atol=1e-12)


def test_division_roundtrip():
    x, y = Jet.variables(np.array([1.1, 0.4]), order=4)
    f = 1.0 + x * y + y ** 3
    assert np.allclose(((f / x) * x).c, f.c, atol=1e-11)


def test_batched_broadcasting():
    pts = np.random.default_rng(0).uniform(0.5, 1.5, size=(7, 3))
    xs = Jet.variables(pts, order=2)
    f = xs[0] * xs[1] + xs[2]
    assert f.c.shape == (7, len(f.c[0]))
    assert np.allclose(f.value, pts[:, 0] * pts[:, 1] + pts[:, 2])
    assert np.allclose(f.deriv((1, 1, 0)), np.ones(7))


def test_matrix_inverse():
    rng = np.random.default_rng(1)
    x, y = Jet.variables(np.array([0.3, 0.8]), order=3)
    G = [[2.0 + x * x, 0.3 * x * y], [0.3 * x * y, 1.5 + y * y]]
    inv = jet_matrix_inverse(G)
    for i in range(2):
        for j in range(2):
            acc = Jet.const(2, 3, 0.0)
            for k in range(2):
                acc = acc + G[i][k] * inv[k][j]
            expect = 1.0 if i == j else 0.0
            assert np.allclose(acc.c[..., 0], expect, atol=1e-12)
            assert np.allclose(acc.c[..., 1:], 0.0, atol=1e-12)


def test_truncation_order_guard():
    x, _ = Jet.variables(np.array([0.0, 0.0]), order=1)
    with pytest.raises(ValueError):
        x.partial(0).partial(0)
