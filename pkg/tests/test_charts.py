import numpy as np
import pytest

from bianchi_lab.algebra import (
    bianchi_sum,
    metric_covector,
    op_c,
    op_e,
    schouten_weyl_split,
    trace,
    wedge,
)
from bianchi_lab.charts import (
    Geometry,
    bianchi_b,
    bianchi_b_inverse,
    chart_geometry,
    christoffel_at,
    curvature_at,
    dewitt_inner,
    divergence,
    geometry_from_jets,
    killing,
    lie_derivative_sym2,
    make_chart,
    nabla,
    orthonormal_frame,
    positive_definite_audit,
    rm_covector,
    sample_points,
    sym_to_frame,
    sym_values,
    tensor_values,
    trace_sym2,
)
from bianchi_lab.jets import Jet

from oracles import fd_christoffel, fd_ricci


def rng(seed=0):
    return np.random.default_rng(seed)


def metric_value_fn(chart):
    def fn(x):
        return sym_values(chart.metric_jets(np.asarray(x), order=0))
    return fn


# ---------------------------------------------------------------------------
# presets


def test_flat_chart_metric_and_derivatives():
    chart = make_chart("flat_cartesian", 3)
    x = np.array([[0.2, 0.4, 0.7], [0.9, 0.1, 0.3]])
    g = chart.metric_jets(x, order=3)
    vals = sym_values(g)
    assert np.allclose(vals, np.eye(3))
    for i in range(3):
        for j in range(3):
            assert np.allclose(g[i, j].c[..., 1:], 0.0)


def test_conformal_bump_chain_rule():
    chart = make_chart("conformal_bump", 3)
    x = np.array([0.3, 0.6, 0.4])
    g = chart.metric_jets(x, order=2)
    # d_0 g_00 = 2 (d_0 phi) e^{2 phi}; read phi derivatives off log(g_00)
    g00 = g[0, 0]
    dphi = 0.5 * g00.deriv((1, 0, 0)) / g00.value
    assert np.isclose(g00.deriv((1, 0, 0)), 2 * dphi * g00.value)
    # components stay conformally diagonal
    assert np.allclose(g[0, 1].c, 0.0)


def test_curved_generic_positive_definite():
    chart = make_chart("curved_generic", 3, seed=7)
    assert positive_definite_audit(chart, 1000, rng(3)) > 0.0
    chart4 = make_chart("curved_generic", 4, seed=11)
    assert positive_definite_audit(chart4, 300, rng(4)) > 0.0


def test_out_of_domain_rejected():
    chart = make_chart("polar_ball", 3)
    with pytest.raises(ValueError):
        chart.metric_jets(np.array([1.0, 0.5, 1.7]), order=1)


# ---------------------------------------------------------------------------
# christoffel


def test_flat_christoffel_zero():
    chart = make_chart("flat_slab_periodic", 3)
    gam = christoffel_at(chart, sample_points(chart, 5, rng(1)))
    assert np.allclose(gam, 0.0, atol=1e-14)


def test_polar_ball_christoffel_closed_form_and_fd():
    chart = make_chart("polar_ball", 3, radius=2.0)
    pts = sample_points(chart, 4, rng(2))
    gam = christoffel_at(chart, pts)
    r = 2.0 - pts[:, 2]
    # axes are (theta, phi, u) with u = R - r, so Gamma^u_{theta theta} = r
    assert np.allclose(gam[:, 2, 0, 0], r, atol=1e-12)
    oracle = np.stack([fd_christoffel(metric_value_fn(chart), p) for p in pts])
    assert np.allclose(gam, oracle, atol=1e-6)


def test_christoffel_symmetric_lower_indices():
    chart = make_chart("curved_generic", 3, seed=5)
    gam = christoffel_at(chart, sample_points(chart, 6, rng(5)))
    assert np.allclose(gam, np.swapaxes(gam, 2, 3), atol=1e-14)


# ---------------------------------------------------------------------------
# curvature


def test_flat_presets_have_zero_curvature():
    for preset in ("flat_cartesian", "flat_slab_periodic", "polar_ball"):
        chart = make_chart(preset, 3)
        pts = sample_points(chart, 4, rng(6))
        _, riem, ric, sc, ein, _ = curvature_at(chart, pts)
        assert np.max(np.abs(riem)) <= 1e-12
        assert np.max(np.abs(ric)) <= 1e-12
        assert np.max(np.abs(ein)) <= 1e-12


def sphere_geometry(radius, x, order=4):
    """Round 2-sphere of given radius in colatitude/longitude coordinates."""
    th, ph = Jet.variables(x, order)
    g = np.empty((2, 2), dtype=object)
    zero = Jet.const(2, order, np.zeros(np.shape(x)[:-1]))
    s = th.sin()
    g[0, 0] = Jet.const(2, order, np.full(np.shape(x)[:-1], radius ** 2))
    g[1, 1] = (radius ** 2) * s * s
    g[0, 1] = g[1, 0] = zero
    return geometry_from_jets(g)


def test_round_sphere_scalar_curvature_positive():
    for radius in (1.0, 1.7):
        geom = sphere_geometry(radius, np.array([[1.1, 0.4], [0.7, 2.0]]))
        assert np.allclose(geom.sc.value, 2.0 / radius ** 2, atol=1e-10)


def test_ricci_against_fd_oracle_on_curved_chart():
    chart = make_chart("conformal_bump", 3, amp=0.1)
    pts = sample_points(chart, 3, rng(7))
    _, _, ric, _, _, _ = curvature_at(chart, pts)
    for i, p in enumerate(pts):
        oracle = fd_ricci(metric_value_fn(chart), p)
        assert np.allclose(ric[i], oracle, atol=2e-4)


def test_curvature_identities_conformal_bump():
    chart = make_chart("conformal_bump", 3, amp=0.1)
    pts = sample_points(chart, 25, rng(8))
    _, riem, ric, sc, ein, frame = curvature_at(chart, pts)
    for i in range(len(pts)):
        rm = rm_covector(riem, frame, i)
        scale = max(1.0, rm.norm_inf())
        assert bianchi_sum(rm).norm_inf() <= 1e-9 * scale
        ein_f = sym_to_frame(ein, frame)[i]
        got = op_e(rm).sym_matrix()
        assert np.max(np.abs(got - ein_f)) <= 1e-9 * max(1.0, np.abs(ein_f).max())
        # rm encodes tr rm = -Ric
        ric_f = sym_to_frame(ric, frame)[i]
        assert np.max(np.abs(trace(rm).sym_matrix() + ric_f)) <= 1e-9 * scale


def test_weyl_pipeline_d4():
    chart = make_chart("curved_generic", 4, seed=3)
    pts = sample_points(chart, 10, rng(9))
    _, riem, ric, sc, ein, frame = curvature_at(chart, pts)
    g4 = metric_covector(4)
    for i in range(len(pts)):
        rm = rm_covector(riem, frame, i)
        p, weyl = schouten_weyl_split(rm, tol=1e-7)
        scale = max(1.0, rm.norm_inf())
        recon = -1.0 * wedge(g4, p) + weyl
        assert (recon - rm).norm_inf() <= 1e-8 * scale
        assert trace(weyl).norm_inf() <= 1e-8 * scale
        ein_f = sym_to_frame(ein, frame)[i]
        rhs = -2.0 * op_c(p).sym_matrix()  # Ein = -(d-2) C P at d=4
        assert np.max(np.abs(ein_f - rhs)) <= 1e-8 * scale


def test_differential_bianchi_identity():
    # div Ein = 0 and div B Ric = 0, needing third metric derivatives
    for preset, kw in [("conformal_bump", {"amp": 0.1}),
                       ("curved_generic", {"seed": 13})]:
        chart = make_chart(preset, 3, **kw)
        pts = sample_points(chart, 10, rng(10))
        geom = chart_geometry(chart, pts, order=4)
        div_ein = tensor_values(divergence(geom, geom.ein))
        assert np.max(np.abs(div_ein)) <= 1e-8
        bric = bianchi_b(geom, geom.ric)
        div_bric = tensor_values(divergence(geom, bric))
        assert np.max(np.abs(div_bric)) <= 1e-8


# ---------------------------------------------------------------------------
# covariant derivative, divergence, killing, lie


def test_metric_compatibility():
    for preset, kw in [("polar_ball", {}), ("curved_generic", {"seed": 2})]:
        chart = make_chart(preset, 3, **kw)
        pts = sample_points(chart, 5, rng(11))
        geom = chart_geometry(chart, pts, order=3, curvature=False)
        ng = tensor_values(nabla(geom, geom.g))
        assert np.max(np.abs(ng)) <= 1e-11


def test_flat_covariant_derivative_is_partial():
    chart = make_chart("flat_cartesian", 3)
    pts = sample_points(chart, 4, rng(12))
    geom = chart_geometry(chart, pts, order=3, curvature=False)
    xs = Jet.variables(pts, 3)
    sig = np.empty((3, 3), dtype=object)
    for i in range(3):
        for j in range(3):
            sig[i, j] = xs[0] * xs[1] if i == j else xs[2] * 0.5
    ns = nabla(geom, sig)
    assert np.allclose(tensor_values(ns)[..., 0, 0, 0],
                       pts[:, 1], atol=1e-13)  # d_0 (x0 x1)


def test_leibniz_rule():
    chart = make_chart("curved_generic", 3, seed=4)
    pts = sample_points(chart, 5, rng(13))
    geom = chart_geometry(chart, pts, order=3, curvature=False)
    xs = Jet.variables(pts, 3)
    f = (xs[0] + 0.3 * xs[2]).sin() + 1.5
    sig = np.empty((3, 3), dtype=object)
    for i in range(3):
        for j in range(3):
            sig[i, j] = xs[i] * xs[j] + (1.0 if i == j else 0.0)
    fsig = np.empty((3, 3), dtype=object)
    for i in range(3):
        for j in range(3):
            fsig[i, j] = f * sig[i, j]
    lhs = tensor_values(nabla(geom, fsig))
    nsig = nabla(geom, sig)
    d = 3
    rhs = np.empty_like(lhs)
    fvals = f.value
    for k in range(d):
        dfk = f.partial(k).value
        for i in range(d):
            for j in range(d):
                rhs[..., k, i, j] = (dfk * sig[i, j].value
                                     + fvals * nsig[k, i, j].value)
    assert np.max(np.abs(lhs - rhs)) <= 1e-11


def test_divergence_sign_convention():
    chart = make_chart("flat_cartesian", 3)
    pts = sample_points(chart, 4, rng(14))
    geom = chart_geometry(chart, pts, order=2, curvature=False)
    xs = Jet.variables(pts, 2)
    zero = Jet.const(3, 2, np.zeros(len(pts)))
    sig = np.empty((3, 3), dtype=object)
    sig[:] = zero
    sig[0, 0] = xs[0]
    div = tensor_values(divergence(geom, sig))
    assert np.allclose(div[..., 0], -1.0, atol=1e-13)
    assert np.allclose(div[..., 1:], 0.0, atol=1e-13)


def test_divergence_of_metric_vanishes():
    chart = make_chart("curved_generic", 4, seed=8)
    pts = sample_points(chart, 4, rng(15))
    geom = chart_geometry(chart, pts, order=3, curvature=False)
    div = tensor_values(divergence(geom, geom.g))
    assert np.max(np.abs(div)) <= 1e-11


def test_bianchi_b_examples_and_inverse():
    d = 4
    chart = make_chart("curved_generic", d, seed=9)
    pts = sample_points(chart, 5, rng(16))
    geom = chart_geometry(chart, pts, order=2, curvature=False)
    bg = bianchi_b(geom, geom.g)
    gv = sym_values(geom.g)
    assert np.allclose(tensor_values(bg), (1 - d / 2) * gv, atol=1e-12)

    xs = Jet.variables(pts, 2)
    sig = np.empty((d, d), dtype=object)
    for i in range(d):
        for j in range(d):
            sig[i, j] = xs[min(i, j)] * 0.3 + (1.0 if i == j else 0.0)
    back = bianchi_b_inverse(geom, bianchi_b(geom, sig))
    assert np.max(np.abs(tensor_values(back) - tensor_values(sig))) <= 1e-12


def test_killing_flat_shear_field():
    chart = make_chart("flat_cartesian", 3)
    pts = sample_points(chart, 3, rng(17))
    geom = chart_geometry(chart, pts, order=2, curvature=False)
    xs = Jet.variables(pts, 2)
    zero = Jet.const(3, 2, np.zeros(len(pts)))
    X = np.empty(3, dtype=object)
    X[:] = zero
    X[0] = xs[1]  # X = (x^2, 0, 0)
    ds = tensor_values(killing(geom, X))
    expect = np.zeros_like(ds)
    expect[..., 0, 1] = expect[..., 1, 0] = 0.5
    assert np.allclose(ds, expect, atol=1e-13)


def test_lie_derivative_identities_and_flow_oracle():
    chart = make_chart("curved_generic", 3, seed=6)
    pts = sample_points(chart, 4, rng(18), margin=0.2)
    geom = chart_geometry(chart, pts, order=3, curvature=False)
    xs = Jet.variables(pts, 3)

    def xfield(xjets):
        X = np.empty(3, dtype=object)
        X[0] = (xjets[1] * 2.0).sin() * 0.5
        X[1] = xjets[2] * xjets[0]
        X[2] = 0.2 + 0.1 * xjets[0]
        return X

    X = xfield(xs)
    # L_X g = 2 delta* X
    lie_g = tensor_values(lie_derivative_sym2(X, geom.g))
    two_ds = 2.0 * tensor_values(killing(geom, X))
    assert np.max(np.abs(lie_g - two_ds)) <= 1e-11

    # flow oracle for a non-metric tensor field
    def sig_vals(x):
        out = np.zeros(x.shape[:-1] + (3, 3))
        for i in range(3):
            for j in range(3):
                out[..., i, j] = np.sin(x[..., i]) * x[..., j] \
                    + (1.0 if i == j else 0.0)
        return out

    def sig_jets(xjets):
        out = np.empty((3, 3), dtype=object)
        for i in range(3):
            for j in range(3):
                out[i, j] = xjets[i].sin() * xjets[j] + (1.0 if i == j else 0.0)
        return out

    lie = tensor_values(lie_derivative_sym2(X, sig_jets(xs)))
    t = 1e-4
    xv = pts
    Xv = tensor_values(X)
    # explicit Euler pullback (phi_t^* sigma - sigma) / t
    dX = np.zeros((len(pts), 3, 3))
    for k in range(3):
        for a in range(3):
            dX[:, k, a] = X[a].partial(k).value
    jac = np.eye(3) + t * dX
    shifted = sig_vals(xv + t * Xv)
    pulled = np.einsum("pia,pjb,pab->pij", jac, jac, shifted)
    oracle = (pulled - sig_vals(xv)) / t
    assert np.max(np.abs(lie - oracle)) <= 5e-3


def test_constant_field_flat_lie_zero():
    chart = make_chart("flat_cartesian", 3)
    pts = sample_points(chart, 2, rng(19))
    xs = Jet.variables(pts, 2)
    const_vec = np.empty(3, dtype=object)
    const_vec[:] = Jet.const(3, 2, np.ones(len(pts)))
    const_sig = np.empty((3, 3), dtype=object)
    const_sig[:] = Jet.const(3, 2, 0.5 * np.ones(len(pts)))
    out = tensor_values(lie_derivative_sym2(const_vec, const_sig))
    assert np.allclose(out, 0.0, atol=1e-14)


# ---------------------------------------------------------------------------
# DeWitt pairing


def test_dewitt_metric_self_pairing():
    for d in (3, 4):
        chart = make_chart("curved_generic", d, seed=d)
        pts = sample_points(chart, 5, rng(20))
        gv = sym_values(chart.metric_jets(pts, 0))
        val = dewitt_inner(gv, gv, gv)
        assert np.allclose(val, d - d * d / 2.0, atol=1e-12)
    # d = 3 case from the contract: -1.5
    assert np.isclose(d - d * d / 2.0, -4.0)  # d == 4 at loop exit


def test_dewitt_symmetry_and_tracefree_positivity():
    d = 3
    chart = make_chart("curved_generic", d, seed=21)
    pts = sample_points(chart, 3, rng(21))
    gv = sym_values(chart.metric_jets(pts, 0))
    r = rng(22)
    sig = r.standard_normal((len(pts), d, d))
    sig = 0.5 * (sig + np.swapaxes(sig, 1, 2))
    eta = r.standard_normal((len(pts), d, d))
    eta = 0.5 * (eta + np.swapaxes(eta, 1, 2))
    assert np.allclose(dewitt_inner(sig, eta, gv), dewitt_inner(eta, sig, gv),
                       atol=1e-12)
    # positivity on trace-free tensors: Gram matrix of a trace-free basis
    ginv = np.linalg.inv(gv[0])
    basis = []
    for i in range(d):
        for j in range(i, d):
            e = np.zeros((d, d))
            e[i, j] = e[j, i] = 1.0
            e = e - (np.sum(ginv * e) / d) * gv[0]  # roughly trace-free
            e = e - (np.sum(ginv * e) / np.sum(ginv * gv[0])) * gv[0]
            basis.append(e)
    basis = basis[:-1]  # drop one to keep the span trace-free and independent
    G = np.array([[dewitt_inner(a[None], b[None], gv[:1])[0] for b in basis]
                  for a in basis])
    assert np.linalg.eigvalsh(G).min() > 0
