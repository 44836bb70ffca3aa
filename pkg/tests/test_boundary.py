import numpy as np
import pytest

from bianchi_lab.boundary import (
    CollarChart,
    boundary_frame_at,
    boundary_state,
    combine_constraint_residuals,
    constraint_pieces,
    constraint_residuals_at,
    distance_jet,
    projections_at,
    weyl_constraint_residual_at,
)
from bianchi_lab.charts import chart_geometry, make_chart, sym_values
from bianchi_lab.conventions import (
    compute_constraint_constants,
    constraint_constants,
    load_conventions,
)
from bianchi_lab.jets import Jet

from oracles import fd_second_fundamental_form


def rng(seed=0):
    return np.random.default_rng(seed)


def lateral_points(d, n, seed, lo=0.1, hi=0.9):
    return rng(seed).uniform(lo, hi, size=(n, d - 1))


CONSTS = constraint_constants()


# ---------------------------------------------------------------------------
# frames


def test_slab_boundary_is_totally_geodesic_both_faces():
    chart = make_chart("flat_slab_periodic", 3)
    for face in (0, 1):
        fr = boundary_frame_at(CollarChart(chart, face), lateral_points(3, 4, 1))
        assert np.abs(fr.second_ff).max() <= 1e-12
        assert np.abs(fr.mean_curv).max() <= 1e-12
        assert np.abs(fr.normal_deriv_a).max() <= 1e-12
        assert np.allclose(fr.induced_metric, np.eye(2))
        assert fr.normal_defect <= 1e-12


def test_polar_ball_shape_operator_closed_forms():
    for d in (3, 4):
        R = 2.0
        chart = make_chart("polar_ball", d, radius=R)
        y = lateral_points(d, 3, 2, lo=0.9, hi=1.1)
        fr = boundary_frame_at(CollarChart(chart), y)
        assert np.abs(fr.second_ff + fr.induced_metric / R).max() <= 1e-10
        assert np.abs(fr.mean_curv + (d - 1) / R).max() <= 1e-10
        assert np.abs(fr.normal_deriv_a + fr.induced_metric / R ** 2).max() <= 1e-10


def test_second_ff_matches_normal_flow_oracle():
    chart = make_chart("conformal_bump", 3, amp=0.1)
    collar = CollarChart(chart)
    y = lateral_points(3, 3, 3)
    fr = boundary_frame_at(collar, y)

    def metric_fn(p):
        return sym_values(chart.metric_jets(p, 0))

    for i, yy in enumerate(y):
        x_face = np.concatenate([yy, [0.0]])
        oracle = fd_second_fundamental_form(metric_fn, x_face)
        assert np.abs(fr.second_ff[i] - oracle).max() <= 1e-7


def test_boundary_invariants_curved():
    for preset, kw in [("conformal_bump", {"amp": 0.12}),
                       ("curved_generic", {"seed": 5})]:
        chart = make_chart(preset, 4, **kw)
        fr = boundary_frame_at(CollarChart(chart), lateral_points(4, 4, 4))
        assert fr.normal_defect <= 1e-11
        assert np.abs(fr.second_ff - np.swapaxes(fr.second_ff, -1, -2)).max() \
            <= 1e-12


def test_distance_jet_solves_eikonal():
    chart = make_chart("curved_generic", 3, seed=9)
    collar = CollarChart(chart)
    st = boundary_state(collar, lateral_points(3, 4, 5))
    r = st.rjet
    # |grad r|^2 = 1 to truncation order
    geom = st.geom
    dr = [r.partial(a) for a in range(3)]
    acc = None
    for i in range(3):
        for j in range(3):
            t = geom.ginv[i, j].truncate(3) * dr[i] * dr[j]
            acc = t if acc is None else acc + t
    assert np.abs(acc.c[..., 0] - 1.0).max() <= 1e-12
    assert np.abs(acc.c[..., 1:]).max() <= 1e-11
    # on the flat slab the distance is exactly the collar coordinate
    slab = CollarChart(make_chart("flat_slab_periodic", 3))
    st2 = boundary_state(slab, lateral_points(3, 2, 6))
    xd = Jet.variable(3, 4, 2, np.zeros(2))
    assert np.abs(st2.rjet.c - xd.c).max() <= 1e-13


# ---------------------------------------------------------------------------
# projections


def sym_field_from_matrix_fn(d, entries):
    """entries(xs) -> object (d,d) array; wraps into field callback."""

    def fn(x, order):
        xs = Jet.variables(x, order)
        return entries(xs)

    return fn


def test_projections_of_metric():
    chart = make_chart("curved_generic", 3, seed=11)
    collar = CollarChart(chart)
    y = lateral_points(3, 3, 7)

    proj = projections_at(collar, y, lambda x, o: chart.metric_jets(x, o))
    st = proj["state"]
    assert np.abs(proj["ptt"] - st.frame.induced_metric).max() <= 1e-12
    assert np.abs(proj["pnn"] - 1.0).max() <= 1e-12
    assert np.abs(proj["pnt"]).max() <= 1e-12
    # metric is parallel: normal jets vanish
    assert np.abs(proj["dn1"]).max() <= 1e-11
    assert np.abs(proj["dn2"]).max() <= 1e-10


def test_projections_vanishing_sigma_keeps_first_jet():
    d = 3
    chart = make_chart("flat_slab_periodic", d)
    collar = CollarChart(chart)
    y = lateral_points(d, 3, 8)

    def entries(xs):
        out = np.empty((d, d), dtype=object)
        for i in range(d):
            for j in range(d):
                out[i, j] = xs[-1] * ((1.0 + xs[0]).cos() + (i + j))
        return out

    proj = projections_at(collar, y, sym_field_from_matrix_fn(d, entries))
    assert np.abs(proj["ptt"]).max() <= 1e-12
    assert np.abs(proj["pn"]).max() <= 1e-12
    assert np.abs(proj["pnn"]).max() <= 1e-12
    assert np.abs(proj["dn1"]).max() > 0.1  # first normal jet survives


def test_projection_reconstruction():
    d = 4
    chart = make_chart("curved_generic", d, seed=13)
    collar = CollarChart(chart)
    y = lateral_points(d, 4, 9)
    r = rng(10)

    mat = r.standard_normal((d, d))
    mat = 0.5 * (mat + mat.T)

    def entries(xs):
        out = np.empty((d, d), dtype=object)
        for i in range(d):
            for j in range(d):
                out[i, j] = mat[i, j] + 0.3 * xs[0] * (1.0 if i == j else 0.5)
        return out

    proj = projections_at(collar, y, sym_field_from_matrix_fn(d, entries))
    st = proj["state"]
    frame_rows = np.concatenate(
        [st.frame.tangent_frame, st.frame.normal[..., None, :]], axis=-2)
    svals = proj["values"]
    sf = np.einsum("...ai,...bj,...ij->...ab", frame_rows, frame_rows, svals)
    # rebuild sigma from the frame blocks and compare
    rebuilt = np.array(sf)
    einv = np.linalg.inv(frame_rows)
    back = np.einsum("...ia,...jb,...ab->...ij", einv, einv, rebuilt)
    assert np.abs(back - svals).max() <= 1e-12
    # the normal-frame column agrees with the (pnt, pnn) projections
    lb = st.frame.tangent_frame
    pnt_f = proj["pnt_frame"]
    assert np.abs(sf[..., : d - 1, d - 1] - pnt_f).max() <= 1e-11
    assert np.abs(sf[..., d - 1, d - 1] - proj["pnn"]).max() <= 1e-11


# ---------------------------------------------------------------------------
# constraints


def test_constraint_constants_match_committed_artifact():
    got, defect = compute_constraint_constants()
    committed = load_conventions()["constraints"]
    assert {k: list(v) for k, v in got.items()} == committed
    assert defect <= 1e-8


def test_constraints_vanish_on_flat_presets():
    for preset in ("flat_slab_periodic", "flat_cartesian"):
        chart = make_chart(preset, 3)
        res = constraint_residuals_at(CollarChart(chart),
                                      lateral_points(3, 4, 11), CONSTS)
        assert np.abs(res["rnn"]).max() <= 1e-12
        assert np.abs(res["rnt"]).max() <= 1e-12
        assert np.abs(res["rtt"]).max() <= 1e-12


def test_constraints_hold_on_curved_charts():
    for d in (3, 4):
        for preset, kw in [("conformal_bump", {"amp": 0.1}),
                           ("curved_generic", {"seed": 17})]:
            chart = make_chart(preset, d, **kw)
            res = constraint_residuals_at(CollarChart(chart),
                                          lateral_points(d, 8, 12), CONSTS)
            for key in ("rnn", "rnt", "rtt"):
                assert np.abs(res[key]).max() <= 1e-8, (preset, d, key)


def test_polar_ball_scalar_constraint_cancellation():
    # individually nonzero terms with the documented magnitudes cancel
    for d in (3, 4, 5):
        R = 2.0
        chart = make_chart("polar_ball", d, radius=R)
        res = constraint_residuals_at(CollarChart(chart),
                                      lateral_points(d, 3, 13, 0.9, 1.1),
                                      CONSTS)
        lhs_nn, sc_b, a_sq, tr_a_sq = res["terms_nn"]
        assert np.allclose(sc_b, (d - 1) * (d - 2) / R ** 2, atol=1e-9)
        assert np.allclose(a_sq, (d - 1) / R ** 2, atol=1e-10)
        assert np.allclose(tr_a_sq, (d - 1) ** 2 / R ** 4 * R ** 2, atol=1e-10)
        assert np.abs(lhs_nn).max() <= 1e-12
        assert np.abs(res["rnn"]).max() <= 1e-10


def test_cauchy_data_equivalence_probe_flat_slab():
    # flat data (h, K, M) = (delta, 0, 0) satisfies the prescribed-data
    # constraints with every line identically zero
    chart = make_chart("flat_slab_periodic", 4)
    pieces = constraint_pieces(CollarChart(chart), lateral_points(4, 4, 14))
    st = pieces["state"]
    assert np.abs(st.frame.induced_metric - np.eye(3)).max() <= 1e-12
    assert np.abs(st.frame.second_ff).max() <= 1e-12
    assert np.abs(st.frame.normal_deriv_a).max() <= 1e-12
    res = combine_constraint_residuals(pieces, CONSTS)
    for key in ("rnn", "rnt", "rtt"):
        assert np.abs(res[key]).max() <= 1e-12


# ---------------------------------------------------------------------------
# Weyl form of the tangential constraint


def test_weyl_constraint_flat_d4():
    chart = make_chart("flat_slab_periodic", 4)
    out = weyl_constraint_residual_at(CollarChart(chart),
                                      lateral_points(4, 3, 15), CONSTS)
    assert out["skipped"] is None
    assert np.abs(out["residual"]).max() <= 1e-12
    assert np.abs(out["rm_defect"]).max() <= 1e-12


def test_weyl_constraint_curved():
    for d in (4, 5):
        chart = make_chart("conformal_bump", d, amp=0.1)
        out = weyl_constraint_residual_at(CollarChart(chart),
                                          lateral_points(d, 5, 16), CONSTS)
        assert np.abs(out["residual"]).max() <= 1e-8, d
        # curvature-equation consistency: pnn Rm = nabla_n A + A^2
        assert np.abs(out["rm_defect"]).max() <= 1e-8, d
        assert out["frame_gram_defect"] <= 1e-11


def test_weyl_constraint_skipped_below_d4():
    chart = make_chart("conformal_bump", 3)
    out = weyl_constraint_residual_at(CollarChart(chart),
                                      lateral_points(3, 2, 17), CONSTS)
    assert out["skipped"] == "d <= 3"
    assert out["residual"] is None
