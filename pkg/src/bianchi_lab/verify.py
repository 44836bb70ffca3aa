"""Verification suites: each returns report cases with stable anchors.

A case is {name, value, tolerance, pass, anchor}; for residual cases the
pass criterion is value <= tolerance.  Anchors are stable identity tags
naming the mathematical fact a case checks, one per case.
"""

from __future__ import annotations

import numpy as np

from . import algebra as alg
from .boundary import CollarChart, constraint_residuals_at, \
    weyl_constraint_residual_at
from .charts import (
    bianchi_b,
    chart_geometry,
    divergence,
    make_chart,
    rm_covector,
    sample_points,
    sym_to_frame,
    sym_values,
    tensor_values,
)
from .conventions import constraint_constants, load_conventions, ricci_action
from .linearize import (
    dboundary_data_fd,
    equivariance_residual,
    first_order_dependence_residual,
    gamma_tilde_at,
    jet_surgery_pair,
    normal_identity_residuals,
    richardson_slope,
    sample_connection,
    trig_poly_sym_field,
)
from .jets import Jet

__all__ = ["run_suite", "SUITES"]


def _case(name, value, tolerance, anchor, ok=None):
    value = float(value)
    passed = bool(value <= tolerance) if ok is None else bool(ok)
    return {"name": name, "value": value, "tolerance": float(tolerance),
            "pass": passed, "anchor": anchor}


# ---------------------------------------------------------------------------
# algebra


def suite_algebra(cfg) -> list:
    rng = np.random.default_rng(cfg["seed"])
    cases = []
    dims = cfg.get("dims") or [3, 4, 5, 6]
    worst = {d: 0.0 for d in dims}
    for d in dims:
        for _ in range(cfg.get("samples", 50)):
            psi = alg.random_bianchi(rng, d, 2, 2)
            sig = alg.random_bianchi(rng, d, 1, 1)
            r1, r2 = alg.duality_residuals(psi, sig)
            scale = max(psi.norm_inf(), sig.norm_inf(), 1.0)
            worst[d] = max(worst[d], r1 / scale, r2 / scale)
        cases.append(_case(f"duality-contraction-d{d}", worst[d], 1e-12,
                           "duality.einstein-contraction"))
    psi = alg.random_bianchi(rng, 4, 2, 2, rational=True)
    sig = alg.random_bianchi(rng, 4, 1, 1, rational=True)
    r1, r2 = alg.duality_residuals(psi, sig)
    cases.append(_case("duality-rational-exact", max(r1, r2), 0.0,
                       "duality.einstein-contraction", ok=(r1 == 0 and r2 == 0)))

    sign_ok = True
    for d in range(2, 7):
        for k in range(d + 1):
            a = alg.random_covector(rng, d, k, 1 if d > 1 else 0)
            twice = alg.hodge(alg.hodge(a, "first"), "first")
            expect = (-1.0) ** (k * (d - k))
            if (twice - expect * a).norm_inf() > 1e-13 * max(1, a.norm_inf()):
                sign_ok = False
    cases.append(_case("hodge-sign-law", 0.0 if sign_ok else 1.0, 1e-13,
                       "hodge.double-dual-sign", ok=sign_ok))

    worst_assoc = 0.0
    for _ in range(100):
        a = alg.random_covector(rng, 4, 1, 1)
        b = alg.random_covector(rng, 4, 1, 0)
        c = alg.random_covector(rng, 4, 0, 1)
        defect = (alg.wedge(alg.wedge(a, b), c)
                  - alg.wedge(a, alg.wedge(b, c))).norm_inf()
        worst_assoc = max(worst_assoc, defect)
    cases.append(_case("wedge-associativity", worst_assoc, 1e-13,
                       "wedge.associativity"))

    m = rng.standard_normal((4, 4))
    sym_defect = alg.bianchi_sum(
        alg.sym_matrix_covector(0.5 * (m + m.T))).norm_inf()
    anti_value = alg.bianchi_sum(
        alg.sym_matrix_covector(0.5 * (m - m.T))).norm_inf()
    cases.append(_case("bianchi-kernel-symmetric", sym_defect, 1e-13,
                       "bianchi-sum.symmetric-kernel"))
    cases.append(_case("bianchi-kernel-rejects-antisymmetric",
                       1.0 if anti_value < 0.1 else 0.0, 0.5,
                       "bianchi-sum.symmetric-kernel", ok=anti_value > 0.1))

    worst_kulkarni = 0.0
    for d in (3, 4, 5):
        w1 = alg.random_covector(rng, d, 1, 0)
        w2 = alg.random_covector(rng, d, 1, 0)
        plane = alg.wedge(w1, w2)
        sq = alg.wedge(plane, alg.transpose(plane))
        worst_kulkarni = max(worst_kulkarni,
                             alg.bianchi_sum(sq).norm_inf()
                             / max(1.0, sq.norm_inf()))
    cases.append(_case("kulkarni-squares-in-kernel", worst_kulkarni, 1e-13,
                       "kulkarni.kernel-span"))
    return cases


# ---------------------------------------------------------------------------
# chart calculus


def suite_calculus(cfg) -> list:
    rng = np.random.default_rng(cfg["seed"])
    cases = []
    npts = cfg.get("samples", 100)
    for d in cfg.get("dims") or [3, 4]:
        for preset, kw in (("conformal_bump", {"amp": 0.1}),
                           ("curved_generic", {"seed": 13})):
            chart = make_chart(preset, d, **kw)
            pts = sample_points(chart, npts, rng)
            geom = chart_geometry(chart, pts, order=4)
            riem = tensor_values(geom.riem)
            ein = tensor_values(geom.ein)
            gvals = sym_values(geom.g)
            from .charts import orthonormal_frame

            frame = orthonormal_frame(gvals)
            ein_f = sym_to_frame(ein, frame)
            tag = f"{preset}-d{d}"
            worst_b, worst_e, worst_w, worst_cp = 0.0, 0.0, 0.0, 0.0
            g_alg = alg.metric_covector(d)
            for i in range(npts):
                rm = rm_covector(riem, frame, i)
                scale = max(1.0, rm.norm_inf())
                worst_b = max(worst_b,
                              alg.bianchi_sum(rm).norm_inf() / scale)
                worst_e = max(worst_e,
                              float(np.abs(alg.op_e(rm).sym_matrix()
                                           - ein_f[i]).max()) / scale)
                if d >= 4:
                    p, wey = alg.schouten_weyl_split(rm, tol=1e-6)
                    recon = -1.0 * alg.wedge(g_alg, p) + wey
                    worst_w = max(worst_w,
                                  (recon - rm).norm_inf() / scale,
                                  alg.trace(wey).norm_inf() / scale)
                    cp = -(d - 2) * alg.op_c(p).sym_matrix()
                    worst_cp = max(worst_cp,
                                   float(np.abs(cp - ein_f[i]).max()) / scale)
            cases.append(_case(f"first-bianchi-{tag}", worst_b, 1e-8,
                               "curvature.first-bianchi"))
            cases.append(_case(f"einstein-contraction-{tag}", worst_e, 1e-8,
                               "curvature.einstein-from-riemann"))
            div_bric = tensor_values(divergence(geom,
                                                bianchi_b(geom, geom.ric)))
            cases.append(_case(f"gauged-divergence-ricci-{tag}",
                               float(np.abs(div_bric).max()), 1e-8,
                               "curvature.divergence-free"))
            if d >= 4:
                cases.append(_case(f"weyl-split-{tag}", worst_w, 1e-8,
                                   "weyl.traceless-reconstruction"))
                cases.append(_case(f"schouten-einstein-{tag}", worst_cp, 1e-8,
                                   "weyl.schouten-einstein"))
    # flat presets carry no curvature
    worst_flat = 0.0
    for preset in ("flat_cartesian", "flat_slab_periodic", "polar_ball"):
        chart = make_chart(preset, 3)
        pts = sample_points(chart, 20, rng)
        geom = chart_geometry(chart, pts, order=4)
        worst_flat = max(worst_flat,
                         float(np.abs(tensor_values(geom.riem)).max()))
    cases.append(_case("flat-presets-zero-curvature", worst_flat, 1e-12,
                       "curvature.flat-presets"))
    return cases


# ---------------------------------------------------------------------------
# boundary


def suite_boundary(cfg) -> list:
    rng = np.random.default_rng(cfg["seed"])
    consts = constraint_constants()
    cases = []
    npts = cfg.get("samples", 50)
    for d in cfg.get("dims") or [3, 4]:
        for preset, kw in (("conformal_bump", {"amp": 0.1}),
                           ("curved_generic", {"seed": 17})):
            chart = make_chart(preset, d, **kw)
            y = rng.uniform(0.1, 0.9, size=(npts, d - 1))
            res = constraint_residuals_at(CollarChart(chart), y, consts)
            worst = max(float(np.abs(res[k]).max())
                        for k in ("rnn", "rnt", "rtt"))
            cases.append(_case(f"gauss-codazzi-{preset}-d{d}", worst, 1e-8,
                               "constraint.gauss-codazzi"))
    for d in cfg.get("dims_weyl") or [4, 5]:
        chart = make_chart("conformal_bump", d, amp=0.1)
        y = rng.uniform(0.1, 0.9, size=(min(npts, 25), d - 1))
        out = weyl_constraint_residual_at(CollarChart(chart), y, consts)
        cases.append(_case(f"weyl-electric-constraint-d{d}",
                           float(np.abs(out["residual"]).max()), 1e-8,
                           "constraint.weyl-electric"))
        cases.append(_case(f"radial-curvature-equation-d{d}",
                           float(np.abs(out["rm_defect"]).max()), 1e-8,
                           "constraint.radial-curvature"))
    # flat-ball cancellation with individually nonzero terms
    d, R = 4, 2.0
    chart = make_chart("polar_ball", d, radius=R)
    y = rng.uniform(0.9, 1.1, size=(10, d - 1))
    res = constraint_residuals_at(CollarChart(chart), y, consts)
    lhs_nn, sc_b, a_sq, tr_a_sq = res["terms_nn"]
    terms_ok = (np.allclose(sc_b, (d - 1) * (d - 2) / R ** 2, atol=1e-9)
                and np.allclose(a_sq, (d - 1) / R ** 2, atol=1e-9)
                and np.allclose(tr_a_sq, (d - 1) ** 2 / R ** 2, atol=1e-9))
    cases.append(_case("flat-ball-scalar-cancellation",
                       float(np.abs(res["rnn"]).max()), 1e-9,
                       "constraint.flat-ball-cancellation",
                       ok=terms_ok and np.abs(res["rnn"]).max() <= 1e-9))
    return cases


# ---------------------------------------------------------------------------
# linearization


def suite_linearization(cfg) -> list:
    rng = np.random.default_rng(cfg["seed"])
    action = ricci_action()
    cases = []
    chart = make_chart("conformal_bump", 3, amp=0.1)
    pts = np.stack([rng.uniform(0.15, 0.85, 6) for _ in range(3)], axis=-1)

    sigma = trig_poly_sym_field(3, cfg["seed"] + 1)
    slope = richardson_slope(chart, pts, sigma, action)
    cases.append(_case("ricci-variation-richardson-slope", 2.0 - slope, 0.1,
                       "ricci-variation.closed-vs-fd", ok=slope >= 1.9))

    def xf(x, order):
        xs = Jet.variables(x, order)
        X = np.empty(3, dtype=object)
        X[0] = (xs[1] * 2.0).sin() * 0.3
        X[1] = xs[2] * xs[0] * 0.2
        X[2] = 0.1 * xs[0]
        return X

    cases.append(_case("equivariance-killing-directions",
                       equivariance_residual(chart, pts, xf, action), 1e-6,
                       "equivariance.lie-ricci"))

    base = trig_poly_sym_field(3, cfg["seed"] + 2)
    s1, s2 = jet_surgery_pair(base, pts[0])
    g1 = gamma_tilde_at(chart, pts[0:1], s1, action, conn=sample_connection)
    g2 = gamma_tilde_at(chart, pts[0:1], s2, action, conn=sample_connection)
    cases.append(_case("covariant-correction-tensoriality",
                       float(np.abs(g1 - g2).max()), 1e-7,
                       "covariant-correction.tensorial"))

    cases.append(_case("gauged-divergence-first-order-dependence",
                       first_order_dependence_residual(chart, pts[0:1],
                                                       s1, s2, action),
                       1e-7, "order-reduction.first-order"))

    slab = make_chart("flat_slab_periodic", 3)
    collar = CollarChart(slab)
    y = rng.uniform(0.2, 0.8, size=(3, 2))
    sig2 = trig_poly_sym_field(3, cfg["seed"] + 3, boundary_order=2)
    r1, r2, r3 = normal_identity_residuals(collar, y, sig2, action)
    cases.append(_case("normal-trace-mixed-order2", r1, 1e-6,
                       "normal-trace.mixed"))
    cases.append(_case("normal-trace-first-order2", r2, 1e-6,
                       "normal-trace.first"))
    cases.append(_case("normal-trace-second-order2", r3, 1e-6,
                       "normal-trace.second"))
    sig3 = trig_poly_sym_field(3, cfg["seed"] + 4, boundary_order=3)
    r1b, r2b, r3b = normal_identity_residuals(collar, y, sig3, action)
    cases.append(_case("normal-trace-vanishing-source",
                       max(r1b, r2b, r3b), 1e-6, "normal-trace.lemma-form"))

    # linearized Cauchy data of boundary-vanishing deformations
    sig_k = trig_poly_sym_field(3, cfg["seed"] + 5, boundary_order=2)
    dA, dH, dM = dboundary_data_fd(collar, y, sig_k)
    cases.append(_case("boundary-kernel-inclusion",
                       max(np.abs(dA).max(), np.abs(dH).max()), 1e-6,
                       "boundary-data.kernel-inclusion"))
    return cases


# ---------------------------------------------------------------------------
# green formulae


def suite_green(cfg) -> list:
    from .quadrature import (
        GridSpec,
        box_bump_sym_field,
        convergence_study,
        dewitt_green_ric_defect,
        green_einstein_sym_defect,
        green_killing_defect,
        periodic_sym_field,
        periodic_vector_field,
    )

    action = ricci_action()
    cases = []
    seed = cfg["seed"]
    slab = make_chart("flat_slab_periodic", 3)
    n0 = min(cfg.get("grid") or [16])

    grid = GridSpec.for_chart(slab, 16)
    X0 = periodic_vector_field(3, seed + 1, normal_vanish=2)
    sig0 = periodic_sym_field(3, seed + 2)
    cases.append(_case("killing-adjunction-interior", green_killing_defect(
        grid, slab, X0, sig0), 1e-10, "green.killing"))

    bump = make_chart("conformal_bump", 3, amp=0.1)
    X1 = periodic_vector_field(3, seed + 3)
    sig1 = trig_poly_sym_field(3, seed + 4)
    study = convergence_study(
        lambda n: green_killing_defect(GridSpec.for_chart(bump, n),
                                       bump, X1, sig1),
        cfg.get("grid") or [8, 16, 32])
    slope = study["slope"] if study["status"] == "ok" else 2.0
    cases.append(_case("killing-adjunction-slope", 2.0 - slope, 0.2,
                       "green.killing-convergence", ok=slope >= 1.8))

    sig2 = periodic_sym_field(3, seed + 5, normal_vanish=2)
    eta2 = periodic_sym_field(3, seed + 6, normal_vanish=2)
    cases.append(_case("einstein-symmetry-interior",
                       green_einstein_sym_defect(grid, slab, sig2, eta2,
                                                 action), 1e-9,
                       "green.einstein-symmetry"))
    cases.append(_case("dewitt-ricci-route-agreement",
                       abs(green_einstein_sym_defect(grid, slab, sig2, eta2,
                                                     action)
                           - dewitt_green_ric_defect(grid, slab, sig2, eta2,
                                                     action)), 1e-9,
                       "green.dewitt-ricci"))

    ball = make_chart("polar_ball", 3)
    sb = box_bump_sym_field(ball, seed + 7)
    eb = box_bump_sym_field(ball, seed + 8)
    study2 = convergence_study(
        lambda n: green_einstein_sym_defect(GridSpec.for_chart(ball, n),
                                            ball, sb, eb, action),
        cfg.get("grid") or [8, 16, 32])
    slope2 = study2["slope"] if study2["status"] == "ok" else 2.0
    cases.append(_case("einstein-symmetry-slope-ricci-flat", 2.0 - slope2,
                       0.2, "green.einstein-convergence", ok=slope2 >= 1.8))

    study3 = convergence_study(
        lambda n: green_einstein_sym_defect(GridSpec.for_chart(bump, n),
                                            bump, sig2, eta2, action,
                                            ein_corrected=True),
        cfg.get("grid") or [8, 16, 32])
    slope3 = study3["slope"] if study3["status"] == "ok" else 2.0
    cases.append(_case("einstein-symmetry-slope-corrected", 2.0 - slope3,
                       0.2, "green.einstein-convergence-corrected",
                       ok=slope3 >= 1.8))
    return cases


# ---------------------------------------------------------------------------
# bvp


def suite_bvp(cfg) -> list:
    from .bvp import (
        assemble,
        cohomology_probe,
        deflated_gap,
        kernel_probe,
        make_source,
        solve_least_squares,
    )

    cases = []
    seed = cfg["seed"]
    d = cfg.get("dim", 3)
    chart = make_chart("flat_slab_periodic", d)
    n_main = max(cfg.get("grid") or [16])

    src = make_source(n_main, chart, "discrete-admissible", seed=seed)
    system = assemble(n_main, chart)
    _, rep = solve_least_squares(system, src)
    cases.append(_case(f"solvable-discrete-n{n_main}",
                       rep.relative_residual, 1e-8, "bvp.solvable-discrete"))

    ns = cfg.get("grid") or [8, 12, 16]
    rels = []
    for n in ns:
        s = make_source(n, chart, "continuum-admissible", seed=seed + 1)
        _, r = solve_least_squares(assemble(n, chart), s)
        rels.append(r.relative_residual)
    slope = float(np.polyfit(np.log([1.0 / n for n in ns]),
                             np.log(rels), 1)[0])
    cases.append(_case("solvable-continuum-slope", 2.0 - slope, 0.2,
                       "bvp.solvable-continuum", ok=slope >= 1.8))

    for kind in ("inadmissible-divergence", "inadmissible-boundary"):
        worst = 1.0
        for n in (8, 16):
            s = make_source(n, chart, kind, seed=seed + 2)
            _, r = solve_least_squares(assemble(n, chart), s)
            worst = min(worst, r.relative_residual)
        cases.append(_case(f"obstruction-{kind.split('-')[1]}", 0.05 - worst,
                           0.05, f"bvp.obstruction-{kind.split('-')[1]}",
                           ok=worst >= 0.05))

    from .bvp import lateral_block_svals

    spec8 = lateral_block_svals(8, d)["spectrum"]
    sig_min = float(spec8[0])
    probe = kernel_probe(assemble(8, chart).matrix)
    cases.append(_case("kernel-sigma-min-positive", -sig_min, 0.0,
                       "bvp.kernel-sigma-min",
                       ok=sig_min > 1e-8 * spec8[-1]))
    cases.append(_case("kernel-probe-consistency", probe, 1e-5 * spec8[-1],
                       "bvp.kernel-probe"))
    gap8, nk8 = deflated_gap(8, d)
    gap16, nk16 = deflated_gap(16, d)
    cases.append(_case("kernel-gap-stability",
                       gap8 / gap16 if gap16 else np.inf, 2.0,
                       "bvp.kernel-gap-stability",
                       ok=gap16 >= gap8 / 2.0))

    probe8 = cohomology_probe(8, chart)
    probe12 = cohomology_probe(12, chart)
    coh_ok = (probe8["dim_h0"], probe8["dim_h1"]) == (0, 0) and \
        (probe12["dim_h0"], probe12["dim_h1"]) == (0, 0)
    cases.append(_case("cohomology-slab",
                       probe8["dim_h1"] + probe12["dim_h1"]
                       + probe8["dim_h0"] + probe12["dim_h0"], 0.0,
                       "bvp.cohomology-slab", ok=coh_ok))
    torus = cohomology_probe(8, chart, closed_torus=True)
    torus_ok = torus["dim_h0"] >= d and \
        max(torus["translation_image_norms"]) <= 1e-10 and \
        probe8["dim_h0"] == 0
    cases.append(_case("cohomology-torus-control",
                       float(max(torus["translation_image_norms"])), 1e-10,
                       "bvp.cohomology-torus", ok=torus_ok))
    return cases


SUITES = {
    "algebra": suite_algebra,
    "calculus": suite_calculus,
    "boundary": suite_boundary,
    "linearization": suite_linearization,
    "green": suite_green,
    "bvp": suite_bvp,
}


def run_suite(name: str, cfg: dict) -> list:
    if name == "all":
        cases = []
        for key in SUITES:
            cases.extend(run_suite(key, cfg))
        return cases
    if name not in SUITES:
        raise KeyError(name)
    return SUITES[name](cfg)
