"""Geometry tests: horizons, both charts, causal structure, surface gravity."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

import kdslab.spacetime as st
from kdslab.spacetime import (
    BOYER_LINDQUIST,
    KERR_STAR,
    BlackHoleParams,
    CausalClass,
    NotAdmissible,
    OutOfChart,
    SpacetimePoint,
    ZeroVector,
)

from conftest import bisect_root


# ---------------------------------------------------------------------------
# Delta_r and horizons
# ---------------------------------------------------------------------------

def test_delta_r_schwarzschild_root():
    # Lambda = 0: Delta_r(2 M0) = 0 exactly (Schwarzschild radius)
    p0 = BlackHoleParams(m0=1.0, lam=0.0, a=0.0)
    assert st.delta_r(p0, 2.0) == 0.0


def test_delta_r_direct_polynomial_value():
    p = BlackHoleParams(m0=1.0, lam=0.06, a=0.0)
    # (1)(1 - 0.02) - 2 = -1.02
    assert_allclose(st.delta_r(p, 1.0), -1.02, rtol=0, atol=1e-15)


def test_delta_r_against_high_precision_oracle():
    from mpmath import mp, mpf

    mp.dps = 50
    p = BlackHoleParams(m0=1.0, lam=0.06, a=0.1)
    r = mpf(3)
    exact = (r ** 2 + mpf("0.01")) * (1 - mpf("0.06") * r ** 2 / 3) - 2 * r
    got = st.delta_r(p, 3.0)
    assert abs(got - float(exact)) <= 1e-14 * abs(float(exact))


def test_find_horizons_lambda_zero_not_admissible():
    p = BlackHoleParams(m0=1.0, lam=0.0, a=0.0)
    with pytest.raises(NotAdmissible):
        st.find_horizons(p)


def test_find_horizons_against_bisection_oracle(sds_params, sds_horizons):
    # At a=0: Delta_r = r^2 - 2r - r^4/50; roots of r^3 - 50 r + 100 = 0.
    cubic = lambda r: r ** 3 - 50.0 * r + 100.0
    r_minus = bisect_root(cubic, 2.0, 3.0)
    r_plus = bisect_root(cubic, 5.0, 6.0)
    assert abs(sds_horizons.r_minus - r_minus) < 1e-10
    assert abs(sds_horizons.r_plus - r_plus) < 1e-10
    assert abs(st.delta_r(sds_params, sds_horizons.r_minus)) < 1e-10
    assert abs(st.delta_r(sds_params, sds_horizons.r_plus)) < 1e-10


def test_find_horizons_slow_rotation_perturbation(sds_horizons):
    p = BlackHoleParams(m0=1.0, lam=0.06, a=0.05)
    hor = st.find_horizons(p)
    assert abs(hor.r_minus - sds_horizons.r_minus) < 10 * 0.05 ** 2
    assert abs(hor.r_plus - sds_horizons.r_plus) < 10 * 0.05 ** 2


def test_find_horizons_degenerate_rejected():
    # 9 Lambda M0^2 > 1: no black-hole/cosmological pair at a=0
    with pytest.raises(NotAdmissible):
        st.find_horizons(BlackHoleParams(m0=1.0, lam=0.2, a=0.0))


def test_delta_r_positive_between_horizons(sds_params, sds_horizons):
    r = np.linspace(sds_horizons.r_minus, sds_horizons.r_plus, 1002)[1:-1]
    assert (st.delta_r(sds_params, r) > 0).all()


def test_alpha_exact():
    p = BlackHoleParams(m0=1.0, lam=0.06, a=0.3)
    assert p.alpha == 0.06 * 0.09 / 3.0


def test_extension_width_bounds():
    with pytest.raises(NotAdmissible):
        st.resolve_extension(BlackHoleParams(m0=1.0, lam=0.06, a=0.0, delta=1.0))


# ---------------------------------------------------------------------------
# Boyer-Lindquist metric
# ---------------------------------------------------------------------------

def test_metric_bl_schwarzschild_de_sitter_closed_form(sds_params, rng):
    hor = st.find_horizons(sds_params)
    for _ in range(50):
        r = rng.uniform(hor.r_minus + 0.05, hor.r_plus - 0.05)
        th = rng.uniform(0.1, math.pi - 0.1)
        pt = SpacetimePoint(chart=BOYER_LINDQUIST, t=0.0, r=r, theta=th)
        g = st.metric_bl(sds_params, pt).g
        dr = float(st.delta_r(sds_params, r))
        expected = np.diag([dr / r ** 2, -r ** 2 / dr, -r ** 2,
                            -r ** 2 * math.sin(th) ** 2])
        assert_allclose(g, expected, rtol=0, atol=1e-12 * max(1.0, r ** 2 / dr))


def test_metric_bl_kerr_signature_and_cross_term(kerr_params, rng):
    hor = st.find_horizons(kerr_params)
    for _ in range(25):
        r = rng.uniform(hor.r_minus + 0.1, hor.r_plus - 0.1)
        th = rng.uniform(0.15, math.pi - 0.15)
        pt = SpacetimePoint(chart=BOYER_LINDQUIST, t=0.0, r=r, theta=th)
        g = st.metric_bl(kerr_params, pt).g
        assert_allclose(g, g.T, atol=1e-15)
        assert abs(g[0, 3]) > 0
        evals = np.linalg.eigvalsh(g)
        assert (evals > 0).sum() == 1 and (evals < 0).sum() == 3
        assert abs(np.linalg.det(g)) > 0


def test_metric_bl_out_of_chart(sds_params, sds_horizons):
    pt = SpacetimePoint(chart=BOYER_LINDQUIST, t=0.0,
                        r=sds_horizons.r_plus + 0.1, theta=1.0)
    with pytest.raises(OutOfChart):
        st.metric_bl(sds_params, pt)


def test_metric_bl_equatorial_symbolic_oracle(kerr_params):
    sympy = pytest.importorskip("sympy")
    r, th = sympy.symbols("r theta", positive=True)
    m0, lam, a = 1, sympy.Rational(6, 100), sympy.Rational(5, 100)
    alpha = lam * a ** 2 / 3
    dr = (r ** 2 + a ** 2) * (1 - lam * r ** 2 / 3) - 2 * m0 * r
    dth = 1 + alpha * sympy.cos(th) ** 2
    rho2 = r ** 2 + a ** 2 * sympy.cos(th) ** 2
    w = 1 + alpha
    sin2 = sympy.sin(th) ** 2
    g_tt = (dr - dth * a ** 2 * sin2) / (w ** 2 * rho2)
    g_tp = a * sin2 * (dth * (r ** 2 + a ** 2) - dr) / (w ** 2 * rho2)
    g_pp = (dr * a ** 2 * sin2 ** 2 - dth * sin2 * (r ** 2 + a ** 2) ** 2) \
        / (w ** 2 * rho2)
    subs = {r: sympy.Rational(7, 2), th: sympy.pi / 2}
    pt = SpacetimePoint(chart=BOYER_LINDQUIST, t=0.0, r=3.5, theta=math.pi / 2)
    g = st.metric_bl(kerr_params, pt).g
    assert_allclose(g[0, 0], float(g_tt.subs(subs)), rtol=1e-12)
    assert_allclose(g[0, 3], float(g_tp.subs(subs)), rtol=1e-12)
    assert_allclose(g[3, 3], float(g_pp.subs(subs)), rtol=1e-12)
    assert np.isfinite(g).all()


# ---------------------------------------------------------------------------
# Kerr-star chart
# ---------------------------------------------------------------------------

def test_metric_star_finite_at_horizons(sds_params, kerr_params):
    for params in (sds_params, kerr_params):
        hor = st.find_horizons(params)
        trans = st.transition_functions(params)
        for r_h in (hor.r_minus, hor.r_plus):
            pt = SpacetimePoint(chart=KERR_STAR, t=0.0, r=r_h, theta=1.2)
            g = st.metric_star(params, pt, trans).g
            assert np.isfinite(g).all()


def test_metric_star_no_dr2_at_horizon_sds(sds_params, sds_horizons):
    trans = st.transition_functions(sds_params)
    for r_h in (sds_horizons.r_minus, sds_horizons.r_plus):
        pt = SpacetimePoint(chart=KERR_STAR, t=0.0, r=r_h, theta=0.9)
        g = st.metric_star(sds_params, pt, trans).g
        assert abs(g[1, 1]) < 1e-14


def test_metric_star_closed_form_matches_pushforward(sds_params, kerr_params):
    for params in (sds_params, kerr_params):
        hor = st.find_horizons(params)
        trans = st.transition_functions(params)
        r = np.linspace(hor.r_minus + 0.05, hor.r_plus - 0.05, 31)
        th = np.linspace(0.3, math.pi - 0.3, 7)
        rr, tt = np.meshgrid(r, th, indexing="ij")
        direct = st.metric_star_components(params, rr, tt, trans)
        pushed = st.metric_star_pushforward(params, rr, tt, trans)
        assert np.abs(direct - pushed).max() < 1e-10


def test_metric_star_spacelike_outside_horizons(sds_params, sds_horizons):
    trans = st.transition_functions(sds_params)
    delta = sds_params.delta
    pt = SpacetimePoint(chart=KERR_STAR, t=0.0,
                        r=sds_horizons.r_plus + delta / 2, theta=1.1)
    g = st.metric_star(sds_params, pt, trans).g
    assert g[0, 0] < 0  # g_{t+t+} = Delta_r / r^2 < 0 beyond r_+


def test_metric_star_out_of_chart(sds_params, sds_horizons):
    trans = st.transition_functions(sds_params)
    pt = SpacetimePoint(chart=KERR_STAR, t=0.0,
                        r=sds_horizons.r_plus + 10 * sds_params.delta, theta=1.0)
    with pytest.raises(OutOfChart):
        st.metric_star(sds_params, pt, trans)


def test_r_level_sets_spacelike_outside(sds_params, sds_horizons):
    # g^{-1}(dr, dr) > 0 at r_pm -+ delta/2 outside the horizon interval
    trans = st.transition_functions(sds_params)
    delta = sds_params.delta
    for r0 in (sds_horizons.r_minus - delta / 2, sds_horizons.r_plus + delta / 2):
        g = st.metric_star_components(sds_params, r0, 1.3, trans)
        ginv = np.linalg.inv(g)
        assert ginv[1, 1] > 0


def test_transition_function_collar_identities(sds_params, kerr_params):
    for params in (sds_params, kerr_params):
        hor = st.find_horizons(params)
        trans = st.transition_functions(params)
        w = 1.0 + params.alpha
        eps = params.epsilon
        for r_h, sign in ((hor.r_plus, 1.0), (hor.r_minus, -1.0)):
            r = r_h - sign * 0.5 * eps  # inside the collar, inside (r-, r+)
            dr = float(st.delta_r(params, r))
            assert_allclose(float(trans.f_t_prime(r)),
                            sign * w * (r ** 2 + params.a ** 2) / dr, rtol=1e-13)
            assert_allclose(float(trans.f_phi_prime(r)),
                            sign * w * params.a / dr, rtol=1e-13, atol=1e-18)


def test_transition_phi_constant_at_zero_spin(sds_params, sds_horizons):
    trans = st.transition_functions(sds_params)
    r = np.linspace(sds_horizons.r_minus + 0.1, sds_horizons.r_plus - 0.1, 64)
    assert np.abs(trans.f_phi_prime(r)).max() == 0.0


def test_evolution_chart_slices_spacelike(sds_params, kerr_params):
    for params in (sds_params, kerr_params):
        trans = st.evolution_transition(params, time_shift=0.5)
        margin = st.certify_spacelike_slices(params, trans)
        assert margin > 0
    # the uncorrected chart must fail the certification
    with pytest.raises(NotAdmissible):
        st.certify_spacelike_slices(sds_params, st.transition_functions(sds_params))


# ---------------------------------------------------------------------------
# Inverse metric, volume form, causal classes, ergospheres
# ---------------------------------------------------------------------------

def test_inverse_metric_minkowski():
    g = st.Metric4(g=np.diag([1.0, -1.0, -1.0, -1.0]), chart=KERR_STAR)
    ginv = st.inverse_metric(g)
    assert_allclose(ginv.g, g.g, atol=1e-15)
    assert ginv.contravariant


def test_inverse_metric_identity_property(kerr_params, rng):
    hor = st.find_horizons(kerr_params)
    trans = st.transition_functions(kerr_params)
    for _ in range(20):
        r = rng.uniform(hor.r_minus - 0.5 * kerr_params.delta,
                        hor.r_plus + 0.5 * kerr_params.delta)
        th = rng.uniform(0.2, math.pi - 0.2)
        pt = SpacetimePoint(chart=KERR_STAR, t=0.0, r=r, theta=th)
        m = st.metric_star(kerr_params, pt, trans)
        ginv = st.inverse_metric(m)
        assert np.abs(m.g @ ginv.g - np.eye(4)).max() < 1e-12


def test_inverse_metric_sds_diagonal(sds_params, sds_horizons):
    r, th = 4.0, 1.0
    pt = SpacetimePoint(chart=BOYER_LINDQUIST, t=0.0, r=r, theta=th)
    ginv = st.inverse_metric(st.metric_bl(sds_params, pt)).g
    dr = float(st.delta_r(sds_params, r))
    expected = np.diag([r ** 2 / dr, -dr / r ** 2, -1.0 / r ** 2,
                        -1.0 / (r ** 2 * math.sin(th) ** 2)])
    assert_allclose(ginv, expected, rtol=1e-12, atol=1e-15)


def test_sqrt_det_both_charts(sds_params, kerr_params, rng):
    for params in (sds_params, kerr_params):
        hor = st.find_horizons(params)
        trans = st.transition_functions(params)
        for _ in range(20):
            r = rng.uniform(hor.r_minus + 0.1, hor.r_plus - 0.1)
            th = rng.uniform(0.1, math.pi - 0.1)
            expected = float(st.volume_weight(params, r, th))
            pt_bl = SpacetimePoint(chart=BOYER_LINDQUIST, t=0.0, r=r, theta=th)
            pt_ks = SpacetimePoint(chart=KERR_STAR, t=0.0, r=r, theta=th)
            assert_allclose(st.sqrt_det(st.metric_bl(params, pt_bl)),
                            expected, rtol=1e-10)
            assert_allclose(st.sqrt_det(st.metric_star(params, pt_ks, trans)),
                            expected, rtol=1e-10)


def test_sqrt_det_kerr_star_at_horizon(kerr_params):
    hor = st.find_horizons(kerr_params)
    trans = st.transition_functions(kerr_params)
    pt = SpacetimePoint(chart=KERR_STAR, t=0.0, r=hor.r_plus, theta=1.2)
    val = st.sqrt_det(st.metric_star(kerr_params, pt, trans))
    assert val > 0
    assert_allclose(val, float(st.volume_weight(kerr_params, hor.r_plus, 1.2)),
                    rtol=1e-10)


def test_sqrt_det_equatorial_symbolic(kerr_params):
    sympy = pytest.importorskip("sympy")
    r, a, lam = sympy.Rational(7, 2), sympy.Rational(5, 100), sympy.Rational(6, 100)
    alpha = lam * a ** 2 / 3
    rho2 = r ** 2  # theta = pi/2
    expected = float(rho2 / (1 + alpha) ** 2)  # sin(pi/2) = 1
    pt = SpacetimePoint(chart=BOYER_LINDQUIST, t=0.0, r=3.5, theta=math.pi / 2)
    assert_allclose(st.sqrt_det(st.metric_bl(kerr_params, pt)), expected,
                    rtol=1e-12)


def test_causal_character_examples(sds_params, sds_horizons, kerr_params):
    trans = st.transition_functions(sds_params)
    pt = SpacetimePoint(chart=BOYER_LINDQUIST, t=0.0, r=4.0, theta=1.0)
    m = st.metric_bl(sds_params, pt)
    assert st.causal_character(m, [1, 0, 0, 0]) is CausalClass.TIMELIKE
    assert st.causal_character(m, [0, 0, 1, 0]) is CausalClass.SPACELIKE
    pt_h = SpacetimePoint(chart=KERR_STAR, t=0.0, r=sds_horizons.r_plus, theta=1.0)
    m_h = st.metric_star(sds_params, pt_h, trans)
    assert st.causal_character(m_h, [0, 1, 0, 0]) is CausalClass.NULL
    with pytest.raises(ZeroVector):
        st.causal_character(m, [0, 0, 0, 0])


def test_ergosphere_indicator(sds_params, kerr_params):
    hor = st.find_horizons(sds_params)
    r = np.linspace(hor.r_minus + 1e-3, hor.r_plus - 1e-3, 200)
    assert (st.ergosphere_indicator(sds_params, r, math.pi / 2) > 0).all()

    p = st.resolve_extension(BlackHoleParams(m0=1.0, lam=0.06, a=0.1))
    hor_a = st.find_horizons(p)
    # equatorial point just above r_-: inside the ergoregion
    assert st.ergosphere_indicator(p, hor_a.r_minus + 1e-3, math.pi / 2) < 0
    # the axis is never inside the ergoregion
    r = np.linspace(hor_a.r_minus + 1e-3, hor_a.r_plus - 1e-3, 100)
    assert (st.ergosphere_indicator(p, r, 1e-6) > 0).all()


def test_ergosphere_near_horizon_scaling():
    # sign change within O(a) of the horizons (equatorial scan)
    p = st.resolve_extension(BlackHoleParams(m0=1.0, lam=0.06, a=0.1))
    hor = st.find_horizons(p)
    vals = st.ergosphere_indicator(
        p, hor.r_minus + np.array([1e-3, 0.5]), math.pi / 2)
    assert vals[0] < 0 < vals[1]


# ---------------------------------------------------------------------------
# Christoffel symbols and surface gravity
# ---------------------------------------------------------------------------

def test_christoffel_flat_zero():
    comps = lambda r, th: np.broadcast_to(
        np.diag([1.0, -1.0, -1.0, -1.0]),
        np.broadcast(np.asarray(r), np.asarray(th)).shape + (4, 4)).copy()
    gamma = st.christoffel_from_components(comps, 1.0, 1.0)
    assert np.abs(gamma).max() < 1e-12


def test_christoffel_symmetry(kerr_params):
    pt = SpacetimePoint(chart=KERR_STAR, t=0.0, r=3.1, theta=1.0)
    gamma = st.christoffel(kerr_params, pt)
    assert_allclose(gamma, np.swapaxes(gamma, 1, 2), atol=1e-12)


def test_christoffel_sds_symbolic_oracle(sds_params):
    sympy = pytest.importorskip("sympy")
    r, th = sympy.symbols("r theta", positive=True)
    dr_expr = r ** 2 * (1 - sympy.Rational(6, 100) * r ** 2 / 3) - 2 * r
    g_sym = sympy.diag(dr_expr / r ** 2, -r ** 2 / dr_expr, -r ** 2,
                       -r ** 2 * sympy.sin(th) ** 2)
    coords = [sympy.Symbol("t"), r, th, sympy.Symbol("phi")]
    ginv_sym = g_sym.inv()
    gamma_sym = [[[None] * 4 for _ in range(4)] for _ in range(4)]
    for mu in range(4):
        for nu in range(4):
            for sg in range(4):
                expr = 0
                for lam_i in range(4):
                    expr += ginv_sym[mu, lam_i] * (
                        sympy.diff(g_sym[lam_i, sg], coords[nu])
                        + sympy.diff(g_sym[lam_i, nu], coords[sg])
                        - sympy.diff(g_sym[nu, sg], coords[lam_i]))
                gamma_sym[mu][nu][sg] = sympy.simplify(expr / 2)
    r0, th0 = 3.7, 1.15
    pt = SpacetimePoint(chart=BOYER_LINDQUIST, t=0.0, r=r0, theta=th0)
    gamma_num = st.christoffel(sds_params, pt)
    subs = {r: r0, th: th0}
    for mu in range(4):
        for nu in range(4):
            for sg in range(4):
                expected = float(gamma_sym[mu][nu][sg].subs(subs))
                assert abs(gamma_num[mu, nu, sg] - expected) < 1e-8


def test_surface_gravity_closed_form_sds(sds_params, sds_horizons):
    km, kp = st.surface_gravity(sds_params)
    assert_allclose(km, abs(sds_horizons.d_delta_r_minus)
                    / (2 * sds_horizons.r_minus ** 2), rtol=1e-8)
    assert_allclose(kp, abs(sds_horizons.d_delta_r_plus)
                    / (2 * sds_horizons.r_plus ** 2), rtol=1e-8)


def test_surface_gravity_positive_across_parameters():
    for (m0, lam, a) in ((1.0, 0.06, 0.0), (1.0, 0.06, 0.05), (1.0, 0.04, 0.1),
                         (0.8, 0.09, 0.02)):
        km, kp = st.surface_gravity(BlackHoleParams(m0=m0, lam=lam, a=a))
        assert km > 0 and kp > 0


def test_surface_gravity_residual_tolerance(kerr_params):
    # the parallelism check itself: would raise NotProportional on failure
    st.surface_gravity(kerr_params, rel_tol=1e-6)


def test_horizon_geometry_slopes(sds_horizons):
    assert sds_horizons.d_delta_r_minus > 0
    assert sds_horizons.d_delta_r_plus < 0
    assert sds_horizons.kappa_minus > 0 and sds_horizons.kappa_plus > 0
