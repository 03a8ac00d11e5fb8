import cmath
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bschaos.core import ParameterError, constant, eigen, make_params, membership_check
from bschaos.spectral import (DegenerateRotation, EmptyIntersection, Region, admissible_intervals,
                              certificate_sequence, classify, exclusion_zone, find_periodic,
                              gsc_witness_bundle, h_eval, in_strip, p_eval, parabola_section,
                              rational_rotation, s_star, s_star_scan, span_iterate,
                              verify_periodicity)

P = make_params(0.5, 1.0, 0.0, 1.0, 4.0)


def test_p_examples():
    assert p_eval(make_params(0.5, 1, 0, 1, 1), 1j) == 0
    assert p_eval(make_params(0.5, 1, 1, -2, 1), 1.0) == 0
    v = p_eval(P, 0.5 + 1j * math.sqrt(1.25))
    assert abs(v.real) < 1e-15 and v.imag == pytest.approx(math.sqrt(5) / 2)


@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(-3, 3), st.floats(-3, 3), st.floats(0.01, 5))
def test_h_modulus(re, im, b, g, t):
    p = make_params(0.5, 1, b, g, 1)
    lam = complex(re, im)
    assert abs(h_eval(p, lam, t)) == pytest.approx(math.exp(t * p_eval(p, lam).real), rel=1e-13)


# -- threshold ---------------------------------------------------------------

def test_s_star_examples():
    thr = s_star(make_params(0.5, 1, 1, -2, 1))
    assert thr.s_star == 2.0 and thr.x_minus == -2.0 and thr.x_plus == 1.0
    assert s_star(make_params(0.5, 1, 0, 1, 1)).s_star == 0.0
    assert s_star(make_params(0.5, 1, 0, 1, 1)).x_minus is None
    assert s_star(make_params(0.5, 1, 2, 0, 1)).s_star == 0.0
    assert s_star_scan(make_params(0.5, 1, 1, -2, 1)) == pytest.approx(2.0, abs=1e-9)


def test_verbatim_branch_disagrees_where_both_roots_positive():
    p = make_params(0.5, 1, -1.0, 0.2, 1)       # beta < 0 < gamma < beta^2/4
    thr = s_star(p)
    assert thr.s_star == 0.0
    assert thr.s_star_verbatim == pytest.approx((1 + math.sqrt(0.2)) / 1.0)
    assert not thr.verbatim_agrees
    assert s_star_scan(p) == pytest.approx(0.0, abs=1e-9)
    # any s > 0 already admits points near Re lam = 0 with Re p = 0
    assert admissible_intervals(p, 0.1)


# for 0 < gamma << |beta| the admissible x-interval has width ~ gamma/|beta|, below any scan
GAMMAS = st.one_of(st.just(0.0), st.floats(1e-6, 3), st.floats(-3, -1e-6))


@settings(max_examples=60, deadline=None)
@given(st.floats(-3, 3), GAMMAS, st.floats(0.2, 3), st.floats(0.05, 0.95))
def test_s_star_matches_scan(b, g, nu, a):
    p = make_params(a, nu, b, g, 1)
    assert abs(s_star(p).s_star - s_star_scan(p)) <= 1e-9


# -- classification ------------------------------------------------------------

def test_classify_examples():
    assert classify(P, 1.0, 0.5).region is Region.OMEGA1
    pt = classify(P, 1.0, 0.5 + 2j)
    assert pt.region is Region.OMEGA2 and pt.p_val.real == pytest.approx(-2.75)
    lam = 0.5 + 1j * math.sqrt(1.25)
    pt = classify(P, 2 * math.pi / math.sqrt(1.25), lam)
    assert pt.region is Region.OMEGA3 and pt.rotation == Fraction(1, 1)
    assert classify(P, 1.0, 2.5).region is Region.OUTSIDE
    assert classify(P, 1.0, -0.1).region is Region.OUTSIDE
    assert classify(P, 1.0, 2.0).region is Region.BOUNDARY
    assert classify(P, 1.0, 1e-13 + 1j).region is Region.BOUNDARY


def test_classify_irrational_rotation_is_boundary():
    lam = 0.5 + 1j * math.sqrt(1.25)
    assert classify(P, math.sqrt(2.0), lam).region is Region.BOUNDARY


def test_classify_rejects_nonpositive_t():
    with pytest.raises(ValueError):
        classify(P, 0.0, 0.5)


def test_rational_rotation():
    assert rational_rotation(0.5) == Fraction(1, 2)
    assert rational_rotation(3 / 7 + 1e-12) == Fraction(3, 7)
    assert rational_rotation(math.pi) is None
    assert rational_rotation(1 / 97) is None      # denominator beyond 64


@settings(max_examples=200)
@given(st.floats(-1, 3), st.floats(-4, 4), st.floats(0.05, 3))
def test_labeled_points_in_strip(re, im, t):
    pt = classify(P, t, complex(re, im))
    if pt.region in (Region.OMEGA1, Region.OMEGA2, Region.OMEGA3):
        assert 0 < pt.lam.real < P.strip_width
        assert in_strip(P, pt.lam)


# -- parabola, orbits ------------------------------------------------------------

def test_parabola_section_examples():
    pts = parabola_section(P, 4.0, 3)
    assert len(pts) == 3
    assert all(abs(pt.p_val.real) <= 1e-12 for pt in pts)
    with pytest.raises(EmptyIntersection):
        parabola_section(make_params(0.5, 1, 1, -2, 2), 2.0, 3)
    (pt,) = parabola_section(make_params(0.5, 1, 0, 0.01, 1), 1.0, 1)
    assert pt.lam.real == pytest.approx(0.25)
    assert pt.lam.imag == pytest.approx(math.sqrt(0.0725))


@settings(max_examples=50, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.1, 6), st.integers(1, 12))
def test_parabola_points_on_curve(b, g, ds, n):
    p = make_params(0.5, 1, b, g, 1)
    s = s_star(p).s_star + ds
    for pt in parabola_section(p, s, n):
        assert abs(pt.p_val.real) <= 1e-12 * max(1.0, abs(pt.lam) ** 2)
        assert 0 < pt.lam.real < s * 0.5


def test_find_periodic_examples():
    orb = find_periodic(P, 4.0, 0.5, 1)
    assert orb.point.lam.imag == pytest.approx(math.sqrt(1.25))
    assert orb.t0 == pytest.approx(2 * math.pi / math.sqrt(1.25))
    assert orb.t0 == pytest.approx(5.6199, abs=1e-4)
    assert orb.m == 1 and orb.scalar_defect() <= 1e-12
    half = find_periodic(P, 4.0, 0.5, "1/2")
    assert half.point.lam == orb.point.lam
    assert half.t0 == pytest.approx(orb.t0 / 2) and half.m == 2
    assert half.point.h_val == pytest.approx(-1.0, abs=1e-12)
    assert half.scalar_defect() <= 1e-12


@settings(max_examples=50, deadline=None)
@given(st.floats(0.05, 0.95), st.integers(1, 5), st.integers(1, 8))
def test_find_periodic_scalar(frac, n, m):
    orb = find_periodic(P, 4.0, frac * P.strip_width, Fraction(n, m))
    assert orb.scalar_defect() <= 1e-12
    assert abs(cmath.exp(orb.m * orb.t0 * orb.point.p_val) - 1) <= 1e-12


def test_find_periodic_errors():
    with pytest.raises(EmptyIntersection):
        find_periodic(make_params(0.5, 1, 1, -2, 1), 2.0, 0.5, 1)
    with pytest.raises(ValueError):
        find_periodic(P, 4.0, 3.0, 1)
    with pytest.raises(ValueError):
        find_periodic(P, 4.0, 0.5, 0)
    with pytest.raises(DegenerateRotation):
        find_periodic(make_params(0.5, 1, -1, 1, 4), 4.0, 0.5, 1)    # Im p = (2x + beta) y = 0


def test_verify_periodicity_one_and_two_periods():
    orb = find_periodic(P, 4.0, 0.5, 1)
    probes = np.linspace(9, 100, 40)
    one = verify_periodicity(P, orb, probes)
    assert one.deviation <= 1e-4 and one.probes_used > 0
    two = verify_periodicity(P, orb, np.linspace(9, 400, 60), periods=2)
    assert two.deviation <= 2e-4 and two.probes_used > 0
    assert two.z_min > one.z_min


def test_verify_periodicity_refuses_deep_nesting():
    orb = find_periodic(P, 4.0, 0.5, "1/3")
    with pytest.raises(ValueError, match="nested"):
        verify_periodicity(P, orb, np.linspace(9, 100, 5))


def test_verify_periodicity_constant_field():
    p = make_params(0.5, 1, 0, 0, 4)
    orb = find_periodic(p, 4.0, 0.7, 1)
    chk = verify_periodicity(p, orb, np.linspace(0, 20, 11), f=constant(1.0))
    assert chk.deviation <= 1e-10 and chk.probes_dropped == 0


def test_exclusion_zone_grows_with_horizon():
    lam = 0.5 + 1.118j
    zs = [exclusion_zone(P, lam, T, 1e-5) for T in (1.0, 5.0, 10.0)]
    assert zs[0] < zs[1] < zs[2]


# -- witnesses -------------------------------------------------------------------

def test_certificate_examples():
    seq = certificate_sequence(cmath.exp(-2.75), 10, "L")
    assert int(np.flatnonzero(seq < 1e-8)[0]) + 1 == 7
    bundle = gsc_witness_bundle(P, 4.0, 1.0, n_points=8, n_iter=60, seed=1)
    assert len(bundle.omega1) == 8
    assert all(w.certificate[-1] < 1e-8 for w in bundle.omega1)


def test_bundle_properties():
    rep = gsc_witness_bundle(P, 4.0, 0.5, seed=7)
    assert len(rep.omega1) == 8 and len(rep.omega2) == 8
    assert rep.all_decay and rep.max_lz_defect <= 1e-12 and not rep.failures
    for w in rep.omega1 + rep.omega2:
        assert w.member
        assert membership_check(P, eigen(P, w.point.lam))
        assert w.direction == ("Z" if w.point.region is Region.OMEGA1 else "L")
    assert rep.to_dict()["n_omega1"] == 8


def test_bundle_reproducible():
    a = gsc_witness_bundle(P, 4.0, 0.5, seed=11).to_dict()
    b = gsc_witness_bundle(P, 4.0, 0.5, seed=11).to_dict()
    assert a == b


def test_bundle_reports_shortfall():
    rep = gsc_witness_bundle(P, 4.0, 0.5, seed=0, max_attempts=3)
    assert rep.attempts == 3 and rep.failures and not (len(rep.omega1) == 8 and len(rep.omega2) == 8)


def test_bundle_below_threshold():
    with pytest.raises(EmptyIntersection):
        gsc_witness_bundle(make_params(0.5, 1, 1, -2, 1), 1.5, 0.5)


def test_span_iterate_roundtrip():
    t = 0.5
    lams = [0.5 + 0.1j, 1.0 - 0.2j]
    alpha = [1.0, 2.0 - 1j]
    z = span_iterate(P, t, alpha, lams, 5, "Z")
    back = span_iterate(P, t, z, lams, 5, "L", check=False)
    assert np.allclose(back, alpha, rtol=1e-12)
    assert all(abs(v) < abs(a) for v, a in zip(z, alpha))


def test_span_iterate_checks():
    with pytest.raises(ParameterError):
        span_iterate(P, 0.5, [1.0], [0.5 + 3j], 2, "Z")      # Omega2 point
    with pytest.raises(ValueError):
        span_iterate(P, 0.5, [1.0, 2.0], [0.5], 1, "L")
    with pytest.raises(ValueError):
        span_iterate(P, 0.5, [1.0], [0.5], 1, "X")
