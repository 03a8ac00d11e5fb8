import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st
from scipy.integrate import solve_ivp

from bschaos.core import GridSpec, bump, constant, eigen, gaussian_in_z, make_params, norm_s
from bschaos.transport import (apply_group, continuity_profile, omega, quasicontraction_margin,
                               transport, transport_point)

P = make_params(0.5, 1.0, 0.0, 1.0, 2.0)


def test_transport_point_examples():
    assert transport_point(P, 1.0, 1.0)[0] == pytest.approx(2.25)
    pt, refl = transport_point(P, 1.0, -4.0)
    assert pt == pytest.approx(1.0) and bool(refl)
    pt, refl = transport_point(P, 3.7, 0.0)
    assert pt == 3.7 and not refl


@pytest.mark.parametrize("a, nu, x, t", [(0.5, 1.0, 1.0, 1.0), (0.3, 2.0, 0.7, 0.4),
                                        (0.8, 0.5, 2.0, 1.5)])
def test_transport_point_solves_characteristic_ode(a, nu, x, t):
    p = make_params(a, nu, 0, 0, 1)
    sol = solve_ivp(lambda tau, X: nu * X ** a, (0, t), [x], rtol=1e-12, atol=1e-14)
    assert transport_point(p, x, t)[0] == pytest.approx(sol.y[0, -1], rel=1e-9)


def test_transport_result():
    r = transport(P, eigen(P, 0.3), 4.0, 1.0)
    assert r.characteristic_point == pytest.approx(transport_point(P, 4.0, 1.0)[0])
    assert not r.reflected
    assert r.value == pytest.approx(math.exp(0.3 * (4.0 + 1.0)))


def test_identity_at_zero_is_exact():
    f = gaussian_in_z(P, 2.0, 0.7)
    x = np.linspace(0, 10, 101)
    assert apply_group(P, f, 0.0) is f
    assert np.array_equal(transport_point(P, x, 0.0)[0], x)


def test_constants_fixed():
    f = constant(2.5)
    for t in (-3.0, -0.1, 0.7, 4.0):
        assert np.all(apply_group(P, f, t)(np.linspace(0, 9, 10)) == 2.5)


@settings(max_examples=100)
@given(st.floats(0.05, 0.95), st.floats(0.1, 3), st.floats(0, 50), st.floats(0, 5),
       st.floats(0.05, 1.0), st.floats(-2, 2))
def test_eigen_action_forward(a, nu, x, t, re, im):
    p = make_params(a, nu, 0, 0, 4.0)
    lam = complex(re * p.strip_width, im)
    f = eigen(p, lam)
    got = apply_group(p, f, t)(x)
    want = np.exp(lam * t) * f(x)
    # exp has condition number |arg|; 1e-13 is the claim while |arg| <= 50
    arg = abs(lam) * float(transport_point(p, x, t)[0] ** (1 - a) / p.c)
    assert abs(got - want) <= 1e-13 * abs(want) * max(1.0, arg / 50.0)


@settings(max_examples=200)
@given(st.floats(0.05, 0.95), st.floats(0.1, 3), st.floats(0, 20), st.floats(-5, 5),
       st.floats(-5, 5))
def test_group_law_unreflected(a, nu, x, t1, t2):
    p = make_params(a, nu, 0, 0, 1.0)
    assume(x ** (1 - a) + p.c * t1 >= 0)
    f = gaussian_in_z(p, 3.0, 1.0)
    lhs = apply_group(p, apply_group(p, f, t2), t1)(x)
    rhs = apply_group(p, f, t1 + t2)(x)
    assert abs(lhs - rhs) <= 1e-12 * (1 + abs(rhs))


def test_group_law_breaks_when_first_leg_reflects():
    # ||u + c t1| + c t2| != |u + c t1 + c t2| once u + c t1 < 0: documented, not a bug
    x, t1, t2 = 1.0, -4.0, 1.0
    f = gaussian_in_z(P, 3.0, 1.0)
    lhs = apply_group(P, apply_group(P, f, t2), t1)(x)
    rhs = apply_group(P, f, t1 + t2)(x)
    assert transport_point(P, x, t1)[1]
    assert abs(lhs - rhs) > 1e-3


@settings(max_examples=100)
@given(st.floats(0.05, 0.95), st.floats(0.1, 3), st.floats(0, 3))
def test_inverse_without_reflection(a, nu, t):
    p = make_params(a, nu, 0, 0, 1.0)
    x = np.linspace(0, 30, 61)
    x = x[x ** (1 - a) >= p.c * t]
    f = gaussian_in_z(p, 2.0, 1.0)
    for s in (t, -t):
        back = apply_group(p, apply_group(p, f, -s), s)(x)
        assert np.allclose(back, f(x), rtol=1e-12, atol=1e-14)


def test_inverse_with_reflection_lands_on_reflected_point():
    x, t = 1.0, 4.0     # u = 1, c t = 2: S(-t) reflects
    f = gaussian_in_z(P, 2.0, 1.0)
    back = apply_group(P, apply_group(P, f, t), -t)(x)
    u_refl = abs(1.0 - 2.0) + 2.0
    assert back == pytest.approx(f(u_refl ** 2))
    assert abs(back - f(x)) > 1e-3


def test_support_tracking():
    f = bump(2.0, 1.0)
    for t in (-1.0, -0.3, 0.5, 2.0):
        g = apply_group(P, f, t)
        x = np.linspace(0, 12, 5001)
        vals = np.abs(g(x))
        lo, hi = g.support
        assert np.all(vals[(x < lo - 1e-9) | (x > hi + 1e-9)] == 0)


def test_omega_examples():
    assert omega(make_params(0.5, 1, 0, 0, 2)) == pytest.approx(1.0)
    assert omega(make_params(0.5, 1, 0, 0, 0)) == 0.0
    assert omega(make_params(0.75, 2, 0, 0, 3)) == pytest.approx(1.5)


def test_margin_examples():
    w = omega(P)
    assert quasicontraction_margin(P, constant(1.0), 1.0) == pytest.approx((math.exp(w) - 1) / 4)
    assert quasicontraction_margin(P, bump(2, 1), 0.0) == 0.0
    for t in (-0.5, 0.5):
        assert quasicontraction_margin(P, bump(2, 1), t) >= -1e-9


@settings(max_examples=30, deadline=None)
@given(st.floats(-3, 3), st.floats(0.5, 5), st.floats(0.3, 2))
def test_quasicontraction_property(t, center, width):
    assert quasicontraction_margin(P, bump(center, width), t, GridSpec(n=2048)) >= -1e-9


def test_continuity_profile():
    f = bump(2.0, 1.0)
    ts = [2.0 ** -k for k in range(13)]
    prof = continuity_profile(P, f, ts)
    assert all(v > 0 for v in prof)
    assert all(b < a for a, b in zip(prof, prof[1:]))
    assert continuity_profile(P, f, [0.0]) == [0.0]
    assert continuity_profile(P, constant(1.0), [0.5, 1.0]) == [0.0, 0.0]


def test_continuity_is_first_order():
    # ||S(t)f - f|| ~ t ||Af|| for small t
    f = gaussian_in_z(P, 3.0, 1.0)
    a, b = continuity_profile(P, f, [2.0 ** -10, 2.0 ** -11])
    assert a / b == pytest.approx(2.0, rel=1e-2)


def test_norm_unchanged_growth_rate():
    g = apply_group(P, eigen(P, 0.4), 1.3)
    assert g.growth_rate == eigen(P, 0.4).growth_rate
    assert norm_s(P, g).value > 0
