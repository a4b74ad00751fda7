import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from delayplatoon.integrate import integrate_rk4
from delayplatoon.reference import ReferenceProfile, eval_inv_vref_derivs, eval_tref, eval_vref

from conftest import DIP


def test_constant_profile_value():
    assert eval_vref(ReferenceProfile.constant(20.0), 100.0) == 20.0


def test_dip_bottom_and_edges():
    assert eval_vref(DIP, 400.0) == pytest.approx(16.0, abs=1e-12)
    assert eval_vref(DIP, 300.0) == pytest.approx(20.0, abs=1e-12)
    assert eval_vref(DIP, 500.0) == pytest.approx(20.0, abs=1e-12)
    assert eval_vref(DIP, 50.0) == 20.0
    assert eval_vref(DIP, 900.0) == 20.0


def test_scalar_and_array_paths_agree():
    s = np.array([0.0, 300.0, 300.1, 400.0, 499.5, 500.0, 800.0])
    arr = np.array(DIP.vref_derivs(s))
    scalar = np.array([DIP.vref_derivs(float(x)) for x in s]).T
    assert np.allclose(arr, scalar, rtol=0, atol=1e-12)


def test_inverse_derivatives_examples():
    assert eval_inv_vref_derivs(ReferenceProfile.constant(20.0), 123.0) == (0.05, 0.0, 0.0)
    assert eval_inv_vref_derivs(DIP, 300.0)[1] == pytest.approx(0.0, abs=1e-15)
    w0, w1, _ = eval_inv_vref_derivs(DIP, 400.0)
    assert w0 == pytest.approx(0.0625, abs=1e-15)
    assert w1 == pytest.approx(0.0, abs=1e-15)


def test_inverse_derivatives_finite_differences():
    rng = np.random.default_rng(3)
    # grid points of the 0.1 m grid away from the kinks of the second derivative
    s = np.round(rng.uniform(0.0, 1000.0, 1000), 1)
    s = s[(np.abs(s - 300.0) > 0.01) & (np.abs(s - 500.0) > 0.01)]
    h = 1e-3
    w0p, w1p, _ = DIP.inv_derivs(s + h)
    w0m, w1m, _ = DIP.inv_derivs(s - h)
    _, w1, w2 = DIP.inv_derivs(s)
    assert np.max(np.abs((w0p - w0m) / (2 * h) - w1)) <= 1e-5
    assert np.max(np.abs((w1p - w1m) / (2 * h) - w2)) <= 1e-4


def test_bounds_on_grid():
    s = np.arange(0.0, 1000.05, 0.1)
    v = eval_vref(DIP, s)
    assert DIP.v_min > 0
    assert np.all(v >= DIP.v_min - 1e-12) and np.all(v <= DIP.v_max + 1e-12)
    assert DIP.v_min == pytest.approx(16.0)


def test_dip_is_c1_with_bounded_curvature():
    eps = 1e-9
    for b in DIP.breakpoints:
        lo, hi = DIP.vref_derivs(b - eps), DIP.vref_derivs(b + eps)
        assert abs(lo[0] - hi[0]) < 1e-8
        assert abs(lo[1] - hi[1]) < 1e-8
    ddv = DIP.vref_derivs(np.linspace(0, 1000, 10001))[2]
    assert np.max(np.abs(ddv)) <= 2.0 * (2 * math.pi / 200.0) ** 2 + 1e-15


def test_tref_examples():
    c = ReferenceProfile.constant(20.0)
    assert eval_tref(c, 200.0) == pytest.approx(10.0, abs=1e-12)
    assert eval_tref(c, 0.0) == 0.0
    with pytest.raises(ValueError):
        eval_tref(c, -1.0)


def test_tref_matches_refined_quadrature():
    coarse = eval_tref(DIP, 600.0, step=0.1)
    fine = eval_tref(DIP, 600.0, step=0.01)
    assert abs(coarse - fine) <= 1e-6
    # independent oracle: composite Simpson on a very fine grid
    s = np.linspace(0.0, 600.0, 600001)
    f = 1.0 / eval_vref(DIP, s)
    h = s[1] - s[0]
    simpson = h / 3 * (f[0] + f[-1] + 4 * f[1:-1:2].sum() + 2 * f[2:-1:2].sum())
    assert abs(coarse - simpson) <= 1e-6


def test_tref_equals_integrated_clock_state():
    grid = np.arange(0.0, 1000.05, 0.1)
    clock = integrate_rk4(lambda s, y: np.array([1.0 / DIP.vref_derivs(s)[0]]), [0.0], grid)[:, 0]
    for s_end in (250.0, 400.0, 777.7):
        k = int(round(s_end / 0.1))
        assert eval_tref(DIP, s_end) == pytest.approx(clock[k], abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.0, 990.0), st.floats(0.5, 10.0))
def test_tref_strictly_increasing(a, d):
    assert eval_tref(DIP, a + d, step=0.5) > eval_tref(DIP, a, step=0.5)


@pytest.mark.parametrize("kw", [dict(kind="wavy"), dict(kind="cosine_dip", s_a=500, s_b=300),
                                dict(kind="cosine_dip", depth=10.0), dict(kind="constant", v_base=0.0)])
def test_invalid_profiles_rejected(kw):
    with pytest.raises(ValueError):
        ReferenceProfile(**kw)
