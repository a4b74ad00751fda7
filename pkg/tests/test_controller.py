import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from delayplatoon.controller import (ControllerGains, headway_control_time, make_gains,
                                     make_temporal_gains, platoon_headway_control,
                                     platoon_spatial_control, spatial_control)
from delayplatoon.errors import NonPositiveVelocity, NotHurwitz
from delayplatoon.reference import ReferenceProfile
from delayplatoon.spacing import PolicyParams, TimingErrors, spatial_errors, temporal_errors
from delayplatoon.vehicle import VehicleStateSpace, VehicleStateTime

from conftest import DIP

C20 = ReferenceProfile.constant(20.0)
POL = PolicyParams(kappa=2.0, kappa0=0.1)


def test_table_gains_example():
    g = make_gains(0.05, 0.9, 2.0)
    assert (g.K1, g.K2) == pytest.approx((-0.00125, -0.045), abs=1e-15)
    poles = np.sort_complex(g.poles)
    # eigenvalue oracle: roots of the target polynomial
    target = np.sort_complex(np.roots([1.0, 0.09, 0.0025]))
    assert np.allclose(poles, target, atol=1e-12)
    assert np.allclose(poles.real, -0.045) and np.allclose(np.abs(poles.imag), 0.0217945, atol=1e-6)


def test_critical_damping_double_pole():
    g = make_gains(0.3, 1.0, 5.0)
    assert np.allclose(g.poles, [-0.3, -0.3], atol=1e-6)


@settings(max_examples=100, deadline=None)
@given(st.floats(1e-3, 5.0), st.floats(0.05, 3.0), st.floats(0.1, 50.0), st.floats(0.1, 10.0))
def test_closed_loop_depends_only_on_kappa_times_K(w, z, kap, c):
    g1, g2 = make_gains(w, z, kap), make_gains(w, z, c * kap)
    assert g2.K1 == pytest.approx(g1.K1 / c) and g2.K2 == pytest.approx(g1.K2 / c)
    assert np.allclose(g1.closed_loop_matrix, g2.closed_loop_matrix)
    assert np.all(g1.poles.real < 0)


def test_not_hurwitz_rejected():
    with pytest.raises(NotHurwitz):
        ControllerGains(K1=0.00125, K2=0.045, kappa=2.0)
    with pytest.raises(NotHurwitz):
        ControllerGains(K1=-0.001, K2=0.0, kappa=2.0)  # marginal: purely imaginary poles
    for bad in ((0, 0.9, 2), (0.05, 0, 2), (0.05, 0.9, 0)):
        with pytest.raises(ValueError):
            make_gains(*bad)


def test_temporal_gains_scale_poles():
    gs = make_gains(0.05, 0.9, 2.0)
    gt = make_temporal_gains(0.05, 0.9, 0.1, 20.0)
    assert np.allclose(np.sort_complex(gt.poles), np.sort_complex(20.0 * gs.poles))


def _zero_err(n=1):
    z = np.zeros(n)
    return TimingErrors(z, z, z, z, z, z, z)


def test_equilibrium_input_is_zero():
    g = make_gains(0.05, 0.9, 2.0)
    s20 = VehicleStateSpace(0.0, 20.0, 0.0)
    assert spatial_control(_zero_err(), s20, s20, s20, C20, g, POL, 100.0) == 0.0
    assert spatial_control(_zero_err(), s20, None, None, C20, g, POL, 100.0) == 0.0


def test_lead_timing_offset_golden_value():
    """v = 20, a = 0, constant reference, delta1 = Delta0 = 1, e1 = 0."""
    g = make_gains(0.05, 0.9, 2.0)
    err = TimingErrors(*[np.array([x]) for x in (1.0, 1.0, 1.0, 0.0, 0.0, 0.0, -0.1)])
    u = spatial_control(err, VehicleStateSpace(0.0, 20.0, 0.0), None, None, C20, g, POL, 0.0)

    # independent oracle: symbolic substitution into the closed-form law
    a, v, tau, kap, k0, w, z, d1, d2, w2 = sp.symbols("a v tau kappa kappa0 omega zeta d1 d2 w2")
    K1, K2 = -w ** 2 / kap, -2 * z * w / kap
    ubar = a / v ** 3 / kap + K1 * d1 + K2 * d2  # virtual predecessor/leader carry a = 0
    u_sym = a + 3 * tau * a ** 2 / v - tau * v ** 4 * (w2 + ubar)
    golden = float(u_sym.subs({a: 0, v: 20, tau: 1, kap: 2, k0: sp.Rational(1, 10),
                               w: sp.Rational(1, 20), z: sp.Rational(9, 10), d1: 1, d2: 0, w2: 0}))
    assert golden == 200.0
    assert u == pytest.approx(golden, rel=1e-14)


def test_spatial_control_rejects_low_velocity():
    g = make_gains(0.05, 0.9, 2.0)
    with pytest.raises(NonPositiveVelocity):
        spatial_control(_zero_err(), VehicleStateSpace(0, 20, 0), VehicleStateSpace(0, 0.0, 0),
                        VehicleStateSpace(0, 20, 0), C20, g, POL, 0.0)


def _random_platoon(rng, n):
    t = np.cumsum(rng.uniform(0.8, 1.2, n))
    v = rng.uniform(14, 22, n)
    a = rng.uniform(-1, 1, n)
    return t, v, a


def test_scalar_law_matches_vectorised_law():
    rng = np.random.default_rng(5)
    g = make_gains(0.05, 0.9, 2.0)
    for s in (100.0, 350.0, 420.0):
        t, v, a = _random_platoon(rng, 6)
        w0, w1, w2 = DIP.inv_derivs(s)
        err = spatial_errors(0.3, t, v, a, w0, w1, POL)
        u_vec = platoon_spatial_control(err, v, a, w2, g, POL, 1.0)
        for i in range(6):
            ei = TimingErrors(*[np.array([getattr(err, f)[i]]) for f in
                                ("Delta", "Delta0", "delta1", "delta2", "e1", "e2", "y")])
            prev = None if i == 0 else VehicleStateSpace(t[i - 1], v[i - 1], a[i - 1])
            lead = None if i == 0 else VehicleStateSpace(t[0], v[0], a[0])
            u = spatial_control(ei, VehicleStateSpace(t[i], v[i], a[i]), prev, lead, DIP, g, POL, s)
            assert u == pytest.approx(u_vec[i], rel=1e-12, abs=1e-9)


def test_lead_law_is_follower_law_with_exact_virtual_neighbours():
    g = make_gains(0.05, 0.9, 2.0)
    s = 380.0
    w0, w1, _ = DIP.inv_derivs(s)
    v_ref = 1.0 / w0
    virt = VehicleStateSpace(0.0, v_ref, -w1 * v_ref ** 3)  # zero velocity errors
    me = VehicleStateSpace(0.2, 17.5, 0.3)
    err = spatial_errors(0.0, np.array([0.2]), np.array([17.5]), np.array([0.3]), w0, w1, POL)
    ei = TimingErrors(*[getattr(err, f) for f in ("Delta", "Delta0", "delta1", "delta2", "e1", "e2", "y")])
    u_lead = spatial_control(ei, me, None, None, DIP, g, POL, s)
    u_follow = spatial_control(ei, me, virt, virt, DIP, g, POL, s)
    assert u_lead == pytest.approx(u_follow, rel=1e-12)


def test_headway_equilibrium_and_sign():
    g = make_temporal_gains(0.05, 0.9, 0.1)
    pol = PolicyParams(kind="constant_headway", d=20.0, h=0.1, kappa0=0.0)
    lead = VehicleStateTime(100.0, 20.0, 0.0)
    at_gap = VehicleStateTime(80.0, 20.0, 0.0)
    assert headway_control_time(1, at_gap, lead, lead, 20.0, g, pol) == pytest.approx(0.0, abs=1e-12)
    assert headway_control_time(0, lead, None, None, 20.0, g, pol, s_ref=100.0) == 0.0
    behind = VehicleStateTime(75.0, 20.0, 0.0)  # Delta = -5: gap too large
    close = VehicleStateTime(85.0, 20.0, 0.0)
    assert headway_control_time(1, behind, lead, lead, 20.0, g, pol) > 0
    assert headway_control_time(1, close, lead, lead, 20.0, g, pol) < 0


def test_headway_scalar_matches_vectorised():
    rng = np.random.default_rng(9)
    pol = PolicyParams(kind="constant_headway", d=20.0, h=0.1, kappa0=0.1)
    g = make_temporal_gains(0.05, 0.9, pol.velocity_weight)
    pos = 400.0 - 20.0 * np.arange(5) + rng.uniform(-3, 3, 5)
    vel = rng.uniform(15, 21, 5)
    acc = rng.uniform(-1, 1, 5)
    s_ref = 401.0
    err = temporal_errors(pos, vel, acc, DIP, pol, s_ref)
    u_vec = platoon_headway_control(err, pos, vel, acc, DIP, g, pol, 1.0, s_ref)
    states = [VehicleStateTime(*x) for x in zip(pos, vel, acc)]
    for i in range(5):
        prev = None if i == 0 else states[i - 1]
        lead = None if i == 0 else states[0]
        u = headway_control_time(i, states[i], prev, lead, DIP, g, pol, 1.0, s_ref=s_ref)
        assert u == pytest.approx(u_vec[i], rel=1e-12, abs=1e-12)


def test_feedback_linearisation_exactness(dip_run):
    """Along the closed loop: delta1' = delta2 and delta2' = kappa (K1 delta1 + K2 delta2)."""
    g = make_gains(0.05, 0.9, 2.0)
    h = dip_run.grid[1] - dip_run.grid[0]
    d1, d2 = dip_run["delta1"], dip_run["delta2"]
    fd1 = (d1[2:] - d1[:-2]) / (2 * h)
    fd2 = (d2[2:] - d2[:-2]) / (2 * h)
    rhs2 = 2.0 * (g.K1 * d1[1:-1] + g.K2 * d2[1:-1])
    # the reference has curvature jumps at the dip edges; skip the two cells touching them
    keep = np.ones(fd1.shape[0], bool)
    for b in DIP.breakpoints:
        keep[np.abs(dip_run.grid[1:-1] - b) < 1.5 * h] = False
    r1 = np.max(np.abs(fd1 - d2[1:-1])[keep])
    r2 = np.max(np.abs(fd2 - rhs2)[keep])
    assert r1 <= 10 * h ** 2 and r2 <= 10 * h ** 2
    # in practice the residual is dominated by the central difference itself
    assert r1 < 1e-5 and r2 < 1e-5
