"""Feedback-linearising platoon controllers.

Spatial domain (delay-based policy): with ``w0, w1, w2`` the first three
derivatives of ``1/vref`` in ``s``,

    u = a + 3 tau a^2 / v - tau v^4 (w2 + ubar)
    ubar = -((1 - k0)(e2_i - e2_{i-1}) + k0 (e2_i - e2_0)) / kappa + K1 delta1 + K2 delta2

which turns the time-gap errors into ``delta1' = delta2``,
``delta2' = kappa (K1 delta1 + K2 delta2)`` (plus disturbance terms). The lead
vehicle uses the same law with a virtual predecessor and leader whose errors
are identically zero.

Time domain (constant spacing/headway): the same construction with
``e1 = v - vref(s)``, ``e2 = a - vref'(s) v`` and
``u = a + tau (ubar + vref''(s) v^2 + vref'(s) a)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonPositiveVelocity, NotHurwitz
from .spacing import PolicyParams, TimingErrors, _lead, _shift_prev, as_reference
from .vehicle import V_FLOOR, VehicleStateSpace, VehicleStateTime

V_NOM = 20.0  # m/s, nominal speed used to map spatial gains to time-domain gains


@dataclass(frozen=True)
class ControllerGains:
    """Feedback ``utilde = K1 delta1 + K2 delta2``; the closed loop
    ``[[0, 1], [kappa K1, kappa K2]]`` must be Hurwitz."""

    K1: float
    K2: float
    kappa: float
    omega0: float = float("nan")
    zeta0: float = float("nan")

    def __post_init__(self):
        poles = self.poles
        if not np.all(poles.real < 0):
            raise NotHurwitz(f"closed-loop poles {poles} are not in the open left half-plane")

    @property
    def closed_loop_matrix(self) -> np.ndarray:
        return np.array([[0.0, 1.0], [self.kappa * self.K1, self.kappa * self.K2]])

    @property
    def poles(self) -> np.ndarray:
        return np.linalg.eigvals(self.closed_loop_matrix)


def make_gains(omega0: float, zeta0: float, kappa: float) -> ControllerGains:
    """Gains placing the poles of the time-gap error loop at the roots of
    ``lambda^2 + 2 zeta0 omega0 lambda + omega0^2``."""
    if not omega0 > 0:
        raise ValueError("omega0 must be positive")
    if not zeta0 > 0:
        raise ValueError("zeta0 must be positive")
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    return ControllerGains(K1=-omega0 ** 2 / kappa, K2=-2.0 * zeta0 * omega0 / kappa,
                           kappa=kappa, omega0=omega0, zeta0=zeta0)


def make_temporal_gains(omega0: float, zeta0: float, kappa_t: float, v_nom: float = V_NOM) -> ControllerGains:
    """Time-domain gains whose poles are the spatial design poles times ``v_nom``."""
    return make_gains(omega0 * v_nom, zeta0, kappa_t)


def linearizing_input(v, a, w2, ubar, tau):
    return a + 3.0 * tau * a * a / v - tau * v ** 4 * (w2 + ubar)


def platoon_spatial_control(err: TimingErrors, v, a, w2, gains: ControllerGains,
                            params: PolicyParams, tau: float):
    """Inputs for all vehicles at once (last axis indexes vehicles)."""
    k0, kap = params.kappa0, params.kappa
    e2 = err.e2
    coupling = (1 - k0) * (e2 - _shift_prev(e2)) + k0 * (e2 - _lead(e2))
    utilde = gains.K1 * err.delta1 + gains.K2 * err.delta2
    ubar = -coupling / kap + utilde
    w2 = np.asarray(w2, dtype=float)[..., None] if np.ndim(w2) == np.ndim(v) - 1 else w2
    return linearizing_input(v, a, w2, ubar, tau)


def spatial_control(errors_i, state_i: VehicleStateSpace, state_prev, state_lead,
                    profile, gains: ControllerGains, params: PolicyParams, s: float,
                    tau: float = 1.0) -> float:
    """Input of a single vehicle.

    ``errors_i`` needs ``delta1`` and ``delta2`` of the vehicle. Pass
    ``state_prev=None``/``state_lead=None`` for the lead vehicle, which then
    couples to a virtual vehicle tracking the reference exactly.
    """
    _, w1, w2 = profile.inv_derivs(s)
    for j, st in enumerate((state_i, state_prev, state_lead)):
        if st is not None and not st.v > V_FLOOR:
            raise NonPositiveVelocity(("i", "i-1", "0")[j], s, st.v)

    def e2(st):
        return 0.0 if st is None else -st.a / st.v ** 3 - w1

    k0, kap = params.kappa0, params.kappa
    e2_i = e2(state_i)
    coupling = (1 - k0) * (e2_i - e2(state_prev)) + k0 * (e2_i - e2(state_lead))
    d1, d2 = (float(np.ravel(x)[0]) for x in (errors_i.delta1, errors_i.delta2))
    ubar = -coupling / kap + gains.K1 * d1 + gains.K2 * d2
    return float(linearizing_input(state_i.v, state_i.a, w2, ubar, tau))


def platoon_headway_control(err: TimingErrors, pos, vel, acc, ref, gains: ControllerGains,
                            params: PolicyParams, tau: float, s_ref=None):
    """Time-domain inputs for all vehicles (last axis indexes vehicles)."""
    ref = as_reference(ref)
    k0, kap = params.kappa0, params.velocity_weight
    _, dvr, ddvr = ref.vref_derivs(pos)
    if s_ref is None:
        s_ref = pos[..., 0]
    v_virt, dv_virt, _ = ref.vref_derivs(s_ref)
    a_virt = dv_virt * v_virt
    a_prev = np.empty_like(acc)
    a_prev[..., 0] = a_virt
    a_prev[..., 1:] = acc[..., :-1]
    a_lead = np.repeat(acc[..., :1], acc.shape[-1], axis=-1)
    a_lead[..., 0] = a_virt
    coupling = (1 - k0) * (acc - a_prev) + k0 * (acc - a_lead)
    ubar = -coupling / kap + gains.K1 * err.delta1 + gains.K2 * err.delta2
    return acc + tau * (ubar + ddvr * vel * vel + dvr * acc)


def headway_control_time(i: int, state_i: VehicleStateTime, state_prev, state_lead, ref,
                         gains: ControllerGains, params: PolicyParams, tau: float = 1.0,
                         s_ref=None) -> float:
    """Input of vehicle ``i`` under a time-domain spacing policy.

    For ``i == 0`` pass ``None`` for the neighbours; the lead then follows a
    virtual reference vehicle at ``s_ref`` (defaults to its own position).
    """
    ref = as_reference(ref)
    k0, kap, d = params.kappa0, params.velocity_weight, params.d
    vr, dvr, ddvr = ref.vref_derivs(state_i.s)
    if i == 0:
        s_ref = state_i.s if s_ref is None else s_ref
        v_virt, dv_virt, _ = ref.vref_derivs(s_ref)
        virt = VehicleStateTime(s_ref, v_virt, dv_virt * v_virt)
        state_prev = state_lead = virt
        delta = delta0 = state_i.s - s_ref
    else:
        if state_prev is None or state_lead is None:
            raise ValueError("followers need predecessor and lead states")
        delta = state_i.s - state_prev.s + d
        delta0 = state_i.s - state_lead.s + i * d
    e1 = state_i.v - vr
    e2 = state_i.a - dvr * state_i.v
    delta1 = (1 - k0) * delta + k0 * delta0 + kap * e1
    delta2 = (1 - k0) * (state_i.v - state_prev.v) + k0 * (state_i.v - state_lead.v) + kap * e2
    coupling = (1 - k0) * (state_i.a - state_prev.a) + k0 * (state_i.a - state_lead.a)
    ubar = -coupling / kap + gains.K1 * delta1 + gains.K2 * delta2
    return float(state_i.a + tau * (ubar + ddvr * state_i.v ** 2 + dvr * state_i.a))
