"""Spacing policies, timing/spacing error coordinates and the space/time
equivalence check of the delay-based policy.

Vehicle 0 is the lead vehicle. In the spatial domain its timing error is
measured against the nominal clock ``T_ref(s)`` and its "predecessor" is a
virtual vehicle that tracks the reference exactly (all its errors are zero).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import HistoryTooShort, NonMonotoneHistory, NonPositiveVelocity
from .vehicle import V_FLOOR

POLICIES = ("delay_based", "constant_headway", "constant_spacing")


@dataclass(frozen=True)
class PolicyParams:
    """Spacing policy choice and the weights of the time-gap tracking error.

    ``dt`` is the delay-based time gap, ``d``/``h`` the standstill distance and
    headway of the time-domain policies. ``kappa`` weights the velocity error
    and ``kappa0`` the error with respect to the lead vehicle.
    """

    kind: str = "delay_based"
    dt: float = 1.0
    d: float = 0.0
    h: float = 0.0
    kappa: float = 2.0
    kappa0: float = 0.1

    def __post_init__(self):
        if self.kind not in POLICIES:
            raise ValueError(f"unknown policy {self.kind!r}")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.d < 0:
            raise ValueError("d must be >= 0")
        if self.kind == "constant_headway" and not self.h > 0:
            raise ValueError("constant headway requires h > 0")
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")
        if not 0 <= self.kappa0 < 1:
            raise ValueError("kappa0 must lie in [0, 1)")

    @property
    def velocity_weight(self) -> float:
        """Weight of the velocity error in the time-gap tracking error.

        For the constant headway policy this is the headway ``h`` itself, which
        turns the relaxed policy into ``s_{i-1} - s_i = d + h v_i`` when the
        reference is zero.
        """
        return self.h if self.kind == "constant_headway" else self.kappa


@dataclass
class PlatoonState:
    """Spatial platoon state at one position: reference clock plus per-vehicle
    passage time, velocity and acceleration (index 0 is the lead)."""

    s: float
    t_ref: float
    t: np.ndarray
    v: np.ndarray
    a: np.ndarray


@dataclass
class TimingErrors:
    Delta: np.ndarray
    Delta0: np.ndarray
    delta1: np.ndarray
    delta2: np.ndarray
    e1: np.ndarray
    e2: np.ndarray
    y: np.ndarray


def difference_operator(n: int, kappa0: float) -> np.ndarray:
    """Matrix ``P`` with ``(P x)_i = (1-k0)(x_i - x_{i-1}) + k0 (x_i - x_0)`` for
    followers and ``(P x)_0 = x_0`` (virtual zero predecessor of the lead)."""
    P = np.eye(n)
    for i in range(1, n):
        P[i, i - 1] -= 1 - kappa0
        P[i, 0] -= kappa0
    return P


def _shift_prev(x):
    """``x[..., i-1]`` with zero for the lead (virtual exact-tracking predecessor)."""
    out = np.zeros_like(x)
    out[..., 1:] = x[..., :-1]
    return out


def _lead(x):
    out = np.repeat(x[..., :1], x.shape[-1], axis=-1)
    out[..., 0] = 0.0
    return out


def spatial_errors(t_ref, t, v, a, w0, w1, params: PolicyParams) -> TimingErrors:
    """Vectorised error coordinates; the last axis indexes vehicles.

    ``t_ref``, ``w0``, ``w1`` must broadcast against ``t[..., 0]``.
    """
    t_ref = np.asarray(t_ref, dtype=float)[..., None]
    w0 = np.asarray(w0, dtype=float)[..., None]
    w1 = np.asarray(w1, dtype=float)[..., None]
    k0, kap = params.kappa0, params.kappa
    idx = np.arange(t.shape[-1])

    Delta = np.empty_like(t)
    Delta[..., 0] = t[..., 0] - t_ref[..., 0]
    Delta[..., 1:] = t[..., 1:] - t[..., :-1] - params.dt
    Delta0 = t - t[..., :1] - idx * params.dt
    Delta0[..., 0] = Delta[..., 0]

    e1 = 1.0 / v - w0
    e2 = -a / v ** 3 - w1
    delta1 = (1 - k0) * Delta + k0 * Delta0 + kap * e1
    delta2 = (1 - k0) * (e1 - _shift_prev(e1)) + k0 * (e1 - _lead(e1)) + kap * e2
    y = -k0 * Delta0 - kap * e1
    return TimingErrors(Delta, Delta0, delta1, delta2, e1, e2, y)


def compute_errors_spatial(platoon: PlatoonState, profile, params: PolicyParams, s=None) -> TimingErrors:
    if params.kind != "delay_based":
        raise ValueError("spatial error coordinates require the delay-based policy")
    s = platoon.s if s is None else s
    v = np.asarray(platoon.v, dtype=float)
    bad = np.flatnonzero(~(v > V_FLOOR))
    if bad.size:
        raise NonPositiveVelocity(int(bad[0]), s, float(v[bad[0]]))
    w0, w1, _ = profile.inv_derivs(s)
    return spatial_errors(platoon.t_ref, np.asarray(platoon.t, dtype=float), v,
                          np.asarray(platoon.a, dtype=float), w0, w1, params)


class _ConstantReference:
    def __init__(self, v):
        self.v = float(v)

    def vref_derivs(self, s):
        s = np.asarray(s, dtype=float)
        return np.full(s.shape, self.v), np.zeros(s.shape), np.zeros(s.shape)


def as_reference(ref):
    """Accept a profile object or a bare number (constant reference, zero allowed)."""
    return ref if hasattr(ref, "vref_derivs") else _ConstantReference(ref)


def temporal_errors(pos, vel, acc, ref, params: PolicyParams, s_ref=None) -> TimingErrors:
    """Time-domain error coordinates for the constant spacing/headway policies.

    Spacing errors are ``s_i - s_{i-1} + d`` (metres) and the velocity error is
    ``v_i - vref(s_i)``, i.e. the reference is evaluated at each vehicle's own
    position. The lead vehicle is measured against a virtual reference vehicle
    at ``s_ref`` (zero spacing error if ``s_ref`` is None).
    The last axis indexes vehicles.
    """
    ref = as_reference(ref)
    pos = np.asarray(pos, dtype=float)
    vel = np.asarray(vel, dtype=float)
    acc = np.zeros_like(pos) if acc is None else np.asarray(acc, dtype=float)
    k0, kap, d = params.kappa0, params.velocity_weight, params.d
    idx = np.arange(pos.shape[-1])

    vr, dvr, _ = ref.vref_derivs(pos)
    if s_ref is None:
        s_ref = pos[..., 0]
    s_ref = np.asarray(s_ref, dtype=float)
    v_virt, dv_virt, _ = ref.vref_derivs(s_ref)

    Delta = np.empty_like(pos)
    Delta[..., 0] = pos[..., 0] - s_ref
    Delta[..., 1:] = pos[..., 1:] - pos[..., :-1] + d
    Delta0 = pos - pos[..., :1] + idx * d
    Delta0[..., 0] = Delta[..., 0]

    e1 = vel - vr
    e2 = acc - dvr * vel
    v_prev = np.empty_like(vel)
    v_prev[..., 0] = v_virt
    v_prev[..., 1:] = vel[..., :-1]
    v_lead = np.repeat(vel[..., :1], vel.shape[-1], axis=-1)
    v_lead[..., 0] = v_virt
    delta1 = (1 - k0) * Delta + k0 * Delta0 + kap * e1
    delta2 = (1 - k0) * (vel - v_prev) + k0 * (vel - v_lead) + kap * e2
    y = -k0 * Delta0 - kap * e1
    return TimingErrors(Delta, Delta0, delta1, delta2, e1, e2, y)


def compute_spacing_time(pos, vel, params: PolicyParams, vref_of_s, acc=None, s_ref=None) -> TimingErrors:
    if params.kind == "delay_based":
        raise ValueError("time-domain spacing errors apply to constant spacing/headway policies")
    return temporal_errors(pos, vel, acc, vref_of_s, params, s_ref)


def delay_timing_error_implicit(hist_t, hist_s, s_now: float, t_now: float, dt: float,
                                tol: float = 1e-9, max_iter: int = 200) -> float:
    """Timing error from a stored predecessor history.

    The predecessor passed ``s_now`` at ``t_{i-1} = t_now - dt - Delta``, so
    ``s_prev(t_now - dt - Delta) = s_now`` is solved for ``Delta`` by bisection
    on a monotone cubic interpolant of the sampled history. The sign makes the
    result equal to ``t_i - t_{i-1} - dt`` of the spatial description.
    """
    hist_t = np.asarray(hist_t, dtype=float)
    hist_s = np.asarray(hist_s, dtype=float)
    if hist_t.size < 2:
        raise HistoryTooShort("need at least two history samples")
    if np.any(np.diff(hist_t) <= 0) or np.any(np.diff(hist_s) <= 0):
        raise NonMonotoneHistory("predecessor history must be strictly increasing in t and s")
    t_nom = t_now - dt
    if not hist_t[0] <= t_nom <= hist_t[-1]:
        raise HistoryTooShort(f"history [{hist_t[0]}, {hist_t[-1]}] does not contain t_now - dt = {t_nom}")
    if not hist_s[0] <= s_now <= hist_s[-1]:
        raise HistoryTooShort(f"predecessor never passed s = {s_now} within the stored history")

    s_prev = PchipInterpolator(hist_t, hist_s)
    lo, hi = hist_t[0], hist_t[-1]
    mid = 0.5 * (lo + hi)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        r = float(s_prev(mid)) - s_now
        if abs(r) < tol:
            break
        if r < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(1.0, abs(mid)):
            break
    return t_nom - mid


@dataclass
class Prop1Report:
    timing_dev: np.ndarray     # per pair: max |t_i - t_{i-1} - dt|
    velocity_dev: np.ndarray   # per pair: max |v_i - v_{i-1}|
    gap_spread: np.ndarray     # per pair: max - min of t_i - t_{i-1}
    tol: float
    velocity_tol: float        # velocity bound implied by the timing tolerance
    gap_tol: float             # gap-constancy bound implied by the velocity tolerance
    forward_ok: bool           # timing within tol  =>  velocities within velocity_tol
    converse_ok: bool          # velocities within tol  =>  gap constant within gap_tol

    @property
    def timing_ok(self) -> bool:
        return bool(np.all(self.timing_dev <= self.tol))

    @property
    def velocity_ok(self) -> bool:
        return bool(np.all(self.velocity_dev <= self.tol))

    @property
    def passed(self) -> bool:
        return self.timing_ok and self.velocity_ok and self.forward_ok and self.converse_ok


def check_prop1(traj, dt: float, tol: float = 1e-3) -> Prop1Report:
    """Check both directions of the delay-policy / common-velocity-profile
    equivalence on a spatial trajectory (common position grid)."""
    if traj.domain != "space":
        raise ValueError("check_prop1 needs a trajectory over position")
    t, v = traj["t"], traj["v"]
    step = float(np.min(np.diff(traj.grid)))
    length = float(traj.grid[-1] - traj.grid[0])
    gaps = t[:, 1:] - t[:, :-1]
    timing_dev = np.max(np.abs(gaps - dt), axis=0)
    velocity_dev = np.max(np.abs(v[:, 1:] - v[:, :-1]), axis=0)
    gap_spread = np.max(gaps, axis=0) - np.min(gaps, axis=0)

    v_max, v_min = float(np.max(v)), float(np.min(v))
    # |d/ds (t_i - t_{i-1})| = |1/v_i - 1/v_{i-1}|, bounded by finite differences of the gap
    velocity_tol = v_max ** 2 * (2.0 * tol / step) + 1e-6
    gap_tol = tol * length / v_min ** 2 + 1e-6
    forward_ok = bool(np.all((timing_dev > tol) | (velocity_dev <= velocity_tol)))
    converse_ok = bool(np.all((velocity_dev > tol) | (gap_spread <= gap_tol)))
    return Prop1Report(timing_dev, velocity_dev, gap_spread, tol, velocity_tol, gap_tol,
                       forward_ok, converse_ok)
