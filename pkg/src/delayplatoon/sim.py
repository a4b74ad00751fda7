"""Closed-loop platoon simulation in the spatial and time domain.

A spatial run integrates the stacked state ``[T_ref, t_0..t_N, v_0..v_N,
a_0..a_N]`` over position; ``T_ref`` is the nominal clock ``dT/ds = 1/vref``
so the lead timing error is available at every stage without quadrature.
A temporal run integrates ``[s_ref, s_0..s_N, v_0..v_N, a_0..a_N]`` over
time, ``s_ref`` being a virtual vehicle driving exactly at ``vref``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .controller import (V_NOM, make_gains, make_temporal_gains, platoon_headway_control,
                         platoon_spatial_control)
from .errors import NonPositiveVelocity
from .integrate import integrate_rk4, uniform_grid
from .reference import ReferenceProfile, eval_tref
from .spacing import PolicyParams, difference_operator, spatial_errors, temporal_errors
from .trajectory import Trajectory
from .vehicle import V_FLOOR, VehicleParams

_MASK64 = (1 << 64) - 1


class XorShift64Star:
    """xorshift64* generator (Vigna 2016) seeded through splitmix64.

    Used instead of the host generator so seeds reproduce the same initial
    conditions everywhere.
    """

    def __init__(self, seed: int):
        z = (int(seed) + 0x9E3779B97F4A7C15) & _MASK64
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        self.state = (z ^ (z >> 31)) or 0x9E3779B97F4A7C15

    def next_u64(self) -> int:
        x = self.state
        x ^= x >> 12
        x ^= (x << 25) & _MASK64
        x ^= x >> 27
        self.state = x
        return (x * 0x2545F4914F6CDD1D) & _MASK64

    def uniform(self, lo: float = 0.0, hi: float = 1.0) -> float:
        return lo + (hi - lo) * ((self.next_u64() >> 11) * 2.0 ** -53)


def gen_initial_conditions(seed: int, n: int, spread) -> np.ndarray:
    """Perturbations of shape ``(n, 3)``: timing, velocity, acceleration, each
    uniform in ``[-spread_k, spread_k]``."""
    spread = np.asarray(spread, dtype=float)
    if spread.shape != (3,) or np.any(spread < 0):
        raise ValueError("spread must be three non-negative magnitudes")
    rng = XorShift64Star(seed)
    out = np.empty((n, 3))
    for i in range(n):
        for k in range(3):
            out[i, k] = spread[k] * rng.uniform(-1.0, 1.0)
    return out


@dataclass(frozen=True)
class DisturbanceSpec:
    """``kind``: ``"none"``, ``"sine"`` (``amplitude * sin(freq * x)``) or
    ``"table"`` (per-vehicle ``(amplitude, freq)`` rows). ``x`` is the
    integrator's independent variable. ``applies_to``: ``"all"``,
    ``"followers"``, ``"lead"`` or a tuple of vehicle indices."""

    kind: str = "none"
    amplitude: float = 1.0
    spatial_freq: float = 0.01
    applies_to: object = "all"
    table: tuple = ()

    def __post_init__(self):
        if self.kind not in ("none", "sine", "table"):
            raise ValueError(f"unknown disturbance kind {self.kind!r}")
        if not math.isfinite(self.amplitude):
            raise ValueError("disturbance amplitude must be finite")

    def mask(self, n: int) -> np.ndarray:
        m = np.zeros(n)
        if self.applies_to == "all":
            m[:] = 1
        elif self.applies_to == "followers":
            m[1:] = 1
        elif self.applies_to == "lead":
            m[0] = 1
        else:
            m[[i for i in self.applies_to if i < n]] = 1
        return m

    def values(self, x, n: int) -> np.ndarray:
        """Disturbance of every vehicle; shape ``x.shape + (n,)``."""
        x = np.asarray(x, dtype=float)
        if self.kind == "none":
            return np.zeros(x.shape + (n,))
        if self.kind == "sine":
            w = self.amplitude * np.sin(self.spatial_freq * x)[..., None] * np.ones(n)
        else:
            amp = np.zeros(n)
            freq = np.zeros(n)
            rows = np.asarray(self.table, dtype=float).reshape(-1, 2)[:n]
            amp[: len(rows)], freq[: len(rows)] = rows[:, 0], rows[:, 1]
            w = amp * np.sin(x[..., None] * freq)
        return w * self.mask(n)


@dataclass(frozen=True)
class ScenarioConfig:
    n_followers: int = 5
    domain: str = "spatial"
    start: float = 0.0
    end: float = 1000.0
    step: float = 0.1
    seed: int = 0
    ic_spread: tuple = (0.0, 0.0, 0.0)
    disturbance: DisturbanceSpec = field(default_factory=DisturbanceSpec)
    policy: PolicyParams = field(default_factory=PolicyParams)
    omega0: float = 0.05
    zeta0: float = 0.9
    vehicle: VehicleParams = field(default_factory=VehicleParams)
    reference: ReferenceProfile = field(default_factory=lambda: ReferenceProfile.constant(20.0))
    v_nom: float = V_NOM
    lead_position: float = 0.0  # initial lead position of temporal runs

    def __post_init__(self):
        if self.n_followers < 1:
            raise ValueError("need at least one follower")
        if self.domain not in ("spatial", "temporal"):
            raise ValueError(f"unknown domain {self.domain!r}")
        if not self.step > 0:
            raise ValueError("step must be positive")
        if not self.end > self.start:
            raise ValueError("end must exceed start")

    @property
    def n_vehicles(self) -> int:
        return self.n_followers + 1

    @property
    def grid(self) -> np.ndarray:
        return uniform_grid(self.start, self.end, self.step)

    def with_(self, **kw) -> "ScenarioConfig":
        return replace(self, **kw)


# --- spatial domain -------------------------------------------------------

def equilibrium_state_spatial(cfg: ScenarioConfig) -> np.ndarray:
    n = cfg.n_vehicles
    v, dv, _ = cfg.reference.vref_derivs(cfg.start)
    t = np.arange(n) * cfg.policy.dt
    return np.concatenate(([0.0], t, np.full(n, v), np.full(n, v * dv)))


def initial_state_spatial(cfg: ScenarioConfig) -> np.ndarray:
    y = equilibrium_state_spatial(cfg)
    n = cfg.n_vehicles
    p = gen_initial_conditions(cfg.seed, n, cfg.ic_spread)
    y[1:n + 1] += p[:, 0]
    y[n + 1:2 * n + 1] += p[:, 1]
    y[2 * n + 1:] += p[:, 2]
    return y


def state_on_invariant_set(cfg: ScenarioConfig, Delta) -> np.ndarray:
    """Spatial state at ``cfg.start`` with prescribed timing errors and all
    time-gap tracking errors ``delta`` equal to zero."""
    n = cfg.n_vehicles
    pol = cfg.policy
    Delta = np.asarray(Delta, dtype=float)
    if Delta.shape != (n,):
        raise ValueError(f"need {n} timing errors")
    w0, w1, _ = cfg.reference.inv_derivs(cfg.start)
    k0, kap = pol.kappa0, pol.kappa
    t = np.empty(n)
    t[0] = Delta[0]
    for i in range(1, n):
        t[i] = t[i - 1] + pol.dt + Delta[i]
    Delta0 = t - t[0] - np.arange(n) * pol.dt
    Delta0[0] = Delta[0]
    e1 = -((1 - k0) * Delta + k0 * Delta0) / kap
    e1_prev = np.concatenate(([0.0], e1[:-1]))
    e1_lead = np.full(n, e1[0])
    e1_lead[0] = 0.0
    e2 = -((1 - k0) * (e1 - e1_prev) + k0 * (e1 - e1_lead)) / kap
    v = 1.0 / (e1 + w0)
    a = -(e2 + w1) * v ** 3
    return np.concatenate(([0.0], t, v, a))


class _SpatialField:
    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg
        self.n = cfg.n_vehicles
        self.gains = make_gains(cfg.omega0, cfg.zeta0, cfg.policy.kappa)
        self.tau = cfg.vehicle.tau
        self.no_dist = cfg.disturbance.kind == "none"
        pol, n, K = cfg.policy, self.n, self.gains
        P = difference_operator(n, pol.kappa0)
        eye = np.eye(n)
        self.G = np.hstack([K.K1 * P, K.K1 * pol.kappa * eye + K.K2 * P,
                            K.K2 * pol.kappa * eye - P / pol.kappa])
        idx = np.arange(n)
        c = -((1 - pol.kappa0) + pol.kappa0 * idx) * pol.dt
        c[0] = 0.0
        self.g = K.K1 * c

    def unpack(self, y):
        n = self.n
        return y[..., 0], y[..., 1:n + 1], y[..., n + 1:2 * n + 1], y[..., 2 * n + 1:]

    def __call__(self, s, y):
        # ubar is linear in (t, e1, e2): one matrix product replaces the
        # per-vehicle difference terms of spatial_errors/platoon_spatial_control
        n, tau = self.n, self.tau
        v = y[n + 1:2 * n + 1]
        a = y[2 * n + 1:]
        if v.min() <= V_FLOOR:
            i = int(np.argmin(v))
            raise NonPositiveVelocity(i, float(s), float(v[i]))
        w0, w1, w2 = self.cfg.reference.inv_derivs(float(s))
        inv_v = 1.0 / v
        z = np.empty(3 * n)
        z[:n] = y[1:n + 1]
        z[n:2 * n] = inv_v - w0
        z[2 * n:] = -a * inv_v ** 3 - w1
        ubar = self.G @ z + self.g
        ubar[0] -= self.gains.K1 * y[0]
        u = a + 3.0 * tau * a * a * inv_v - tau * (v * v) ** 2 * (w2 + ubar)

        out = np.empty(3 * n + 1)
        out[0] = w0
        out[1:n + 1] = inv_v
        out[n + 1:2 * n + 1] = (a if self.no_dist else a + self.cfg.disturbance.values(s, n)) * inv_v
        out[2 * n + 1:] = (u - a) * inv_v / tau
        return out


def run_spatial(cfg: ScenarioConfig, y0=None) -> Trajectory:
    """Closed-loop delay-based platoon integrated over position with RK4."""
    if cfg.domain != "spatial":
        raise ValueError("run_spatial needs a spatial scenario")
    if cfg.policy.kind != "delay_based":
        raise ValueError("spatial runs use the delay-based policy")
    f = _SpatialField(cfg)
    grid = cfg.grid
    y0 = initial_state_spatial(cfg) if y0 is None else np.asarray(y0, dtype=float)
    Y = integrate_rk4(f, y0, grid)

    t_ref, t, v, a = f.unpack(Y)
    w0, w1, w2 = cfg.reference.inv_derivs(grid)
    err = spatial_errors(t_ref, t, v, a, w0, w1, cfg.policy)
    u = platoon_spatial_control(err, v, a, w2, f.gains, cfg.policy, f.tau)
    chans = dict(t=t, s=np.repeat(grid[:, None], f.n, axis=1), v=v, a=a, u=u,
                 w=cfg.disturbance.values(grid, f.n),
                 Delta=err.Delta, Delta0=err.Delta0, delta1=err.delta1, delta2=err.delta2,
                 e1=err.e1, e2=err.e2, y=err.y)
    return Trajectory("space", grid, chans)


# --- time domain ----------------------------------------------------------

def initial_state_temporal(cfg: ScenarioConfig) -> np.ndarray:
    """Equilibrium formation (gap ``d``) with the seeded perturbations mapped
    from passage-time offsets to position offsets ``-vref * dt_i``."""
    n = cfg.n_vehicles
    s0 = cfg.lead_position
    pos = s0 - np.arange(n) * cfg.policy.d
    v, dv, _ = cfg.reference.vref_derivs(pos)
    p = gen_initial_conditions(cfg.seed, n, cfg.ic_spread)
    return np.concatenate(([s0], pos - v * p[:, 0], v + p[:, 1], v * dv + p[:, 2]))


class _TemporalField:
    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg
        self.n = cfg.n_vehicles
        pol, n = cfg.policy, self.n
        self.kap = pol.velocity_weight
        self.gains = K = make_temporal_gains(cfg.omega0, cfg.zeta0, self.kap, cfg.v_nom)
        self.tau = cfg.vehicle.tau
        self.no_dist = cfg.disturbance.kind == "none"
        P = difference_operator(n, pol.kappa0)
        # ubar = K1 P s + K2 P v - P a / kap + K1 kap e1 + K2 kap e2 + K1 c
        self.G = np.hstack([K.K1 * P, K.K2 * P, -P / self.kap])
        c = ((1 - pol.kappa0) + pol.kappa0 * np.arange(n)) * pol.d
        c[0] = 0.0
        self.g = K.K1 * c

    def unpack(self, y):
        n = self.n
        return y[..., 0], y[..., 1:n + 1], y[..., n + 1:2 * n + 1], y[..., 2 * n + 1:]

    def __call__(self, t, y):
        n, tau, kap, K = self.n, self.tau, self.kap, self.gains
        ref = self.cfg.reference
        s_ref = float(y[0])
        pos = y[1:n + 1]
        vel = y[n + 1:2 * n + 1]
        acc = y[2 * n + 1:]
        vr, dvr, ddvr = ref.vref_derivs(pos)
        v_virt, dv_virt, _ = ref.vref_derivs(s_ref)
        e1 = vel - vr
        e2 = acc - dvr * vel
        ubar = self.G @ y[1:] + self.g + (K.K1 * kap) * e1 + (K.K2 * kap) * e2
        # the lead couples to the virtual reference vehicle instead of zero
        ubar[0] += -K.K1 * s_ref - K.K2 * v_virt + dv_virt * v_virt / kap
        u = acc + tau * (ubar + ddvr * vel * vel + dvr * acc)

        out = np.empty(3 * n + 1)
        out[0] = v_virt
        out[1:n + 1] = vel
        out[n + 1:2 * n + 1] = acc if self.no_dist else acc + self.cfg.disturbance.values(t, n)
        out[2 * n + 1:] = (u - acc) / tau
        return out

    def generic(self, t, y):
        """Reference implementation through the public error/control functions."""
        cfg = self.cfg
        s_ref, pos, vel, acc = self.unpack(y)
        err = temporal_errors(pos, vel, acc, cfg.reference, cfg.policy, s_ref)
        u = platoon_headway_control(err, pos, vel, acc, cfg.reference, self.gains, cfg.policy,
                                    self.tau, s_ref)
        w = cfg.disturbance.values(t, self.n)
        v_ref = cfg.reference.vref_derivs(s_ref)[0]
        return np.concatenate(([v_ref], vel, acc + w, (u - acc) / self.tau))


def run_temporal(cfg: ScenarioConfig, y0=None) -> Trajectory:
    """Time-domain platoon under the constant spacing/headway policy.

    Recorded ``Delta`` channels are spacing errors in metres.
    """
    if cfg.domain != "temporal":
        raise ValueError("run_temporal needs a temporal scenario")
    if cfg.policy.kind == "delay_based":
        raise ValueError("temporal runs use the constant spacing or headway policy")
    f = _TemporalField(cfg)
    grid = cfg.grid
    y0 = initial_state_temporal(cfg) if y0 is None else np.asarray(y0, dtype=float)
    Y = integrate_rk4(f, y0, grid)

    s_ref, pos, vel, acc = f.unpack(Y)
    err = temporal_errors(pos, vel, acc, cfg.reference, cfg.policy, s_ref)
    u = platoon_headway_control(err, pos, vel, acc, cfg.reference, f.gains, cfg.policy, f.tau, s_ref)
    chans = dict(t=np.repeat(grid[:, None], f.n, axis=1), s=pos, v=vel, a=acc, u=u,
                 w=cfg.disturbance.values(grid, f.n),
                 Delta=err.Delta, Delta0=err.Delta0, delta1=err.delta1, delta2=err.delta2,
                 e1=err.e1, e2=err.e2, y=err.y)
    return Trajectory("time", grid, chans)


def run(cfg: ScenarioConfig) -> Trajectory:
    return run_spatial(cfg) if cfg.domain == "spatial" else run_temporal(cfg)


def headway_counterpart(cfg: ScenarioConfig, step: float = 0.005, margin: float = 10.0) -> ScenarioConfig:
    """Time-domain constant-headway scenario matching a delay-based spatial one.

    Standstill gap ``d = v_nom dt`` and headway ``h = kappa / v_nom`` give the
    same equilibrium spacing and the same time scale of the spacing dynamics
    at ``v_nom``; controller poles are scaled by ``v_nom`` as well. The horizon
    lets the last follower cover the whole spatial range.
    """
    pol = cfg.policy
    hw = PolicyParams(kind="constant_headway", dt=pol.dt, d=cfg.v_nom * pol.dt,
                      h=pol.kappa / cfg.v_nom, kappa=pol.kappa, kappa0=pol.kappa0)
    t_end = eval_tref(cfg.reference, cfg.end, cfg.start, cfg.step) + cfg.n_followers * pol.dt + margin
    t_end = step * math.ceil(t_end / step)
    return replace(cfg, domain="temporal", start=0.0, end=t_end, step=step, policy=hw,
                   lead_position=cfg.start)
