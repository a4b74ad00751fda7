"""Third-order longitudinal vehicle model in time and space.

Time domain::

    ds/dt = v,  dv/dt = a + w,  tau da/dt = -a + u

Dividing by ``v`` (``dt/ds = 1/v``) gives the spatial description with the
passage time ``t(s)`` as a state. That division is only meaningful while the
velocity stays clear of zero, hence ``V_FLOOR``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import NonMonotonePosition, NonMonotoneTime, NonPositiveVelocity
from .integrate import integrate_rk4
from .trajectory import Trajectory

V_FLOOR = 0.1  # m/s

_CARRIED = ("v", "a", "u", "w")


@dataclass(frozen=True)
class VehicleParams:
    tau: float = 1.0

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be positive")


@dataclass(frozen=True)
class VehicleStateTime:
    s: float
    v: float
    a: float


@dataclass(frozen=True)
class VehicleStateSpace:
    t: float
    v: float
    a: float


def time_rhs(x: VehicleStateTime, u: float, w: float, p: VehicleParams) -> VehicleStateTime:
    return VehicleStateTime(x.v, x.a + w, (-x.a + u) / p.tau)


def space_rhs(x: VehicleStateSpace, u: float, w: float, p: VehicleParams,
              vehicle: int = 0, position: float = math.nan) -> VehicleStateSpace:
    if not x.v > V_FLOOR:
        raise NonPositiveVelocity(vehicle, position, x.v)
    inv_v = 1.0 / x.v
    return VehicleStateSpace(inv_v, (x.a + w) * inv_v, (-x.a + u) * inv_v / p.tau)


def simulate_open_loop_time(u_of_s, x0: VehicleStateTime, t_grid, p: VehicleParams, w_of_t=None):
    """Single vehicle driven by an input given as a function of position.

    Returns the state series ``(s, v, a)`` on ``t_grid``.
    """
    def field(t, y):
        w = 0.0 if w_of_t is None else w_of_t(t)
        return np.array([y[1], y[2] + w, (-y[2] + u_of_s(y[0])) / p.tau])

    return integrate_rk4(field, [x0.s, x0.v, x0.a], t_grid)


def simulate_open_loop_space(u_of_s, x0: VehicleStateSpace, s_grid, p: VehicleParams, w_of_s=None):
    """Spatial-domain counterpart of :func:`simulate_open_loop_time`; returns ``(t, v, a)``."""
    def field(s, y):
        w = 0.0 if w_of_s is None else w_of_s(s)
        if not y[1] > V_FLOOR:
            raise NonPositiveVelocity(0, s, y[1])
        return np.array([1.0 / y[1], (y[2] + w) / y[1], (-y[2] + u_of_s(s)) / (p.tau * y[1])])

    return integrate_rk4(field, [x0.t, x0.v, x0.a], s_grid)


def _aligned_grid(lo, hi, step):
    # multiples of step, so features at round positions land on grid points
    k0 = math.ceil(lo / step - 1e-9)
    k1 = math.floor(hi / step + 1e-9)
    if k1 <= k0:
        raise ValueError(f"common range [{lo}, {hi}] too short for step {step}")
    return step * np.arange(k0, k1 + 1)


def time_to_space_traj(traj_t: Trajectory, step: float = 0.1, grid=None) -> Trajectory:
    """Resample a time-domain run onto a common position grid.

    The inverse map ``s -> t`` of every vehicle is interpolated with a
    shape-preserving monotone cubic; ``v, a, u, w`` are carried along.
    Error channels are dropped since their units differ between domains.
    """
    if traj_t.domain != "time":
        raise ValueError("expected a time-domain trajectory")
    pos = traj_t["s"]
    if np.any(np.diff(pos, axis=0) <= 0):
        raise NonMonotonePosition("position is not strictly increasing for every vehicle")
    if grid is None:
        grid = _aligned_grid(pos[0].max(), pos[-1].min(), step)
    grid = np.asarray(grid, dtype=float)
    n = traj_t.n_vehicles
    out = {c: np.empty((grid.size, n)) for c in ("t", "s") + _CARRIED}
    for i in range(n):
        out["t"][:, i] = PchipInterpolator(pos[:, i], traj_t.grid)(grid)
        out["s"][:, i] = grid
        for c in _CARRIED:
            out[c][:, i] = PchipInterpolator(pos[:, i], traj_t[c][:, i])(grid)
    return Trajectory("space", grid, out)


def space_to_time_traj(traj_s: Trajectory, step: float = 0.005, grid=None) -> Trajectory:
    """Inverse of :func:`time_to_space_traj`: resample a spatial run onto a time grid."""
    if traj_s.domain != "space":
        raise ValueError("expected a space-domain trajectory")
    times = traj_s["t"]
    if np.any(np.diff(times, axis=0) <= 0):
        raise NonMonotoneTime("passage time is not strictly increasing for every vehicle")
    if grid is None:
        grid = _aligned_grid(times[0].max(), times[-1].min(), step)
    grid = np.asarray(grid, dtype=float)
    n = traj_s.n_vehicles
    out = {c: np.empty((grid.size, n)) for c in ("t", "s") + _CARRIED}
    for i in range(n):
        out["s"][:, i] = PchipInterpolator(times[:, i], traj_s.grid)(grid)
        out["t"][:, i] = grid
        for c in _CARRIED:
            out[c][:, i] = PchipInterpolator(times[:, i], traj_s[c][:, i])(grid)
    return Trajectory("time", grid, out)
