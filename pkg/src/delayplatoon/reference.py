"""Spatially varying reference velocity profiles.

Two families are provided: a constant cruise speed and a cosine-shaped dip
``v(s) = v_b - d_v (1 - cos(2 pi (s - s_a) / (s_b - s_a)))`` on ``[s_a, s_b]``
which equals ``v_b`` elsewhere. The dip is C1 at its end points; its second
derivative jumps there, and the value returned at a breakpoint is the right
limit (the dip interval is half-open).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .integrate import integrate_rk4


@dataclass(frozen=True)
class ReferenceProfile:
    kind: str = "constant"  # "constant" | "cosine_dip"
    v_base: float = 20.0
    depth: float = 0.0
    s_a: float = 300.0
    s_b: float = 500.0

    def __post_init__(self):
        if self.kind not in ("constant", "cosine_dip"):
            raise ValueError(f"unknown reference profile kind {self.kind!r}")
        if self.kind == "cosine_dip":
            if not self.s_b > self.s_a:
                raise ValueError("cosine_dip requires s_b > s_a")
            if self.depth < 0:
                raise ValueError("cosine_dip depth must be >= 0")
        if self.v_min <= 0:
            raise ValueError(f"reference velocity must stay positive (v_min={self.v_min})")

    @classmethod
    def constant(cls, v: float) -> "ReferenceProfile":
        return cls(kind="constant", v_base=float(v))

    @classmethod
    def cosine_dip(cls, v_base: float, depth: float, s_a: float, s_b: float) -> "ReferenceProfile":
        return cls(kind="cosine_dip", v_base=float(v_base), depth=float(depth),
                   s_a=float(s_a), s_b=float(s_b))

    @property
    def v_min(self) -> float:
        if self.kind == "constant":
            return self.v_base
        return self.v_base - 2.0 * self.depth

    @property
    def v_max(self) -> float:
        return self.v_base

    @property
    def breakpoints(self) -> tuple[float, ...]:
        """Positions where the second derivative is discontinuous."""
        return () if self.kind == "constant" else (self.s_a, self.s_b)

    def vref_derivs(self, s):
        """Return ``(vref, dvref/ds, d2vref/ds2)``; accepts scalars or arrays."""
        if isinstance(s, (float, int)):
            return self._vref_derivs_scalar(float(s))
        s = np.asarray(s, dtype=float)
        v = np.full(s.shape, self.v_base)
        dv = np.zeros(s.shape)
        ddv = np.zeros(s.shape)
        if self.kind == "cosine_dip":
            k = 2.0 * math.pi / (self.s_b - self.s_a)
            inside = (s >= self.s_a) & (s < self.s_b)
            phase = k * (s - self.s_a)
            v = np.where(inside, self.v_base - self.depth * (1.0 - np.cos(phase)), v)
            dv = np.where(inside, -self.depth * k * np.sin(phase), dv)
            ddv = np.where(inside, -self.depth * k * k * np.cos(phase), ddv)
        if v.ndim == 0:
            return float(v), float(dv), float(ddv)
        return v, dv, ddv

    def _vref_derivs_scalar(self, s: float):
        if self.kind == "constant" or not self.s_a <= s < self.s_b:
            return self.v_base, 0.0, 0.0
        k = 2.0 * math.pi / (self.s_b - self.s_a)
        phase = k * (s - self.s_a)
        c = math.cos(phase)
        return (self.v_base - self.depth * (1.0 - c), -self.depth * k * math.sin(phase),
                -self.depth * k * k * c)

    def inv_derivs(self, s):
        """Return ``(1/vref, d/ds 1/vref, d2/ds2 1/vref)`` in closed form."""
        v, dv, ddv = self.vref_derivs(s)
        w0 = 1.0 / v
        w1 = -dv * w0 * w0
        w2 = (2.0 * dv * dv * w0 - ddv) * w0 * w0
        return w0, w1, w2


def eval_vref(profile: ReferenceProfile, s):
    return profile.vref_derivs(s)[0]


def eval_inv_vref_derivs(profile: ReferenceProfile, s):
    return profile.inv_derivs(s)


def eval_tref(profile: ReferenceProfile, s: float, s_start: float = 0.0, step: float = 0.1) -> float:
    """Nominal traversal time from ``s_start`` to ``s``.

    Integrated as the ODE ``dT/ds = 1/vref(s)`` with the same fixed-step RK4
    used for the platoon state (the last step is shortened to land on ``s``).
    """
    if s < s_start:
        raise ValueError("eval_tref requires s >= s_start")
    if s == s_start:
        return 0.0
    n = max(1, int(math.ceil((s - s_start) / step - 1e-9)))
    grid = s_start + step * np.arange(n + 1)
    grid[-1] = s
    ys = integrate_rk4(lambda x, y: np.array([1.0 / profile.vref_derivs(x)[0]]), np.zeros(1), grid)
    return float(ys[-1, 0])
