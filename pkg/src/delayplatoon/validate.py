"""Built-in self checks run by ``delayplatoon validate``."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import GainNotContractive
from .integrate import integrate_rk4, uniform_grid
from .reference import ReferenceProfile
from .sim import ScenarioConfig, run_spatial, state_on_invariant_set
from .spacing import PolicyParams, check_prop1
from .stability import (IssBoundSpec, check_l2_contraction, compose_cascade_bound,
                        simulate_linear_cascade, simulate_reduced_chain)
from .trajectory import Trajectory


@dataclass
class CheckResult:
    name: str
    measured: float
    tol: float
    passed: bool
    note: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = f"  ({self.note})" if self.note else ""
        return f"{status} {self.name}: measured={self.measured:.3e} tol={self.tol:.1e}{extra}"


def exp_decay_error(step: float, kappa: float = 2.0, s_end: float = 2.0) -> float:
    """RK4 error of ``kappa x' = -x``, ``x(0) = 1`` at ``s_end``."""
    grid = uniform_grid(0.0, s_end, step)
    x = integrate_rk4(lambda s, y: -y / kappa, [1.0], grid)[-1, 0]
    return abs(x - math.exp(-s_end / kappa))


def check_rk4_resolution(step_factor: float = 1.0) -> CheckResult:
    err = exp_decay_error(0.01 * step_factor)
    return CheckResult("rk4_exponential", err, 1e-8, err <= 1e-8, f"step {0.01 * step_factor:g}")


def check_rk4_order() -> CheckResult:
    h = 0.1
    ratio = exp_decay_error(h) / exp_decay_error(h / 2)
    return CheckResult("rk4_order", ratio, 16.0, 12.0 <= ratio <= 20.0, "halving ratio in [12, 20]")


def _policy(kappa0: float) -> PolicyParams:
    return PolicyParams(kappa0=kappa0)


def check_prop1_roundtrip(kappa0: float) -> CheckResult:
    # exact shifted copies first, then a converged closed-loop run
    grid = np.linspace(0.0, 100.0, 1001)
    v = 20.0 + np.sin(grid / 10.0)
    t0 = np.concatenate(([0.0], np.cumsum(np.diff(grid) * 0.5 * (1 / v[1:] + 1 / v[:-1]))))
    n = 4
    copies = Trajectory("space", grid, {"t": t0[:, None] + np.arange(n),
                                        "v": np.repeat(v[:, None], n, axis=1)})
    rep0 = check_prop1(copies, 1.0)
    exact = float(max(rep0.timing_dev.max(), rep0.velocity_dev.max()))

    cfg = ScenarioConfig(reference=ReferenceProfile.cosine_dip(20.0, 2.0, 300.0, 500.0), seed=1,
                         ic_spread=(0.5, 1.0, 0.1), policy=_policy(kappa0))
    rep = check_prop1(run_spatial(cfg).window(600.0, 1000.0), cfg.policy.dt, 1e-3)
    dev = float(max(rep.timing_dev.max(), rep.velocity_dev.max()))
    ok = exact <= 1e-12 and rep.passed
    return CheckResult("prop1_roundtrip", dev, 1e-3, ok, f"shifted copies deviate {exact:g}")


def check_invariant_chain(kappa0: float) -> CheckResult:
    """Lead error against the exponential and the full loop against the reduced chain."""
    kappa = 2.0
    lead = simulate_reduced_chain(5, kappa, kappa0, 1.0, s_end=2.0, step=0.01)
    lead_err = float(np.max(np.abs(lead.Delta[:, 0] - np.exp(-lead.s / kappa))))
    # a follower offset on the invariant set, small enough to keep velocities physical
    cfg = ScenarioConfig(end=400.0, policy=_policy(kappa0))
    Delta_init = np.zeros(cfg.n_vehicles)
    Delta_init[1] = 0.01
    chain = simulate_reduced_chain(5, kappa, kappa0, Delta_init, s_end=400.0, step=0.1)
    tr = run_spatial(cfg, state_on_invariant_set(cfg, Delta_init))
    full_err = float(np.max(np.abs(tr["Delta"] - chain.Delta)))
    ok = lead_err <= 1e-8 and full_err <= 1e-6
    return CheckResult("invariant_chain", full_err, 1e-6, ok, f"lead vs exp {lead_err:.1e}")


def check_l2(kappa0: float) -> CheckResult:
    rep = check_l2_contraction(simulate_reduced_chain(10, 2.0, kappa0, 1.0, 2000.0, 0.1))
    worst = float(max(rep.ratios.max(), rep.worst_intermediate))
    return CheckResult("l2_contraction", worst, rep.bound + rep.tol, rep.passed,
                       f"bound (1-k0)^2 = {rep.bound:.6g}")


def check_cascade_bound() -> CheckResult:
    spec = IssBoundSpec(C=1.0, lam=1.0, gamma_bar=0.5, sigma_bar=1.0)
    bound = compose_cascade_bound(spec, 0.0, 1.0)
    run = simulate_linear_cascade(0.5, 50, 1.0, 0.0, t_end=40.0, step=0.01)
    try:
        compose_cascade_bound(IssBoundSpec(gamma_bar=1.0), 1.0, 1.0)
        rejects = False
    except GainNotContractive:
        rejects = True
    worst = float(run.sup_norms.max())
    return CheckResult("cascade_bound", worst, bound, worst <= bound + 1e-3 and rejects,
                       f"bound {bound:g}")


def run_checks(step_factor: float = 1.0, kappa0: float = 0.1) -> list[CheckResult]:
    if not 0 <= kappa0 < 1:
        raise ValueError("kappa0 must lie in [0, 1)")
    return [check_rk4_resolution(step_factor), check_rk4_order(),
            check_prop1_roundtrip(kappa0), check_invariant_chain(kappa0), check_l2(kappa0),
            check_cascade_bound()]
