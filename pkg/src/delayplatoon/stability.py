"""Numerical checks of string stability properties.

* ``compose_cascade_bound``: the N-uniform sup bound of a cascade of ISS
  systems whose interconnection gain is linear with slope ``gamma_bar < 1``
  and whose transient bound is exponential, ``beta(r, s) = C r exp(-lam s)``.
* ``simulate_linear_cascade``: the scalar cascade
  ``x_i' = -x_i + gamma x_{i-1} + w_i`` used to test that bound and to show
  unbounded growth for ``gamma > 1``.
* ``simulate_reduced_chain`` / ``check_l2_contraction``: timing-error dynamics
  on the invariant set ``delta = 0``,
  ``kappa Delta_0' = -Delta_0``, ``kappa Delta_i' = -Delta_i + (1-k0) Delta_{i-1}``,
  and the energy estimate ``int Delta_i^2 <= (1-k0)^2 int Delta_{i-1}^2``.
* ``dss_sweep``: sup-norms of the full closed loop over platoon length and
  leader weight.

The output-gain of the timing chain is ``gamma_y(r) = (1 - k0) r``; the
remaining ISS comparison functions of the full error system have no closed
form here and are only probed through simulation.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .errors import GainNotContractive, HypothesisViolated, PlatoonError
from .integrate import integrate_rk4, uniform_grid
from .sim import DisturbanceSpec, ScenarioConfig, run_spatial
from .spacing import PolicyParams

DSS_THRESHOLD = 0.05  # relative sup-norm increase between the two largest N


@dataclass(frozen=True)
class IssBoundSpec:
    """Exponential ISS estimate ``|x_i| <= C |x_i(0)| e^{-lam s} + gamma_bar |x_{i-1}| + sigma_bar |w_i|``.

    Note that an exponential ``beta`` decays faster than any power of ``s``;
    bounds that require ``beta(r, w s) <= w^-q beta(r, s)`` must therefore use
    a slower envelope of it. The uniform sup bound below only needs
    ``beta(r, 0) = C r``.
    """

    C: float = 1.0
    lam: float = 1.0
    gamma_bar: float = 0.0
    sigma_bar: float = 1.0

    def __post_init__(self):
        if not self.C >= 1:
            raise ValueError("C must be >= 1")
        if not self.lam > 0:
            raise ValueError("lam must be positive")
        if not self.gamma_bar >= 0:
            raise ValueError("gamma_bar must be >= 0")
        if not self.sigma_bar >= 0:
            raise ValueError("sigma_bar must be >= 0")

    def beta(self, r, s):
        return self.C * np.asarray(r) * np.exp(-self.lam * np.asarray(s))


def compose_cascade_bound(spec: IssBoundSpec, x0_bound: float, w_bound: float) -> float:
    """Sup bound valid for every subsystem of a cascade of any length."""
    if spec.gamma_bar >= 1:
        raise GainNotContractive(f"gamma_bar={spec.gamma_bar} >= 1: no length-uniform bound")
    if x0_bound < 0 or w_bound < 0:
        raise ValueError("bounds must be non-negative")
    return (spec.C * x0_bound + spec.sigma_bar * w_bound) / (1.0 - spec.gamma_bar)


@dataclass
class CascadeRun:
    t: np.ndarray
    x: np.ndarray          # (len(t), n)
    sup_norms: np.ndarray  # per system
    final: np.ndarray      # state at the last time


def simulate_linear_cascade(gamma: float, n: int, w=1.0, x0=0.0, t_end: float = 60.0,
                            step: float = 0.01) -> CascadeRun:
    """RK4 run of ``x_i' = -x_i + gamma x_{i-1} + w_i`` (``x_{-1} = 0``).

    ``w`` is a constant, a length-``n`` array or a callable ``w(t) -> array``.
    """
    if n < 1:
        raise ValueError("need at least one system")
    if callable(w):
        w_of_t = w
    else:
        w_const = np.broadcast_to(np.asarray(w, dtype=float), (n,)).copy()

        def w_of_t(t):
            return w_const

    def f(t, x):
        dx = w_of_t(t) - x
        dx[1:] += gamma * x[:-1]
        return dx

    x_init = np.broadcast_to(np.asarray(x0, dtype=float), (n,)).copy()
    grid = uniform_grid(0.0, t_end, step)
    X = integrate_rk4(f, x_init, grid)
    return CascadeRun(grid, X, np.max(np.abs(X), axis=0), X[-1].copy())


@dataclass
class ChainRun:
    s: np.ndarray
    Delta: np.ndarray  # (len(s), n + 1), column 0 is the lead
    kappa: float
    kappa0: float


def chain_matrix(n_vehicles: int, kappa: float, kappa0: float,
                 lead_coupling: float | None = None) -> np.ndarray:
    """``lead_coupling`` is the weight of ``Delta_0`` in the first follower's
    row; ``None`` uses ``1 - kappa0`` like every other row. Because the lead
    timing error is taken against the nominal clock while followers measure
    against the actual lead, the full closed loop realises weight 1 there."""
    A = -np.eye(n_vehicles)
    for i in range(1, n_vehicles):
        A[i, i - 1] = 1.0 - kappa0
    if lead_coupling is not None and n_vehicles > 1:
        A[1, 0] = lead_coupling
    return A / kappa


def simulate_reduced_chain(n_followers: int, kappa: float, kappa0: float, Delta_init,
                           s_end: float = 2000.0, step: float = 0.1, s_start: float = 0.0,
                           lead_coupling: float | None = None) -> ChainRun:
    """Timing errors on the invariant set, integrated over position with RK4.

    ``Delta_init`` is a scalar (lead error, followers start at zero) or a full
    vector of ``n_followers + 1`` initial errors.
    """
    n = n_followers + 1
    d0 = np.asarray(Delta_init, dtype=float)
    if d0.ndim == 0:
        d0 = np.concatenate(([float(d0)], np.zeros(n - 1)))
    if d0.shape != (n,):
        raise ValueError(f"need {n} initial timing errors")
    A = chain_matrix(n, kappa, kappa0, lead_coupling)
    grid = uniform_grid(s_start, s_end, step)
    return ChainRun(grid, integrate_rk4(lambda s, x: A @ x, d0, grid), kappa, kappa0)


@dataclass
class L2Report:
    ratios: np.ndarray       # int |Delta_i|^2 / int |Delta_{i-1}|^2 at the final s, i = 1..N
    bound: float             # (1 - k0)^2
    tol: float
    worst_intermediate: float  # max over subsampled s and i of the ratio
    passed: bool


def check_l2_contraction(chain_run: ChainRun, kappa0: float | None = None, tol: float = 1e-6,
                         n_checkpoints: int = 100) -> L2Report:
    """Energy ratios of consecutive timing errors.

    The estimate is checked at the end point and at ``n_checkpoints`` evenly
    spaced intermediate positions. A ratio whose denominator vanishes is
    reported as exactly 0.
    """
    k0 = chain_run.kappa0 if kappa0 is None else kappa0
    D = chain_run.Delta
    if np.any(D[0, 1:] != 0):
        raise HypothesisViolated("followers must start with zero timing error")
    energy = cumulative_trapezoid(D ** 2, chain_run.s, axis=0, initial=0.0)
    bound = (1.0 - k0) ** 2

    def ratio(num, den):
        out = np.zeros_like(num)
        nz = den > 0
        out[nz] = num[nz] / den[nz]
        return out

    ratios = ratio(energy[-1, 1:], energy[-1, :-1])
    idx = np.unique(np.linspace(1, len(chain_run.s) - 1, n_checkpoints).astype(int))
    inter = ratio(energy[idx, 1:], energy[idx, :-1])
    worst = float(inter.max()) if inter.size else 0.0
    passed = bool(np.all(ratios <= bound + tol) and worst <= bound + tol)
    return L2Report(ratios, bound, tol, worst, passed)


# --- full platoon sweep ---------------------------------------------------

def disturbance_sweep_config(end: float = 1000.0, step: float = 0.1) -> ScenarioConfig:
    """Zero initial errors, constant 20 m/s reference, ``w_i = sin(0.01 s)`` on followers."""
    return ScenarioConfig(end=end, step=step,
                          disturbance=DisturbanceSpec("sine", amplitude=1.0, spatial_freq=0.01,
                                                      applies_to="followers"))


@dataclass
class DssCell:
    N: int
    kappa0: float
    sup_e1_inf: float
    sup_Delta_inf: float
    error: str = ""


@dataclass
class DssReport:
    N_list: tuple
    kappa0_list: tuple
    cells: list                       # row-major over kappa0, then N
    threshold: float = DSS_THRESHOLD
    growth: dict = field(default_factory=dict)      # kappa0 -> relative increase between two largest N
    exponent: dict = field(default_factory=dict)    # kappa0 -> log-log slope of sup_e1 vs N
    verdict: dict = field(default_factory=dict)     # kappa0 -> "PASS" | "FAIL" | "ERROR"

    def table(self, key: str = "sup_e1_inf") -> np.ndarray:
        """Array of shape ``(len(kappa0_list), len(N_list))``."""
        vals = [getattr(c, key) for c in self.cells]
        return np.array(vals, dtype=float).reshape(len(self.kappa0_list), len(self.N_list))

    def rows(self):
        for c in self.cells:
            yield c.N, c.kappa0, c.sup_e1_inf, c.sup_Delta_inf, self.verdict[c.kappa0]

    def summary(self) -> str:
        lines = [f"saturation threshold {self.threshold:.0%} between N={self.N_list[-2:]}"
                 if len(self.N_list) > 1 else "single N, no saturation verdict"]
        for k0 in self.kappa0_list:
            lines.append(f"kappa0={k0:g}: growth {self.growth[k0]:+.3%}, "
                         f"exponent {self.exponent[k0]:.3f}, {self.verdict[k0]}")
        return "\n".join(lines)


def _sweep_cell(args) -> DssCell:
    cfg, N, k0 = args
    pol = cfg.policy
    cell_cfg = cfg.with_(n_followers=int(N),
                         policy=PolicyParams(kind=pol.kind, dt=pol.dt, d=pol.d, h=pol.h,
                                             kappa=pol.kappa, kappa0=float(k0)))
    try:
        tr = run_spatial(cell_cfg)
    except PlatoonError as exc:
        return DssCell(int(N), float(k0), math.nan, math.nan, f"{type(exc).__name__}: {exc}")
    return DssCell(int(N), float(k0), float(np.max(np.abs(tr["e1"]))),
                   float(np.max(np.abs(tr["Delta"]))))


def dss_sweep(base_cfg: ScenarioConfig, N_list, kappa0_list, threshold: float = DSS_THRESHOLD,
              workers: int = 1) -> DssReport:
    """Run the closed loop for every ``(N, kappa0)`` and judge saturation in N.

    A leader weight passes when the sup-norm of ``e1`` grows by less than
    ``threshold`` (relative) between the two largest platoon sizes.
    """
    N_list = tuple(sorted(int(n) for n in N_list))
    kappa0_list = tuple(float(k) for k in kappa0_list)
    jobs = [(base_cfg, N, k0) for k0 in kappa0_list for N in N_list]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            cells = list(ex.map(_sweep_cell, jobs))
    else:
        cells = [_sweep_cell(j) for j in jobs]

    rep = DssReport(N_list, kappa0_list, cells, threshold)
    tab = rep.table()
    for r, k0 in enumerate(kappa0_list):
        row = tab[r]
        if np.any(~np.isfinite(row)):
            rep.growth[k0], rep.exponent[k0], rep.verdict[k0] = math.nan, math.nan, "ERROR"
            continue
        if len(N_list) > 1 and row[-2] > 0:
            rep.growth[k0] = float(row[-1] / row[-2] - 1.0)
            rep.exponent[k0] = float(np.polyfit(np.log(N_list), np.log(row), 1)[0])
        else:
            rep.growth[k0], rep.exponent[k0] = 0.0, 0.0
        rep.verdict[k0] = "PASS" if rep.growth[k0] < threshold else "FAIL"
    return rep
