"""INI scenario files.

Grammar: standard ``configparser`` INI (``key = value``, ``#``/``;`` comments,
values may be double-quoted). Sections and keys (all optional; defaults in
parentheses)::

    [platoon]     n_followers (5), dt (1.0)
    [policy]      type (delay_based | constant_headway | constant_spacing),
                  kappa (2.0), kappa0 (0.1), d (0.0), h (0.0)
    [model]       tau (1.0)
    [controller]  omega0 (0.05), zeta0 (0.9), v_nom (20.0)
    [reference]   type (constant | cosine_dip), v (20.0) for constant;
                  v_base (20.0), depth (2.0), s_a (300.0), s_b (500.0) for cosine_dip
    [disturbance] type (none | sine | table), amplitude (1.0), spatial_freq (0.01),
                  applies_to (all | followers | lead | comma separated indices),
                  table (``amp:freq`` pairs, comma separated, one per vehicle)
    [sim]         domain (spatial | temporal), s_start (0), s_end (1000),
                  t_start (0), t_end (60), step (0.1 spatial, 0.005 temporal),
                  seed (0), ic_spread_timing, ic_spread_velocity, ic_spread_accel (0),
                  lead_position (0)
    [sweep]       n_list (10, 20, 40, 80), kappa0_list (0, 0.05, 0.1, 0.15, 0.2)

Unknown sections or keys are errors.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass

from .errors import ConfigError
from .reference import ReferenceProfile
from .sim import DisturbanceSpec, ScenarioConfig
from .spacing import PolicyParams
from .vehicle import VehicleParams

SCHEMA = {
    "platoon": ("n_followers", "dt"),
    "policy": ("type", "kappa", "kappa0", "d", "h"),
    "model": ("tau",),
    "controller": ("omega0", "zeta0", "v_nom"),
    "reference": ("type", "v", "v_base", "depth", "s_a", "s_b"),
    "disturbance": ("type", "amplitude", "spatial_freq", "applies_to", "table"),
    "sim": ("domain", "s_start", "s_end", "t_start", "t_end", "step", "seed",
            "ic_spread_timing", "ic_spread_velocity", "ic_spread_accel", "lead_position"),
    "sweep": ("n_list", "kappa0_list"),
}

DEFAULT_N_LIST = (10, 20, 40, 80)
DEFAULT_KAPPA0_LIST = (0.0, 0.05, 0.1, 0.15, 0.2)


@dataclass(frozen=True)
class RunConfig:
    scenario: ScenarioConfig
    n_list: tuple = DEFAULT_N_LIST
    kappa0_list: tuple = DEFAULT_KAPPA0_LIST


def _line_of(text: str, section: str, key: str):
    sec = None
    for no, line in enumerate(text.splitlines(), 1):
        m = re.match(r"\s*\[([^\]]+)\]", line)
        if m:
            sec = m.group(1).strip()
        elif sec == section and re.match(rf"\s*{re.escape(key)}\s*[=:]", line, re.I):
            return no
    return None


class _Reader:
    def __init__(self, cp: configparser.ConfigParser, text: str, source: str):
        self.cp, self.text, self.source = cp, text, source

    def where(self, section, key=None):
        if key is None:
            return f"{self.source}: [{section}]"
        no = _line_of(self.text, section, key)
        at = f"{self.source}:{no}" if no else self.source
        return f"{at}: [{section}] {key}"

    def raw(self, section, key):
        if not self.cp.has_option(section, key):
            return None
        v = self.cp.get(section, key).strip()
        if len(v) >= 2 and v[0] == v[-1] and v[0] in "\"'":
            v = v[1:-1]
        return v

    def get(self, section, key, conv, default):
        v = self.raw(section, key)
        if v is None:
            return default
        try:
            return conv(v)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{self.where(section, key)}: invalid value {v!r} ({exc})") from None

    def has(self, section, key):
        return self.cp.has_option(section, key)


def _int(v: str) -> int:
    return int(v, 0)


def _tuple(conv):
    def parse(v: str):
        items = [x.strip() for x in v.replace(";", ",").split(",") if x.strip()]
        if not items:
            raise ValueError("empty list")
        return tuple(conv(x) for x in items)
    return parse


def _applies_to(v: str):
    v = v.strip().lower()
    if v in ("all", "followers", "lead"):
        return v
    return _tuple(int)(v)


def _table(v: str):
    rows = []
    for item in _tuple(str)(v):
        amp, _, freq = item.partition(":")
        rows.append((float(amp), float(freq or 0.0)))
    return tuple(rows)


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    for sec in cp.sections():
        if sec not in SCHEMA:
            no = next((i for i, line in enumerate(text.splitlines(), 1)
                       if line.strip() == f"[{sec}]"), "?")
            raise ConfigError(f"{source}:{no}: unknown section [{sec}]")
        for key in cp.options(sec):
            if key not in SCHEMA[sec]:
                no = _line_of(text, sec, key)
                raise ConfigError(f"{source}:{no}: unknown key {key!r} in [{sec}]")
    r = _Reader(cp, text, source)

    def build(section, key, fn):
        try:
            return fn()
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{r.where(section, key)}: {exc}") from None

    pol_kind = r.get("policy", "type", str, "delay_based")
    policy = build("policy", None, lambda: PolicyParams(
        kind=pol_kind, dt=r.get("platoon", "dt", float, 1.0),
        d=r.get("policy", "d", float, 0.0), h=r.get("policy", "h", float, 0.0),
        kappa=r.get("policy", "kappa", float, 2.0), kappa0=r.get("policy", "kappa0", float, 0.1)))

    ref_kind = r.get("reference", "type", str, "constant")
    if ref_kind == "constant":
        mk_ref = lambda: ReferenceProfile.constant(r.get("reference", "v", float, 20.0))  # noqa: E731
    elif ref_kind == "cosine_dip":
        mk_ref = lambda: ReferenceProfile.cosine_dip(  # noqa: E731
            r.get("reference", "v_base", float, 20.0), r.get("reference", "depth", float, 2.0),
            r.get("reference", "s_a", float, 300.0), r.get("reference", "s_b", float, 500.0))
    else:
        raise ConfigError(f"{r.where('reference', 'type')}: unknown reference type {ref_kind!r}")
    reference = build("reference", None, mk_ref)

    disturbance = build("disturbance", None, lambda: DisturbanceSpec(
        kind=r.get("disturbance", "type", str, "none"),
        amplitude=r.get("disturbance", "amplitude", float, 1.0),
        spatial_freq=r.get("disturbance", "spatial_freq", float, 0.01),
        applies_to=r.get("disturbance", "applies_to", _applies_to, "all"),
        table=r.get("disturbance", "table", _table, ())))

    domain = r.get("sim", "domain", str, "spatial")
    if domain == "spatial":
        start = r.get("sim", "s_start", float, 0.0)
        end = r.get("sim", "s_end", float, 1000.0)
        step = r.get("sim", "step", float, 0.1)
        if r.has("sim", "t_start") or r.has("sim", "t_end"):
            raise ConfigError(f"{r.where('sim', 't_end')}: spatial runs take s_start/s_end")
    elif domain == "temporal":
        start = r.get("sim", "t_start", float, 0.0)
        end = r.get("sim", "t_end", float, 60.0)
        step = r.get("sim", "step", float, 0.005)
        if r.has("sim", "s_start") or r.has("sim", "s_end"):
            raise ConfigError(f"{r.where('sim', 's_end')}: temporal runs take t_start/t_end")
    else:
        raise ConfigError(f"{r.where('sim', 'domain')}: unknown domain {domain!r}")
    if (domain == "spatial") != (policy.kind == "delay_based"):
        raise ConfigError(f"{r.where('policy', 'type')}: policy {policy.kind!r} "
                          f"does not run in the {domain} domain")

    seed = r.get("sim", "seed", _int, 0)
    if not 0 <= seed < 2 ** 64:
        raise ConfigError(f"{r.where('sim', 'seed')}: seed must be an unsigned 64-bit integer")
    spread = tuple(r.get("sim", k, float, 0.0)
                   for k in ("ic_spread_timing", "ic_spread_velocity", "ic_spread_accel"))
    if any(x < 0 for x in spread):
        raise ConfigError(f"{source}: [sim] ic_spread_* must be >= 0")

    scenario = build("sim", None, lambda: ScenarioConfig(
        n_followers=r.get("platoon", "n_followers", _int, 5), domain=domain,
        start=start, end=end, step=step, seed=seed, ic_spread=spread,
        disturbance=disturbance, policy=policy,
        omega0=r.get("controller", "omega0", float, 0.05),
        zeta0=r.get("controller", "zeta0", float, 0.9),
        vehicle=VehicleParams(tau=r.get("model", "tau", float, 1.0)),
        reference=reference, v_nom=r.get("controller", "v_nom", float, 20.0),
        lead_position=r.get("sim", "lead_position", float, 0.0)))
    try:
        scenario.grid
    except ValueError as exc:
        raise ConfigError(f"{r.where('sim', 'step')}: {exc}") from None
    if not (scenario.omega0 > 0 and scenario.zeta0 > 0):
        raise ConfigError(f"{source}: [controller] omega0 and zeta0 must be positive")

    n_list = r.get("sweep", "n_list", _tuple(_int), DEFAULT_N_LIST)
    kappa0_list = r.get("sweep", "kappa0_list", _tuple(float), DEFAULT_KAPPA0_LIST)
    if any(n < 1 for n in n_list) or any(not 0 <= k < 1 for k in kappa0_list):
        raise ConfigError(f"{source}: [sweep] needs N >= 1 and kappa0 in [0, 1)")
    return RunConfig(scenario, tuple(n_list), tuple(kappa0_list))


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, str(path))


def dump_config(rc: RunConfig) -> str:
    """Canonical INI text; parsing it gives back an identical ``RunConfig``."""
    sc = rc.scenario
    pol, ref, dist = sc.policy, sc.reference, sc.disturbance
    sections = {
        "platoon": {"n_followers": sc.n_followers, "dt": pol.dt},
        "policy": {"type": pol.kind, "kappa": pol.kappa, "kappa0": pol.kappa0, "d": pol.d, "h": pol.h},
        "model": {"tau": sc.vehicle.tau},
        "controller": {"omega0": sc.omega0, "zeta0": sc.zeta0, "v_nom": sc.v_nom},
    }
    if ref.kind == "constant":
        sections["reference"] = {"type": "constant", "v": ref.v_base}
    else:
        sections["reference"] = {"type": "cosine_dip", "v_base": ref.v_base, "depth": ref.depth,
                                 "s_a": ref.s_a, "s_b": ref.s_b}
    applies = dist.applies_to if isinstance(dist.applies_to, str) else \
        ", ".join(str(i) for i in dist.applies_to)
    sections["disturbance"] = {"type": dist.kind, "amplitude": dist.amplitude,
                               "spatial_freq": dist.spatial_freq, "applies_to": applies}
    if dist.table:
        sections["disturbance"]["table"] = ", ".join(f"{a!r}:{f!r}" for a, f in dist.table)
    lo, hi = ("s_start", "s_end") if sc.domain == "spatial" else ("t_start", "t_end")
    sections["sim"] = {"domain": sc.domain, lo: sc.start, hi: sc.end, "step": sc.step,
                       "seed": sc.seed, "ic_spread_timing": sc.ic_spread[0],
                       "ic_spread_velocity": sc.ic_spread[1], "ic_spread_accel": sc.ic_spread[2],
                       "lead_position": sc.lead_position}
    sections["sweep"] = {"n_list": ", ".join(str(n) for n in rc.n_list),
                         "kappa0_list": ", ".join(repr(float(k)) for k in rc.kappa0_list)}
    out = []
    for sec, kv in sections.items():
        out.append(f"[{sec}]")
        for k, v in kv.items():
            out.append(f"{k} = {v!r}" if isinstance(v, float) else f"{k} = {v}")
        out.append("")
    return "\n".join(out)
