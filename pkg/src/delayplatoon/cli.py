"""Command-line front end.

    delayplatoon simulate --config run.ini --out results/
    delayplatoon compare  --config run.ini --out results/
    delayplatoon sweep    --config run.ini --out results/
    delayplatoon validate

Exit codes: 0 success, 1 configuration error, 2 simulation abort (velocity
floor), 3 failed validation.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, dump_config, load_config
from .errors import ConfigError, NonFinite, NonPositiveVelocity
from .sim import headway_counterpart, run, run_spatial, run_temporal
from .spacing import check_prop1
from .stability import dss_sweep
from .trajectory import write_csv
from .validate import run_checks
from .vehicle import time_to_space_traj

EXIT_OK, EXIT_CONFIG, EXIT_ABORT, EXIT_VALIDATE = 0, 1, 2, 3


def _load(args) -> RunConfig:
    if not args.config:
        raise ConfigError("--config is required")
    rc = load_config(args.config)
    sc = rc.scenario
    if args.step is not None:
        sc = sc.with_(step=args.step)
    if args.seed is not None:
        if not 0 <= args.seed < 2 ** 64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        sc = sc.with_(seed=args.seed)
    try:
        sc.grid
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return replace(rc, scenario=sc)


def _write_meta(out: Path, rc: RunConfig, command: str, wall: float, extra=None) -> None:
    meta = {"command": command, "version": __version__, "seed": rc.scenario.seed,
            "wall_time_s": round(wall, 3), "config": dump_config(rc)}
    if extra:
        meta.update(extra)
    (out / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def _outdir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(args) -> int:
    rc = _load(args)
    out = _outdir(args.out)
    t0 = time.perf_counter()
    traj = run(rc.scenario)
    write_csv(traj, out / "trajectory.csv")
    _write_meta(out, rc, "simulate", time.perf_counter() - t0)
    print(f"wrote {out / 'trajectory.csv'} ({traj.grid.size} points x {traj.n_vehicles} vehicles)")
    return EXIT_OK


def _check_windows(sc):
    """Timing-check window and velocity-spread window of ``compare``.

    With a speed change in the reference both start at the change, where the
    policies differ; on a constant reference the check covers the last 40 %
    of the range (past initial transients).
    """
    bp = sc.reference.breakpoints
    if bp and sc.start <= bp[0] < sc.end:
        return (bp[0], sc.end), (bp[0], min(bp[-1], sc.end))
    lo = sc.end - 0.4 * (sc.end - sc.start)
    return (lo, sc.end), (lo, sc.end)


def cmd_compare(args) -> int:
    rc = _load(args)
    sc = rc.scenario
    if sc.domain != "spatial":
        raise ConfigError("compare needs a spatial delay-based scenario")
    out = _outdir(args.out)
    t0 = time.perf_counter()
    delay = run_spatial(sc)
    hw_cfg = headway_counterpart(sc)
    hw = run_temporal(hw_cfg)
    hw_space = time_to_space_traj(hw, step=sc.step)

    (lo, hi), (slo, shi) = _check_windows(sc)
    summary = {}
    for name, tr_s, tr in (("delay_based", delay, delay), ("headway", hw_space, hw)):
        d = _outdir(out / name)
        write_csv(tr, d / "trajectory.csv")
        rep = check_prop1(tr_s.window(lo, hi), sc.policy.dt, 1e-3)
        spread = float(np.max(np.ptp(tr_s.window(slo, shi)["v"], axis=1)))
        summary[name] = {"prop1_passed": rep.passed, "prop1_window": [lo, hi],
                         "spread_window": [slo, shi],
                         "max_timing_dev": float(rep.timing_dev.max()),
                         "max_velocity_dev": float(rep.velocity_dev.max()),
                         "max_velocity_spread": spread}
        print(f"{name}: check_prop1 on [{lo:g}, {hi:g}] {'PASS' if rep.passed else 'FAIL'}, "
              f"velocity spread on [{slo:g}, {shi:g}] {spread:.3e} m/s")
    write_csv(hw_space, out / "headway" / "trajectory_space.csv")
    _write_meta(out, rc, "compare", time.perf_counter() - t0,
                {"summary": summary, "headway_config": dump_config(replace(rc, scenario=hw_cfg))})
    return EXIT_OK


def cmd_sweep(args) -> int:
    rc = _load(args)
    if rc.scenario.domain != "spatial":
        raise ConfigError("sweep needs a spatial delay-based scenario")
    out = _outdir(args.out)
    t0 = time.perf_counter()
    rep = dss_sweep(rc.scenario, rc.n_list, rc.kappa0_list)
    lines = ["N,kappa0,sup_e1_inf,sup_Delta_inf,verdict"]
    for N, k0, e1, dl, verdict in rep.rows():
        lines.append(f"{N},{k0:.12g},{e1:.12g},{dl:.12g},{verdict}")
    (out / "sweep.csv").write_text("\n".join(lines) + "\n")
    summary = rep.summary()
    for c in rep.cells:
        if c.error:
            summary += f"\nN={c.N} kappa0={c.kappa0:g}: {c.error}"
    (out / "sweep_summary.txt").write_text(summary + "\n")
    _write_meta(out, rc, "sweep", time.perf_counter() - t0)
    print(summary)
    return EXIT_OK


def cmd_validate(args) -> int:
    if not 0 <= args.kappa0 < 1:
        print(f"error: kappa0={args.kappa0} outside [0, 1)", file=sys.stderr)
        return EXIT_CONFIG
    if not args.step_factor > 0:
        print("error: step factor must be positive", file=sys.stderr)
        return EXIT_CONFIG
    try:
        results = run_checks(step_factor=args.step_factor, kappa0=args.kappa0)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for r in results:
        print(r.line())
    ok = all(r.passed for r in results)
    print("all checks passed" if ok else "validation FAILED")
    return EXIT_OK if ok else EXIT_VALIDATE


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="delayplatoon",
                                description="Delay-based platoon simulation and string stability checks.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="scenario INI file")
    common.add_argument("--out", default=".", help="output directory (default: current)")
    common.add_argument("--step", type=float, help="override the integration step")
    common.add_argument("--seed", type=lambda v: int(v, 0), help="override the seed (u64)")

    for name, fn, help_ in (("simulate", cmd_simulate, "run one scenario, write trajectory.csv"),
                            ("compare", cmd_compare, "delay-based vs constant headway on one scenario"),
                            ("sweep", cmd_sweep, "string stability sweep over N and kappa0")):
        sp = sub.add_parser(name, parents=[common], help=help_)
        sp.set_defaults(func=fn)

    vp = sub.add_parser("validate", help="run the built-in numerical self checks")
    vp.add_argument("--kappa0", type=float, default=0.1, help="leader weight used by the checks")
    vp.add_argument("--step-factor", type=float, default=1.0, help=argparse.SUPPRESS)
    vp.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2, which is reserved for simulation aborts
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonPositiveVelocity as exc:
        print(f"simulation aborted: vehicle {exc.vehicle} at s={exc.position:.6g} m "
              f"(v={exc.velocity:.6g} m/s)", file=sys.stderr)
        return EXIT_ABORT
    except NonFinite as exc:
        print(f"simulation aborted: {exc}", file=sys.stderr)
        return EXIT_ABORT


if __name__ == "__main__":
    sys.exit(main())
