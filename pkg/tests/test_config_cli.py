import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from delayplatoon.cli import main
from delayplatoon.config import RunConfig, dump_config, load_config, parse_config
from delayplatoon.errors import ConfigError
from delayplatoon.reference import ReferenceProfile
from delayplatoon.sim import DisturbanceSpec, ScenarioConfig
from delayplatoon.spacing import PolicyParams
from delayplatoon.trajectory import CSV_HEADER, read_csv
from delayplatoon.vehicle import VehicleParams

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
ERROR_COLS = ("Delta", "Delta0", "delta1", "delta2", "e1", "e2")


def _write(tmp_path, text, name="run.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


SHORT_DIP = """
[reference]
type = cosine_dip
s_a = 30
s_b = 80

[sim]
s_end = 150
seed = 7
ic_spread_timing = 0.2
ic_spread_velocity = 0.5
"""


# --- config ------------------------------------------------------------------

def test_defaults_are_table_one():
    sc = parse_config("").scenario
    assert sc.policy == PolicyParams(kind="delay_based", dt=1.0, kappa=2.0, kappa0=0.1)
    assert sc.vehicle.tau == 1.0
    assert (sc.omega0, sc.zeta0) == (0.05, 0.9)
    assert sc.n_followers == 5 and sc.step == 0.1 and (sc.start, sc.end) == (0.0, 1000.0)
    assert sc.reference == ReferenceProfile.constant(20.0)


def test_parse_full_example():
    rc = load_config(CONFIGS / "dip.ini")
    sc = rc.scenario
    assert sc.reference == ReferenceProfile.cosine_dip(20.0, 2.0, 300.0, 500.0)
    assert sc.seed == 1 and sc.ic_spread == (0.5, 1.0, 0.1)
    rc = load_config(CONFIGS / "sweep.ini")
    assert rc.n_list == (10, 20, 40, 80)
    assert rc.kappa0_list == (0.0, 0.05, 0.1, 0.15, 0.2)
    assert rc.scenario.disturbance == DisturbanceSpec("sine", 1.0, 0.01, "followers")


def test_quoted_values_and_comments():
    sc = parse_config('[policy]\ntype = "delay_based"  # quoted\nkappa0 = 0.2 ; inline\n').scenario
    assert sc.policy.kappa0 == 0.2


@pytest.mark.parametrize("name", ["dip.ini", "equilibrium.ini", "headway.ini", "sweep.ini"])
def test_round_trip_examples(name):
    rc = load_config(CONFIGS / name)
    text = dump_config(rc)
    assert parse_config(text) == rc
    assert dump_config(parse_config(text)) == text


finite = st.floats(0.01, 100.0, allow_nan=False)


@given(n=st.integers(1, 50), k0=st.floats(0.0, 0.99), kappa=finite, tau=finite, seed=st.integers(0, 2 ** 64 - 1),
       spread=st.tuples(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1)),
       applies=st.sampled_from(["all", "followers", "lead", (1, 2)]),
       table=st.lists(st.tuples(finite, finite), max_size=3),
       dip=st.booleans())
@settings(max_examples=60, deadline=None)
def test_round_trip_property(n, k0, kappa, tau, seed, spread, applies, table, dip):
    ref = ReferenceProfile.cosine_dip(20.0, 1.5, 100.0, 250.0) if dip else ReferenceProfile.constant(17.5)
    sc = ScenarioConfig(n_followers=n, seed=seed, ic_spread=spread, reference=ref,
                        vehicle=VehicleParams(tau=tau),
                        policy=PolicyParams(kappa=kappa, kappa0=k0),
                        disturbance=DisturbanceSpec("table" if table else "sine", 0.3, 0.02, applies,
                                                    tuple(table)))
    rc = RunConfig(sc, (3, 7), (0.0, k0))
    assert parse_config(dump_config(rc)) == rc


@pytest.mark.parametrize("text,needle", [
    ("[platoon]\nn_followers = 5\n\n[bogus]\nx = 1\n", ":4: unknown section [bogus]"),
    ("[policy]\nkappa = 2\nkapa0 = 0.1\n", ":3: unknown key 'kapa0' in [policy]"),
    ("[sim]\nstep = 0.1\nseed = abc\n", ":3: [sim] seed: invalid value"),
    ("[sim]\ns_end = 1000\nstep = 0.3\n", ":3: [sim] step"),
    ("[policy]\ntype = constant_headway\nh = 0.1\n", ":2: [policy] type"),
    ("[policy]\ntype = constant_headway\n", "requires h > 0"),
    ("[reference]\ntype = ramp\n", ":2: [reference] type"),
    ("[policy]\nkappa0 = 1.5\n", "[policy]"),
    ("[sim]\nseed = -1\n", "seed must be"),
    ("[sweep]\nkappa0_list = 0, 1\n", "[sweep]"),
    ("[platoon]\nn_followers 5\n", "<config>"),
])
def test_config_errors_name_line_and_key(text, needle):
    with pytest.raises(ConfigError) as ei:
        parse_config(text)
    assert needle in str(ei.value)


def test_missing_file():
    with pytest.raises(ConfigError):
        load_config("/nonexistent/run.ini")


# --- CLI: simulate --------------------------------------------------------------

def test_simulate_equilibrium_errors_zero(tmp_path):
    out = tmp_path / "eq"
    assert main(["simulate", "--config", str(CONFIGS / "equilibrium.ini"), "--out", str(out)]) == 0
    tr = read_csv(out / "trajectory.csv", "space")
    for c in ERROR_COLS:
        assert np.max(np.abs(tr[c])) < 1e-9, c
    meta = json.loads((out / "meta.json").read_text())
    assert {"config", "seed", "version", "wall_time_s"} <= meta.keys()


def test_csv_header_and_round_trip(tmp_path):
    from delayplatoon.sim import run
    cfg = _write(tmp_path, SHORT_DIP)
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    text = (tmp_path / "trajectory.csv").read_text().splitlines()
    assert text[0] == CSV_HEADER
    assert len(text) == 1 + 1501 * 6
    back = read_csv(tmp_path / "trajectory.csv", "space")
    mem = run(load_config(cfg).scenario)
    assert np.array_equal(back.grid, np.round(mem.grid, 10))
    for c, v in mem.channels.items():
        np.testing.assert_allclose(back[c], v, rtol=1e-11, atol=1e-300, err_msg=c)


def test_config_echo_reruns_byte_identical(tmp_path):
    cfg = _write(tmp_path, SHORT_DIP)
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    echo = json.loads((tmp_path / "a" / "meta.json").read_text())["config"]
    cfg2 = _write(tmp_path, echo, "echo.ini")
    assert main(["simulate", "--config", str(cfg2), "--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a" / "trajectory.csv").read_bytes() == (tmp_path / "b" / "trajectory.csv").read_bytes()


def test_overrides(tmp_path):
    cfg = _write(tmp_path, SHORT_DIP)
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o"),
                 "--step", "0.5", "--seed", "0x10"]) == 0
    meta = json.loads((tmp_path / "o" / "meta.json").read_text())
    assert meta["seed"] == 16
    assert "step = 0.5" in meta["config"]
    assert read_csv(tmp_path / "o" / "trajectory.csv", "space").grid.size == 301


@pytest.mark.parametrize("argv", [
    ["simulate"],
    ["simulate", "--config", "/nonexistent.ini"],
    ["simulate", "--config", "{cfg}", "--step", "0.7"],
    ["simulate", "--config", "{cfg}", "--seed", "-3"],
    ["frobnicate"],
    ["validate", "--kappa0", "1.0"],
    ["validate", "--kappa0", "-0.1"],
])
def test_exit_code_config_error(tmp_path, argv, capsys):
    cfg = _write(tmp_path, SHORT_DIP)
    argv = [a.format(cfg=cfg) for a in argv]
    assert main(argv) == 1


def test_exit_code_config_error_has_diagnostic(tmp_path, capsys):
    cfg = _write(tmp_path, "[sim]\nstep = 0.1\nsed = 4\n")
    assert main(["simulate", "--config", str(cfg)]) == 1
    err = capsys.readouterr().err
    assert "run.ini:3" in err and "sed" in err


def test_exit_code_abort(tmp_path, capsys):
    cfg = _write(tmp_path, "[sim]\ns_end = 100\nseed = 3\nic_spread_velocity = 30\n")
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert "vehicle" in err and "s=" in err


# --- CLI: compare, sweep, validate -----------------------------------------------

def test_compare_outputs(tmp_path, capsys):
    out = tmp_path / "cmp"
    assert main(["compare", "--config", str(CONFIGS / "dip.ini"), "--out", str(out)]) == 0
    heads = [(out / d / "trajectory.csv").open().readline() for d in ("delay_based", "headway")]
    assert heads[0] == heads[1] == CSV_HEADER + "\n"
    summary = json.loads((out / "meta.json").read_text())["summary"]
    assert summary["delay_based"]["prop1_passed"] is True
    assert summary["headway"]["prop1_passed"] is False
    assert summary["headway"]["max_velocity_spread"] > 10 * summary["delay_based"]["max_velocity_spread"]
    printed = capsys.readouterr().out
    assert "delay_based" in printed and "headway" in printed


def test_compare_constant_reference_both_pass(tmp_path):
    out = tmp_path / "cmp"
    assert main(["compare", "--config", str(CONFIGS / "equilibrium.ini"), "--out", str(out)]) == 0
    summary = json.loads((out / "meta.json").read_text())["summary"]
    assert summary["delay_based"]["prop1_passed"] and summary["headway"]["prop1_passed"]
    hw = read_csv(out / "headway" / "trajectory.csv", "time")
    for c in ERROR_COLS:
        assert np.max(np.abs(hw[c])) < 1e-9


def test_compare_needs_spatial(tmp_path):
    assert main(["compare", "--config", str(CONFIGS / "headway.ini"), "--out", str(tmp_path)]) == 1


def test_sweep_csv(tmp_path):
    cfg = _write(tmp_path, """
[disturbance]
type = sine
applies_to = followers
[sim]
s_end = 200
step = 0.5
[sweep]
n_list = 2, 3
kappa0_list = 0, 0.2
""")
    assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "sweep.csv").read_text().splitlines()
    assert lines[0] == "N,kappa0,sup_e1_inf,sup_Delta_inf,verdict"
    assert len(lines) == 5
    rows = [ln.split(",") for ln in lines[1:]]
    assert [(r[0], r[1]) for r in rows] == [("2", "0"), ("3", "0"), ("2", "0.2"), ("3", "0.2")]
    assert all(r[4] in ("PASS", "FAIL") for r in rows)
    assert "kappa0=0.2" in (tmp_path / "sweep_summary.txt").read_text()


def test_validate_default_and_extreme_kappa0(capsys):
    assert main(["validate"]) == 0
    assert main(["validate", "--kappa0", "0.999"]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 12 and "FAIL" not in out


def test_validate_coarse_step_fails(capsys):
    assert main(["validate", "--step-factor", "100"]) == 3
    out = capsys.readouterr().out
    assert "FAIL rk4_exponential" in out


def test_help_and_version(capsys):
    assert main(["--version"]) == 0
    assert main(["--help"]) == 0
    assert "--step-factor" not in capsys.readouterr().out
