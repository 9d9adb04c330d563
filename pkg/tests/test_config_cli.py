import io
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from essrate import cli
from essrate.config import ExperimentConfig, load, loads, parse_text
from essrate.csvio import read_csv
from essrate.errors import ConfigError

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = cli.run(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


def summary(text):
    return dict(line.split(" = ", 1) for line in text.splitlines() if " = " in line)


def test_parse_text():
    m = parse_text("# comment\n a.b = 1 # trailing\n\nc = x, y\n")
    assert m == {"a.b": "1", "c": "x, y"}
    with pytest.raises(ConfigError):
        parse_text("no equals sign")
    with pytest.raises(ConfigError):
        parse_text("a = 1\na = 2")


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError):
        loads("problem.id = gradient_flow_quartic\ncontroller.thet = 0.5\n")
    with pytest.raises(ConfigError):
        loads("tableau.id = rk4\n")
    with pytest.raises(ConfigError):
        loads("problem.id = gradient_flow_quartic\nanalysis.model = cubic\n")


def test_load_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load(tmp_path / "nope.cfg")


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.cfg")), ids=lambda p: p.name)
def test_shipped_configs_round_trip(path):
    cfg = load(path)
    again = loads(cfg.dumps())
    assert again == cfg
    assert again.dumps() == cfg.dumps()


@settings(max_examples=40, deadline=None)
@given(
    st.sampled_from(["fixed", "capped"]),
    st.floats(1e-4, 1.0),
    st.floats(0.05, 1.0),
    st.lists(st.floats(-10, 10, allow_nan=False), min_size=2, max_size=2),
    st.integers(10, 10_000),
    st.sampled_from(["none", "min", "upper"]),
)
def test_config_round_trip_property(mode, h, theta, y0, steps, env):
    ctl = f"controller.h = {h!r}" if mode == "fixed" else f"controller.theta = {theta!r}"
    text = (
        "problem.id = power_law\nproblem.p = 2.5\n"
        f"controller.mode = {mode}\n{ctl}\n"
        f"y0 = {y0[0]!r}, {y0[1]!r}\nstop.max_steps = {steps}\nanalysis.envelope = {env}\n"
    )
    cfg = loads(text)
    assert loads(cfg.dumps()) == cfg
    assert cfg.y0 == tuple(y0)


def test_inline_tableau():
    cfg = loads(
        "problem.id = gradient_flow_quartic\n"
        "tableau.id = midpoint\ntableau.stages = 2\ntableau.a = 0, 0, 1/2, 0\ntableau.b = 0, 1\n"
    )
    tab = cfg.tableau.build()
    assert tab.name == "midpoint" and tab.c[1] == 0.5
    assert loads(cfg.dumps()) == cfg


def test_simulate_quartic(tmp_path):
    prefix = str(tmp_path / "q")
    code, out, _ = run("simulate", "--config", str(CONFIGS / "quartic_rk4_fixed.cfg"), "--out", prefix)
    assert code == 0
    cols = read_csv(prefix + "_trajectory.csv")
    assert cols["t"][-1] == pytest.approx(4.0, abs=1e-12)
    assert abs(cols["y0"][-1] - 1 / 3) < 1e-8
    assert summary(out)["steps"] == "400"
    assert Path(prefix + "_summary.txt").read_text() == out


def test_csv_header_embeds_resolved_config(tmp_path):
    prefix = str(tmp_path / "q")
    run("simulate", "--config", str(CONFIGS / "power_law_p2_capped.cfg"), "--out", prefix)
    lines = Path(prefix + "_trajectory.csv").read_text().splitlines()
    header = [ln[2:] for ln in lines if ln.startswith("# ")][1:]
    cfg = loads("\n".join(header))
    assert cfg.problem.params["p"] == 2 and cfg.t0 == 1.0 and cfg.y0 == (1.0, 1.0)
    assert cfg.output_prefix == prefix
    assert lines[len(header) + 1] == "k,t,h,gap,rho,y0,y1"


def test_missing_config_exit_1(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    code, out, err = run("simulate", "--config", "missing.cfg")
    assert code == 1 and "missing.cfg" in err and out == ""
    assert list(tmp_path.iterdir()) == []


def test_bad_config_exit_1(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("problem.id = power_law\nproblem.p = 0\n")
    assert run("simulate", "--config", str(cfg), "--out", str(tmp_path / "o"))[0] == 1


def test_numerical_failure_exit_2(tmp_path):
    cfg = tmp_path / "div.cfg"
    cfg.write_text(
        "problem.id = gradient_flow_quartic\ncontroller.mode = fixed\ncontroller.h = 3\n"
        "y0 = 2\nstop.max_steps = 50\n"
    )
    code, _, err = run("simulate", "--config", str(cfg), "--out", str(tmp_path / "o"))
    assert code == 2 and "numerical" in err


def test_domain_stdout_contains_imaginary_extent():
    code, out, _ = run("domain", "--tableau", "rk4", "--rays", "360")
    assert code == 0
    rows = [ln.split(",") for ln in out.splitlines() if ln and not ln.startswith("#")]
    assert rows[0] == ["theta", "re", "im"]
    pts = [(float(a), float(b)) for _, a, b in rows[1:]]
    assert min(math.hypot(x, y - 2 * math.sqrt(2)) for x, y in pts) < 1e-6


def test_domain_file_and_unknown_tableau(tmp_path):
    path = tmp_path / "euler.csv"
    assert run("domain", "--tableau", "euler", "--rays", "4", "--out", str(path))[0] == 0
    cols = read_csv(path)
    assert list(cols) == ["theta", "re", "im"] and cols["re"][2] == pytest.approx(-2)
    assert run("domain", "--tableau", "dopri", "--rays", "8")[0] == 1


def test_rescale_and_proper_checks(tmp_path):
    code, out, _ = run("rescale-check", "--config", str(CONFIGS / "equivalence_p2_p3.cfg"), "--out", str(tmp_path / "e"))
    assert code == 0 and summary(out)["pass"] == "True"
    assert list(read_csv(tmp_path / "e_equivalence.csv")) == ["t", "alpha", "deviation"]
    code, out, _ = run("proper-check", "--config", str(CONFIGS / "proper_quartic.cfg"), "--out", str(tmp_path / "p"))
    s = summary(out)
    assert code == 0 and s["is_proper"] == "False" and float(s["ratio"]) > 1e3


def test_theorem4_command(tmp_path):
    code, out, _ = run("theorem4", "--config", str(CONFIGS / "quartic_euler_theorem4.cfg"), "--out", str(tmp_path / "t"))
    assert code == 0
    assert abs(float(summary(out)["theorem4.tail_slope"]) - 1) <= 0.1
    cols = read_csv(tmp_path / "t_theorem4.csv")
    assert list(cols) == ["k", "alpha_gap", "ratio"]
    assert np.allclose(cols["ratio"], cols["alpha_gap"] / cols["k"])


def test_rate_command(tmp_path):
    prefix = str(tmp_path / "r")
    run("simulate", "--config", str(CONFIGS / "quartic_proper_capped.cfg"), "--out", prefix)
    code, out, _ = run("rate", "--csv", prefix + "_trajectory.csv", "--model", "exponential")
    assert code == 0 and abs(float(summary(out)["rate.exponent"]) + 2) <= 0.05
    assert run("rate", "--csv", str(tmp_path / "none.csv"))[0] == 1


def test_sweep(tmp_path):
    prefix = str(tmp_path / "s")
    code, out, _ = run("sweep", "--config", str(CONFIGS / "sweep_power_law.cfg"), "--out", prefix)
    assert code == 0 and summary(out)["failed"] == "0"
    idx = read_csv(prefix + "_index.csv")
    assert list(idx["value"]) == [1, 1.5, 2, 3]
    for v in ("1", "1.5", "2", "3"):
        assert Path(f"{prefix}_problem.p={v}_trajectory.csv").exists()


def test_sweep_cell_failure_exit_2(tmp_path):
    cfg = tmp_path / "sw.cfg"
    cfg.write_text(
        "problem.id = power_law\nproblem.p = 2\nt0 = 1\nstop.max_steps = 20\n"
        "sweep.key = problem.p\nsweep.values = 2, -1\n"
    )
    code, out, _ = run("sweep", "--config", str(cfg), "--out", str(tmp_path / "s"))
    assert code == 2 and summary(out)["failed"] == "1"


@pytest.mark.parametrize("name,command", [
    ("quartic_rk4_fixed", "simulate"),
    ("power_law_p3_theorem4", "theorem4"),
    ("proper_quartic_proper", "proper-check"),
])
def test_byte_determinism(tmp_path, name, command):
    # the header embeds output.prefix, so both runs write to the same prefix
    outs = []
    for _ in range(2):
        assert run(command, "--config", str(CONFIGS / f"{name}.cfg"), "--out", str(tmp_path / "same"))[0] == 0
        outs.append({p.name: p.read_bytes() for p in tmp_path.glob("same_*")})
    assert outs[0] and outs[0] == outs[1]
