import csv
import json

import numpy as np
import pytest

from semidirac.cli import (EXIT_CONFIG, EXIT_FAILED, EXIT_OK, TRAJECTORY_COLUMNS, ConfigError, RunConfig,
                           fieldmap_table, load_config, main, parse_config, parse_vary)
from semidirac.fields import BesselBeamParams


def write(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def read_table(path):
    with open(path) as fh:
        schema = fh.readline().strip()
        rows = list(csv.reader(fh))
    return schema, rows[0], np.array(rows[1:], float)


# --- parsing ----------------------------------------------------------------

def test_defaults_and_types():
    cfg = parse_config("field.m_z = 2\nt_end = 50\noutput.plots = no\n")
    assert cfg["field.m_z"] == 2 and isinstance(cfg["field.m_z"], int)
    assert cfg["t_end"] == 50.0 and cfg["output.plots"] is False
    assert cfg["spin.mode"] == "both"
    assert cfg.chi == pytest.approx(0.0242631, rel=1e-5)
    assert parse_config("chi = 0.01").chi == 0.01


@pytest.mark.parametrize("text, key, line", [
    ("t_end = 10\nfoo.bar = 1\n", "foo.bar", 2),
    ("spin.mode = sideways\n", "spin.mode", 1),
    ("# comment\nt_end = 1\nt_end = 2\n", "t_end", 3),
    ("t_end = 10\ninitial.dz = 1.5\n", "initial.dz", 2),
    ("initial.rho = 20\ninitial.dphi = 0.1\n", "initial.dphi", 2),
    ("field.kperp = 1.5\n", "field.kperp", 1),
    ("integrator.rtol = -1\n", "integrator.rtol", 1),
    ("field.m_z = two\n", "field.m_z", 1),
    ("chi = 0.1\nwavelength_nm = 0.2\n", "chi", 1),
    ("t_end = nan\n", "t_end", 1),
])
def test_config_errors_name_key_and_line(text, key, line):
    with pytest.raises(ConfigError) as info:
        parse_config(text, "x.cfg")
    assert info.value.key == key and info.value.line == line
    assert str(info.value).startswith(f"x.cfg:{line}: key '{key}'")


def test_unparseable_line_reports_line_number():
    with pytest.raises(ConfigError) as info:
        parse_config("t_end = 10\nthis line\n")
    assert info.value.line == 2 and "this line" in str(info.value)
    with pytest.raises(ConfigError):
        parse_config("[field]\nm_z = 1\n")


def test_main_exit_codes(tmp_path, capsys):
    assert main(["simulate", write(tmp_path, "initial.dz = 1.5\n")]) == EXIT_CONFIG
    err = capsys.readouterr().err
    assert "initial.dz" in err and ":1:" in err
    assert main(["simulate", str(tmp_path / "missing.cfg")]) == EXIT_CONFIG
    assert main(["validate", "nonsense"]) == EXIT_CONFIG
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 2


def test_parse_vary():
    cfg = parse_config("")
    key, values = parse_vary("field.kperp=0.02:0.06:3", cfg)
    assert key == "field.kperp" and values == pytest.approx([0.02, 0.04, 0.06], abs=1e-15)
    assert parse_vary("field.m_z=0:2:5", cfg) == ("field.m_z", [0, 1, 2])
    for bad in ("field.kperp", "spin.mode=0:1:2", "nope=0:1:2", "field.kperp=a:b:2"):
        with pytest.raises(ConfigError):
            parse_vary(bad, cfg)


# --- runs -------------------------------------------------------------------

def test_zero_amplitude_gives_straight_lines(tmp_path, capsys):
    cfg = write(tmp_path, f"field.amp_te = 0\nt_end = 40\nsample_interval = 2\noutput.dir = {tmp_path}\n"
                          "output.plots = no\ninitial.drho = 0.1\n")
    assert main(["simulate", cfg, "--jobs", "1"]) == EXIT_OK
    summary = json.loads((tmp_path / "run_summary.json").read_text())
    assert summary["failed"] == [] and set(summary["branches"]) == {"plus", "minus", "spinless"}
    for name in ("plus", "minus", "spinless"):
        schema, header, table = read_table(tmp_path / f"run_{name}.csv")
        assert schema == "# semidirac-trajectory v1" and header == TRAJECTORY_COLUMNS
        t, x, v = table[:, 0], table[:, 1:4], table[:, 6:9]
        assert np.allclose(x, x[0] + np.outer(t, v[0]), atol=1e-10)
        assert np.all(table[:, 10] == 1.0)
        drift = summary["branches"][name]["drift"]
        assert drift["L"] <= 1e-12 and drift["P"] <= 1e-12


def test_simulate_is_deterministic(tmp_path):
    outputs = []
    for k in range(2):
        out = tmp_path / f"o{k}"
        cfg = write(tmp_path, f"t_end = 30\nspin.mode = plus\noutput.dir = {out}\n", f"c{k}.cfg")
        assert main(["simulate", cfg, "--jobs", "1"]) == EXIT_OK
        outputs.append(out)
    for name in ("run_plus.csv", "run_xy.svg", "run_rho.svg"):
        assert (outputs[0] / name).read_bytes() == (outputs[1] / name).read_bytes()


def test_output_dir_environment_override(tmp_path, monkeypatch):
    monkeypatch.setenv("SEMIDIRAC_OUTPUT_DIR", str(tmp_path / "env"))
    cfg = load_config(write(tmp_path, "output.dir = elsewhere\n"))
    assert cfg.output_dir == tmp_path / "env"


def test_fieldmap_origin_values(tmp_path):
    for m_z, expected in ((0, 1.0), (1, -0.25)):
        table = fieldmap_table(BesselBeamParams(m_z=m_z, kperp=0.04, amp_te=0.005), 10.0, 5)
        origin = table[(table[:, 0] == 0) & (table[:, 1] == 0)][0]
        assert origin[4] == pytest.approx(expected, abs=1e-12)
    cfg = write(tmp_path, f"field.m_z = 0\nfieldmap.n = 11\nfieldmap.extent = 20\noutput.dir = {tmp_path}\n")
    assert main(["fieldmap", cfg]) == EXIT_OK
    schema, header, table = read_table(tmp_path / "run_fieldmap.csv")
    assert schema == "# semidirac-fieldmap v1" and len(table) == 121 and header[4] == "delta2"
    assert (tmp_path / "run_delta2.svg").exists()


def test_sweep_writes_one_row_per_run(tmp_path):
    cfg = write(tmp_path, f"t_end = 10\nspin.mode = plus\noutput.plots = no\noutput.dir = {tmp_path}\n")
    assert main(["sweep", cfg, "--vary", "field.kperp=0.03:0.05:3", "--jobs", "1"]) == EXIT_OK
    with open(tmp_path / "run_sweep.csv") as fh:
        assert fh.readline().strip() == "# semidirac-sweep v1"
        rows = list(csv.reader(fh))
    assert rows[0][0] == "field.kperp" and len(rows) == 4
    assert all(r[2] == "ok" for r in rows[1:])


def test_validate_suite_reports_json(capsys):
    assert main(["validate", "fieldmap"]) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["passed"] and report["checks"][0]["number"] == 11


def test_failed_validation_exits_one(monkeypatch, capsys):
    from semidirac import acceptance
    failing = lambda: acceptance.CheckResult(0, "stub", False)
    monkeypatch.setitem(acceptance.CHECKS, "fieldmap", failing)
    assert main(["validate", "fieldmap"]) == EXIT_FAILED
    assert json.loads(capsys.readouterr().out)["passed"] is False
