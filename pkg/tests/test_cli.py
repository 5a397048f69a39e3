import json
import math

import pytest

from superatom_ghz.channels import ErrorModelParams
from superatom_ghz.cli import main
from superatom_ghz.config import SimConfig, emit_config, load_config, parse_config
from superatom_ghz.exceptions import ConfigError
from superatom_ghz.phase import PhaseNoiseParams

BELL_COUNTS = {
    "eig.csv": "outcome,count\nEE,2407\nEL,154\nLE,71\nLL,2301\n",
    "da.csv": "outcome,count\nDD,2234\nDA,179\nAD,204\nAA,2324\n",
    "cp.csv": "outcome,count\nCC,225\nCP,2237\nPC,2286\nPP,192\n",
}


@pytest.fixture
def bell_files(tmp_path):
    paths = []
    for name, text in BELL_COUNTS.items():
        p = tmp_path / name
        p.write_text(text)
        paths.append(str(p))
    return paths


def test_config_defaults():
    cfg = parse_config("")
    assert cfg.m == 6 and cfg.params == ErrorModelParams() and cfg.phase == PhaseNoiseParams()
    assert cfg.cycle_rate == pytest.approx(6667, abs=1)
    assert len(cfg.measurement_settings()) == 7


def test_config_roundtrip():
    cfg = SimConfig(m=3, trajectories=12345, master_seed=2**63 + 5, settings=("eigen", "mi:2"),
                    params=ErrorModelParams(p_dark=0.0025, eta_f=0.3),
                    phase=PhaseNoiseParams(13.0, 7.4, (4.8, 12.0)), phase_deg=12.5, mode="physical")
    assert parse_config(emit_config(cfg)) == cfg


@pytest.mark.parametrize("text", [
    "[simulation]\ntrajectories = 0\n",
    "[simulation]\nm = 17\n",
    "[simulation]\nm = two\n",
    "[errors]\np_dark = 2\n",
    "[errors]\nbogus = 1\n",
    "[extra]\nx = 1\n",
    "[simulation]\nsettings = mi:9\nm = 3\n",
])
def test_config_errors(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "nope.ini"))


def test_analyze_bell_counts(bell_files, tmp_path, capsys):
    assert main(["analyze", *bell_files, "--out-dir", str(tmp_path / "out"), "--format", "json"]) == 0
    report = json.loads((tmp_path / "out" / "report_m2.json").read_text())
    assert report["F"]["value"] == pytest.approx(0.896, abs=0.001)
    assert report["F"]["error"] == pytest.approx(0.003, abs=0.0005)
    assert (tmp_path / "out" / "report_m2.txt").exists()


def test_analyze_missing_settings(bell_files, capsys):
    assert main(["analyze", bell_files[0]]) == 3
    assert "mi:0" in capsys.readouterr().err


def test_simulate_config_error(tmp_path, capsys):
    assert main(["simulate", "--m", "2", "--trajectories", "0", "--out-dir", str(tmp_path)]) == 2


def test_simulate_deterministic(tmp_path, capsys):
    args = ["simulate", "--m", "2", "--trajectories", "300000", "--seed", "9"]
    assert main(args + ["--out-dir", str(tmp_path / "a"), "--threads", "1"]) == 0
    assert main(args + ["--out-dir", str(tmp_path / "b"), "--threads", "3"]) == 0
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert names == ["config.ini", "rates.json", "table_m2_eigen.csv", "table_m2_mi0.csv", "table_m2_mi1.csv"]
    for n in names:
        assert (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes()
    rates = json.loads((tmp_path / "a" / "rates.json").read_text())
    assert rates["predicted_per_hour"] == pytest.approx(6667 * 3600 * ErrorModelParams().efficiency**2, rel=1e-3)


def test_simulate_analyze_fit_report(tmp_path, capsys):
    reports = []
    for m in (2, 3):
        out = tmp_path / f"m{m}"
        assert main(["simulate", "--m", str(m), "--trajectories", "2000000", "--seed", "1",
                     "--out-dir", str(out), "--format", "json"]) == 0
        tables = sorted(str(p) for p in out.glob("table_*.json"))
        assert main(["analyze", *tables, "--out-dir", str(out)]) == 0
        reports.append(str(out / f"report_m{m}.json"))
    assert main(["fit", *reports, "--out-dir", str(tmp_path)]) == 0
    fit = json.loads((tmp_path / "fit.json").read_text())
    assert 0.9 < fit["alpha"] <= 1.0
    assert main(["fit", reports[0]]) == 3
    assert main(["report", *reports, "--out-dir", str(tmp_path)]) == 0
    lines = (tmp_path / "fidelity_vs_m.csv").read_text().splitlines()
    assert lines[0].startswith("m,F_e") and len(lines) == 3


def test_oracle_command(capsys):
    assert main(["oracle", "--m", "2", "--setting", "eigen", "--beta-res", "0.966"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["F"] == pytest.approx(0.89, abs=0.01)
    assert main(["oracle", "--m", "5"]) == 2


def test_calibrate_command(tmp_path, capsys):
    assert main(["calibrate", "--m", "2", "--trajectories", "1000000", "--seed", "3",
                 "--offset-deg", "25", "--out-dir", str(tmp_path)]) == 0
    cal = json.loads((tmp_path / "calibration.json").read_text())
    assert cal["phi0_deg"] == pytest.approx(25, abs=3)
    assert math.isclose(cal["phi0_rad"], math.radians(cal["phi0_deg"]))


def test_unwritable_output(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["simulate", "--m", "1", "--trajectories", "10", "--out-dir", str(blocker / "sub")]) == 2
