import json

import pytest

from h2grid.cli import EXIT_AUDIT, EXIT_INVALID, EXIT_OK, build_manifest, main
from h2grid.scenario import builtin


@pytest.fixture(scope="module")
def case1_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("case1")
    assert main(["run", "case1", "--out", str(out)]) == EXIT_OK
    return out


def test_run_writes_artifacts(case1_dir):
    names = sorted(p.name for p in case1_dir.iterdir())
    assert names == sorted(["scenario.yaml", "trace.csv", "manifest.json", "wind_speed.svg", "powers.svg", "voltage_frequency.svg"])
    man = json.loads((case1_dir / "manifest.json").read_text())
    assert man["scenario"] == "case1"
    assert set(man["outputs"]) == {"scenario", "trace", "wind_speed", "powers", "voltage_frequency"}


def test_verify_clean_trace(case1_dir, capsys):
    assert main(["verify", str(case1_dir / "trace.csv")]) == EXIT_OK
    assert "ramp: SKIP" in capsys.readouterr().out


def test_verify_tampered_trace(case1_dir, tmp_path):
    lines = (case1_dir / "trace.csv").read_text().splitlines()
    cells = lines[500].split(",")
    cells[6] = "1.5"  # U_ac far outside the band
    lines[500] = ",".join(cells)
    (tmp_path / "trace.csv").write_text("\n".join(lines) + "\n")
    (tmp_path / "scenario.yaml").write_text((case1_dir / "scenario.yaml").read_text())
    assert main(["verify", str(tmp_path / "trace.csv")]) == EXIT_AUDIT


def test_verify_without_scenario(tmp_path, case1_dir):
    (tmp_path / "trace.csv").write_bytes((case1_dir / "trace.csv").read_bytes())
    assert main(["verify", str(tmp_path / "trace.csv")]) == EXIT_INVALID


def test_schedule(capsys):
    assert main(["schedule", "--mppt", "0.82", "--prev", "0.6", "--dt", "0.001", "--rated", "0.6"]) == EXIT_OK
    assert capsys.readouterr().out.strip() == "0.6 Rated"
    assert main(["schedule", "--mppt", "0.8", "--prev", "0.4", "--dt", "1"]) == EXIT_OK
    assert capsys.readouterr().out.strip() == "0.45 RampCap"
    assert main(["schedule", "--mppt", "0.05", "--prev", "0.4", "--dt", "1"]) == EXIT_OK
    assert capsys.readouterr().out.strip() == "0 Disconnected"


def test_schedule_bad_input():
    assert main(["schedule", "--mppt", "0.5", "--prev", "0.4", "--dt", "0"]) == EXIT_INVALID


def test_equilibrium(capsys):
    assert main(["equilibrium", "case1", "--wind", "9"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "U_ac=1 p.u." in out and "stable" in out


def test_validate(tmp_path, capsys):
    good = tmp_path / "good.yaml"
    good.write_text("name: demo\nduration: 1\n")
    assert main(["validate", str(good)]) == EXIT_OK
    bad = tmp_path / "bad.yaml"
    bad.write_text("duration: -1\ndt: abc\n")
    assert main(["validate", str(bad)]) == EXIT_INVALID
    err = capsys.readouterr().err
    assert "duration" in err and "dt" in err


def test_unknown_subcommand():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == EXIT_INVALID


def test_seeded_runs_are_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert main(["run", "case5", "--seed", "7", "--out", str(d)]) == EXIT_OK
    assert (a / "trace.csv").read_bytes() == (b / "trace.csv").read_bytes()
    assert (a / "manifest.json").read_bytes() == (b / "manifest.json").read_bytes()
    assert json.loads((a / "manifest.json").read_text())["seed"] == 7


def test_manifest_digest_independent_of_key_order(tmp_path):
    sc = builtin("case4")
    f = tmp_path / "x.txt"
    f.write_text("x")
    m1 = build_manifest(sc, {"a": str(f), "b": str(f)})
    m2 = build_manifest(sc, {"b": str(f), "a": str(f)})
    assert json.dumps(m1, sort_keys=True) == json.dumps(m2, sort_keys=True)
