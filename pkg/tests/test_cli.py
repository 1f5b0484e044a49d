import json

import pytest

from spatialdecay.cli import main


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    assert main(["synth", "--label", "111", "--target", "6,48", "--grid-step", "2", "--out-dir", str(out)]) == 0
    return out


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    cap = capsys.readouterr()
    return code, cap.out, cap.err


def test_synth_files(synth_dir):
    names = sorted(p.name for p in synth_dir.iterdir())
    assert names == ["field_P1.json", "field_P2.json", "grid_P1.json", "grid_P2.json", "measurement.json"]


def test_compute_json(capsys, synth_dir):
    code, out, _ = run(capsys, "compute", synth_dir / "measurement.json", "--format", "json")
    doc = json.loads(out)
    assert code == 0
    assert doc["paths"][1]["d2s"] == pytest.approx(6.0)
    assert doc["paths"][1]["lpas4m"] == pytest.approx(48.0)


def test_threshold_flag(capsys, synth_dir):
    _, out, _ = run(capsys, "compute", synth_dir / "measurement.json", "--format", "json", "--threshold", "48")
    assert json.loads(out)["paths"][1]["rc"] == pytest.approx(4.0)


def test_uncertainty_text_rounds_up(capsys, synth_dir):
    code, out, _ = run(capsys, "uncertainty", synth_dir / "measurement.json")
    assert code == 0
    assert "u_D_2S = 0.5 (exact 0.425" in out


def test_uncertainty_csv(capsys, synth_dir):
    _, out, _ = run(capsys, "uncertainty", synth_dir / "measurement.json", "--format", "csv")
    lines = out.splitlines()
    assert lines[0].startswith("path_id,snq,value,u,")
    assert len(lines) == 1 + 2 * 3


def test_mc_is_deterministic(capsys, synth_dir):
    args = ("mc", synth_dir / "measurement.json", "--seed", "42", "--runs", "2000", "--format", "json")
    _, a, _ = run(capsys, *args)
    _, b, _ = run(capsys, *args, "--workers", "3")
    assert a == b
    assert json.loads(a)["seed"] == 42


def test_mc_with_grid_field(capsys, synth_dir):
    code, out, _ = run(capsys, "mc", synth_dir / "measurement.json", "--runs", "2000", "--format", "csv",
                       "--field", synth_dir / "grid_P1.json", "--field", synth_dir / "grid_P2.json",
                       "--couple-positioning", "on")
    assert code == 0 and out.startswith("path_id,snq,mean,u,")


def test_area(capsys, synth_dir):
    code, out, _ = run(capsys, "area", synth_dir / "measurement.json", "--format", "json")
    doc = json.loads(out)
    assert code == 0 and not doc["snq"]["lpas4m"]["unique"]


def test_report(capsys, synth_dir, tmp_path):
    code, _, _ = run(capsys, "report", synth_dir / "measurement.json", "--mc", "--runs", "1000",
                     "--out-dir", tmp_path)
    assert code == 0
    assert sorted(p.name for p in tmp_path.iterdir()) == ["decay_lines.csv", "histograms.csv",
                                                          "intervals.csv", "report.json"]
    assert "area" in json.loads((tmp_path / "report.json").read_text())


def test_config_file(capsys, synth_dir, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"level_uncertainty_db": 0.0, "distance": {"include_positioning": False,
                                                                         "u_tape_m": 0.0}}))
    _, out, _ = run(capsys, "uncertainty", synth_dir / "measurement.json", "--config", cfg, "--format", "json")
    assert json.loads(out)["paths"][0]["budget"]["d2s"]["u"] == 0.0


def test_parse_error_exit_code(capsys, tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("path_id,position_id,distance_m,L125,L250,L500,L1000,L2000,L4000\nP,1,2,1,2,3,4,5,6\n")
    code, out, err = run(capsys, "compute", bad)
    assert code == 2 and out == ""
    assert err.startswith("spatialdecay: error[parse]:") and "expected 7 octave bands" in err


def test_validation_error_exit_code(capsys, tmp_path):
    bad = tmp_path / "neg.csv"
    rows = "".join(f"P,{i},{r},50,50,50,{60 - i},50,50,50\n" for i, r in enumerate((0, 4, 8, 16)))
    bad.write_text("path_id,position_id,distance_m,L125,L250,L500,L1000,L2000,L4000,L8000\n" + rows)
    code, _, err = run(capsys, "compute", bad)
    assert code == 1 and "error[validation]" in err and "non-positive distance" in err


def test_missing_file(capsys):
    code, _, err = run(capsys, "compute", "/nonexistent/file.json")
    assert code == 2 and "error[parse]" in err


def test_synth_needs_target(capsys, tmp_path):
    code, _, err = run(capsys, "synth", "--out-dir", tmp_path)
    assert code == 1 and "--label or --target" in err


@pytest.fixture
def doubling_csv(tmp_path):
    f = tmp_path / "doubling.csv"
    rows = "".join(f"P1,{i + 1},{r},,,,{L},,,\n" for i, (r, L) in enumerate(zip((2, 4, 8, 16), (57, 52, 47, 42))))
    f.write_text("path_id,position_id,distance_m,L125,L250,L500,L1000,L2000,L4000,L8000\n" + rows)
    return f


def test_compute_doubling_example(capsys, doubling_csv):
    _, out, _ = run(capsys, "compute", doubling_csv)
    assert out == "P1: D_2S = 5.00 dB(A), L_pAS4m = 52.00 dB(A), r_c = 10.56 m\n"


def test_uncertainty_doubling_example(capsys, doubling_csv, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text('{"level_uncertainty_db": 0.414, "distance": {"u_tape_m": 0, "include_positioning": false}}')
    _, out, _ = run(capsys, "uncertainty", doubling_csv, "--config", cfg)
    assert "u_D_2S = 0.2 (exact 0.185" in out
    assert "u_L_pAS4m = 0.3 (exact 0.227" in out
    assert "u_r_c = 0.4 (exact 0.389" in out


def test_report_numbers_round_trip(capsys, doubling_csv, tmp_path):
    import csv

    from spatialdecay import analytic_budget, level_uncertainties
    from spatialdecay.io import parse_measurement_file

    out = tmp_path / "rep"
    run(capsys, "report", doubling_csv, "--out-dir", out)
    path = parse_measurement_file(doubling_csv.read_text()).paths[0]
    b = analytic_budget(path, level_uncertainties(path))
    doc = json.loads((out / "report.json").read_text())
    assert doc["paths"][0]["analytic"]["rc"]["u"] == b.u_rc
    rows = list(csv.DictReader((out / "intervals.csv").open()))
    assert float(rows[2]["u"]) == b.u_rc and float(rows[2]["value"]) == b.snq.rc_m
