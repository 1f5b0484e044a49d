import json

import numpy as np
import pytest

from spatialdecay import (
    MeasurementArea,
    OfficeConfigSpec,
    ParseError,
    ValidationError,
    compute_snq,
    grid_from_loglinear,
    near_source_gradients,
    synth_office,
)
from spatialdecay.io import (
    RunConfig,
    dump_field,
    dump_measurement_csv,
    dump_measurement_json,
    load_field,
    load_run_config,
    parse_measurement_file,
    rows_to_csv,
)

HEADER = "path_id,position_id,distance_m,L125,L250,L500,L1000,L2000,L4000,L8000\n"


@pytest.fixture(scope="module")
def area():
    p1, _ = synth_office(OfficeConfigSpec(label="111", ripple_db=0.5), id="P1")
    p2, _ = synth_office(OfficeConfigSpec(label="422"), id="P2")
    return MeasurementArea("office", [p1, p2])


class TestMeasurementFiles:
    @pytest.mark.parametrize("dump", [dump_measurement_json, dump_measurement_csv])
    def test_round_trip(self, area, dump):
        back = parse_measurement_file(dump(area))
        assert back.id == "office"
        for a, b in zip(area.paths, back.paths):
            assert a.id == b.id
            assert np.array_equal(a.spectra, b.spectra)
            assert compute_snq(a) == compute_snq(b)

    def test_absent_band_csv(self):
        text = HEADER + "P,1,2,,60,60,60,60,60,\nP,2,4,,54,54,54,54,54,\nP,3,8,,48,48,48,48,48,\n"
        area = parse_measurement_file(text)
        assert area.paths[0].positions[0].spectrum.levels[0] is None
        assert compute_snq(area.paths[0]).d2s_dBA == pytest.approx(6.0)

    def test_six_bands(self):
        text = "path_id,position_id,distance_m,L125,L250,L500,L1000,L2000,L4000\nP,1,2,1,2,3,4,5,6\n"
        with pytest.raises(ParseError, match="expected 7 octave bands"):
            parse_measurement_file(text)

    def test_bad_number_has_location(self):
        with pytest.raises(ParseError, match="line 3"):
            parse_measurement_file(HEADER + "P,1,2,1,1,1,1,1,1,1\nP,2,x,1,1,1,1,1,1,1\n")

    def test_non_positive_distance(self):
        text = HEADER + "".join(f"P,{i},{r},50,50,50,50,50,50,50\n" for i, r in enumerate((0, 4, 8)))
        with pytest.raises(ValidationError, match="non-positive distance"):
            parse_measurement_file(text)

    def test_json_errors(self):
        with pytest.raises(ParseError):
            parse_measurement_file('{"paths": [')
        with pytest.raises(ParseError, match="format_version"):
            parse_measurement_file('{"format_version": 2, "paths": []}')
        bad = {"paths": [{"id": "P", "positions": [{"distance_m": 2, "levels_db": [50] * 6}]}]}
        with pytest.raises(ParseError, match="expected 7 octave bands"):
            parse_measurement_file(json.dumps(bad))

    def test_duplicate_path_ids(self, area):
        doubled = MeasurementArea("x", [area.paths[0], area.paths[0]])
        with pytest.raises(ValidationError):
            parse_measurement_file(dump_measurement_json(doubled))

    def test_warnings_are_logged(self, caplog):
        text = HEADER + "".join(f"P,{i},{r},50,50,50,{L},50,50,50\n" for i, (r, L) in enumerate(((2, 60), (4, 54), (8, 48))))
        with caplog.at_level("WARNING"):
            parse_measurement_file(text)
        assert "only 3 positions" in caplog.text


class TestFieldFiles:
    def test_loglinear(self):
        _, fld = synth_office(OfficeConfigSpec(d2s_dBA=5.0, lpas4m_dBA=47.0, ripple_db=0.3))
        back, pid = load_field(dump_field(fld, "P9"))
        assert pid == "P9"
        assert np.array_equal(back.nominal_spectra(), fld.nominal_spectra())

    def test_grid(self):
        _, fld = synth_office(OfficeConfigSpec(d2s_dBA=5.0, lpas4m_dBA=47.0))
        grid = grid_from_loglinear(fld, near_source_gradients(3.0))
        back, _ = load_field(dump_field(grid))
        assert np.array_equal(back.levels_db, grid.levels_db)
        src, rcv = np.array([0.03, -0.07]), np.full((7, 2), 0.04)
        assert np.array_equal(back.levels_at(src, rcv), grid.levels_at(src, rcv))

    def test_unknown_kind(self):
        with pytest.raises(ParseError):
            load_field('{"kind": "raytraced"}')


class TestRunConfig:
    def test_defaults(self):
        assert load_run_config("{}") == RunConfig()

    def test_overrides(self):
        cfg = load_run_config(json.dumps({
            "octave_uncertainty_db": [1.0] * 7,
            "distance": {"u_tape_m": 0.02, "include_positioning": False},
            "mc": {"seed": 5, "batch_size": 2000, "source_offset": "per_position"},
            "coverage_k": 1.96, "threshold_dBA": 42,
        }))
        assert cfg.dist_model.u_r_total_m == 0.02
        assert cfg.mc.seed == 5 and cfg.mc.batch_size == 2000
        assert cfg.error_model().source_offset == "per_position"
        assert cfg.coverage_k == 1.96 and cfg.threshold_dBA == 42

    def test_unknown_key(self):
        with pytest.raises(ParseError, match="unknown keys"):
            load_run_config('{"mc": {"runs": 4}}')

    @pytest.mark.parametrize("doc", [{"mc": {"batch_size": 10}}, {"coverage_k": 0},
                                     {"octave_uncertainty_db": [1, 2]}, {"distance": {"u_tape_m": -1}},
                                     {"mc": {"source_offset": "x"}}])
    def test_invalid_values(self, doc):
        with pytest.raises(ValidationError):
            load_run_config(json.dumps(doc))


def test_rows_to_csv_uses_full_precision():
    text = rows_to_csv([{"a": 0.1 + 0.2, "b": "x"}])
    assert text == "a,b\n0.30000000000000004,x\n"


def test_csv_and_json_ingest_identically(area):
    assert parse_measurement_file(dump_measurement_csv(area)) == parse_measurement_file(dump_measurement_json(area))
