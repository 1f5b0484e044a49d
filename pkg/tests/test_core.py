import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from spatialdecay import (
    DegenerateGeometry,
    MeasurementPath,
    MeasurementPosition,
    OctaveSpectrum,
    ValidationError,
    ZeroDecay,
    a_weighted_level,
    compute_snq,
    validate_path,
)
from spatialdecay.core import A_WEIGHTING_DB, comfort_distance, regression_stats, stats_from_distances

from .strategies import distances, log_linear_levels, paths

levels_st = st.lists(st.floats(0.0, 100.0), min_size=7, max_size=7)


class TestAWeighting:
    def test_single_1k_band(self):
        assert a_weighted_level(OctaveSpectrum.from_a_weighted(60.0)) == pytest.approx(60.0, abs=1e-12)

    def test_flat_spectrum(self):
        # direct energetic summation, written out independently
        total = sum(10 ** ((60.0 + a) / 10) for a in (-16.1, -8.6, -3.2, 0.0, 1.2, 1.0, -1.1))
        expected = 10 * math.log10(total)
        assert expected == pytest.approx(66.99, abs=0.005)
        assert a_weighted_level(OctaveSpectrum((60.0,) * 7)) == pytest.approx(expected, abs=1e-12)

    def test_equal_contributions(self):
        spec = OctaveSpectrum(tuple(60.0 - A_WEIGHTING_DB))
        assert a_weighted_level(spec) == pytest.approx(60 + 10 * math.log10(7), abs=1e-12)

    def test_absent_bands_are_excluded(self):
        full = OctaveSpectrum((None, None, 50.0, 60.0, None, None, None))
        expected = 10 * math.log10(10 ** ((50 - 3.2) / 10) + 10 ** 6)
        assert a_weighted_level(full) == pytest.approx(expected, abs=1e-12)

    @given(levels_st)
    def test_energetic_bounds(self, levels):
        w = np.array(levels) + A_WEIGHTING_DB
        la = a_weighted_level(OctaveSpectrum(tuple(levels)))
        assert w.max() - 1e-9 <= la <= w.max() + 10 * math.log10(7) + 1e-9


class TestSpectrumValidation:
    def test_wrong_band_count(self):
        with pytest.raises(ValueError, match="7 octave bands"):
            OctaveSpectrum((60.0,) * 6)

    def test_non_finite(self):
        with pytest.raises(ValueError):
            OctaveSpectrum((60.0,) * 6 + (float("nan"),))

    def test_all_absent(self):
        with pytest.raises(ValueError):
            OctaveSpectrum((None,) * 7)


class TestComputeSnq:
    def test_doubling_example(self, doubling_path):
        snq = compute_snq(doubling_path)
        assert snq.d2s_dBA == pytest.approx(5.0, abs=1e-12)
        assert snq.lpas4m_dBA == pytest.approx(52.0, abs=1e-12)
        assert snq.rc_m == pytest.approx(4 * 2 ** (7 / 5), rel=1e-12)
        assert snq.rc_m == pytest.approx(10.556, abs=5e-4)
        assert np.allclose(snq.residuals_dBA, 0.0, atol=1e-12)

    def test_level_shift(self, doubling_path):
        shifted = MeasurementPath.from_levels(doubling_path.distances, doubling_path.levels_dBA + 3)
        a, b = compute_snq(doubling_path), compute_snq(shifted)
        assert b.d2s_dBA == pytest.approx(a.d2s_dBA, abs=1e-12)
        assert b.lpas4m_dBA - a.lpas4m_dBA == pytest.approx(3.0, abs=1e-12)

    def test_threshold_at_4m(self):
        r = [2.0, 4.0, 8.0]
        snq = compute_snq(MeasurementPath.from_levels(r, log_linear_levels(r, 6.0, 45.0)))
        assert snq.rc_m == pytest.approx(4.0, rel=1e-14)

    def test_threshold_is_a_parameter(self, doubling_path):
        snq = compute_snq(doubling_path, threshold_dBA=52.0)
        assert snq.rc_m == pytest.approx(4.0, rel=1e-12)
        assert snq.threshold_dBA == 52.0

    def test_zero_decay(self):
        with pytest.raises(ZeroDecay):
            compute_snq(MeasurementPath.from_levels([2, 4, 8], [50, 50, 50]))

    def test_equal_distances(self):
        with pytest.raises(DegenerateGeometry):
            compute_snq(MeasurementPath.from_levels([4, 4, 4, 4], [50, 51, 52, 53]))

    def test_too_few_positions(self):
        with pytest.raises(ValidationError, match="insufficient positions"):
            compute_snq(MeasurementPath.from_levels([2, 4], [50, 45]))

    @given(distances(), st.floats(0.5, 12.0), st.floats(30.0, 70.0))
    def test_exact_recovery(self, r, d2s, l4):
        snq = compute_snq(MeasurementPath.from_levels(r, log_linear_levels(r, d2s, l4)))
        assert snq.d2s_dBA == pytest.approx(d2s, rel=1e-9)
        assert snq.lpas4m_dBA == pytest.approx(l4, rel=1e-9)

    @given(paths())
    def test_rc_round_trip(self, data):
        r, levels = data
        snq = compute_snq(MeasurementPath.from_levels(r, levels))
        again = float(comfort_distance(snq.d2s_dBA, snq.lpas4m_dBA))
        assert again == pytest.approx(snq.rc_m, rel=1e-12)

    @given(paths(), st.floats(0.25, 8.0))
    def test_distance_scaling(self, data, factor):
        r, levels = data
        a = compute_snq(MeasurementPath.from_levels(r, levels))
        b = compute_snq(MeasurementPath.from_levels(r * factor, levels))
        assert b.d2s_dBA == pytest.approx(a.d2s_dBA, rel=1e-9, abs=1e-9)
        assert b.lpas4m_dBA == pytest.approx(a.lpas4m_dBA + a.d2s_dBA * math.log2(factor), abs=1e-8)

    def test_octave_spectra_path(self):
        r = [2.0, 4.0, 8.0, 16.0]
        spectra = np.array([np.full(7, 70.0) - 6 * k for k in range(4)])
        snq = compute_snq(MeasurementPath.from_spectra(r, spectra))
        assert snq.d2s_dBA == pytest.approx(6.0, abs=1e-12)


class TestRegressionStats:
    def test_doubling_distances(self):
        s = stats_from_distances([2, 4, 8, 16])
        assert np.allclose(s.x, [1, 2, 3, 4])
        assert s.mean_x == 2.5 and s.var_x == 1.25

    def test_mean_log2_r_over_4(self):
        assert stats_from_distances([4, 4, 4, 8]).mean_log2_r_over_4 == pytest.approx(0.25)

    def test_mean_inv_r2(self):
        assert stats_from_distances([2, 4]).mean_inv_r2 == pytest.approx(0.15625)

    def test_from_path(self, doubling_path):
        assert regression_stats(doubling_path).var_x == 1.25

    def test_equal_distances(self):
        with pytest.raises(DegenerateGeometry):
            stats_from_distances([3, 3, 3])


class TestValidatePath:
    def test_clean(self):
        r = 2.0 * 2 ** (0.25 * np.arange(7))
        assert validate_path(MeasurementPath.from_levels(r, 60 - 6 * np.log2(r))) == []

    def test_two_positions(self):
        diags = validate_path(MeasurementPath.from_levels([2, 4], [50, 45]))
        assert [d.severity for d in diags] == ["error"]
        assert "insufficient positions" in diags[0].message

    def test_all_at_4m(self):
        diags = validate_path(MeasurementPath.from_levels([4, 4, 4, 4], [50, 51, 52, 53]))
        assert any(d.code == "zero-abscissa-variance" and "zero abscissa variance" in d.message
                   for d in diags)

    def test_non_positive_distance(self):
        diags = validate_path(MeasurementPath.from_levels([0, 4, 8], [50, 45, 40]))
        assert any(d.code == "non-positive-distance" for d in diags)

    def test_warnings_do_not_block(self):
        path = MeasurementPath.from_levels([8, 2, 4], [40, 50, 45])
        codes = {d.code for d in validate_path(path)}
        assert codes == {"few-positions", "non-monotone-distances"}
        assert compute_snq(path).d2s_dBA == pytest.approx(5.0)

    def test_duplicate_ids(self):
        spec = OctaveSpectrum.from_a_weighted(50)
        path = MeasurementPath("p", [MeasurementPosition(r, spec, "a") for r in (2, 4, 8, 16)])
        assert "duplicate-position-id" in {d.code for d in validate_path(path)}
