import numpy as np
import pytest

from fmpairs.calibration import (REFERENCE_CALIBRATION, CalibrationPoly,
                                 ChannelEntry, ChannelMap, build_channel_map,
                                 frequency_of_position, position_of_frequency,
                                 position_of_wavelength, wavelength_of_position)
from fmpairs.errors import CalibrationRangeError

C = 299792458.0

# same cubic trusted over a wider interval, for the off-range spot checks
WIDE = CalibrationPoly(coefficients=REFERENCE_CALIBRATION.coefficients,
                       valid_range=(-150.0, 1100.0))


class TestPolynomial:
    def test_origin_value_is_exact(self):
        assert wavelength_of_position(0.0, REFERENCE_CALIBRATION) == 1532.9127

    def test_horner_spot_values(self):
        # frozen from exact Horner evaluation of the reference coefficients
        assert wavelength_of_position(1000.0, WIDE) == pytest.approx(
            1532.078802, abs=1e-6)
        assert wavelength_of_position(-100.0, WIDE) == pytest.approx(
            1532.9823992440, abs=1e-9)

    def test_extrapolation_refused(self):
        with pytest.raises(CalibrationRangeError):
            wavelength_of_position(1000.0, REFERENCE_CALIBRATION)
        with pytest.raises(CalibrationRangeError):
            wavelength_of_position(-1.0, REFERENCE_CALIBRATION)

    def test_monotone_decreasing(self):
        lo, hi = REFERENCE_CALIBRATION.valid_range
        xs = np.linspace(lo, hi, 1000)
        lams = [wavelength_of_position(float(x), REFERENCE_CALIBRATION)
                for x in xs]
        assert np.all(np.diff(lams) < 0)

    def test_increasing_poly_rejected(self):
        with pytest.raises(ValueError, match="decreasing"):
            CalibrationPoly(coefficients=(1532.0, 7e-4, 0.0, 0.0),
                            valid_range=(0.0, 100.0))

    def test_reference_range_ends_at_span_edge(self):
        hi = REFERENCE_CALIBRATION.valid_range[1]
        assert wavelength_of_position(hi, REFERENCE_CALIBRATION) == \
            pytest.approx(1532.4374, abs=1e-6)


class TestInversion:
    def test_inverse_of_origin(self):
        x = position_of_wavelength(1532.9127, REFERENCE_CALIBRATION)
        assert abs(x) < 1e-6

    def test_span_edge_maps_to_range_edge(self):
        x = position_of_wavelength(1532.4374, REFERENCE_CALIBRATION)
        assert x == pytest.approx(REFERENCE_CALIBRATION.valid_range[1], abs=1e-3)

    def test_round_trip_hundred_points(self):
        rng = np.random.default_rng(7)
        lo, hi = REFERENCE_CALIBRATION.valid_range
        for x in rng.uniform(lo, hi, size=100):
            lam = wavelength_of_position(float(x), REFERENCE_CALIBRATION)
            back = position_of_wavelength(lam, REFERENCE_CALIBRATION)
            assert abs(back - x) < 1e-3

    def test_out_of_span_wavelength_rejected(self):
        with pytest.raises(CalibrationRangeError):
            position_of_wavelength(1533.5, REFERENCE_CALIBRATION)

    def test_frequency_round_trip(self):
        nu = frequency_of_position(200.0, REFERENCE_CALIBRATION)
        assert position_of_frequency(nu, REFERENCE_CALIBRATION) == \
            pytest.approx(200.0, abs=1e-3)


class TestChannelMap:
    def test_single_channel_at_center(self):
        nu0 = C / 1532.9127e-9
        cmap = build_channel_map(nu0, 6.5e9, 1, REFERENCE_CALIBRATION)
        assert len(cmap.channels) == 1
        assert cmap.channels[0].center_frequency == nu0
        assert abs(cmap.channels[0].fiber_position_um) < 1e-6

    def test_nine_channels_fill_the_mapped_range(self):
        nu0 = C / 1532.9127e-9
        cmap = build_channel_map(nu0, 6.5e9, 9, REFERENCE_CALIBRATION)
        pos = [ch.fiber_position_um for ch in cmap.channels]
        assert pos[0] == pytest.approx(0.0, abs=1e-6)
        assert pos[-1] < REFERENCE_CALIBRATION.valid_range[1]
        gaps = np.diff(pos)
        # dispersion is nonlinear: adjacent channel gaps are not constant
        assert gaps.max() - gaps.min() > 0.5  # um

    def test_channel_outside_range_rejected(self):
        nu0 = C / 1532.9127e-9
        with pytest.raises(CalibrationRangeError):
            build_channel_map(nu0, 6.5e9, 20, REFERENCE_CALIBRATION)

    def test_ordering_invariants_enforced(self):
        good = (ChannelEntry(0, 1.0e14, 0.0, 1),
                ChannelEntry(1, 1.0e14 + 6.5e9, 70.0, 1))
        ChannelMap(channels=good)
        bad_spacing = (ChannelEntry(0, 1.0e14, 0.0, 1),
                       ChannelEntry(1, 1.0e14 + 6.5e9, 70.0, 1),
                       ChannelEntry(2, 1.0e14 + 14e9, 140.0, 1))
        with pytest.raises(ValueError, match="spacing"):
            ChannelMap(channels=bad_spacing)
        bad_pos = (ChannelEntry(0, 1.0e14, 0.0, 1),
                   ChannelEntry(1, 1.0e14 + 6.5e9, -5.0, 1),
                   ChannelEntry(2, 1.0e14 + 13e9, 70.0, 1))
        with pytest.raises(ValueError, match="monotone"):
            ChannelMap(channels=bad_pos)

    def test_csv_round_trip(self, tmp_path):
        nu0 = C / 1532.9127e-9
        cmap = build_channel_map(nu0, 6.5e9, 5, REFERENCE_CALIBRATION)
        path = tmp_path / "map.csv"
        cmap.to_csv(path)
        back = ChannelMap.from_csv(path)
        assert len(back.channels) == 5
        for a, b in zip(cmap.channels, back.channels):
            assert a.index == b.index
            assert a.center_frequency == pytest.approx(b.center_frequency)
            assert a.fiber_position_um == pytest.approx(b.fiber_position_um,
                                                        abs=1e-5)
