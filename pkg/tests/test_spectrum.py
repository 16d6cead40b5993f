import math

import numpy as np
import pytest

from fmpairs.errors import BracketError, DataFormatError, QuadratureError
from fmpairs.optics import (ANCHOR_WAVELENGTH, C_VACUUM, EtalonFilter,
                            FiberMode, default_vipa_params, fwhm_of_curve)
from fmpairs.spectrum import (DemuxResponse, LorentzianLine, MeasuredSpectrum,
                              SpectralComb, build_comb, detect_peaks,
                              fit_linewidth, scan_filter_spectrum,
                              simulate_demux_spectrum)

NU_ANCHOR = C_VACUOUS = C_VACUUM / ANCHOR_WAVELENGTH
COMB_CENTER = NU_ANCHOR + 30e9


@pytest.fixture(scope="module")
def params():
    return default_vipa_params()


@pytest.fixture(scope="module")
def fiber():
    return FiberMode()


@pytest.fixture(scope="module")
def five_line_setup(params, fiber):
    """Shared small comb + prebuilt response for the fit tests."""
    filt = EtalonFilter(center_frequency=COMB_CENTER, fwhm=16e9)
    template = build_comb(COMB_CENTER, 6.5e9, 5, 1e6)
    response = DemuxResponse(template.centers, filt, params, fiber, "tracked")
    return filt, response


class TestComb:
    def test_single_line(self):
        comb = build_comb(COMB_CENTER, 6.5e9, 1, 19.15e6)
        assert len(comb.lines) == 1
        assert comb.lines[0].center == COMB_CENTER

    def test_twenty_lines_span(self):
        comb = build_comb(COMB_CENTER, 6.5e9, 20, 19.15e6)
        centers = comb.centers
        assert len(centers) == 20
        assert centers[-1] - centers[0] == pytest.approx(123.5e9)
        assert centers.mean() == pytest.approx(COMB_CENTER)

    def test_midpoint_intensity_of_two_lines(self):
        comb = build_comb(COMB_CENTER, 6.5e9, 2, 19.15e6)
        midpoint = comb.intensity(COMB_CENTER)
        at_line = comb.intensity(comb.centers[0])
        expected = 2.0 / (1.0 + (3.25e9 / 19.15e6) ** 2)
        assert midpoint / at_line == pytest.approx(expected, rel=1e-4)

    def test_invalid_lines_rejected(self):
        with pytest.raises(ValueError):
            LorentzianLine(center=1e14, half_width=0.0)
        with pytest.raises(ValueError):
            LorentzianLine(center=1e14, half_width=1e6, weight=-1.0)
        bad = (LorentzianLine(1e14, 1e6), LorentzianLine(1e14 + 7.5e9, 1e6))
        with pytest.raises(ValueError, match="spacing"):
            SpectralComb(lines=bad, spacing=6.5e9)


class TestMeasuredSpectrum:
    def test_csv_round_trip(self, tmp_path):
        spec = MeasuredSpectrum(np.array([0.0, 1.0, 2.0]),
                                np.array([0.1, 1.0, 0.2]))
        path = tmp_path / "spec.csv"
        spec.to_csv(path)
        back = MeasuredSpectrum.from_csv(path)
        assert back.kind == spec.kind
        assert np.allclose(back.abscissa, spec.abscissa)
        assert np.allclose(back.intensity, spec.intensity)

    def test_malformed_csv_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("frequency_hz,intensity\n1.0\n")
        with pytest.raises(DataFormatError):
            MeasuredSpectrum.from_csv(path)
        path.write_text("")
        with pytest.raises(DataFormatError):
            MeasuredSpectrum.from_csv(path)

    def test_invariants(self):
        with pytest.raises(ValueError, match="increasing"):
            MeasuredSpectrum(np.array([0.0, 0.0, 1.0]), np.array([0, 1, 0.5]))
        with pytest.raises(ValueError, match="normalized"):
            MeasuredSpectrum(np.array([0.0, 1.0]), np.array([0.5, 2.0]))


class TestFilterScan:
    def test_single_line_closure_widths_add(self):
        # Lorentzian (x) Lorentzian: FWHMs add
        comb = build_comb(COMB_CENTER, 6.5e9, 1, 0.4e9)
        filt = EtalonFilter(center_frequency=COMB_CENTER, fwhm=6.1e9)
        grid = np.linspace(-20e9, 20e9, 801)
        spec = scan_filter_spectrum(comb, filt, grid)
        fwhm = fwhm_of_curve(spec.abscissa, spec.intensity)
        assert fwhm == pytest.approx(6.1e9 + 0.8e9, rel=0.02)

    def test_resolved_comb_has_full_contrast(self):
        comb = build_comb(COMB_CENTER, 6.5e9, 5, 50e6)
        filt = EtalonFilter(center_frequency=COMB_CENTER, fwhm=0.2e9)
        grid = np.linspace(-13e9, 13e9, 2001)
        spec = scan_filter_spectrum(comb, filt, grid)
        contrast = (spec.intensity.max() - spec.intensity.min()) \
            / spec.intensity.max()
        assert contrast > 0.95

    def test_unresolved_comb_is_periodic_low_contrast(self):
        # passband comparable to the spacing: shallow periodic modulation
        comb = build_comb(COMB_CENTER, 6.5e9, 9, 0.4e9)
        filt = EtalonFilter(center_frequency=COMB_CENTER, fwhm=6.1e9)
        grid = np.arange(-9.75e9, 9.75e9 + 1, 50e6)
        spec = scan_filter_spectrum(comb, filt, grid)
        contrast = (spec.intensity.max() - spec.intensity.min()) \
            / spec.intensity.max()
        assert contrast < 0.35
        shift = int(round(6.5e9 / 50e6))
        a, b = spec.intensity[:-shift], spec.intensity[shift:]
        assert np.max(np.abs(a - b)) < 0.05  # 6.5 GHz periodicity


class TestDemuxSpectrum:
    def test_degenerate_pipeline_is_envelope_spot(self, params, fiber):
        # one line, flat filter, no reflectivity: the spatial profile is the
        # Gaussian envelope convolved with the fiber mode (closed form)
        p0 = params.with_rr(0.0)
        comb = build_comb(NU_ANCHOR, 6.5e9, 1, 19.15e6)
        filt = EtalonFilter(center_frequency=NU_ANCHOR, fwhm=1e15)
        grid = np.linspace(-250e-6, 250e-6, 501)
        spec = simulate_demux_spectrum(comb, filt, p0, fiber, grid=grid,
                                       mode="fixed")
        beta2 = (p0.focus_lens_f1 / (p0.collection_lens_f2
                                     * p0.input_beam_radius_x)) ** 2
        a2 = fiber.mode_field_radius ** 2
        expected = np.exp(-2.0 * beta2 * grid**2 / (1.0 + a2 * beta2))
        assert np.allclose(spec.intensity, expected / expected.max(), atol=2e-3)

    def test_tracked_spectrum_peaks_at_line_centers(self, params, fiber):
        comb = build_comb(COMB_CENTER, 6.5e9, 5, 38.3e6)
        filt = EtalonFilter(center_frequency=COMB_CENTER, fwhm=16e9)
        spec = simulate_demux_spectrum(comb, filt, params, fiber,
                                       mode="tracked")
        peaks = detect_peaks(spec, min_height=0.3)
        assert len(peaks) == 5
        found = spec.abscissa[peaks]
        for nu in comb.centers:
            assert np.min(np.abs(found - nu)) < 100e6

    def test_weight_rescaling_is_invisible(self, params, fiber):
        filt = EtalonFilter(center_frequency=COMB_CENTER, fwhm=16e9)
        lines1 = tuple(LorentzianLine(c, 38.3e6, 1.0) for c in
                       build_comb(COMB_CENTER, 6.5e9, 3, 38.3e6).centers)
        lines2 = tuple(LorentzianLine(l.center, l.half_width, 2.0)
                       for l in lines1)
        grid = np.arange(COMB_CENTER - 9e9, COMB_CENTER + 9e9, 50e6)
        s1 = simulate_demux_spectrum(SpectralComb(lines1, 6.5e9), filt,
                                     params, fiber, grid=grid)
        s2 = simulate_demux_spectrum(SpectralComb(lines2, 6.5e9), filt,
                                     params, fiber, grid=grid)
        assert np.allclose(s1.intensity, s2.intensity, atol=1e-12)

    def test_fixed_mode_peak_count_matches_passband(self, params, fiber):
        # lines within one order and inside the passband produce the peaks
        comb = build_comb(NU_ANCHOR + 19.5e9, 6.5e9, 9, 38.3e6)
        filt = EtalonFilter(center_frequency=NU_ANCHOR + 19.5e9, fwhm=16e9)
        grid = np.linspace(-30e-6, 500e-6, 1061)
        spec = simulate_demux_spectrum(comb, filt, params, fiber, grid=grid,
                                       mode="fixed")
        peaks = detect_peaks(spec, min_height=0.3, min_separation=10)
        in_passband = sum(
            1 for c in comb.centers
            if 1.0 / (1.0 + (2 * (c - filt.center_frequency) / filt.fwhm) ** 2)
            >= 0.3)
        assert len(peaks) == in_passband

    def test_coarse_grid_rejected(self, params, fiber):
        comb = build_comb(COMB_CENTER, 6.5e9, 3, 38.3e6)
        filt = EtalonFilter(center_frequency=COMB_CENTER, fwhm=16e9)
        grid = np.arange(COMB_CENTER - 10e9, COMB_CENTER + 10e9, 2e9)
        with pytest.raises(QuadratureError, match="too coarse"):
            simulate_demux_spectrum(comb, filt, params, fiber, grid=grid)


class TestLinewidthFit:
    def test_round_trip_noiseless(self, params, fiber, five_line_setup):
        filt, response = five_line_setup
        comb = build_comb(COMB_CENTER, 6.5e9, 5, 38.3e6)
        grid = np.arange(COMB_CENTER - 16e9, COMB_CENTER + 16e9, 40e6)
        measured = simulate_demux_spectrum(comb, filt, params, fiber,
                                           grid=grid, response=response)
        result = fit_linewidth(measured, COMB_CENTER, 6.5e9, 5, filt, params,
                               fiber, response=response)
        assert abs(result.half_width - 38.3e6) / 38.3e6 < 0.05
        assert result.bracket[0] < result.half_width < result.bracket[1]

    def test_fit_invariant_under_measured_rescaling(self, params, fiber,
                                                    five_line_setup):
        filt, response = five_line_setup
        comb = build_comb(COMB_CENTER, 6.5e9, 5, 60e6)
        grid = np.arange(COMB_CENTER - 16e9, COMB_CENTER + 16e9, 40e6)
        measured = simulate_demux_spectrum(comb, filt, params, fiber,
                                           grid=grid, response=response)
        rescaled = MeasuredSpectrum.from_raw(measured.abscissa,
                                             measured.intensity * 0.25)
        r1 = fit_linewidth(measured, COMB_CENTER, 6.5e9, 5, filt, params,
                           fiber, response=response)
        r2 = fit_linewidth(rescaled, COMB_CENTER, 6.5e9, 5, filt, params,
                           fiber, response=response)
        assert r1.half_width == pytest.approx(r2.half_width, rel=1e-9)

    def test_unreachable_optimum_raises_bracket_error(self, params, fiber,
                                                      five_line_setup):
        filt, response = five_line_setup
        comb = build_comb(COMB_CENTER, 6.5e9, 5, 38.3e6)
        grid = np.arange(COMB_CENTER - 16e9, COMB_CENTER + 16e9, 40e6)
        measured = simulate_demux_spectrum(comb, filt, params, fiber,
                                           grid=grid, response=response)
        with pytest.raises(BracketError, match="scanned"):
            fit_linewidth(measured, COMB_CENTER, 6.5e9, 5, filt, params,
                          fiber, search_range=(1e9, 10e9), response=response)
