import math

import numpy as np
import pytest

from fmpairs import optics
from fmpairs.calibration import (REFERENCE_CALIBRATION, position_of_frequency)
from fmpairs.errors import NumericError, QuadratureError
from fmpairs.optics import (ANCHOR_WAVELENGTH, C_VACUUM, CENTER_WAVELENGTH,
                            EfficiencyEnvelope, EtalonFilter, FiberMode,
                            VipaParams, brightest_order_position, crosstalk_db,
                            default_vipa_params, envelope_intensity,
                            etalon_transmission, fiber_coupled_field,
                            fwhm_of_curve, response_curve, round_trip_phase,
                            system_efficiency, usable_channel_count,
                            vipa_field)


@pytest.fixture(scope="module")
def params():
    return default_vipa_params()


@pytest.fixture(scope="module")
def aligned_fiber(params):
    nu0 = C_VACUUM / CENTER_WAVELENGTH
    x_res = brightest_order_position(nu0, params)
    xs = x_res + np.linspace(-4e-6, 4e-6, 81)
    best = max(xs, key=lambda x: abs(fiber_coupled_field(
        CENTER_WAVELENGTH, FiberMode(center_position=float(x)), params)) ** 2)
    return FiberMode(center_position=float(best))


class TestVipaParams:
    def test_derived_observables(self, params):
        assert params.free_spectral_range == pytest.approx(60.8e9, rel=2e-3)
        assert params.finesse == pytest.approx(80.0, rel=1e-9)
        assert params.rr == pytest.approx(0.962, abs=1e-3)
        # n*t from the FSR relation
        nt = params.refractive_index * params.thickness
        assert nt == pytest.approx(2.466e-3, rel=1e-3)

    def test_singular_reflectivity_rejected(self):
        with pytest.raises(ValueError, match="singular"):
            VipaParams(refractive_index=2.0, thickness=1.2e-3,
                       front_reflectivity=1.0, back_reflectivity=1.0,
                       incidence_angle=0.04, input_beam_radius_x=1e-3,
                       focus_lens_f1=0.15, collection_lens_f2=0.045)

    def test_bad_geometry_rejected(self):
        with pytest.raises(ValueError):
            VipaParams(2.0, -1e-3, 0.9, 0.9, 0.04, 1e-3, 0.15, 0.045)
        with pytest.raises(ValueError):
            VipaParams(0.5, 1e-3, 0.9, 0.9, 0.04, 1e-3, 0.15, 0.045)

    def test_anchor_resonates_at_origin(self, params):
        phase = round_trip_phase(0.0, ANCHOR_WAVELENGTH, params)
        assert abs(phase / (2 * math.pi) - round(phase / (2 * math.pi))) < 1e-9


class TestVipaField:
    def test_zero_reflectivity_leaves_pure_envelope(self, params):
        p0 = params.with_rr(0.0)
        xs = np.linspace(-4e-4, 4e-4, 7)
        field = vipa_field(xs, CENTER_WAVELENGTH, p0)
        expected = np.exp(-(p0.focus_lens_f1**2) * xs**2
                          / (p0.collection_lens_f2**2 * p0.input_beam_radius_x**2))
        assert np.allclose(field, expected, rtol=1e-12)

    def test_at_origin_envelope_is_unity(self, params):
        field = vipa_field(0.0, CENTER_WAVELENGTH, params)
        resonant = 1.0 / (1.0 - params.rr
                          * np.exp(1j * round_trip_phase(0.0, CENTER_WAVELENGTH,
                                                         params)))
        assert field == pytest.approx(resonant, rel=1e-12)

    def test_nonfinite_input_rejected(self, params):
        with pytest.raises(ValueError):
            vipa_field(np.array([0.0, np.nan]), CENTER_WAVELENGTH, params)
        with pytest.raises(ValueError):
            vipa_field(0.0, -1e-6, params)

    def test_intensity_maxima_spaced_by_fsr(self, params, aligned_fiber):
        detunings = np.linspace(-70e9, 70e9, 28001)
        resp = response_curve(detunings, CENTER_WAVELENGTH, aligned_fiber,
                              params, n_points=2001)
        peaks = [i for i in range(1, resp.size - 1)
                 if resp[i] > resp[i - 1] and resp[i] > resp[i + 1]
                 and resp[i] > 0.1 * resp.max()]
        gaps = np.diff(detunings[peaks])
        assert len(gaps) == 2
        assert np.allclose(gaps, params.free_spectral_range, rtol=5e-3)

    def test_phase_periodicity(self, params):
        x = 1.1e-4
        phase = round_trip_phase(x, CENTER_WAVELENGTH, params)
        # wavelength that advances the same polynomial by exactly 2 pi
        lam2 = 2 * math.pi * params.thickness \
            * (phase / (2 * math.pi * params.thickness / CENTER_WAVELENGTH)) \
            / (phase + 2 * math.pi * np.sign(phase))
        f1 = vipa_field(x, CENTER_WAVELENGTH, params)
        f2 = vipa_field(x, lam2, params)
        env = math.exp(-(params.focus_lens_f1**2) * x**2
                       / (params.collection_lens_f2**2
                          * params.input_beam_radius_x**2))
        assert f1 / env == pytest.approx(f2 / env, rel=1e-9)

    def test_internal_cos_convention_switch(self):
        a = VipaParams.from_observables(internal_cos_convention="theta_times_n")
        b = VipaParams.from_observables(internal_cos_convention="theta_over_n")
        fa = vipa_field(1e-4, CENTER_WAVELENGTH, a)
        fb = vipa_field(1e-4, CENTER_WAVELENGTH, b)
        assert fa != fb  # distinct conventions evaluate differently
        assert abs(abs(fa) - abs(fb)) / abs(fa) < 0.5


class TestFiberCoupling:
    def test_constant_field_gives_gaussian_mass(self, params):
        const = lambda x, lam, p: np.ones_like(np.asarray(x, dtype=float))
        a = FiberMode(center_position=0.0)
        b = FiberMode(center_position=2.3e-4)
        va = fiber_coupled_field(CENTER_WAVELENGTH, a, params, field=const)
        vb = fiber_coupled_field(CENTER_WAVELENGTH, b, params, field=const)
        expected = math.sqrt(math.pi) * a.mode_field_radius
        assert va.real == pytest.approx(expected, rel=1e-6)
        assert va == pytest.approx(vb, rel=1e-9)  # independent of x0

    def test_intensity_scales_quadratically(self, params, aligned_fiber):
        base = abs(fiber_coupled_field(CENTER_WAVELENGTH, aligned_fiber,
                                       params)) ** 2
        scaled_field = lambda x, lam, p: 3.0 * vipa_field(x, lam, p)
        scaled = abs(fiber_coupled_field(CENTER_WAVELENGTH, aligned_fiber,
                                         params, field=scaled_field)) ** 2
        assert scaled == pytest.approx(9.0 * base, rel=1e-9)

    def test_quadrature_error_on_coarse_grid(self, params, aligned_fiber):
        # stretching the window at fixed point count under-resolves the
        # resonance; the step-doubling check must report it
        with pytest.raises(QuadratureError):
            fiber_coupled_field(CENTER_WAVELENGTH, aligned_fiber, params,
                                n_points=401, half_span=4e-4)

    def test_optimum_matches_calibrated_positions(self, params):
        # channels on the calibrated grid: model optimum within one fiber
        # radius of the calibrated position, across the whole mapped range
        nu_anchor = C_VACUUM / ANCHOR_WAVELENGTH
        radius = FiberMode().mode_field_radius
        for ch in range(0, 10):
            nu = nu_anchor + ch * 6.5e9
            x_cal = position_of_frequency(nu, REFERENCE_CALIBRATION) * 1e-6
            lam = C_VACUUM / nu
            xs = x_cal + np.linspace(-3 * radius, 3 * radius, 61)
            vals = [abs(fiber_coupled_field(lam, FiberMode(center_position=x),
                                            params, n_points=2001)) ** 2
                    for x in xs]
            x_best = xs[int(np.argmax(vals))]
            assert abs(x_best - x_cal) < radius, f"channel {ch}"

    def test_zero_rr_response_is_flat(self, params, aligned_fiber):
        p0 = params.with_rr(0.0)
        detunings = np.linspace(-5e9, 5e9, 11)
        resp = response_curve(detunings, CENTER_WAVELENGTH, aligned_fiber, p0)
        assert resp.max() / resp.min() < 1.0 + 1e-6


class TestResponseShape:
    def test_fwhm_near_measured_resolution(self, params, aligned_fiber):
        detunings = np.linspace(-3e9, 3e9, 1201)
        resp = response_curve(detunings, CENTER_WAVELENGTH, aligned_fiber,
                              params, n_points=2001)
        fwhm = fwhm_of_curve(detunings, resp)
        assert abs(fwhm - 1.53e9) / 1.53e9 < 0.15

    def test_crosstalk_is_zero_on_peak_and_negative_off(self, params,
                                                        aligned_fiber):
        assert crosstalk_db(0.0, aligned_fiber, params) == pytest.approx(0.0)
        for dnu in (1e9, -2e9, 5e9, -5e9, 6.5e9, 20e9):
            assert crosstalk_db(dnu, aligned_fiber, params) < 0.0

    def test_crosstalk_rejects_out_of_fsr(self, params, aligned_fiber):
        with pytest.raises(ValueError):
            crosstalk_db(40e9, aligned_fiber, params)

    def test_crosstalk_error_when_misaligned(self, params):
        # envelope strangles the field far out: on-peak intensity underflows
        fiber = FiberMode(center_position=5e-3)
        with pytest.raises(NumericError):
            crosstalk_db(1e9, fiber, params)


class TestEtalonAndEnvelope:
    def test_peak_and_half_width_values(self):
        f = EtalonFilter(center_frequency=0.0, fwhm=6.1e9,
                         peak_transmission=0.8)
        assert etalon_transmission(0.0, f) == pytest.approx(0.8)
        assert etalon_transmission(f.fwhm / 2, f) == pytest.approx(0.4)

    def test_neighbor_leakage_value(self):
        f = EtalonFilter(center_frequency=0.0, fwhm=6.1e9)
        expected = 1.0 / (1.0 + (13.0 / 6.1) ** 2)
        assert etalon_transmission(6.5e9, f) == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(0.1804, abs=2e-4)

    def test_even_and_monotone(self):
        f = EtalonFilter(center_frequency=0.0, fwhm=6.1e9)
        d = np.linspace(0, 30e9, 200)
        t = etalon_transmission(d, f)
        assert np.allclose(etalon_transmission(-d, f), t)
        assert np.all(np.diff(t) < 0)

    def test_efficiency_envelope_values(self):
        env = optics.default_efficiency_envelope()
        assert system_efficiency(env.center_offset, env) == pytest.approx(0.255)
        lo = system_efficiency(env.center_offset - 22.5e9, env)
        hi = system_efficiency(env.center_offset + 22.5e9, env)
        assert lo == pytest.approx(0.17, abs=0.005)
        assert hi == pytest.approx(0.17, abs=0.005)

    def test_flat_envelope_limit(self):
        env = EfficiencyEnvelope(peak_efficiency=1.0, center_offset=0.0,
                                 gaussian_sigma=1e15)
        d = np.linspace(-50e9, 50e9, 11)
        assert np.allclose(system_efficiency(d, env), 1.0, atol=1e-9)


class TestChannelCount:
    def test_paper_count(self, params):
        assert usable_channel_count(6.5e9, params) == 9

    def test_trivial_and_floor(self, params):
        assert usable_channel_count(params.free_spectral_range, params) == 1
        assert usable_channel_count(10e9, params) == 6

    def test_rejects_nonpositive(self, params):
        with pytest.raises(ValueError):
            usable_channel_count(0.0, params)


def test_envelope_intensity_profile(params):
    xs = np.array([0.0, 2e-4])
    env = envelope_intensity(xs, params)
    assert env[0] == pytest.approx(1.0)
    assert 0 < env[1] < 1

def test_fwhm_of_curve_requires_crossings():
    with pytest.raises(NumericError):
        fwhm_of_curve(np.linspace(0, 1, 10), np.ones(10))
