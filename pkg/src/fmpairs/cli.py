"""Command-line front end.

Subcommands: vipa-response, fit-spectrum, simulate, analyze, grid,
plot-script.  Every run is deterministic given its configuration and seed;
re-running writes byte-identical CSV artifacts (manifests carry a timestamp
comment).  Configuration is flat ``key = value`` text with explicit units in
the key names; unknown keys are rejected.

Exit codes: 0 success, 2 configuration error, 3 numeric failure, 4 I/O or
data-format error.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import calibration, correlator, optics, source, spectrum, tagio
from .errors import ConfigError, DataFormatError, NumericError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "1", "yes", "on"):
        return True
    if t in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


class Schema:
    """Flat key -> (type, default, help) table for one subcommand."""

    def __init__(self, entries: dict[str, tuple]):
        self.entries = entries

    def add_arguments(self, parser: argparse.ArgumentParser) -> None:
        for key, (typ, default, help_text) in self.entries.items():
            flag = "--" + key.replace("_", "-")
            if typ is bool:
                parser.add_argument(flag, dest=key, type=_parse_bool,
                                    default=None, metavar="BOOL",
                                    help=f"{help_text} (default {default})")
            else:
                parser.add_argument(flag, dest=key, type=typ, default=None,
                                    help=f"{help_text} (default {default})")

    def resolve(self, args: argparse.Namespace,
                config_path: str | None) -> dict:
        values = {k: v[1] for k, v in self.entries.items()}
        if config_path:
            for key, raw in _read_config_file(config_path).items():
                if key not in self.entries:
                    raise ConfigError(f"unknown configuration key {key!r} "
                                      f"in {config_path}")
                typ = self.entries[key][0]
                try:
                    values[key] = _parse_bool(raw) if typ is bool else typ(raw)
                except (ValueError, TypeError) as exc:
                    raise ConfigError(f"key {key!r}: {exc}") from exc
        for key in self.entries:
            cli_val = getattr(args, key, None)
            if cli_val is not None:
                values[key] = cli_val
        return values


def _read_config_file(path: str) -> dict[str, str]:
    out = {}
    try:
        lines = Path(path).read_text(encoding="ascii").splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for n, line in enumerate(lines, start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"{path}:{n}: expected 'key = value'")
        key, value = body.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _write_manifest(path: Path, command: str, values: dict,
                    derived: dict) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(f"# fmpairs {command} manifest, generated "
                 f"{time.strftime('%Y-%m-%dT%H:%M:%S')}\n")
        for key, val in values.items():
            fh.write(f"{key} = {val!r}\n" if isinstance(val, float)
                     else f"{key} = {val}\n")
        fh.write("# derived quantities (informational)\n")
        for key, val in derived.items():
            fh.write(f"# {key} = {val}\n")


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# vipa-response


VIPA_SCHEMA = Schema({
    "wavelength_nm": (float, 1532.71, "alignment channel wavelength"),
    "span_ghz": (float, 8.0, "detuning half-span of the response scan"),
    "step_mhz": (float, 10.0, "detuning step"),
    "fsr_ghz": (float, 60.8, "free spectral range"),
    "finesse": (float, 80.0, "etalon finesse"),
    "rr": (float, -1.0, "round-trip reflectivity product (-1 = from finesse)"),
    "theta_in_rad": (float, optics.DEFAULT_THETA_IN, "incidence angle"),
    "channels": (int, 0, "also emit this many per-channel spatial curves"),
    "channel_spacing_ghz": (float, 6.5, "channel spacing for the curves"),
})


def cmd_vipa_response(args) -> int:
    values = VIPA_SCHEMA.resolve(args, args.config)
    out = _out_dir(args)
    params = optics.VipaParams.from_observables(
        fsr=values["fsr_ghz"] * 1e9, finesse=values["finesse"],
        theta_in=values["theta_in_rad"])
    if values["rr"] >= 0.0:
        params = params.with_rr(values["rr"])
    lam = values["wavelength_nm"] * 1e-9
    nu0 = optics.C_VACUUM / lam
    fiber = optics.FiberMode()
    flat = params.rr == 0.0
    if not flat:
        x_res = optics.brightest_order_position(nu0, params)
        xs = x_res + np.linspace(-4e-6, 4e-6, 41)
        best = xs[int(np.argmax([abs(optics.fiber_coupled_field(
            lam, optics.FiberMode(center_position=x), params))**2 for x in xs]))]
        fiber = optics.FiberMode(center_position=float(best))

    detunings = np.arange(-values["span_ghz"] * 1e9,
                          values["span_ghz"] * 1e9 + 1.0,
                          values["step_mhz"] * 1e6)
    resp = optics.response_curve(detunings, lam, fiber, params)
    peak = resp.max()
    optics.write_curve_csv(out / "response.csv", "detuning_Hz", detunings,
                           resp / peak, y_name="intensity_norm")
    flat_response = bool(resp.min() > 0.5 * peak)
    summary = {"flat_response": flat_response,
               "usable_channels": optics.usable_channel_count(
                   values["channel_spacing_ghz"] * 1e9, params)}
    if not flat_response:
        summary["fwhm_ghz"] = optics.fwhm_of_curve(detunings, resp) / 1e9
        xt = resp / resp[np.argmin(np.abs(detunings))]
        optics.write_curve_csv(out / "crosstalk.csv", "detuning_Hz", detunings,
                               10 * np.log10(np.maximum(xt, 1e-300)),
                               y_name="crosstalk_db")
        for d in (5.0, 6.5):
            if d * 1e9 <= detunings.max():
                summary[f"crosstalk_db_at_{d:g}ghz"] = float(np.interp(
                    d * 1e9, detunings, 10 * np.log10(np.maximum(xt, 1e-300))))
    env = optics.default_efficiency_envelope()
    env_grid = np.linspace(-40e9, 40e9, 401)
    optics.write_curve_csv(out / "efficiency.csv", "detuning_Hz", env_grid,
                           optics.system_efficiency(env_grid, env),
                           y_name="efficiency")
    if values["channels"] > 0:
        spacing = values["channel_spacing_ghz"] * 1e9
        n_ch = values["channels"]
        x_grid = np.arange(-520e-6, 520e-6, 1e-6)
        cols = []
        for k in range(n_ch):
            nu = nu0 + (k - (n_ch - 1) / 2.0) * spacing
            cols.append(optics.coupled_intensity_map(
                x_grid, [nu], fiber.mode_field_radius, params)[0])
        with open(out / "channels.csv", "w", encoding="ascii", newline="\n") as fh:
            fh.write("x_m," + ",".join(f"ch{k}" for k in range(n_ch)) + "\n")
            scale = max(c.max() for c in cols)
            for i, x in enumerate(x_grid):
                row = ",".join(f"{c[i]/scale:.8g}" for c in cols)
                fh.write(f"{x:.10g},{row}\n")
    with open(out / "summary.txt", "w", encoding="ascii", newline="\n") as fh:
        for key, val in summary.items():
            fh.write(f"{key} = {val}\n")
    _write_manifest(out / "manifest.txt", "vipa-response", values,
                    {"fsr_hz": params.free_spectral_range,
                     "rr": params.rr})
    return EXIT_OK


# ---------------------------------------------------------------------------
# fit-spectrum


FIT_SCHEMA = Schema({
    "spacing_ghz": (float, 6.5, "comb line spacing"),
    "count": (int, 20, "number of comb lines"),
    "center_thz": (float, -1.0, "comb center frequency (-1 = abscissa midpoint)"),
    "filter_fwhm_ghz": (float, 16.0, "filter passband FWHM"),
    "filter_mode": (str, "tracked", "tracked or fixed filter"),
    "envelope_normalize": (bool, True, "flatten by the alignment envelope"),
    "search_lo_mhz": (float, 1.0, "half-width search lower bound"),
    "search_hi_mhz": (float, 10000.0, "half-width search upper bound"),
})


def cmd_fit_spectrum(args) -> int:
    values = FIT_SCHEMA.resolve(args, args.config)
    out = _out_dir(args)
    measured = spectrum.MeasuredSpectrum.from_csv(args.spectrum_csv)
    center = (values["center_thz"] * 1e12 if values["center_thz"] > 0
              else float(measured.abscissa.mean()))
    params = optics.default_vipa_params()
    fiber = optics.FiberMode()
    filt = optics.EtalonFilter(center_frequency=center,
                               fwhm=values["filter_fwhm_ghz"] * 1e9)
    result = spectrum.fit_linewidth(
        measured, center, values["spacing_ghz"] * 1e9, values["count"],
        filt, params, fiber, mode=values["filter_mode"],
        envelope_normalize=values["envelope_normalize"],
        search_range=(values["search_lo_mhz"] * 1e6,
                      values["search_hi_mhz"] * 1e6))
    comb = spectrum.build_comb(center, values["spacing_ghz"] * 1e9,
                               values["count"], result.half_width)
    model = spectrum.simulate_demux_spectrum(
        comb, filt, params, fiber, grid=measured.abscissa,
        mode=values["filter_mode"],
        envelope_normalize=values["envelope_normalize"])
    peaks = spectrum.detect_peaks(measured)
    with open(out / "fit_report.txt", "w", encoding="ascii", newline="\n") as fh:
        fh.write(f"half_width_hz = {result.half_width!r}\n")
        fh.write(f"residual = {result.residual!r}\n")
        fh.write(f"iterations = {result.iterations}\n")
        fh.write(f"evaluations = {result.evaluations}\n")
        fh.write(f"bracket_lo_hz = {result.bracket[0]!r}\n")
        fh.write(f"bracket_hi_hz = {result.bracket[1]!r}\n")
        fh.write(f"detected_peaks = {len(peaks)}\n")
    with open(out / "overlay.csv", "w", encoding="ascii", newline="\n") as fh:
        fh.write(f"{measured.kind},measured,model\n")
        for a, m, mm in zip(measured.abscissa, measured.intensity,
                            model.intensity):
            fh.write(f"{a:.10g},{m:.10g},{mm:.10g}\n")
    _write_manifest(out / "manifest.txt", "fit-spectrum", values,
                    {"half_width_hz": result.half_width,
                     "detected_peaks": len(peaks)})
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate


SIM_SCHEMA = Schema({
    "duration_s": (float, 0.002, "acquisition time"),
    "mu": (float, 0.125, "mean pairs per slot and mode (-1 = from pump power)"),
    "pump_power_mw": (float, -1.0, "pump power; used when mu = -1"),
    "mode_count": (int, 21, "modes in the comb"),
    "mode_spacing_ghz": (float, 6.5, "mode spacing"),
    "mode_half_width_mhz": (float, 191.0, "mode half-width (HWHM)"),
    "slot_ns": (float, -1.0, "coherence-slot override (-1 = 1/(pi FWHM))"),
    "signal_mode": (int, 0, "selected signal mode"),
    "idler_mode": (int, 0, "selected idler channel"),
    "signal_leakage": (str, "default", "'default' 5-mode passband or 'none'"),
    "idler_excess_loss": (float, 1.0, "extra idler-arm transmission factor"),
    "eta_s": (float, 0.55, "signal detector efficiency"),
    "eta_i": (float, 0.65, "idler detector efficiency"),
    "dark_s_hz": (float, 60.0, "signal dark rate"),
    "dark_i_hz": (float, 70.0, "idler dark rate"),
    "jitter_ps": (float, 120.0, "detector timing jitter sigma"),
    "window_ns": (float, 2.5, "window used for the expected-g2 entries"),
    "format": (str, "ttag", "output format: ttag or csv"),
})


def _source_from_values(values) -> tuple[source.SourceConfig, source.RunConfig]:
    src = source.SourceConfig(
        mode_count=values["mode_count"],
        mode_spacing=values["mode_spacing_ghz"] * 1e9,
        mode_half_width=values["mode_half_width_mhz"] * 1e6,
        mean_pairs_per_slot=max(values["mu"], 0.0))
    if values["mu"] < 0:
        if values["pump_power_mw"] < 0:
            raise ConfigError("set either mu or pump_power_mw")
        src = src.with_mu(src.mu_for_pump_power(values["pump_power_mw"]))
    run = source.RunConfig(
        duration=values["duration_s"], rng_seed=values["_seed"],
        slot_duration=None if values["slot_ns"] <= 0
        else values["slot_ns"] * 1e-9)
    return src, run


def cmd_simulate(args) -> int:
    values = SIM_SCHEMA.resolve(args, args.config)
    values["_seed"] = args.seed
    out = _out_dir(args)
    if values["format"] not in ("ttag", "csv"):
        raise ConfigError(f"unknown format {values['format']!r}")
    if values["signal_leakage"] not in ("default", "none"):
        raise ConfigError("signal_leakage must be 'default' or 'none'")
    src, run = _source_from_values(values)
    det_s = source.DetectorModel(values["eta_s"], values["dark_s_hz"],
                                 values["jitter_ps"] * 1e-12, 0)
    det_i = source.DetectorModel(values["eta_i"], values["dark_i_hz"],
                                 values["jitter_ps"] * 1e-12, 1)
    leakage = (None if values["signal_leakage"] == "default"
               else {0: 1.0})
    path = source.CollectionPath.for_modes(
        values["signal_mode"], values["idler_mode"],
        signal_leakage=leakage,
        excess_idler_loss=values["idler_excess_loss"])
    sig, idl = source.generate_tags(src, path, det_s, det_i, run)
    if values["format"] == "ttag":
        tagio.write_ttag(out / "signal.ttag", sig)
        tagio.write_ttag(out / "idler.ttag", idl)
    else:
        tagio.write_tag_csv(out / "signal.csv", sig)
        tagio.write_tag_csv(out / "idler.csv", idl)

    mu = src.mean_pairs_per_slot
    slot = run.slot_for(src)
    window = values["window_ns"] * 1e-9
    s_weights = [v * det_s.efficiency
                 for v in path.signal_transmissions.values()]
    derived = {
        "signal_tags": len(sig),
        "idler_tags": len(idl),
        "signal_rate_hz": len(sig) / run.duration,
        "idler_rate_hz": len(idl) / run.duration,
        "slot_s": slot,
        "expected_g2_ideal": (2.0 + 1.0 / mu) if mu > 0 else 1.0,
    }
    if mu > 0:
        matched_s = path.signal_transmissions.get(values["idler_mode"], 0.0)
        derived["expected_g2_windowed"] = source.analytic_g2_cross(
            mu, det_s.efficiency, det_i.efficiency,
            det_s.dark_rate, det_i.dark_rate,
            slot=slot, tau_corr=run.tau_corr_for(src), window=window,
            jitter_s=det_s.timing_jitter_sigma,
            jitter_i=det_i.timing_jitter_sigma,
            signal_weights=list(path.signal_transmissions.values()),
            idler_weights=[t * path.excess_idler_loss
                           for t in path.idler_transmissions.values()],
            matched_weight_pairs=[(matched_s,
                                   path.idler_transmissions.get(
                                       values["idler_mode"], 0.0)
                                   * path.excess_idler_loss)])
    _write_manifest(out / "manifest.txt", "simulate", values, derived)
    return EXIT_OK


# ---------------------------------------------------------------------------
# analyze


ANALYZE_SCHEMA = Schema({
    "window_ns": (float, 2.5, "coincidence window"),
    "offset_ns": (float, 0.0, "window center delay"),
    "bin_ps": (float, 50.0, "histogram bin width"),
    "range_ns": (float, 25.0, "histogram half-range"),
    "acquisition_s": (float, -1.0, "acquisition time (-1 = infer from tags)"),
    "autos": (bool, False, "also estimate the two auto-correlations and R"),
    "auto_window_signal_ns": (float, 1.2, "signal auto window"),
    "auto_window_idler_ns": (float, 1.4, "idler auto window"),
    "dark_s_hz": (float, 0.0, "signal dark rate for subtraction"),
    "dark_i_hz": (float, 0.0, "idler dark rate for subtraction"),
    "dark_subtract": (bool, False, "subtract dark contributions"),
})


def _single_stream(path: str) -> tagio.TagStream:
    streams = tagio.read_tags(path)
    if len(streams) != 1:
        raise DataFormatError(f"{path}: expected a single channel, found "
                              f"{sorted(streams)}")
    return next(iter(streams.values()))


def cmd_analyze(args) -> int:
    values = ANALYZE_SCHEMA.resolve(args, args.config)
    out = _out_dir(args)
    sig = _single_stream(args.signal_tags)
    idl = _single_stream(args.idler_tags)
    acq = None if values["acquisition_s"] <= 0 else values["acquisition_s"]
    hist = correlator.histogram(sig, idl, bin_width_s=values["bin_ps"] * 1e-12,
                                window_range_s=values["range_ns"] * 1e-9,
                                acquisition_s=acq)
    hist.to_csv(out / "histogram.csv")
    est = correlator.g2_cross(sig, idl, window_s=values["window_ns"] * 1e-9,
                              offset_s=values["offset_ns"] * 1e-9,
                              acquisition_s=acq,
                              dark_rates=(values["dark_s_hz"],
                                          values["dark_i_hz"]),
                              dark_subtract=values["dark_subtract"])
    rows = [("g2_cross", est)]
    ratio = None
    if values["autos"]:
        auto_s = correlator.g2_auto_hbt(
            sig, window_s=values["auto_window_signal_ns"] * 1e-9,
            splitter_seed=args.seed, acquisition_s=acq)
        auto_i = correlator.g2_auto_hbt(
            idl, window_s=values["auto_window_idler_ns"] * 1e-9,
            splitter_seed=args.seed + 1, acquisition_s=acq)
        rows += [("g2_auto_signal", auto_s), ("g2_auto_idler", auto_i)]
        ratio = correlator.cauchy_schwarz_R(est, auto_s, auto_i)
    with open(out / "estimates.csv", "w", encoding="ascii", newline="\n") as fh:
        fh.write("quantity,value,sigma,window_ps,coincidences\n")
        for name, e in rows:
            fh.write(f"{name},{e.g2:.6f},{e.uncertainty:.6f},"
                     f"{int(round(e.window * 1e12))},{e.coincidences_in_window}\n")
        if ratio is not None:
            fh.write(f"cauchy_schwarz_R,{ratio.value:.6f},"
                     f"{ratio.uncertainty:.6f},,\n")
    with open(out / "report.txt", "w", encoding="ascii", newline="\n") as fh:
        fh.write(f"signal_tags = {len(sig)}\n")
        fh.write(f"idler_tags = {len(idl)}\n")
        fh.write(f"g2_cross = {est.g2!r}\n")
        fh.write(f"g2_cross_sigma = {est.uncertainty!r}\n")
        fh.write(f"coincidences = {est.coincidences_in_window}\n")
        if ratio is not None:
            fh.write(f"cauchy_schwarz_R = {ratio.value!r}\n")
            fh.write(f"cauchy_schwarz_R_sigma = {ratio.uncertainty!r}\n")
    _write_manifest(out / "manifest.txt", "analyze", values,
                    {"g2_cross": est.g2})
    return EXIT_OK


# ---------------------------------------------------------------------------
# grid


GRID_SCHEMA = Schema({
    "modes": (int, 7, "grid side length (modes centered on 0)"),
    "duration_s": (float, 0.005, "per-entry acquisition time"),
    "mu": (float, 0.125, "mean pairs per slot (-1 = from pump power)"),
    "pump_power_mw": (float, -1.0, "pump power; used when mu = -1"),
    "mode_half_width_mhz": (float, 382.0, "mode half-width (HWHM)"),
    "slot_ns": (float, 2.5, "coherence-slot override (-1 = 1/(pi FWHM))"),
    "window_ns": (float, 2.5, "coincidence window"),
    "signal_leakage": (str, "default", "'default' 5-mode passband or 'none'"),
    "eta_s": (float, 1.0, "signal detector efficiency"),
    "eta_i": (float, 1.0, "idler detector efficiency"),
    "dark_s_hz": (float, 0.0, "signal dark rate"),
    "dark_i_hz": (float, 0.0, "idler dark rate"),
    "jitter_ps": (float, 120.0, "detector timing jitter sigma"),
    "full": (bool, True, "measure all entries (else diagonal +- 2 bands)"),
})


def cmd_grid(args) -> int:
    values = GRID_SCHEMA.resolve(args, args.config)
    out = _out_dir(args)
    n = values["modes"]
    if n < 1 or n % 2 == 0:
        raise ConfigError("modes must be a positive odd number")
    half = n // 2
    if values["signal_leakage"] not in ("default", "none"):
        raise ConfigError("signal_leakage must be 'default' or 'none'")
    mu = values["mu"]
    src = source.SourceConfig(mode_count=n + 4,
                              mode_half_width=values["mode_half_width_mhz"] * 1e6,
                              mean_pairs_per_slot=max(mu, 0.0))
    pump = None
    if mu < 0:
        if values["pump_power_mw"] < 0:
            raise ConfigError("set either mu or pump_power_mw")
        pump = values["pump_power_mw"]
    det_s = source.DetectorModel(values["eta_s"], values["dark_s_hz"],
                                 values["jitter_ps"] * 1e-12, 0)
    det_i = source.DetectorModel(values["eta_i"], values["dark_i_hz"],
                                 values["jitter_ps"] * 1e-12, 1)
    scenario = correlator.GridScenario(
        source=src, detector_s=det_s, detector_i=det_i,
        run=source.RunConfig(duration=values["duration_s"],
                             rng_seed=args.seed,
                             slot_duration=None if values["slot_ns"] <= 0
                             else values["slot_ns"] * 1e-9),
        signal_leakage=None if values["signal_leakage"] == "default"
        else {0: 1.0},
        window_s=values["window_ns"] * 1e-9)
    modes = range(-half, half + 1)
    if values["full"]:
        pairs = [(ms, mi) for ms in modes for mi in modes]
    else:
        pairs = [(ms, mi) for ms in modes for mi in modes
                 if abs(ms - mi) <= 2]
    grid = correlator.build_correlation_grid(scenario, pairs,
                                             pump_power_mw=pump)
    grid.to_csv(out / "grid.csv")
    with open(out / "summary.txt", "w", encoding="ascii", newline="\n") as fh:
        for key, val in grid.summary().items():
            fh.write(f"{key} = {val}\n")
    _write_manifest(out / "manifest.txt", "grid", values,
                    grid.summary())
    return EXIT_OK


# ---------------------------------------------------------------------------
# plot-script


_PLOT_SCRIPTS = {
    "response": """\
import matplotlib.pyplot as plt
import numpy as np
d = np.genfromtxt('response.csv', delimiter=',', names=True)
plt.plot(d['detuning_Hz'] / 1e9, d['intensity_norm'])
plt.xlabel('detuning (GHz)'); plt.ylabel('normalized response')
plt.tight_layout(); plt.savefig('response.png', dpi=160)
""",
    "spectrum": """\
import matplotlib.pyplot as plt
import numpy as np
d = np.genfromtxt('overlay.csv', delimiter=',', names=True)
x = d[d.dtype.names[0]]
plt.plot(x, d['measured'], '.', ms=3, label='measured')
plt.plot(x, d['model'], '-', lw=1, label='model')
plt.xlabel(d.dtype.names[0]); plt.ylabel('normalized intensity')
plt.legend(); plt.tight_layout(); plt.savefig('overlay.png', dpi=160)
""",
    "histogram": """\
import matplotlib.pyplot as plt
import numpy as np
d = np.genfromtxt('histogram.csv', delimiter=',', names=True)
plt.step(d['delay_ps'] / 1e3, d['counts'], where='mid')
plt.xlabel('delay (ns)'); plt.ylabel('coincidences')
plt.tight_layout(); plt.savefig('histogram.png', dpi=160)
""",
    "grid": """\
import matplotlib.pyplot as plt
import numpy as np
d = np.genfromtxt('grid.csv', delimiter=',', names=True)
ms = d['m_s'].astype(int); mi = d['m_i'].astype(int)
lo, hi = min(ms.min(), mi.min()), max(ms.max(), mi.max())
img = np.full((hi - lo + 1, hi - lo + 1), np.nan)
img[ms - lo, mi - lo] = d['g2']
plt.imshow(img, origin='lower', extent=(lo - .5, hi + .5, lo - .5, hi + .5))
plt.colorbar(label='$g^{(2)}$')
plt.xlabel('idler mode'); plt.ylabel('signal mode')
plt.tight_layout(); plt.savefig('grid.png', dpi=160)
""",
}


def cmd_plot_script(args) -> int:
    if args.artifact not in _PLOT_SCRIPTS:
        raise ConfigError(f"unknown artifact {args.artifact!r}; choose from "
                          f"{sorted(_PLOT_SCRIPTS)}")
    sys.stdout.write(_PLOT_SCRIPTS[args.artifact])
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fmpairs",
        description="Simulator and analysis toolkit for a frequency-"
                    "multiplexed photon-pair source with a spatial "
                    "spectral demultiplexer.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0, help="master RNG seed")
        p.add_argument("--out-dir", default=".", help="output directory")
        p.add_argument("--config", default=None,
                       help="key = value configuration file")

    p = sub.add_parser("vipa-response",
                       help="demultiplexer response, cross-talk and efficiency")
    common(p)
    VIPA_SCHEMA.add_arguments(p)
    p.set_defaults(func=cmd_vipa_response)

    p = sub.add_parser("fit-spectrum", help="fit the comb linewidth to a spectrum")
    common(p)
    p.add_argument("spectrum_csv", help="measured spectrum CSV")
    FIT_SCHEMA.add_arguments(p)
    p.set_defaults(func=cmd_fit_spectrum)

    p = sub.add_parser("simulate", help="generate detector time-tag streams")
    common(p)
    SIM_SCHEMA.add_arguments(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", help="histogram and correlate tag streams")
    common(p)
    p.add_argument("signal_tags", help="signal tag file (TTAG or CSV)")
    p.add_argument("idler_tags", help="idler tag file (TTAG or CSV)")
    ANALYZE_SCHEMA.add_arguments(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("grid", help="correlation grid over mode pairs")
    common(p)
    GRID_SCHEMA.add_arguments(p)
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("plot-script",
                       help="print a plotting script for an artifact type")
    p.add_argument("artifact", help="response | spectrum | histogram | grid")
    p.set_defaults(func=cmd_plot_script)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except DataFormatError as exc:
        print(f"data format error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
