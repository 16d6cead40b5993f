"""Emission-comb model, demultiplexed-spectrum synthesis and linewidth fit.

The source emits a comb of narrow Lorentzian lines.  What the demultiplexer
records is each line smeared by the instrument response: the line field is
filtered by the Fabry-Perot passband, 'convolved' with the etalon output
field, convolved with the fiber mode, squared and normalized.  Distinct
optical frequencies are mutually incoherent on detection timescales, so the
spectral samples are summed as intensities with Lorentzian weights,

    I_tot(x) = sum_i f(nu_i) * I_response(x, nu_i).

The only free parameter of interest is the common line half-width; it is
recovered from a measured spectrum by 1-D minimization of the squared
residuals against this forward model.

Two measurement modes are supported:

* ``tracked``  - the passband follows the scan so every line is measured at
  peak filter transmission; abscissa is optical frequency.  This reproduces
  the composite multi-line spectra recorded by stepping fiber and filter
  together.
* ``fixed``    - the passband stays put and the fiber scans; abscissa is
  fiber position within one interference order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BracketError, DataFormatError, NumericError, QuadratureError
from .optics import (C_VACUUM, EtalonFilter, FiberMode, VipaParams,
                     brightest_order_position, coupled_intensity_map,
                     envelope_intensity, etalon_transmission, order_positions)

# Spectral sampling of each Lorentzian line: at least SAMPLES_PER_HALF_WIDTH
# points per half-width, truncated at +-TRUNCATION_HALF_WIDTHS (leaves ~3% of
# the Lorentzian mass outside; identical on both sides of a fit round trip).
SAMPLES_PER_HALF_WIDTH = 15
TRUNCATION_HALF_WIDTHS = 20.0

_KERNEL_STEP_HZ = 20e6        # lattice step of the precomputed response kernels
_KERNEL_HALF_SPAN_FACTOR = 2.2  # kernel reach in units of the comb spacing


@dataclass(frozen=True)
class LorentzianLine:
    """One comb line: center [Hz], half-width at half-maximum [Hz], weight."""

    center: float
    half_width: float
    weight: float = 1.0

    def __post_init__(self):
        if self.half_width <= 0:
            raise ValueError(f"half width must be positive, got {self.half_width}")
        if self.weight < 0:
            raise ValueError(f"weight must be non-negative, got {self.weight}")

    def profile(self, nu):
        d = (np.asarray(nu, dtype=float) - self.center) / self.half_width
        return self.weight / (1.0 + d * d)


@dataclass(frozen=True)
class SpectralComb:
    """Ordered set of Lorentzian lines with nominally constant spacing."""

    lines: tuple[LorentzianLine, ...]
    spacing: float  # [Hz]

    def __post_init__(self):
        if not self.lines:
            raise ValueError("comb must contain at least one line")
        if self.spacing <= 0:
            raise ValueError(f"spacing must be positive, got {self.spacing}")
        centers = np.array([l.center for l in self.lines])
        if len(centers) > 1:
            gaps = np.diff(centers)
            if np.any(np.abs(gaps - self.spacing) > 0.01 * self.spacing):
                raise ValueError("line centers must be spaced by the comb "
                                 "spacing within 1%")

    def intensity(self, nu):
        """Comb spectral intensity (sum of the line profiles)."""
        nu = np.asarray(nu, dtype=float)
        total = np.zeros_like(nu)
        for line in self.lines:
            total += line.profile(nu)
        return total

    @property
    def centers(self) -> np.ndarray:
        return np.array([l.center for l in self.lines])


def build_comb(center: float, spacing: float, count: int,
               half_width: float) -> SpectralComb:
    """``count`` unit-weight lines centered symmetrically around ``center``."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    offsets = (np.arange(count) - (count - 1) / 2.0) * spacing
    lines = tuple(LorentzianLine(center + o, half_width) for o in offsets)
    return SpectralComb(lines=lines, spacing=spacing)


@dataclass(frozen=True)
class MeasuredSpectrum:
    """Normalized spectrum samples on a strictly increasing abscissa.

    kind is 'frequency_hz' (abscissa in Hz) or 'position_m' (meters).
    """

    abscissa: np.ndarray
    intensity: np.ndarray
    kind: str = "frequency_hz"

    def __post_init__(self):
        a = np.asarray(self.abscissa, dtype=float)
        y = np.asarray(self.intensity, dtype=float)
        object.__setattr__(self, "abscissa", a)
        object.__setattr__(self, "intensity", y)
        if self.kind not in ("frequency_hz", "position_m"):
            raise ValueError(f"unknown abscissa kind {self.kind!r}")
        if a.ndim != 1 or a.size != y.size or a.size < 2:
            raise ValueError("abscissa and intensity must be 1-D arrays of equal length >= 2")
        if not np.all(np.diff(a) > 0):
            raise ValueError("abscissa must be strictly increasing")
        if np.any(y < -1e-12) or np.any(y > 1.0 + 1e-9):
            raise ValueError("intensities must be normalized to [0, 1]")

    @classmethod
    def from_raw(cls, abscissa, raw_intensity, kind="frequency_hz"):
        y = np.asarray(raw_intensity, dtype=float)
        peak = y.max()
        if peak <= 0:
            raise ValueError("cannot normalize an all-zero spectrum")
        return cls(abscissa=np.asarray(abscissa, dtype=float), intensity=y / peak,
                   kind=kind)

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(f"{self.kind},intensity\n")
            for a, y in zip(self.abscissa, self.intensity):
                fh.write(f"{a:.10g},{y:.10g}\n")

    @classmethod
    def from_csv(cls, path) -> "MeasuredSpectrum":
        with open(path, "r", encoding="ascii") as fh:
            header = fh.readline().strip()
            parts = header.split(",")
            if len(parts) != 2 or parts[1] != "intensity" or \
                    parts[0] not in ("frequency_hz", "position_m"):
                raise DataFormatError(f"unexpected spectrum header: {header!r}")
            rows = []
            for ln, line in enumerate(fh, start=2):
                if not line.strip():
                    continue
                cols = line.strip().split(",")
                if len(cols) != 2:
                    raise DataFormatError(f"line {ln}: expected two columns")
                try:
                    rows.append((float(cols[0]), float(cols[1])))
                except ValueError as exc:
                    raise DataFormatError(f"line {ln}: {exc}") from exc
        if len(rows) < 2:
            raise DataFormatError("spectrum file holds fewer than two samples")
        arr = np.array(rows)
        return cls(abscissa=arr[:, 0], intensity=arr[:, 1], kind=parts[0])


# ---------------------------------------------------------------------------
# instrument response kernels


class DemuxResponse:
    """Per-line instrument response of the filter + etalon + fiber chain.

    For every comb line the fiber-coupled intensity is evaluated on a fine
    lattice of frequency offsets around the line's own brightest-order
    position (tracked mode) or on a spatial lattice within the scan window
    (fixed mode).  Kernels depend only on geometry, never on the line
    half-width, so a single instance serves every candidate during a fit.
    """

    def __init__(self, line_centers, filt: EtalonFilter, params: VipaParams,
                 fiber: FiberMode, mode: str, x_window=None,
                 kernel_step: float = _KERNEL_STEP_HZ):
        if mode not in ("tracked", "fixed"):
            raise ValueError(f"unknown mode {mode!r}")
        self.mode = mode
        self.filter = filt
        self.params = params
        self.fiber = fiber
        self.line_centers = np.asarray(line_centers, dtype=float)
        if self.line_centers.size < 1:
            raise ValueError("need at least one line center")
        spacing = (np.min(np.diff(np.sort(self.line_centers)))
                   if self.line_centers.size > 1 else params.free_spectral_range / 9)
        self.kernel_step = float(kernel_step)
        self.kernel_half_span = _KERNEL_HALF_SPAN_FACTOR * spacing
        self._positions = np.array([brightest_order_position(nu, params)
                                    for nu in self.line_centers])
        if mode == "tracked":
            self._build_tracked()
        else:
            self._build_fixed(x_window)

    # -- tracked: kernel S_j(offset) = coupled intensity at the line's own
    #    fiber position when illuminated at line center + offset.
    def _build_tracked(self):
        n_half = int(math.ceil(self.kernel_half_span / self.kernel_step))
        self.kernel_offsets = self.kernel_step * np.arange(-n_half, n_half + 1)
        a = self.fiber.mode_field_radius
        kernels = []
        for nu_c, x_c in zip(self.line_centers, self._positions):
            xs = x_c + np.linspace(-a, a, 21)
            resp = coupled_intensity_map(xs, nu_c + self.kernel_offsets,
                                         a, self.params, oversample=8)
            kernels.append(resp[:, 10])
        self.kernels = kernels

    # -- fixed: spatial profile of each line plus its local dispersion, so a
    #    detuned spectral sample maps onto a shifted copy of the profile.
    def _build_fixed(self, x_window):
        if x_window is None:
            lo = float(self._positions.min() - 60e-6)
            hi = float(self._positions.max() + 60e-6)
        else:
            lo, hi = x_window
        a = self.fiber.mode_field_radius
        step = a / 8.0
        self.x_lattice = np.arange(lo, hi + step, step)
        self.dispersions = np.empty(self.line_centers.size)  # dx/dnu [m/Hz]
        profiles = []
        probe = 0.5e9
        for i, (nu_c, x_c) in enumerate(zip(self.line_centers, self._positions)):
            x_plus = _nearest_order(nu_c + probe, x_c, self.params)
            x_minus = _nearest_order(nu_c - probe, x_c, self.params)
            self.dispersions[i] = (x_plus - x_minus) / (2.0 * probe)
            prof = coupled_intensity_map(self.x_lattice, [nu_c], a, self.params)
            profiles.append(prof[0])
        self.profiles = profiles

    # ------------------------------------------------------------------
    def spectrum(self, comb: SpectralComb, grid,
                 envelope_normalize: bool = True) -> np.ndarray:
        """Raw (un-normalized) spectrum of ``comb`` on ``grid``.

        ``grid`` is frequency [Hz] in tracked mode, position [m] in fixed
        mode.  Line order must match the centers this response was built for.
        """
        centers = comb.centers
        if centers.size != self.line_centers.size or \
                np.any(np.abs(centers - self.line_centers) > 1e-3):
            raise ValueError("comb line centers differ from the response kernels")
        if self.mode == "tracked":
            return self._spectrum_tracked(comb, grid, envelope_normalize)
        return self._spectrum_fixed(comb, grid)

    def _line_samples(self, line: LorentzianLine):
        """Offsets and trapezoidal Lorentzian weights for one line."""
        b = line.half_width
        n_side = int(math.ceil(TRUNCATION_HALF_WIDTHS * SAMPLES_PER_HALF_WIDTH))
        offsets = (b / SAMPLES_PER_HALF_WIDTH) * np.arange(-n_side, n_side + 1)
        w = line.weight / (1.0 + (offsets / b) ** 2)
        w *= b / SAMPLES_PER_HALF_WIDTH  # trapezoid measure (uniform step)
        return offsets, w

    def _spectrum_tracked(self, comb, nu_grid, envelope_normalize):
        nu_grid = np.asarray(nu_grid, dtype=float)
        self._check_grid_resolution(nu_grid, comb)
        h = self.kernel_step
        lat_lo = self.line_centers.min() + self.kernel_offsets[0] * 2
        lat_hi = self.line_centers.max() - self.kernel_offsets[0] * 2
        n_lat = int(math.ceil((lat_hi - lat_lo) / h)) + 1
        total = np.zeros(n_lat)
        lat0 = lat_lo
        for line, kern, x_c in zip(comb.lines, self.kernels, self._positions):
            offs, w = self._line_samples(line)
            w = w * etalon_transmission(offs, self.filter)
            if envelope_normalize:
                w = w / envelope_intensity(x_c, self.params)
            # bin the weighted samples onto the lattice with linear hats
            pos = (line.center + offs - lat0) / h
            idx = np.floor(pos).astype(int)
            frac = pos - idx
            keep = (idx >= 0) & (idx < n_lat - 1)
            f_hat = np.zeros(n_lat)
            np.add.at(f_hat, idx[keep], w[keep] * (1.0 - frac[keep]))
            np.add.at(f_hat, idx[keep] + 1, w[keep] * frac[keep])
            lo_bin = max(int(np.min(idx[keep])) - 1, 0)
            hi_bin = min(int(np.max(idx[keep])) + 2, n_lat)
            # I(nu) = sum_k f_k * S(nu_k - nu): correlate the sample mass
            # with the kernel (kernel argument = sample - output).
            seg = np.convolve(f_hat[lo_bin:hi_bin], kern[::-1])
            n_half = (kern.size - 1) // 2
            out_lo = lo_bin - n_half
            dst_lo = max(out_lo, 0)
            dst_hi = min(out_lo + seg.size, n_lat)
            total[dst_lo:dst_hi] += seg[dst_lo - out_lo:dst_hi - out_lo]
        lattice = lat0 + h * np.arange(n_lat)
        return np.interp(nu_grid, lattice, total)

    def _spectrum_fixed(self, comb, x_grid):
        x_grid = np.asarray(x_grid, dtype=float)
        a = self.fiber.mode_field_radius
        if x_grid.size > 1:
            step = np.max(np.diff(x_grid))
            if step > a / 2.0:
                raise QuadratureError(
                    f"x grid step {step:.3g} m too coarse; need <= {a/2:.3g} m "
                    f"to resolve the fiber-limited peaks")
        total = np.zeros_like(x_grid)
        for line, prof, disp, x_c in zip(comb.lines, self.profiles,
                                         self.dispersions, self._positions):
            offs, w = self._line_samples(line)
            w = w * etalon_transmission(line.center + offs
                                        - self.filter.center_frequency, self.filter)
            # spectral sample at line.center + off sits at x_c + disp*off;
            # its spatial profile is the line profile shifted accordingly.
            for off, wk in zip(offs, w):
                if wk <= 0:
                    continue
                total += wk * np.interp(x_grid - disp * off, self.x_lattice,
                                        prof, left=0.0, right=0.0)
        return total

    def _check_grid_resolution(self, nu_grid, comb):
        if nu_grid.size < 2:
            raise ValueError("output grid needs at least two points")
        hw = min(l.half_width for l in comb.lines)
        step = np.max(np.diff(nu_grid))
        # the measurable feature scale is the instrument response width or
        # the broadened line, whichever applies; demand a few points across
        limit = max(self.kernel_step * 4.0, 0.0)
        limit = max(limit, min(20.0 * hw, 0.4e9))
        if step > limit:
            raise QuadratureError(
                f"frequency grid step {step:.4g} Hz too coarse to resolve a "
                f"{hw:.4g} Hz half-width; need step <= {limit:.4g} Hz")


def _nearest_order(nu: float, x_ref: float, params: VipaParams) -> float:
    xs = order_positions(nu, params, order_offsets=range(-4, 5))
    if xs.size == 0:
        raise NumericError(f"no resonance near {x_ref} for frequency {nu}")
    return float(xs[np.argmin(np.abs(xs - x_ref))])


# ---------------------------------------------------------------------------
# public operations


def simulate_demux_spectrum(comb: SpectralComb, filt: EtalonFilter,
                            params: VipaParams, fiber: FiberMode,
                            grid=None, mode: str = "tracked",
                            envelope_normalize: bool = True,
                            response: DemuxResponse | None = None) -> MeasuredSpectrum:
    """Run the source comb through filter, etalon and fiber coupling.

    Returns the peak-normalized spectrum on ``grid`` (frequency [Hz] for
    ``tracked``, fiber position [m] for ``fixed``; a sensible default grid
    is generated when omitted).  Pass a prebuilt ``response`` to reuse the
    instrument kernels across calls.
    """
    if response is None:
        x_window = None
        if mode == "fixed" and grid is not None:
            g = np.asarray(grid, dtype=float)
            x_window = (g.min() - 30e-6, g.max() + 30e-6)
        response = DemuxResponse(comb.centers, filt, params, fiber, mode,
                                 x_window=x_window)
    if grid is None:
        if mode == "tracked":
            margin = 1.5 * comb.spacing
            lo = comb.centers.min() - margin
            hi = comb.centers.max() + margin
            grid = np.arange(lo, hi, 25e6)
        else:
            grid = response.x_lattice[::4]
    raw = response.spectrum(comb, grid, envelope_normalize=envelope_normalize)
    kind = "frequency_hz" if mode == "tracked" else "position_m"
    return MeasuredSpectrum.from_raw(np.asarray(grid, dtype=float), raw, kind=kind)


@dataclass(frozen=True)
class FitResult:
    half_width: float          # [Hz]
    residual: float            # sum of squared residuals at the optimum
    iterations: int
    evaluations: int
    bracket: tuple[float, float]  # [Hz]


_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def fit_linewidth(measured: MeasuredSpectrum, comb_center: float,
                  comb_spacing: float, comb_count: int, filt: EtalonFilter,
                  params: VipaParams, fiber: FiberMode,
                  mode: str = "tracked", envelope_normalize: bool = True,
                  search_range: tuple[float, float] = (1e6, 10e9),
                  coarse_points: int = 25, rel_tol: float = 1e-3,
                  max_iterations: int = 80,
                  response: DemuxResponse | None = None) -> FitResult:
    """Recover the common line half-width from a measured spectrum.

    Minimizes the sum of squared residuals between the forward model and
    the measurement over log(half_width), by a coarse bracketing scan
    followed by golden-section refinement.  Raises ``BracketError`` when
    the objective has no interior minimum on the search range.
    """
    if comb_count < 1:
        raise ValueError("comb must have at least one line")
    if measured.kind not in ("frequency_hz", "position_m"):
        raise ValueError("unsupported measured-spectrum kind")
    grid = measured.abscissa
    template = build_comb(comb_center, comb_spacing, comb_count, 1e6)
    if response is None:
        response = DemuxResponse(template.centers, filt, params, fiber, mode,
                                 x_window=None if mode == "tracked"
                                 else (grid.min() - 30e-6, grid.max() + 30e-6))
    n_evals = 0

    def objective(log_hw: float) -> float:
        nonlocal n_evals
        n_evals += 1
        comb = build_comb(comb_center, comb_spacing, comb_count,
                          math.exp(log_hw))
        raw = response.spectrum(comb, grid, envelope_normalize=envelope_normalize)
        peak = raw.max()
        if peak <= 0:
            return np.inf
        model = raw / peak
        return float(np.sum((model - measured.intensity) ** 2))

    lo, hi = search_range
    if not (0 < lo < hi):
        raise ValueError(f"invalid search range {search_range}")
    us = np.linspace(math.log(lo), math.log(hi), coarse_points)
    fs = np.array([objective(u) for u in us])
    i_min = int(np.argmin(fs))
    if i_min == 0 or i_min == coarse_points - 1:
        raise BracketError(
            f"objective is monotone over the scanned half-width range "
            f"[{lo:.3g}, {hi:.3g}] Hz (best at the "
            f"{'lower' if i_min == 0 else 'upper'} edge); widen the range")
    a, b = us[i_min - 1], us[i_min + 1]
    bracket = (math.exp(a), math.exp(b))

    # golden-section on the bracketed interval
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = objective(c), objective(d)
    iterations = 0
    while (b - a) > rel_tol and iterations < max_iterations:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = objective(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = objective(d)
        iterations += 1
    u_best = (a + b) / 2.0
    return FitResult(half_width=math.exp(u_best), residual=objective(u_best),
                     iterations=iterations, evaluations=n_evals,
                     bracket=bracket)


def scan_filter_spectrum(comb: SpectralComb, filt: EtalonFilter,
                         detuning_grid) -> MeasuredSpectrum:
    """Total power through the filter as the passband is detuned.

    Models the complementary-arm spectrum measurement: the comb is fixed and
    the filter center scans over ``detuning_grid`` (offsets from the filter's
    nominal center).  The transmitted power is integrated numerically; the
    returned spectrum is peak-normalized with the detuning as abscissa.
    """
    detunings = np.asarray(detuning_grid, dtype=float)
    if detunings.size < 2:
        raise ValueError("detuning grid needs at least two points")
    b_min = min(l.half_width for l in comb.lines)
    step = min(b_min, filt.fwhm / 2.0) / 8.0
    lo = comb.centers.min() - 30.0 * b_min - 4.0 * filt.fwhm + detunings.min()
    hi = comb.centers.max() + 30.0 * b_min + 4.0 * filt.fwhm + detunings.max()
    n = int((hi - lo) / step) + 1
    if n > 20_000_000:
        raise QuadratureError(
            f"quadrature grid of {n} points is unreasonable; widths differ "
            f"too strongly (line {b_min:.3g} Hz vs filter {filt.fwhm:.3g} Hz)")
    nu = lo + step * np.arange(n)
    comb_vals = comb.intensity(nu)
    power = np.empty(detunings.size)
    for i, d in enumerate(detunings):
        t = etalon_transmission(nu - (filt.center_frequency + d), filt)
        power[i] = np.trapezoid(comb_vals * t, dx=step)
    return MeasuredSpectrum.from_raw(detunings, power, kind="frequency_hz")


def detect_peaks(spec: MeasuredSpectrum, min_height: float = 0.05,
                 min_separation: int = 3) -> np.ndarray:
    """Indices of local maxima above ``min_height`` (fraction of peak)."""
    y = spec.intensity
    idx = [i for i in range(1, y.size - 1)
           if y[i] > y[i - 1] and y[i] >= y[i + 1] and y[i] >= min_height]
    pruned: list[int] = []
    for i in idx:
        if pruned and i - pruned[-1] < min_separation:
            if y[i] > y[pruned[-1]]:
                pruned[-1] = i
        else:
            pruned.append(i)
    return np.asarray(pruned, dtype=int)
