"""Forward optical model of the VIPA spectral demultiplexer.

The demultiplexer maps optical frequency onto transverse position in the
back-focal plane of a collection lens.  The field there is the product of a
Gaussian alignment envelope and the resonant multi-bounce factor of the
tilted etalon,

    E(x, lam) = exp(-f1^2 x^2 / (f2^2 W^2)) *
                [1 - rR * exp(i * phi(x, lam))]^(-1),

with round-trip phase

    phi(x, lam) = (2 pi t / lam) * ( x^2 cos(theta_c) / (f2^2 n)
                                   + 2 x tan(theta_in) cos(theta_c) / f2
                                   - 2 n cos(theta_in) ),

where theta_c is the internal-angle cosine argument (see
``VipaParams.internal_cos_convention``).  Light collected by a single-mode
fiber at position x0 is the overlap integral of E with the fiber's Gaussian
mode; its squared modulus is the measured monochromatic response.

Conventions: SI units throughout (meters, Hz, radians).  Intensities are in
arbitrary units unless explicitly normalized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import NumericError, QuadratureError

C_VACUUM = 299792458.0  # speed of light [m/s]

# Default observables and geometry of the demultiplexer.
DEFAULT_FSR = 60.8e9            # free spectral range [Hz]
DEFAULT_FINESSE = 80.0          # FSR / resonance bandwidth
DEFAULT_THETA_IN = 0.041365     # incidence angle [rad]; reproduces the
                                # measured 0.703 pm/um dispersion of the
                                # reference calibration at its origin
ANCHOR_WAVELENGTH = 1.5329127e-6  # resonant exactly at x = 0 [m]
CENTER_WAVELENGTH = 1532.71e-9  # alignment channel of the response curves [m]

SMF28_MODE_FIELD_RADIUS = 5.2e-6  # [m] (mode field diameter 10.4 um)


def _finesse_to_rr(finesse: float) -> float:
    """Invert finesse = pi*sqrt(rR)/(1-rR) for the round-trip factor rR."""
    if finesse <= 0:
        raise ValueError(f"finesse must be positive, got {finesse}")
    x = (-math.pi + math.sqrt(math.pi**2 + 4.0 * finesse**2)) / (2.0 * finesse)
    return x * x


@dataclass(frozen=True)
class VipaParams:
    """Geometry and reflectivity of the tilted etalon plus relay lenses.

    Parameters
    ----------
    refractive_index : float
        Bulk index n of the etalon material.
    thickness : float
        Etalon thickness t [m].
    front_reflectivity : float
        R of the entrance face (0..1).
    back_reflectivity : float
        r of the exit face (0..1).  Only the product rR enters the model.
    incidence_angle : float
        theta_in of the input beam onto the etalon [rad].
    input_beam_radius_x : float
        Collimated input beam radius W in the dispersion direction [m].
    focus_lens_f1 : float
        Focal length of the cylindrical lens focusing onto the entrance slit [m].
    collection_lens_f2 : float
        Focal length of the achromatic doublet imaging onto the fiber plane [m].
    internal_cos_convention : str
        'theta_times_n' evaluates cos(theta_in * n) in the x-dependent phase
        terms (the as-built convention, default); 'theta_over_n' evaluates
        cos(theta_in / n) (small-angle refraction).  Numerically the two
        differ at the 1e-3 level for degree-scale angles.
    """

    refractive_index: float
    thickness: float
    front_reflectivity: float
    back_reflectivity: float
    incidence_angle: float
    input_beam_radius_x: float
    focus_lens_f1: float
    collection_lens_f2: float
    internal_cos_convention: str = "theta_times_n"

    def __post_init__(self):
        n, t = self.refractive_index, self.thickness
        R, r = self.front_reflectivity, self.back_reflectivity
        values = [n, t, R, r, self.incidence_angle, self.input_beam_radius_x,
                  self.focus_lens_f1, self.collection_lens_f2]
        if not all(math.isfinite(v) for v in values):
            raise ValueError("all etalon parameters must be finite")
        if not (0.0 <= R <= 1.0 and 0.0 <= r <= 1.0):
            raise ValueError(f"reflectivities must lie in [0, 1], got R={R}, r={r}")
        if r * R >= 1.0:
            raise ValueError(f"rR={r*R} >= 1 makes the resonant factor singular")
        if t <= 0 or n < 1:
            raise ValueError(f"need thickness > 0 and index >= 1, got t={t}, n={n}")
        if min(self.input_beam_radius_x, self.focus_lens_f1,
               self.collection_lens_f2) <= 0:
            raise ValueError("beam radius and focal lengths must be positive")
        if not 0.0 <= self.incidence_angle < math.pi / 2:
            raise ValueError(f"incidence angle out of range: {self.incidence_angle}")
        if self.internal_cos_convention not in ("theta_times_n", "theta_over_n"):
            raise ValueError(
                f"unknown internal_cos_convention {self.internal_cos_convention!r}")
        if not math.isfinite(self.free_spectral_range) or self.free_spectral_range <= 0:
            raise ValueError("derived FSR must be positive and finite")

    @property
    def rr(self) -> float:
        """Round-trip amplitude factor rR."""
        return self.front_reflectivity * self.back_reflectivity

    @property
    def free_spectral_range(self) -> float:
        """FSR = c / (2 n t cos(theta_in)) [Hz]."""
        return C_VACUUM / (2.0 * self.refractive_index * self.thickness
                           * math.cos(self.incidence_angle))

    @property
    def finesse(self) -> float:
        """pi * sqrt(rR) / (1 - rR)."""
        rr = self.rr
        return math.pi * math.sqrt(rr) / (1.0 - rr)

    def phase_coefficients(self) -> tuple[float, float, float]:
        """Coefficients (A, B, C) of the phase polynomial.

        phi(x, lam) = (2 pi t / lam) * (A x^2 + B x + C), so A has units
        1/m^2, B 1/m and C is dimensionless.
        """
        theta = self.incidence_angle
        n = self.refractive_index
        if self.internal_cos_convention == "theta_times_n":
            cos_int = math.cos(theta * n)
        else:
            cos_int = math.cos(theta / n)
        f2 = self.collection_lens_f2
        a = cos_int / (f2 * f2 * n)
        b = 2.0 * math.tan(theta) * cos_int / f2
        c = -2.0 * n * math.cos(theta)
        return a, b, c

    @classmethod
    def from_observables(cls, fsr: float = DEFAULT_FSR,
                         finesse: float = DEFAULT_FINESSE,
                         theta_in: float = DEFAULT_THETA_IN,
                         refractive_index: float = 2.0,
                         input_beam_radius_x: float = 1.05e-3,
                         focus_lens_f1: float = 0.150,
                         collection_lens_f2: float = 0.045,
                         anchor_wavelength: float | None = ANCHOR_WAVELENGTH,
                         internal_cos_convention: str = "theta_times_n") -> "VipaParams":
        """Build parameters from the observable FSR and finesse.

        The thickness follows from FSR = c/(2 n t cos theta).  When
        ``anchor_wavelength`` is given the round-trip length is snapped to
        the nearest integer multiple of it, so that wavelength resonates
        exactly at x = 0 (shifts the FSR by <0.05%).  rR is split evenly
        between the two faces.
        """
        two_nt_cos = C_VACUUM / fsr
        if anchor_wavelength is not None:
            m0 = round(two_nt_cos / anchor_wavelength)
            if m0 < 1:
                raise ValueError("anchor wavelength too long for this FSR")
            two_nt_cos = m0 * anchor_wavelength
        thickness = two_nt_cos / (2.0 * refractive_index * math.cos(theta_in))
        root = math.sqrt(_finesse_to_rr(finesse))
        return cls(refractive_index=refractive_index,
                   thickness=thickness,
                   front_reflectivity=root,
                   back_reflectivity=root,
                   incidence_angle=theta_in,
                   input_beam_radius_x=input_beam_radius_x,
                   focus_lens_f1=focus_lens_f1,
                   collection_lens_f2=collection_lens_f2,
                   internal_cos_convention=internal_cos_convention)

    def with_rr(self, rr: float) -> "VipaParams":
        """Copy with a different round-trip factor (kept split evenly)."""
        root = math.sqrt(rr)
        return replace(self, front_reflectivity=root, back_reflectivity=root)


def default_vipa_params() -> VipaParams:
    """The as-built demultiplexer: FSR 60.8 GHz, finesse 80, anchored."""
    return VipaParams.from_observables()


@dataclass(frozen=True)
class FiberMode:
    """Gaussian fundamental mode of the collection fiber.

    mode_field_radius is the 1/e field radius a in E(x) = exp(-(x-x0)^2/a^2).
    """

    mode_field_radius: float = SMF28_MODE_FIELD_RADIUS  # [m]
    center_position: float = 0.0                        # x0 [m]

    def __post_init__(self):
        if not (self.mode_field_radius > 0 and math.isfinite(self.mode_field_radius)):
            raise ValueError(f"mode field radius must be positive, got {self.mode_field_radius}")
        if not math.isfinite(self.center_position):
            raise ValueError("fiber position must be finite")

    def field(self, x):
        return np.exp(-((np.asarray(x) - self.center_position) ** 2)
                      / self.mode_field_radius**2)


@dataclass(frozen=True)
class EtalonFilter:
    """Single-passband Fabry-Perot filter with a Lorentzian line.

    Valid while the filter's own FSR is much larger than the spectrum of
    interest, so only one transmission peak matters.
    """

    center_frequency: float        # nu0 [Hz]
    fwhm: float                    # [Hz]
    peak_transmission: float = 1.0

    def __post_init__(self):
        if self.fwhm <= 0:
            raise ValueError(f"fwhm must be positive, got {self.fwhm}")
        if not 0.0 < self.peak_transmission <= 1.0:
            raise ValueError(f"peak transmission must be in (0, 1], got {self.peak_transmission}")


@dataclass(frozen=True)
class EfficiencyEnvelope:
    """Gaussian fit of the end-to-end collection efficiency vs detuning."""

    peak_efficiency: float   # dimensionless, 0..1
    center_offset: float     # [Hz]
    gaussian_sigma: float    # [Hz]

    def __post_init__(self):
        if not 0.0 < self.peak_efficiency <= 1.0:
            raise ValueError(f"peak efficiency must be in (0, 1], got {self.peak_efficiency}")
        if self.gaussian_sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.gaussian_sigma}")


def default_efficiency_envelope() -> EfficiencyEnvelope:
    """Measured envelope: 25.5% peak falling to ~17% at -20/+25 GHz."""
    return EfficiencyEnvelope(peak_efficiency=0.255, center_offset=2.5e9,
                              gaussian_sigma=25e9)


# ---------------------------------------------------------------------------
# field evaluation


def round_trip_phase(x, wavelength: float, p: VipaParams):
    """Round-trip phase phi(x, lam) [rad]."""
    a, b, c = p.phase_coefficients()
    x = np.asarray(x, dtype=float)
    return (2.0 * math.pi * p.thickness / wavelength) * ((a * x + b) * x + c)


def vipa_field(x, wavelength: float, p: VipaParams):
    """Complex output field E(x, lam) in the fiber plane (arbitrary units)."""
    if not (np.isfinite(wavelength) and wavelength > 0):
        raise ValueError(f"wavelength must be positive and finite, got {wavelength}")
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("positions must be finite")
    envelope = np.exp(-(p.focus_lens_f1**2) * x**2
                      / (p.collection_lens_f2**2 * p.input_beam_radius_x**2))
    resonant = 1.0 / (1.0 - p.rr * np.exp(1j * round_trip_phase(x, wavelength, p)))
    return envelope * resonant


def envelope_intensity(x, p: VipaParams):
    """Squared modulus of the Gaussian alignment envelope alone."""
    x = np.asarray(x, dtype=float)
    return np.exp(-2.0 * (p.focus_lens_f1**2) * x**2
                  / (p.collection_lens_f2**2 * p.input_beam_radius_x**2))


def order_positions(frequency: float, p: VipaParams,
                    order_offsets=range(-3, 4)) -> np.ndarray:
    """Positions x of the etalon resonances for one optical frequency.

    ``order_offsets`` counts interference orders relative to the one whose
    resonance lies closest to (and right of) x = 0; positive offsets move to
    larger x.  Orders without a real solution are omitted.
    """
    a, b, c = p.phase_coefficients()
    m_at_zero = -c * p.thickness * frequency / C_VACUUM  # fractional order at x=0
    out = []
    for k in order_offsets:
        m = math.floor(m_at_zero) - k
        rhs = -m * C_VACUUM / (p.thickness * frequency)
        disc = b * b - 4.0 * a * (c - rhs)
        if disc < 0 or m < 1:
            continue
        out.append((-b + math.sqrt(disc)) / (2.0 * a))
    return np.asarray(sorted(out))


def brightest_order_position(frequency: float, p: VipaParams) -> float:
    """Resonance position with the largest alignment-envelope intensity."""
    xs = order_positions(frequency, p)
    if xs.size == 0:
        raise NumericError(f"no resonance found for frequency {frequency}")
    return float(xs[np.argmax(envelope_intensity(xs, p))])


# ---------------------------------------------------------------------------
# fiber coupling


def fiber_coupled_field(wavelength: float, fiber: FiberMode, p: VipaParams,
                        field=None, n_points: int = 4001,
                        half_span: float | None = None,
                        richardson_tol: float = 1e-4) -> complex:
    """Overlap integral of the output field with the fiber mode at fiber.x0.

    |result|^2 is the monochromatic fiber-coupled intensity.  The quadrature
    window is centered on the fiber and wide enough to enclose the local
    spatial order; convergence is checked by comparing against the
    half-resolution estimate (Richardson step doubling).

    Parameters
    ----------
    field : callable, optional
        Replacement for ``vipa_field``; called as field(x, wavelength, p).
        Used for degenerate checks (e.g. a constant field).
    """
    if n_points < 401 or n_points % 2 == 0:
        raise ValueError("n_points must be an odd integer >= 401")
    if half_span is None:
        half_span = 14.0 * fiber.mode_field_radius
    src = vipa_field if field is None else field
    tau = np.linspace(fiber.center_position - half_span,
                      fiber.center_position + half_span, n_points)
    integrand = fiber.field(tau) * src(tau, wavelength, p)
    fine = np.trapezoid(integrand, tau)
    coarse = np.trapezoid(integrand[::2], tau[::2])
    scale = abs(fine) ** 2
    if scale > 0:
        rel = abs(abs(fine) ** 2 - abs(coarse) ** 2) / scale
        if rel > richardson_tol:
            raise QuadratureError(
                f"coupled intensity changed by {rel:.2e} (> {richardson_tol}) when "
                f"halving the step; increase n_points above {n_points}")
    return complex(fine)


def coupled_intensity_map(x_positions, frequencies, fiber_radius: float,
                          p: VipaParams, oversample: int = 4) -> np.ndarray:
    """|overlap|^2 for every (frequency, fiber position) pair.

    Evaluates the fiber-mode convolution with an FFT over a tau grid that
    extends ``x_positions`` by 8 fiber radii on both sides.  Returns an
    array of shape (len(frequencies), len(x_positions)).  The tau step is
    the x step divided by ``oversample`` and must resolve the fiber mode
    (step <= radius/6), else the quadrature is untrustworthy.
    """
    from scipy.signal import fftconvolve

    xs = np.asarray(x_positions, dtype=float)
    nus = np.atleast_1d(np.asarray(frequencies, dtype=float))
    if xs.size < 2:
        raise ValueError("need at least two fiber positions")
    step = (xs[-1] - xs[0]) / (xs.size - 1)
    if not np.allclose(np.diff(xs), step, rtol=1e-9, atol=0.0):
        raise ValueError("x positions must be uniformly spaced")
    tau_step = step / oversample
    if tau_step > fiber_radius / 6.0:
        raise QuadratureError(
            f"tau step {tau_step:.3g} m too coarse for fiber radius {fiber_radius:.3g} m; "
            f"need x step <= {oversample * fiber_radius / 6.0:.3g} m")
    pad = 8.0 * fiber_radius
    n_tau = int(round((xs[-1] - xs[0] + 2 * pad) / tau_step)) + 1
    tau = xs[0] - pad + tau_step * np.arange(n_tau)
    half_kernel = int(round(pad / tau_step))
    kernel = np.exp(-((tau_step * np.arange(-half_kernel, half_kernel + 1)) ** 2)
                    / fiber_radius**2)
    out = np.empty((nus.size, xs.size))
    idx = np.rint((xs - tau[0]) / tau_step).astype(int)
    chunk = max(1, int(4e6 // n_tau))
    for start in range(0, nus.size, chunk):
        block = nus[start:start + chunk]
        fields = np.stack([vipa_field(tau, C_VACUUM / nu, p) for nu in block])
        conv = fftconvolve(fields, kernel[None, :], mode="same", axes=1) * tau_step
        out[start:start + block.size] = np.abs(conv[:, idx]) ** 2
    return out


def response_curve(detunings, center_wavelength: float, fiber: FiberMode,
                   p: VipaParams, **quad_kwargs) -> np.ndarray:
    """Fiber-coupled intensity vs laser detuning at a fixed fiber position."""
    nu0 = C_VACUUM / center_wavelength
    out = np.empty(len(detunings))
    for i, dnu in enumerate(np.asarray(detunings, dtype=float)):
        out[i] = abs(fiber_coupled_field(C_VACUUM / (nu0 + dnu), fiber, p,
                                         **quad_kwargs)) ** 2
    return out


def crosstalk_db(detuning: float, fiber: FiberMode, p: VipaParams,
                 center_wavelength: float = CENTER_WAVELENGTH) -> float:
    """Coupled intensity at ``detuning`` relative to the aligned channel [dB].

    The fiber is assumed parked on the channel at ``center_wavelength``;
    0 dB at zero detuning by construction, negative elsewhere when aligned.
    """
    fsr = p.free_spectral_range
    if abs(detuning) > fsr / 2:
        raise ValueError(f"detuning {detuning:.3g} Hz outside +-FSR/2 ({fsr/2:.3g} Hz)")
    if envelope_intensity(fiber.center_position, p) < 1e-30:
        raise NumericError("fiber sits outside the illuminated region: "
                           "on-peak intensity is zero (misconfigured position)")
    on_peak, off_peak = response_curve([0.0, detuning], center_wavelength, fiber, p)
    if on_peak <= 0.0:
        raise NumericError("zero on-peak intensity: fiber is not on a channel")
    return 10.0 * math.log10(off_peak / on_peak)


def etalon_transmission(detuning, f: EtalonFilter):
    """Lorentzian line: peak / (1 + (2 dnu / fwhm)^2)."""
    detuning = np.asarray(detuning, dtype=float)
    t = f.peak_transmission / (1.0 + (2.0 * detuning / f.fwhm) ** 2)
    return float(t) if t.ndim == 0 else t


def system_efficiency(detuning, env: EfficiencyEnvelope):
    """peak * exp(-(dnu - offset)^2 / (2 sigma^2))."""
    detuning = np.asarray(detuning, dtype=float)
    e = env.peak_efficiency * np.exp(-((detuning - env.center_offset) ** 2)
                                     / (2.0 * env.gaussian_sigma**2))
    return float(e) if e.ndim == 0 else e


def usable_channel_count(spacing: float, p: VipaParams) -> int:
    """Channels fitting in one free spectral range without order aliasing."""
    if spacing <= 0:
        raise ValueError(f"spacing must be positive, got {spacing}")
    return int(math.floor(p.free_spectral_range / spacing + 1e-9))


# ---------------------------------------------------------------------------
# small utilities


def fwhm_of_curve(x, y) -> float:
    """Full width at half maximum by linear interpolation at the crossings."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    peak = np.argmax(y)
    half = y[peak] / 2.0
    left = np.nonzero(y[:peak + 1] < half)[0]
    right = np.nonzero(y[peak:] < half)[0]
    if left.size == 0 or right.size == 0:
        raise NumericError("curve does not fall below half maximum on both sides")
    i = left[-1]
    j = peak + right[0]
    x_lo = x[i] + (half - y[i]) * (x[i + 1] - x[i]) / (y[i + 1] - y[i])
    x_hi = x[j - 1] + (half - y[j - 1]) * (x[j] - x[j - 1]) / (y[j] - y[j - 1])
    return float(x_hi - x_lo)


def write_curve_csv(path, x_name: str, x_values, y_values,
                    y_name: str = "value") -> None:
    """Two-column CSV with a header row; decimal points, no locale."""
    x_values = np.asarray(x_values, dtype=float)
    y_values = np.asarray(y_values, dtype=float)
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(f"{x_name},{y_name}\n")
        for xv, yv in zip(x_values, y_values):
            fh.write(f"{xv:.10g},{yv:.10g}\n")
