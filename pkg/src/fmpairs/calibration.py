"""Wavelength <-> fiber-position <-> channel-index mapping.

The demultiplexer maps optical frequency onto position in the collection
lens' back-focal plane.  The mapping is calibrated once with a tunable
laser and fitted by a cubic polynomial lambda(x); this module evaluates the
polynomial (Horner), inverts it by bracketed root finding, and builds the
channel table used by the rest of the toolkit.

Units follow the calibration convention: wavelengths in nm, positions in um.
Frequency conversions use exact nu = c / lambda.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import CalibrationRangeError

C_VACUUM = 299792458.0  # [m/s]

_INVERSION_TOL_NM = 1e-6   # |lambda(x*) - lambda| after inversion
_MONOTONICITY_SAMPLES = 1000


@dataclass(frozen=True)
class CalibrationPoly:
    """Cubic calibration lambda(x) = c0 + c1 x + c2 x^2 + c3 x^3.

    coefficients are (c0 [nm], c1 [nm/um], c2 [nm/um^2], c3 [nm/um^3]);
    valid_range is the trusted position interval [um].  The polynomial must
    be strictly decreasing on the range; extrapolation outside it is
    refused rather than clamped.
    """

    coefficients: tuple[float, float, float, float]
    valid_range: tuple[float, float]

    def __post_init__(self):
        if len(self.coefficients) != 4:
            raise ValueError("need exactly four polynomial coefficients")
        lo, hi = self.valid_range
        if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
            raise ValueError(f"invalid range {self.valid_range}")
        xs = np.linspace(lo, hi, _MONOTONICITY_SAMPLES)
        _, c1, c2, c3 = self.coefficients
        slope = c1 + 2.0 * c2 * xs + 3.0 * c3 * xs * xs
        if not np.all(slope < 0.0):
            raise ValueError("calibration polynomial must be strictly decreasing "
                             "over its valid range")

    @property
    def wavelength_span_nm(self) -> tuple[float, float]:
        """(shortest, longest) wavelength reachable on the valid range."""
        lo, hi = self.valid_range
        return (_horner(self.coefficients, hi), _horner(self.coefficients, lo))


def _horner(coeffs, x):
    c0, c1, c2, c3 = coeffs
    return ((c3 * x + c2) * x + c1) * x + c0


def _solve_reference_range_end(coeffs, span_end_nm: float) -> float:
    return brentq(lambda x: _horner(coeffs, x) - span_end_nm, 0.0, 2000.0,
                  xtol=1e-9)


_REFERENCE_COEFFS = (1532.9127, -7.03138e-4, -6.7756e-8, -6.3004e-11)
_REFERENCE_SPAN_END_NM = 1532.4374

# Laser-calibrated reference mapping of the as-built demultiplexer.  The
# trusted domain ends where the calibration data ended (lambda = 1532.4374 nm,
# x ~= 618 um).
REFERENCE_CALIBRATION = CalibrationPoly(
    coefficients=_REFERENCE_COEFFS,
    valid_range=(0.0, _solve_reference_range_end(_REFERENCE_COEFFS,
                                                 _REFERENCE_SPAN_END_NM)),
)


def wavelength_of_position(x_um: float, cal: CalibrationPoly) -> float:
    """Evaluate lambda(x) [nm] at a position [um] inside the valid range."""
    lo, hi = cal.valid_range
    if not (lo <= x_um <= hi):
        raise CalibrationRangeError(
            f"position {x_um} um outside calibrated range [{lo:.3f}, {hi:.3f}] um")
    return _horner(cal.coefficients, x_um)


def position_of_wavelength(wavelength_nm: float, cal: CalibrationPoly) -> float:
    """Invert the calibration: position [um] whose lambda(x) equals the input.

    The root is bracketed on the valid range; the result satisfies
    |lambda(x) - wavelength| < 1e-6 nm.
    """
    lo, hi = cal.valid_range
    lam_min, lam_max = cal.wavelength_span_nm
    if not (lam_min <= wavelength_nm <= lam_max):
        raise CalibrationRangeError(
            f"wavelength {wavelength_nm} nm outside calibrated span "
            f"[{lam_min:.4f}, {lam_max:.4f}] nm")
    x = brentq(lambda u: _horner(cal.coefficients, u) - wavelength_nm, lo, hi,
               xtol=1e-9, rtol=8.9e-16)
    residual = abs(_horner(cal.coefficients, x) - wavelength_nm)
    if residual >= _INVERSION_TOL_NM:
        raise CalibrationRangeError(
            f"inversion residual {residual:.2e} nm exceeds {_INVERSION_TOL_NM} nm")
    return float(x)


def frequency_of_position(x_um: float, cal: CalibrationPoly) -> float:
    """nu = c / lambda(x) [Hz]."""
    return C_VACUUM / (wavelength_of_position(x_um, cal) * 1e-9)


def position_of_frequency(frequency_hz: float, cal: CalibrationPoly) -> float:
    """Inverse of frequency_of_position [um]."""
    return position_of_wavelength(C_VACUUM / frequency_hz * 1e9, cal)


@dataclass(frozen=True)
class ChannelEntry:
    index: int
    center_frequency: float   # [Hz]
    fiber_position_um: float  # [um]
    detector_channel: int


@dataclass(frozen=True)
class ChannelMap:
    """Spectral-mode <-> fiber-position <-> detector-channel association."""

    channels: tuple[ChannelEntry, ...]

    def __post_init__(self):
        if not self.channels:
            raise ValueError("channel map must not be empty")
        if len(self.channels) > 1:
            freqs = np.array([c.center_frequency for c in self.channels])
            pos = np.array([c.fiber_position_um for c in self.channels])
            gaps = np.diff(freqs)
            if not (np.all(gaps > 0) or np.all(gaps < 0)):
                raise ValueError("channel frequencies must be monotone")
            spread = np.abs(gaps - gaps.mean())
            if np.any(spread > 0.01 * abs(gaps.mean())):
                raise ValueError("channel spacing varies by more than 1%")
            dpos = np.diff(pos)
            if not (np.all(dpos > 0) or np.all(dpos < 0)):
                raise ValueError("fiber positions must be strictly monotone")

    def entry(self, index: int) -> ChannelEntry:
        for ch in self.channels:
            if ch.index == index:
                return ch
        raise KeyError(f"no channel with index {index}")

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write("index,frequency_Hz,position_um,detector_channel\n")
            for ch in self.channels:
                fh.write(f"{ch.index},{ch.center_frequency:.6f},"
                         f"{ch.fiber_position_um:.6f},{ch.detector_channel}\n")

    @classmethod
    def from_csv(cls, path) -> "ChannelMap":
        entries = []
        with open(path, "r", encoding="ascii") as fh:
            header = fh.readline().strip()
            if header != "index,frequency_Hz,position_um,detector_channel":
                raise ValueError(f"unexpected channel-map header: {header!r}")
            for line in fh:
                if not line.strip():
                    continue
                idx, freq, pos, det = line.strip().split(",")
                entries.append(ChannelEntry(int(idx), float(freq), float(pos),
                                            int(det)))
        return cls(channels=tuple(entries))


def build_channel_map(center: float, spacing: float, count: int,
                      cal: CalibrationPoly,
                      detector_channel: int = 1) -> ChannelMap:
    """Channel i at frequency center + i*spacing, for i = 0..count-1.

    Every channel wavelength must fall inside the calibrated range; the
    fiber position is the calibrated position of that wavelength.
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    if spacing <= 0:
        raise ValueError(f"spacing must be positive, got {spacing}")
    entries = []
    for i in range(count):
        nu = center + i * spacing
        x = position_of_frequency(nu, cal)
        entries.append(ChannelEntry(index=i, center_frequency=nu,
                                    fiber_position_um=x,
                                    detector_channel=detector_channel))
    return ChannelMap(channels=tuple(entries))
