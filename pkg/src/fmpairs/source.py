"""Stochastic time-tag generator for the multimode pair source.

Emission is discretized into coherence slots of duration 1/(pi * FWHM) of a
mode.  Per mode pair and per slot the number of photon pairs is drawn from
a Bose-Einstein (geometric) distribution with mean mu — the photon-number
statistics of two-mode squeezed vacuum — so one slot behaves like one
thermal temporal mode.  Every pair contributes a signal tag at the slot
center and an idler tag displaced by a double-exponential (Laplace) delay
with decay 1/(2 pi FWHM), the wavepacket correlation of a Lorentzian mode.
Detection applies Bernoulli thinning (efficiency times per-mode path
transmission), Gaussian timing jitter and independent Poisson dark counts.

Slot-center placement makes the zero-delay coincidence density equal the
per-mode value 2 + 1/mu exactly, and makes the windowed estimator calibrate
cleanly when the window matches the slot (see ``analytic_g2_cross``).

All generated times are integer picoseconds; streams are sorted and
reproducible from the run seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import MemoryBudgetError
from .tagio import TagStream

C_VACUUM = 299792458.0

PS_PER_S = 1e12
DEFAULT_MODE_SPACING = 6.5e9        # [Hz]
DEFAULT_MODE_HALF_WIDTH = 1.91e8    # HWHM [Hz]; FWHM 382 MHz reproduces the
                                    # ~0.8 ns coincidence-peak width together
                                    # with the detector jitter below
DEFAULT_JITTER_SIGMA = 120e-12      # [s] per detector
DEFAULT_MU_PER_MW = 0.125           # mean pairs per slot at 1 mW pump

_SIGNAL_CENTER = C_VACUUM / 795.325e-9   # [Hz]
_IDLER_CENTER = C_VACUUM / 1532.9127e-9  # [Hz]


@dataclass(frozen=True)
class SourceConfig:
    """Pair-emission parameters of the cavity source."""

    mode_count: int = 21
    mode_spacing: float = DEFAULT_MODE_SPACING       # [Hz]
    mode_half_width: float = DEFAULT_MODE_HALF_WIDTH  # HWHM [Hz]
    mean_pairs_per_slot: float = 0.125               # mu
    pump_power_scale: float = DEFAULT_MU_PER_MW      # mu per mW of pump
    signal_center: float = _SIGNAL_CENTER            # [Hz]
    idler_center: float = _IDLER_CENTER              # [Hz]
    pump_frequency: float = _SIGNAL_CENTER + _IDLER_CENTER  # [Hz]

    def __post_init__(self):
        if self.mode_count < 1:
            raise ValueError(f"mode count must be >= 1, got {self.mode_count}")
        if self.mean_pairs_per_slot < 0:
            raise ValueError(f"mu must be non-negative, got {self.mean_pairs_per_slot}")
        if self.mode_spacing <= 0 or self.mode_half_width <= 0:
            raise ValueError("mode spacing and half width must be positive")
        if self.pump_frequency != self.signal_center + self.idler_center:
            raise ValueError("energy conservation violated: pump frequency must "
                             "equal signal center + idler center exactly")

    @property
    def mode_fwhm(self) -> float:
        return 2.0 * self.mode_half_width

    def mode_pair_frequencies(self, mode_index: int) -> tuple[float, float]:
        """(signal, idler) frequencies of mode pair m; their sum is the pump."""
        d = mode_index * self.mode_spacing
        return self.signal_center - d, self.idler_center + d

    def mu_for_pump_power(self, power_mw: float) -> float:
        if power_mw < 0:
            raise ValueError("pump power must be non-negative")
        return self.pump_power_scale * power_mw

    def with_mu(self, mu: float) -> "SourceConfig":
        return replace(self, mean_pairs_per_slot=mu)


@dataclass(frozen=True)
class DetectorModel:
    """Single-photon detector imperfections."""

    efficiency: float
    dark_rate: float                 # [Hz]
    timing_jitter_sigma: float       # [s]
    detector_channel: int

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise ValueError(f"efficiency must be in [0, 1], got {self.efficiency}")
        if self.dark_rate < 0 or self.timing_jitter_sigma < 0:
            raise ValueError("dark rate and jitter must be non-negative")


def apd_signal_detector() -> DetectorModel:
    """Short-wavelength avalanche photodiode: 55% efficiency, 60 Hz dark."""
    return DetectorModel(0.55, 60.0, DEFAULT_JITTER_SIGMA, detector_channel=0)


def snspd_idler_detector() -> DetectorModel:
    """Telecom nanowire detector: 65% efficiency, 70 Hz dark."""
    return DetectorModel(0.65, 70.0, DEFAULT_JITTER_SIGMA, detector_channel=1)


def default_signal_leakage() -> dict[int, float]:
    """Filter transmission per mode offset for the 6.1 GHz passband on a
    6.5 GHz comb: Lorentzian weights at 0, +-1, +-2 spacings."""
    return {0: 1.0, 1: 0.181, -1: 0.181, 2: 0.052, -2: 0.052}


@dataclass(frozen=True)
class CollectionPath:
    """Which spectral modes each detection arm accepts, and how strongly.

    ``signal_transmissions`` / ``idler_transmissions`` map absolute mode
    index to a power transmission in [0, 1].  ``excess_idler_loss`` is an
    extra scalar on the idler arm (a lossy pigtail), applied on top of the
    per-mode transmission.
    """

    signal_transmissions: dict[int, float] = field(
        default_factory=default_signal_leakage)
    idler_transmissions: dict[int, float] = field(default_factory=lambda: {0: 1.0})
    excess_idler_loss: float = 1.0

    def __post_init__(self):
        for name, table in (("signal", self.signal_transmissions),
                            ("idler", self.idler_transmissions)):
            for m, t in table.items():
                if not 0.0 <= t <= 1.0:
                    raise ValueError(f"{name} transmission of mode {m} must be "
                                     f"in [0, 1], got {t}")
        if not 0.0 <= self.excess_idler_loss <= 1.0:
            raise ValueError("excess idler loss must be in [0, 1]")

    @classmethod
    def for_modes(cls, signal_mode: int, idler_mode: int,
                  signal_leakage: dict[int, float] | None = None,
                  idler_leakage: dict[int, float] | None = None,
                  excess_idler_loss: float = 1.0) -> "CollectionPath":
        """Path selecting ``signal_mode``/``idler_mode`` with leakage tables
        given as offsets from the selected mode."""
        s_leak = default_signal_leakage() if signal_leakage is None else signal_leakage
        i_leak = {0: 1.0} if idler_leakage is None else idler_leakage
        return cls(signal_transmissions={signal_mode + k: v for k, v in s_leak.items()},
                   idler_transmissions={idler_mode + k: v for k, v in i_leak.items()},
                   excess_idler_loss=excess_idler_loss)

    @property
    def modes(self) -> list[int]:
        return sorted(set(self.signal_transmissions) | set(self.idler_transmissions))


@dataclass(frozen=True)
class RunConfig:
    """One simulated acquisition.

    slot_duration defaults to 1/(pi * mode FWHM) and correlation_decay to
    1/(2 pi * mode FWHM); both can be pinned explicitly (the statistics
    oracles do so to decouple the estimator window from the mode width).
    """

    duration: float                      # [s]
    rng_seed: int = 0
    slot_duration: float | None = None   # [s]
    correlation_decay: float | None = None  # [s]
    max_tags_in_memory: int = 200_000_000

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError(f"duration must be positive, got {self.duration}")
        if self.slot_duration is not None and self.slot_duration <= 0:
            raise ValueError("slot duration must be positive")
        if self.correlation_decay is not None and self.correlation_decay <= 0:
            raise ValueError("correlation decay must be positive")

    def slot_for(self, src: SourceConfig) -> float:
        return self.slot_duration if self.slot_duration is not None \
            else 1.0 / (math.pi * src.mode_fwhm)

    def tau_corr_for(self, src: SourceConfig) -> float:
        return self.correlation_decay if self.correlation_decay is not None \
            else 1.0 / (2.0 * math.pi * src.mode_fwhm)


def _mode_rng(seed: int, mode_index: int, purpose: int) -> np.random.Generator:
    # offset mode indices to keep SeedSequence entries non-negative
    return np.random.default_rng(
        np.random.SeedSequence([seed, purpose, mode_index + 1_000_000]))


def generate_tags(src: SourceConfig, path: CollectionPath,
                  det_s: DetectorModel, det_i: DetectorModel,
                  run: RunConfig) -> tuple[TagStream, TagStream]:
    """Simulate one acquisition; returns the (signal, idler) tag streams.

    Pair emission, thinning, delays, jitter and dark counts as described in
    the module docstring.  Identical (configs, seed) give bit-identical
    streams; each mode owns a seed derived from (run seed, mode index), so
    restricting the mode set does not reshuffle the remaining modes.
    """
    slot_s = run.slot_for(src)
    tau_ps = run.tau_corr_for(src) * PS_PER_S
    slot_ps = slot_s * PS_PER_S
    n_slots = int(run.duration / slot_s)
    if n_slots < 1:
        raise ValueError("duration shorter than one coherence slot")
    duration_ps = int(round(n_slots * slot_ps))

    mu = src.mean_pairs_per_slot
    half_span = (src.mode_count - 1) // 2
    active = [m for m in path.modes if abs(m) <= half_span]
    if len(active) != len(path.modes):
        missing = sorted(set(path.modes) - set(active))
        raise ValueError(f"modes {missing} outside the source comb "
                         f"(mode_count={src.mode_count} spans +-{half_span})")

    expected = 0.0
    for m in active:
        w_s = path.signal_transmissions.get(m, 0.0) * det_s.efficiency
        w_i = (path.idler_transmissions.get(m, 0.0) * det_i.efficiency
               * path.excess_idler_loss)
        expected += n_slots * mu * (w_s + w_i)
    expected += (det_s.dark_rate + det_i.dark_rate) * run.duration
    if expected > run.max_tags_in_memory:
        raise MemoryBudgetError(
            f"expected ~{expected:.3g} tags exceeds the in-memory budget "
            f"({run.max_tags_in_memory:.3g}); shorten the run, thin the "
            f"collection, or raise max_tags_in_memory and stream the output")

    sig_parts, idl_parts = [], []
    for m in active:
        p_sig = path.signal_transmissions.get(m, 0.0) * det_s.efficiency
        p_idl = (path.idler_transmissions.get(m, 0.0) * det_i.efficiency
                 * path.excess_idler_loss)
        if mu <= 0 or (p_sig <= 0 and p_idl <= 0):
            continue
        rng = _mode_rng(run.rng_seed, m, purpose=1)
        pairs = rng.geometric(1.0 / (1.0 + mu), size=n_slots) - 1
        occupied = np.nonzero(pairs)[0]
        counts = pairs[occupied]
        base = np.repeat(occupied.astype(np.float64) * slot_ps + 0.5 * slot_ps,
                         counts)
        keep_s = rng.random(base.size) < p_sig
        keep_i = rng.random(base.size) < p_idl
        t_sig = base[keep_s]
        t_idl = base[keep_i] + rng.laplace(0.0, tau_ps, size=int(keep_i.sum()))
        if det_s.timing_jitter_sigma > 0 and t_sig.size:
            t_sig = t_sig + rng.normal(0.0, det_s.timing_jitter_sigma * PS_PER_S,
                                       size=t_sig.size)
        if det_i.timing_jitter_sigma > 0 and t_idl.size:
            t_idl = t_idl + rng.normal(0.0, det_i.timing_jitter_sigma * PS_PER_S,
                                       size=t_idl.size)
        sig_parts.append(t_sig)
        idl_parts.append(t_idl)

    for det, parts, purpose in ((det_s, sig_parts, 2), (det_i, idl_parts, 3)):
        if det.dark_rate > 0:
            rng = _mode_rng(run.rng_seed, 0, purpose=purpose)
            n_dark = rng.poisson(det.dark_rate * run.duration)
            parts.append(rng.random(n_dark) * duration_ps)

    def finish(parts, channel):
        if parts:
            t = np.concatenate(parts)
            t = t[(t >= 0) & (t < duration_ps)]
            t = np.sort(np.rint(t).astype(np.int64))
        else:
            t = np.empty(0, dtype=np.int64)
        return TagStream(channel, t)

    return finish(sig_parts, det_s.detector_channel), \
        finish(idl_parts, det_i.detector_channel)


# ---------------------------------------------------------------------------
# analytic expectations for the windowed estimators


def _gauss_cdf(x: float, sigma: float) -> float:
    if sigma <= 0:
        return 0.0 if x < 0 else 1.0
    return 0.5 * (1.0 + math.erf(x / (sigma * math.sqrt(2.0))))


def laplace_gauss_cdf(x: float, tau: float, sigma: float) -> float:
    """CDF at x of Laplace(scale tau) convolved with N(0, sigma^2)."""
    if tau <= 0:
        return _gauss_cdf(x, sigma)
    if sigma <= 0:
        return 0.5 * math.exp(x / tau) if x < 0 else 1.0 - 0.5 * math.exp(-x / tau)
    # F(x) = Phi(x/s) - 0.5*exp(s^2/2t^2) * [ exp(-x/t)*Phi(x/s - s/t)
    #                                        - exp(x/t)*Phi(-(x/s + s/t)) ]
    s, t = sigma, tau
    z = x / s
    a = s / t

    def log_phi(u: float) -> float:
        v = 0.5 * math.erfc(-u / math.sqrt(2.0))
        if v > 0:
            return math.log(v)
        return -0.5 * u * u - math.log(-u * math.sqrt(2.0 * math.pi))

    term1 = math.exp(min(0.5 * a * a - x / t + log_phi(z - a), 700.0))
    term2 = math.exp(min(0.5 * a * a + x / t + log_phi(-(z + a)), 700.0))
    return _gauss_cdf(x, s) - 0.5 * (term1 - term2)


def laplace_gauss_interval_mass(lo: float, hi: float, tau: float,
                                sigma: float) -> float:
    """P(lo <= X < hi) for X ~ Laplace(tau) + N(0, sigma^2)."""
    return max(0.0, min(1.0, laplace_gauss_cdf(hi, tau, sigma)
                        - laplace_gauss_cdf(lo, tau, sigma)))


def _comb_capture(window: float, slot: float, tau: float, sigma: float) -> float:
    """Mass of the slot-comb of Laplace+jitter kernels inside +-window/2,
    relative to the flat expectation window/slot."""
    half = window / 2.0
    k_max = int(math.ceil((half + 10.0 * tau + 6.0 * sigma) / slot)) + 1
    total = 0.0
    for k in range(-k_max, k_max + 1):
        total += laplace_gauss_interval_mass(-half - k * slot, half - k * slot,
                                             tau, sigma)
    return total / (window / slot)


def analytic_g2_cross(mu: float, eta_s: float, eta_i: float,
                      dark_s: float, dark_i: float, *,
                      slot: float, tau_corr: float, window: float,
                      jitter_s: float = 0.0, jitter_i: float = 0.0,
                      signal_weights=(1.0,), idler_weights=(1.0,),
                      matched_weight_pairs=None) -> float:
    """Expected windowed cross-correlation for the generator model.

    The ideal single-mode value is 2 + 1/mu; the returned value additionally
    accounts for the finite window (capture of the Laplace-plus-jitter
    kernel), dilution by leaked modes, and accidental/dark contributions
    computed from the singles rates and the window width.  With
    window = slot, tau_corr << window and no darks or leakage it reduces to
    2 + 1/mu up to the kernel tail outside the window.

    ``signal_weights`` and ``idler_weights`` are per-mode transmissions
    (excess loss folded in); ``matched_weight_pairs`` lists the
    (signal, idler) transmission pairs of modes present in both arms
    (defaults to elementwise pairing of the two sequences).
    """
    if mu <= 0 and dark_s <= 0 and dark_i <= 0:
        raise ValueError("need a photon flux or dark counts")
    ws = np.asarray(signal_weights, dtype=float) * eta_s
    wi = np.asarray(idler_weights, dtype=float) * eta_i
    if matched_weight_pairs is None:
        n = min(ws.size, wi.size)
        matched = [(ws[i], wi[i]) for i in range(n)]
    else:
        matched = [(a * eta_s, b * eta_i) for a, b in matched_weight_pairs]
    sigma_tot = math.hypot(jitter_s, jitter_i)
    photon_rate_s = mu * ws.sum() / slot
    photon_rate_i = mu * wi.sum() / slot
    rate_s = photon_rate_s + dark_s
    rate_i = photon_rate_i + dark_i
    if rate_s <= 0 or rate_i <= 0:
        raise ValueError("one detection arm has zero rate")
    capture = laplace_gauss_interval_mass(-window / 2, window / 2,
                                          tau_corr, sigma_tot)
    # per-slot excess pairs: mu (same pair) + mu^2 (same-slot bunching)
    excess_rate = sum(a * b for a, b in matched) * (mu + mu * mu) \
        * capture / slot if mu > 0 else 0.0
    photon_acc_rate = photon_rate_s * photon_rate_i \
        * _comb_capture(window, slot, tau_corr, sigma_tot) * window
    dark_acc_rate = (dark_s * photon_rate_i + dark_i * photon_rate_s
                     + dark_s * dark_i) * window
    coincidence_rate = excess_rate + photon_acc_rate + dark_acc_rate
    return coincidence_rate / (rate_s * rate_i * window)


def _kernel_interval_mass(lo: float, hi: float, kernel_x: np.ndarray,
                          kernel_density: np.ndarray) -> float:
    xs = np.linspace(lo, hi, 257)
    return float(np.trapezoid(np.interp(xs, kernel_x, kernel_density,
                                        left=0.0, right=0.0), xs))


def _pair_delay_kernel(tau: float | None, sigma: float):
    """Density grid of the same-slot pair-delay kernel of one split arm.

    tau None: identical base times, Gaussian jitter difference only.
    tau set: both tags carry independent Laplace delays (idler arm).
    """
    if tau is None:
        span = max(8.0 * sigma, 1e-12)
        xs = np.linspace(-span, span, 2001)
        dens = np.exp(-xs**2 / (2.0 * sigma**2)) / (sigma * math.sqrt(2 * math.pi)) \
            if sigma > 0 else None
        if dens is None:
            return None  # delta kernel: full capture everywhere
        return xs, dens
    span = 12.0 * tau + 8.0 * sigma
    xs = np.linspace(-span, span, 4001)
    dens = (1.0 / (4.0 * tau)) * (1.0 + np.abs(xs) / tau) * np.exp(-np.abs(xs) / tau)
    if sigma > 0:
        step = xs[1] - xs[0]
        half_n = int(math.ceil(5.0 * sigma / step))
        kx = step * np.arange(-half_n, half_n + 1)
        kern = np.exp(-kx**2 / (2.0 * sigma**2))
        kern /= kern.sum()
        dens = np.convolve(dens, kern, mode="same")
    return xs, dens


def analytic_g2_auto(weights, *, slot: float, window: float,
                     jitter: float = 0.0, tau_corr: float | None = None) -> float:
    """Expected windowed auto-correlation of one arm after a 50:50 split.

    A mixture of independent thermal modes with intensity weights w gives
    1 + sum(w^2)/sum(w)^2 when the window matches the slot (2 for a single
    mode).  The jitter-difference kernel and the slot comb of accidentals
    are accounted for, so other windows are predicted correctly too.
    ``tau_corr`` applies on the idler arm, whose tags carry pair delays.
    """
    w = np.asarray(weights, dtype=float)
    if np.all(w <= 0):
        raise ValueError("need at least one transmitting mode")
    sigma = math.sqrt(2.0) * jitter
    kernel = _pair_delay_kernel(tau_corr, sigma)
    half = window / 2.0
    if kernel is None:
        capture = 1.0
        k_max = int(math.floor(half / slot))
        comb = (2 * k_max + 1) / (window / slot)  # delta spikes at k*slot
    else:
        xs, dens = kernel
        capture = _kernel_interval_mass(-half, half, xs, dens)
        reach = xs[-1]
        k_max = int(math.ceil((half + reach) / slot)) + 1
        comb = sum(_kernel_interval_mass(-half - k * slot, half - k * slot,
                                         xs, dens)
                   for k in range(-k_max, k_max + 1)) / (window / slot)
    bunching = (w**2).sum() / (w.sum()) ** 2
    return comb + bunching * capture * (slot / window)


# ---------------------------------------------------------------------------
# classical-field oracle


def classical_pair_streams(rate_a: float, rate_b: float, duration: float,
                           seed: int, *, slot: float = 2.5e-9,
                           depth_a: float = 0.8, depth_b: float = 0.4,
                           channel_a: int = 10, channel_b: int = 11
                           ) -> tuple[TagStream, TagStream]:
    """Two classically intensity-correlated Poisson streams.

    Per slot a common exponential modulation X (mean 1) drives both arms:
    intensity_k = rate * (1 - depth + depth * X_k).  Classical fields obey
    g2 <= 2 and the Cauchy-Schwarz ratio R <= 1; with depth_a != depth_b
    the bound is strict, making this a useful oracle stream.
    """
    if not (0 <= depth_a <= 1 and 0 <= depth_b <= 1):
        raise ValueError("modulation depths must be in [0, 1]")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 99]))
    n_slots = int(duration / slot)
    slot_ps = slot * PS_PER_S
    x = rng.exponential(1.0, size=n_slots)

    def make(rate, depth, channel):
        means = rate * slot * (1.0 - depth + depth * x)
        counts = rng.poisson(means)
        occupied = np.nonzero(counts)[0]
        reps = counts[occupied]
        base = np.repeat(occupied.astype(np.float64) * slot_ps, reps)
        times = base + rng.random(base.size) * slot_ps
        return TagStream(channel, np.sort(np.rint(times).astype(np.int64)))

    return make(rate_a, depth_a, channel_a), make(rate_b, depth_b, channel_b)
