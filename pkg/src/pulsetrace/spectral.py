"""Motion-aware spectral peak picking and narrow band-pass filtering.

One window of raw rPPG plus the three head-orientation traces go in. The
averaged orientation spectrum is scaled to the rPPG spectrum and
subtracted. The strongest remaining in-band bin sets the centre of a
zero-phase band-pass that is applied to the unmodified raw rPPG.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptySpectrum, LengthMismatch, TooShort

BAND_LOW_HZ = 0.7
BAND_HIGH_HZ = 4.0
NARROW_BANDWIDTH_HZ = 0.47
# pulse rates accepted as a lock; 4 Hz is 240 bpm, above the 200 bpm ceiling
LOCK_MIN_BPM = 42.0
LOCK_MAX_BPM = 200.0


@dataclass
class AmplitudeSpectrum:
    magnitudes: np.ndarray
    fs: float
    n_fft: int

    @property
    def resolution(self) -> float:
        return self.fs / self.n_fft

    @property
    def freqs(self) -> np.ndarray:
        return np.fft.rfftfreq(self.n_fft, 1.0 / self.fs)

    def replace(self, magnitudes) -> "AmplitudeSpectrum":
        return AmplitudeSpectrum(np.asarray(magnitudes, dtype=float), self.fs, self.n_fft)


@dataclass
class FilteredBvpWindow:
    values: np.ndarray
    fs: int
    t_start: float
    f0: float


def amplitude_spectrum(x, fs) -> AmplitudeSpectrum:
    """One-sided |DFT| of ``x`` (no taper, no scaling)."""
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        raise TooShort(f"need at least 2 samples, got {x.size}")
    return AmplitudeSpectrum(np.abs(np.fft.rfft(x)), fs, x.size)


def _check_same(*spectra):
    sizes = {s.magnitudes.shape for s in spectra}
    if len(sizes) != 1:
        raise LengthMismatch(f"spectra have different bin counts: {sorted(sizes)}")


def combine_motion_spectra(pitch, roll, yaw) -> AmplitudeSpectrum:
    _check_same(pitch, roll, yaw)
    return pitch.replace((pitch.magnitudes + roll.magnitudes + yaw.magnitudes) / 3.0)


def _band_mask(spec, low, high):
    f = spec.freqs
    return (f >= low) & (f <= high)


def suppress_motion(rppg, motion, low=BAND_LOW_HZ, high=BAND_HIGH_HZ) -> AmplitudeSpectrum:
    """Subtract the motion spectrum after matching its in-band peak to the rPPG one."""
    _check_same(rppg, motion)
    band = _band_mask(rppg, low, high)
    if not band.any():
        return rppg.replace(rppg.magnitudes.copy())
    motion_peak = motion.magnitudes[band].max()
    if motion_peak <= 0:
        return rppg.replace(rppg.magnitudes.copy())
    scale = rppg.magnitudes[band].max() / motion_peak
    return rppg.replace(np.maximum(rppg.magnitudes - scale * motion.magnitudes, 0.0))


def band_limit(spec, low=BAND_LOW_HZ, high=BAND_HIGH_HZ) -> AmplitudeSpectrum:
    return spec.replace(np.where(_band_mask(spec, low, high), spec.magnitudes, 0.0))


def dominant_frequency(spec) -> float:
    """Centre frequency of the largest bin; ties go to the lower frequency."""
    mags = spec.magnitudes
    if mags.size == 0 or not mags.max() > 0:
        raise EmptySpectrum("no energy in band")
    return float(spec.freqs[int(np.argmax(mags))])


def peak_position(spec, k: int) -> float:
    """Sub-bin estimate of the tone frequency behind bin ``k``.

    Uses the larger neighbour's share of the two-bin magnitude, which is
    the right interpolator for an untapered (rectangular) DFT.
    """
    m = spec.magnitudes
    left = m[k - 1] if k > 0 else 0.0
    right = m[k + 1] if k < m.size - 1 else 0.0
    if right >= left:
        delta = right / (m[k] + right) if m[k] + right > 0 else 0.0
    else:
        delta = -left / (m[k] + left)
    return float((k + delta) * spec.resolution)


def locate_pulse(spec, low=BAND_LOW_HZ, high=BAND_HIGH_HZ,
                 lock_min_bpm=LOCK_MIN_BPM, lock_max_bpm=LOCK_MAX_BPM) -> float:
    """Band-limit ``spec`` and return the dominant in-band frequency.

    The strongest bin is rejected (``EmptySpectrum``) when the interpolated
    peak lies outside the accepted pulse-rate range. This happens when
    the bin is only the leakage skirt of a tone just outside the band.
    """
    limited = band_limit(spec, low, high)
    f0 = dominant_frequency(limited)
    k = int(round(f0 / spec.resolution))
    f_peak = peak_position(spec, k)
    if not lock_min_bpm / 60.0 <= f_peak <= lock_max_bpm / 60.0:
        raise EmptySpectrum(f"peak at {f_peak * 60:.1f} bpm is outside the pulse range")
    return f0


def passband_weights(freqs, f0, bandwidth, resolution) -> np.ndarray:
    """1 inside ``f0 +/- bandwidth/2``, raised-cosine roll-off over one bin."""
    dist = np.abs(np.asarray(freqs) - f0) - bandwidth / 2.0
    w = np.zeros_like(dist)
    w[dist <= 0] = 1.0
    edge = (dist > 0) & (dist < resolution)
    w[edge] = 0.5 * (1.0 + np.cos(np.pi * dist[edge] / resolution))
    return w


def narrow_bandpass(raw, f0, bandwidth=NARROW_BANDWIDTH_HZ) -> FilteredBvpWindow:
    """Zero-phase band-pass of ``raw.values`` centred at ``f0`` Hz."""
    x = np.asarray(raw.values, dtype=float)
    n = x.size
    freqs = np.fft.rfftfreq(n, 1.0 / raw.fs)
    w = passband_weights(freqs, f0, bandwidth, raw.fs / n)
    y = np.fft.irfft(np.fft.rfft(x) * w, n)
    return FilteredBvpWindow(y, raw.fs, raw.t_start, float(f0))


def wideband_gain(spec, suppressed, low, high) -> np.ndarray:
    """Per-bin gain mapping the raw spectrum onto the motion-suppressed one, band-limited."""
    gain = np.divide(suppressed.magnitudes, spec.magnitudes,
                     out=np.zeros_like(spec.magnitudes), where=spec.magnitudes > 0)
    return gain * passband_weights(spec.freqs, (low + high) / 2.0, high - low, spec.resolution)


def filter_window(raw, orientation, *, suppress=True, low=BAND_LOW_HZ, high=BAND_HIGH_HZ,
                  bandwidth=NARROW_BANDWIDTH_HZ, lock_min_bpm=LOCK_MIN_BPM,
                  lock_max_bpm=LOCK_MAX_BPM) -> FilteredBvpWindow:
    """Full per-window filtering; raises ``EmptySpectrum`` when no pulse is found."""
    spec = amplitude_spectrum(raw.values, raw.fs)
    if suppress:
        motion = combine_motion_spectra(*(amplitude_spectrum(o, raw.fs) for o in orientation))
        spec = suppress_motion(spec, motion, low, high)
    f0 = locate_pulse(spec, low, high, lock_min_bpm, lock_max_bpm)
    return narrow_bandpass(raw, f0, bandwidth)
