"""Photon records -> binary telegraph signal -> power spectrum -> SNR.

Frequencies are in cycles per unit time (units of gamma22/2pi). Spectra are
one-sided power spectral densities of the mean-removed binary series, so
that ``sum(power) * df`` equals the series variance (window-gain corrected).
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import welch


class SpectrumError(ValueError):
    """Spectral estimate cannot be formed or evaluated with these settings."""


class ThresholdError(ValueError):
    """Binarization threshold is below one photon count."""


@dataclass(frozen=True)
class IntensitySeries:
    bin_width: float
    counts: np.ndarray

    def __post_init__(self):
        if not self.bin_width > 0:
            raise ValueError("bin_width must be > 0")


@dataclass(frozen=True)
class BinarySeries:
    bin_width: float
    values: np.ndarray


@dataclass(frozen=True)
class Spectrum:
    frequencies: np.ndarray
    power: np.ndarray
    segments_averaged: int

    @property
    def df(self) -> float:
        return float(self.frequencies[1] - self.frequencies[0])

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("frequency,power\n")
        for f, p in zip(self.frequencies.tolist(), self.power.tolist()):
            buf.write(f"{f!r},{p!r}\n")
        return buf.getvalue()


@dataclass(frozen=True)
class HarmonicPeak:
    k: int
    frequency: float
    peak: float
    background: float
    snr: float


def bin_counts(record, bin_width: float) -> IntensitySeries:
    """Photon counts in ``[k dt, (k+1) dt)``; the trailing partial bin is dropped."""
    if not bin_width > 0:
        raise ValueError("bin_width must be > 0")
    n_bins = int(math.floor(record.horizon / bin_width * (1 + 1e-12)))
    times = np.asarray(record.emission_times)
    idx = np.floor(times / bin_width).astype(np.int64)
    idx = idx[(idx >= 0) & (idx < n_bins)]
    counts = np.bincount(idx, minlength=n_bins)[:n_bins]
    return IntensitySeries(bin_width, counts)


def threshold_counts(params, bin_width: float, threshold_fraction: float = 0.1) -> float:
    """Count threshold: a fraction of the bright-period intensity gamma22/2."""
    return threshold_fraction * (params.gamma22 / 2.0) * bin_width


def binarize(series: IntensitySeries, params, threshold_fraction: float = 0.1) -> BinarySeries:
    """1 where the bin count reaches ``threshold_fraction`` of the bright intensity.

    Raises
    ------
    ThresholdError
        If the threshold is below one count; the bins are then too short to
        separate bright from dark reliably.
    """
    if not 0 < threshold_fraction < 1:
        raise ValueError("threshold_fraction must lie in (0, 1)")
    thr = threshold_counts(params, series.bin_width, threshold_fraction)
    if thr < 1.0:
        min_width = 1.0 / (threshold_fraction * params.gamma22 / 2.0)
        raise ThresholdError(
            f"threshold {thr:.3g} counts is below one photon; use bin_width >= {min_width:.4g}")
    values = (np.asarray(series.counts) >= thr).astype(np.int8)
    return BinarySeries(series.bin_width, values)


def power_spectrum(series: BinarySeries, segment_length: int, overlap_fraction: float = 0.5,
                   window: str = "hann") -> Spectrum:
    """Welch estimate: mean-removed, windowed, overlap-averaged periodogram."""
    L = int(segment_length)
    n = len(series.values)
    if L < 2 or L & (L - 1):
        raise SpectrumError("segment_length must be a power of two")
    if n < L:
        raise SpectrumError(f"series of {n} bins is shorter than one segment ({L})")
    if not 0 <= overlap_fraction < 1:
        raise SpectrumError("overlap_fraction must lie in [0, 1)")
    noverlap = int(round(overlap_fraction * L))
    freqs, power = welch(np.asarray(series.values, dtype=float), fs=1.0 / series.bin_width,
                         window="boxcar" if window == "rectangular" else window,
                         nperseg=L, noverlap=noverlap, detrend="constant",
                         scaling="density", return_onesided=True)
    n_seg = 1 + (n - L) // (L - noverlap)
    return Spectrum(freqs, power, n_seg)


def average_spectra(spectra) -> Spectrum:
    """Segment-weighted mean of spectra sharing one frequency grid."""
    spectra = list(spectra)
    total = sum(s.segments_averaged for s in spectra)
    acc = np.zeros_like(spectra[0].power)
    for s in spectra:
        acc = acc + s.power * s.segments_averaged
    return Spectrum(spectra[0].frequencies, acc / total, total)


def peak_and_background(spectrum: Spectrum, f0: float, guard_bins: int = 2,
                        background_window: int = 20) -> tuple[float, float]:
    power = spectrum.power
    k0 = int(round(f0 / spectrum.df))
    lo = k0 - guard_bins - background_window
    hi = k0 + guard_bins + background_window
    if k0 < 1 or lo < 1 or hi >= len(power):
        raise SpectrumError(
            f"frequency {f0:.6g} with guard {guard_bins} and window {background_window} "
            "does not fit the spectral grid")
    peak = float(power[k0 - 1:k0 + 2].max())
    side = np.concatenate([power[lo:k0 - guard_bins], power[k0 + guard_bins + 1:hi + 1]])
    return peak, float(np.median(side))


def snr_at(spectrum: Spectrum, f0: float, guard_bins: int = 2,
           background_window: int = 20) -> float:
    """Ratio of the spectral peak at ``f0`` to the median local background."""
    peak, background = peak_and_background(spectrum, f0, guard_bins, background_window)
    if background <= 0:
        raise SpectrumError("background unresolved; increase record length")
    return peak / background


def harmonic_report(spectrum: Spectrum, f_m: float, n_harmonics: int, guard_bins: int = 2,
                    background_window: int = 20) -> list[HarmonicPeak]:
    nyquist = spectrum.frequencies[-1]
    if n_harmonics * f_m > nyquist * (1 + 1e-12):
        raise SpectrumError(f"{n_harmonics} harmonics of {f_m:.6g} exceed Nyquist {nyquist:.6g}")
    out = []
    for k in range(1, n_harmonics + 1):
        peak, bg = peak_and_background(spectrum, k * f_m, guard_bins, background_window)
        if bg <= 0:
            raise SpectrumError("background unresolved; increase record length")
        out.append(HarmonicPeak(k, k * f_m, peak, bg, peak / bg))
    return out


def harmonics_csv(report) -> str:
    buf = io.StringIO()
    buf.write("k,frequency,peak,background,snr\n")
    for h in report:
        buf.write(f"{h.k},{h.frequency!r},{h.peak!r},{h.background!r},{h.snr!r}\n")
    return buf.getvalue()


def spectrum_from_csv(text: str) -> Spectrum:
    data = np.loadtxt(io.StringIO(text), delimiter=",", skiprows=1, ndmin=2)
    return Spectrum(data[:, 0], data[:, 1], 0)
