"""Raw EMG to 50 Hz envelopes: band-pass, notch comb, Hilbert envelope,
anti-aliased decimation and per-channel standardization.

All filters run forward-backward (zero phase); any group delay would shift
the lag structure the encoding model is trying to estimate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal

from .errors import ConstantChannelError, DataError, InvalidSpecError
from .series import MultiChannelSeries


@dataclass(frozen=True)
class FilterSpec:
    """Band-pass and notch-comb settings.

    ``notch_q`` is the quality factor of the fundamental notch. Harmonics keep
    the fundamental's absolute bandwidth (``notch_base_hz / notch_q``) so that
    tones a few Hz away from any harmonic pass untouched.
    """

    band_low_hz: float = 10.0
    band_high_hz: float = 450.0
    notch_base_hz: float = 60.0
    notch_max_hz: float = 450.0
    notch_q: float = 30.0
    butterworth_order: int = 4

    def validate(self, sample_rate_hz: float) -> None:
        nyquist = sample_rate_hz / 2.0
        if not 0 < self.band_low_hz < self.band_high_hz < nyquist:
            raise InvalidSpecError(
                f"band {self.band_low_hz}-{self.band_high_hz} Hz invalid for Nyquist {nyquist} Hz"
            )
        if self.notch_base_hz <= 0:
            raise InvalidSpecError("notch_base_hz must be positive")
        if self.notch_q <= 0:
            raise InvalidSpecError("notch_q must be positive")
        if self.butterworth_order < 1:
            raise InvalidSpecError("butterworth_order must be a positive integer")

    def notch_frequencies(self) -> np.ndarray:
        n = int(np.floor(self.notch_max_hz / self.notch_base_hz + 1e-9))
        return self.notch_base_hz * np.arange(1, n + 1)

    @property
    def notch_bandwidth_hz(self) -> float:
        return self.notch_base_hz / self.notch_q


def _filtfilt(sos, data, n_poles):
    # reflect-pad by 3x the filter order; short inputs get what they can hold
    padlen = min(3 * n_poles, data.shape[0] - 1)
    return signal.sosfiltfilt(sos, data, axis=0, padtype="even", padlen=padlen)


def bandpass_sos(spec: FilterSpec, sample_rate_hz: float) -> np.ndarray:
    spec.validate(sample_rate_hz)
    return signal.butter(
        spec.butterworth_order,
        [spec.band_low_hz, spec.band_high_hz],
        btype="bandpass",
        fs=sample_rate_hz,
        output="sos",
    )


def notch_sos(spec: FilterSpec, sample_rate_hz: float) -> np.ndarray:
    spec.validate(sample_rate_hz)
    freqs = spec.notch_frequencies()
    if freqs.size == 0:
        raise InvalidSpecError("notch_max_hz is below notch_base_hz; no notches to apply")
    if freqs[-1] >= sample_rate_hz / 2.0:
        raise InvalidSpecError(
            f"notch at {freqs[-1]} Hz is not below Nyquist {sample_rate_hz / 2.0} Hz"
        )
    bw = spec.notch_bandwidth_hz
    sections = []
    for f0 in freqs:
        b, a = signal.iirnotch(f0, f0 / bw, fs=sample_rate_hz)
        sections.append(signal.tf2sos(b, a))
    return np.vstack(sections)


def bandpass_filter(x: MultiChannelSeries, spec: FilterSpec = FilterSpec()) -> MultiChannelSeries:
    """Zero-phase Butterworth band-pass."""
    sos = bandpass_sos(spec, x.sample_rate_hz)
    return x.replace(_filtfilt(sos, x.data, 2 * spec.butterworth_order))


def notch_comb(x: MultiChannelSeries, spec: FilterSpec = FilterSpec()) -> MultiChannelSeries:
    """Zero-phase cascade of second-order notches at the line frequency and its harmonics."""
    sos = notch_sos(spec, x.sample_rate_hz)
    # Narrow notches ring for ~1/bandwidth seconds; pad long enough that the
    # ringing dies out inside the padding rather than on the signal.
    n = x.n_samples
    padlen = min(n - 1, int(np.ceil(3.0 * x.sample_rate_hz / spec.notch_bandwidth_hz)))
    out = signal.sosfiltfilt(sos, x.data, axis=0, padtype="odd", padlen=padlen)
    return x.replace(out)


def hilbert_envelope(x: MultiChannelSeries) -> MultiChannelSeries:
    """Magnitude of the FFT-based analytic signal, per channel."""
    if x.n_samples == 0:
        raise DataError("cannot take the envelope of an empty series")
    return x.replace(np.abs(signal.hilbert(x.data, axis=0)))


def decimate(x: MultiChannelSeries, target_rate_hz: float, order: int = 8) -> MultiChannelSeries:
    """Low-pass at 0.8 x the target Nyquist, then keep every k-th sample."""
    ratio = x.sample_rate_hz / target_rate_hz
    k = int(round(ratio))
    if k < 1 or abs(ratio - k) > 1e-9 * ratio:
        raise DataError(
            f"sample rate {x.sample_rate_hz} Hz is not an integer multiple of {target_rate_hz} Hz"
        )
    if k == 1:
        return x.replace(x.data, target_rate_hz)
    cutoff = 0.8 * target_rate_hz / 2.0
    sos = signal.butter(order, cutoff, btype="lowpass", fs=x.sample_rate_hz, output="sos")
    padlen = min(3 * order, x.n_samples - 1)
    smooth = signal.sosfiltfilt(sos, x.data, axis=0, padtype="odd", padlen=padlen)
    return x.replace(smooth[::k], target_rate_hz)


def zscore_per_channel(x: MultiChannelSeries) -> MultiChannelSeries:
    """Standardize each channel with the population (1/N) standard deviation."""
    data = x.data
    mean = data.mean(axis=0)
    std = data.std(axis=0)
    for name, m, s in zip(x.channel_names, mean, std):
        if not s > 1e-12 * max(1.0, abs(m)):
            raise ConstantChannelError(name)
    return x.replace((data - mean) / std)


def emg_to_envelope(
    raw: MultiChannelSeries,
    spec: FilterSpec = FilterSpec(),
    target_rate_hz: float = 50.0,
) -> MultiChannelSeries:
    """Full chain: band-pass, notch comb, envelope, decimate, z-score."""
    x = bandpass_filter(raw, spec)
    x = notch_comb(x, spec)
    x = hilbert_envelope(x)
    x = decimate(x, target_rate_hz)
    return zscore_per_channel(x)
