"""Uniformly sampled multichannel series, the common currency of the pipeline."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class MultiChannelSeries:
    """Real-valued samples of shape ``(time, channel)`` at ``sample_rate_hz``.

    The array is copied and made read-only on construction so instances can
    be shared freely between threads.
    """

    data: np.ndarray
    sample_rate_hz: float
    channel_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64)
        if data.ndim == 1:
            data = data[:, None]
        if data.ndim != 2:
            raise DataError(f"series data must be 2-D (time, channel), got {data.ndim}-D")
        if not np.all(np.isfinite(data)):
            raise DataError("series contains NaN or Inf")
        if not self.sample_rate_hz > 0:
            raise DataError(f"sample rate must be positive, got {self.sample_rate_hz}")
        names = tuple(self.channel_names) or tuple(f"ch{i + 1}" for i in range(data.shape[1]))
        if len(names) != data.shape[1]:
            raise DataError(f"{len(names)} channel names for {data.shape[1]} channels")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "sample_rate_hz", float(self.sample_rate_hz))
        object.__setattr__(self, "channel_names", names)

    @property
    def n_samples(self) -> int:
        return self.data.shape[0]

    @property
    def n_channels(self) -> int:
        return self.data.shape[1]

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.sample_rate_hz

    def replace(self, data, sample_rate_hz=None) -> MultiChannelSeries:
        """Same channel names, new samples (and optionally a new rate)."""
        rate = self.sample_rate_hz if sample_rate_hz is None else sample_rate_hz
        return MultiChannelSeries(data, rate, self.channel_names)

    def slice_frames(self, start: int, stop: int) -> MultiChannelSeries:
        return self.replace(self.data[start:stop])
