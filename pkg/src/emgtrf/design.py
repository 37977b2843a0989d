"""Time-lagged design matrices.

Columns are lag-major: block ``j`` holds every feature shifted by lag
``j``, i.e. ``[X(t - tau_1) | ... | X(t - tau_L)]``. A positive lag reads the
feature *before* the response sample. Samples shifted in from outside the
trial are zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .features import FeatureMatrix


@dataclass(frozen=True)
class LagSpec:
    min_ms: float = -300.0
    max_ms: float = 300.0
    step_ms: float = 20.0
    sample_rate_hz: float = 50.0

    def __post_init__(self):
        if abs(self.step_ms * self.sample_rate_hz - 1000.0) > 1e-6:
            raise ValueError("lag step must equal one sample (step_ms * rate_hz == 1000)")
        if not self.min_ms <= 0 <= self.max_ms:
            raise ValueError("lag window must contain zero")
        span = (self.max_ms - self.min_ms) / self.step_ms
        if abs(span - round(span)) > 1e-9:
            raise ValueError("lag window is not a whole number of steps")

    @property
    def n_lags(self) -> int:
        return int(round((self.max_ms - self.min_ms) / self.step_ms)) + 1

    @property
    def lags_samples(self) -> np.ndarray:
        first = int(round(self.min_ms / self.step_ms))
        return np.arange(first, first + self.n_lags)

    @property
    def lags_ms(self) -> np.ndarray:
        return self.lags_samples * self.step_ms


@dataclass(frozen=True)
class LaggedDesign:
    matrix: np.ndarray
    n_features: int
    lags_ms: np.ndarray
    feature_names: tuple[str, ...] = ()

    @property
    def n_lags(self) -> int:
        return len(self.lags_ms)

    def column(self, feature: int, lag_ms: float) -> int:
        j = int(np.flatnonzero(np.isclose(self.lags_ms, lag_ms))[0])
        return j * self.n_features + feature


def lag_matrix(x: np.ndarray, lags_samples) -> np.ndarray:
    """Raw-array core of :func:`build_lagged`."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    T, F = x.shape
    lags = np.asarray(lags_samples, dtype=np.int64)
    out = np.zeros((T, F * lags.size))
    for j, s in enumerate(lags):
        block = slice(j * F, (j + 1) * F)
        if s >= T or -s >= T:
            continue
        if s >= 0:
            out[s:, block] = x[: T - s]
        else:
            out[: T + s, block] = x[-s:]
    return out


def build_lagged(x, spec: LagSpec = LagSpec()) -> LaggedDesign:
    """Lagged design ``X_lag[t, col(f, tau)] = x[t - tau, f]`` for one trial."""
    names = ()
    if isinstance(x, FeatureMatrix):
        if abs(x.sample_rate_hz - spec.sample_rate_hz) > 1e-9:
            raise DataError(f"features at {x.sample_rate_hz} Hz, lags defined at {spec.sample_rate_hz} Hz")
        names = x.feature_names
        x = x.data
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] <= spec.n_lags:
        raise DataError(f"trial of {x.shape[0]} frames is too short for {spec.n_lags} lags")
    return LaggedDesign(lag_matrix(x, spec.lags_samples), x.shape[1], spec.lags_ms, names)


def build_lagged_trials(trials, spec: LagSpec = LagSpec()) -> np.ndarray:
    """Stack per-trial designs so no lag reaches across a trial boundary."""
    return np.vstack([build_lagged(x, spec).matrix for x in trials])


def reshape_weights(w, n_features: int, n_lags: int) -> np.ndarray:
    """Flat weight vector to a ``(feature, lag)`` matrix."""
    w = np.asarray(w)
    if w.shape[-1] != n_features * n_lags:
        raise DataError(f"{w.shape[-1]} weights do not match {n_features} features x {n_lags} lags")
    return np.swapaxes(w.reshape(*w.shape[:-1], n_lags, n_features), -1, -2)


def flatten_weights(W) -> np.ndarray:
    """Inverse of :func:`reshape_weights`."""
    W = np.asarray(W)
    return np.swapaxes(W, -1, -2).reshape(*W.shape[:-2], -1)
