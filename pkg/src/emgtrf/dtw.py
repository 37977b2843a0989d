"""Dynamic time warping of silent-mode envelopes onto aloud references.

``dtw_exact`` fills the full cost matrix and serves as the oracle for
``fastdtw``, the multiresolution approximation (coarsen by pairwise
averaging, solve, project the path one level up, widen by ``radius``,
refine inside that window). Both share one banded dynamic-programming
kernel, where the band is given per row as inclusive column bounds.

Paths are arrays of ``(reference_index, query_index)`` pairs; with the
aloud trial as reference this is ``(aloud_index, silent_index)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numba
import numpy as np

from .errors import DataError
from .series import MultiChannelSeries

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class WarpPath:
    pairs: np.ndarray
    cost: float
    radius: int | None = None

    def __post_init__(self):
        pairs = np.asarray(self.pairs, dtype=np.int64).reshape(-1, 2)
        object.__setattr__(self, "pairs", pairs)

    def __len__(self):
        return self.pairs.shape[0]

    def is_valid(self, n_ref: int, n_query: int) -> bool:
        """Starts at (0, 0), ends at the corner, unit monotone steps."""
        p = self.pairs
        if p.shape[0] == 0 or tuple(p[0]) != (0, 0) or tuple(p[-1]) != (n_ref - 1, n_query - 1):
            return False
        steps = np.diff(p, axis=0)
        return bool(np.all((steps >= 0) & (steps <= 1)) and np.all(steps.sum(axis=1) >= 1))


@dataclass(frozen=True)
class DtwConfig:
    radius: int = 30
    fallback_radius: int = 20
    local_cost: str = "euclidean"
    cell_budget: float = 5e7

    def __post_init__(self):
        if self.radius < 1 or self.fallback_radius < 1:
            raise ValueError("radii must be positive")
        if self.fallback_radius > self.radius:
            raise ValueError("fallback_radius must not exceed radius")
        if self.local_cost != "euclidean":
            raise ValueError(f"unsupported local cost {self.local_cost!r}")


@numba.njit(cache=True)
def _banded_dtw(a, b, lo, hi):
    n = a.shape[0]
    n_ch = a.shape[1]
    offsets = np.zeros(n + 1, dtype=np.int64)
    for i in range(n):
        offsets[i + 1] = offsets[i] + hi[i] - lo[i] + 1
    acc = np.empty(offsets[n], dtype=np.float64)

    for i in range(n):
        for j in range(lo[i], hi[i] + 1):
            d = 0.0
            for c in range(n_ch):
                diff = a[i, c] - b[j, c]
                d += diff * diff
            d = np.sqrt(d)
            if i == 0 and j == 0:
                acc[0] = d
                continue
            best = np.inf
            if i > 0:
                if lo[i - 1] <= j - 1 <= hi[i - 1]:
                    v = acc[offsets[i - 1] + j - 1 - lo[i - 1]]
                    if v < best:
                        best = v
                if lo[i - 1] <= j <= hi[i - 1]:
                    v = acc[offsets[i - 1] + j - lo[i - 1]]
                    if v < best:
                        best = v
            if j - 1 >= lo[i]:
                v = acc[offsets[i] + j - 1 - lo[i]]
                if v < best:
                    best = v
            acc[offsets[i] + j - lo[i]] = d + best

    # backtrack; ties prefer the diagonal, then the reference-advancing step
    m = b.shape[0]
    path = np.empty((n + m, 2), dtype=np.int64)
    k = 0
    i = n - 1
    j = m - 1
    path[k, 0] = i
    path[k, 1] = j
    k += 1
    while i > 0 or j > 0:
        best = np.inf
        bi = -1
        bj = -1
        if i > 0 and j > 0 and lo[i - 1] <= j - 1 <= hi[i - 1]:
            v = acc[offsets[i - 1] + j - 1 - lo[i - 1]]
            if v < best:
                best = v
                bi = i - 1
                bj = j - 1
        if i > 0 and lo[i - 1] <= j <= hi[i - 1]:
            v = acc[offsets[i - 1] + j - lo[i - 1]]
            if v < best:
                best = v
                bi = i - 1
                bj = j
        if j > 0 and j - 1 >= lo[i]:
            v = acc[offsets[i] + j - 1 - lo[i]]
            if v < best:
                best = v
                bi = i
                bj = j - 1
        i = bi
        j = bj
        path[k, 0] = i
        path[k, 1] = j
        k += 1
    cost = acc[offsets[n] - 1]
    return cost, path[:k][::-1].copy()


def _frames(x) -> np.ndarray:
    if isinstance(x, MultiChannelSeries):
        return np.ascontiguousarray(x.data)
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    return np.ascontiguousarray(arr)


def _check_pair(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise DataError("DTW inputs must be nonempty")
    if a.shape[1] != b.shape[1]:
        raise DataError(f"channel-count mismatch: {a.shape[1]} vs {b.shape[1]}")


def _full_window(n, m):
    return np.zeros(n, dtype=np.int64), np.full(n, m - 1, dtype=np.int64)


def dtw_exact(a, b) -> WarpPath:
    """Globally optimal alignment of ``b`` onto ``a`` under Euclidean frame cost."""
    a, b = _frames(a), _frames(b)
    _check_pair(a, b)
    cost, pairs = _banded_dtw(a, b, *_full_window(a.shape[0], b.shape[0]))
    return WarpPath(pairs, float(cost))


def path_cost(a, b, pairs) -> float:
    """Sum of Euclidean frame distances along ``pairs``."""
    a, b = _frames(a), _frames(b)
    pairs = np.asarray(pairs)
    return float(np.linalg.norm(a[pairs[:, 0]] - b[pairs[:, 1]], axis=1).sum())


def _halve(x: np.ndarray) -> np.ndarray:
    n = x.shape[0]
    even = n - n % 2
    out = 0.5 * (x[0:even:2] + x[1:even:2])
    if n % 2:
        out = np.vstack([out, x[-1:]])
    return out


def _expand_window(coarse_pairs, n, m, radius):
    """Project a coarse path to full resolution and widen it by ``radius``."""
    lo = np.full(n, m, dtype=np.int64)
    hi = np.full(n, -1, dtype=np.int64)
    for ci, cj in coarse_pairs:
        j0, j1 = 2 * cj, min(2 * cj + 1, m - 1)
        for r in (2 * ci, 2 * ci + 1):
            if r < n:
                lo[r] = min(lo[r], j0)
                hi[r] = max(hi[r], j1)
    # sliding min/max over rows, then widen columns
    lo_w = np.empty_like(lo)
    hi_w = np.empty_like(hi)
    for r in range(n):
        r0, r1 = max(0, r - radius), min(n, r + radius + 1)
        lo_w[r] = lo[r0:r1].min()
        hi_w[r] = hi[r0:r1].max()
    lo_w = np.clip(lo_w - radius, 0, m - 1)
    hi_w = np.clip(hi_w + radius, 0, m - 1)
    return lo_w, hi_w


def _fastdtw(a, b, radius):
    n, m = a.shape[0], b.shape[0]
    if min(n, m) < radius + 2 or max(n, m) <= 2 * radius:
        return _banded_dtw(a, b, *_full_window(n, m))
    _, coarse = _fastdtw(_halve(a), _halve(b), radius)
    lo, hi = _expand_window(coarse, n, m, radius)
    return _banded_dtw(a, b, lo, hi)


def window_cells(n: int, m: int, radius: int) -> int:
    """Rough upper bound on the cells of the finest FastDTW window."""
    return int(min(n * m, (n + m) * (4 * radius + 4)))


def fastdtw(a, b, cfg: DtwConfig = DtwConfig()) -> WarpPath:
    """FastDTW approximation of :func:`dtw_exact`.

    Falls back to ``cfg.fallback_radius`` when the window at ``cfg.radius``
    would exceed ``cfg.cell_budget`` cells.
    """
    a, b = _frames(a), _frames(b)
    _check_pair(a, b)
    n, m = a.shape[0], b.shape[0]
    radius = cfg.radius
    if window_cells(n, m, radius) > cfg.cell_budget and cfg.fallback_radius < radius:
        log.info("DTW window %dx%d over budget at radius %d; using %d",
                 n, m, radius, cfg.fallback_radius)
        radius = cfg.fallback_radius
    cost, pairs = _fastdtw(a, b, radius)
    return WarpPath(pairs, float(cost), radius)


def warp_to_reference(silent, path: WarpPath, ref_len: int) -> MultiChannelSeries | np.ndarray:
    """Resample ``silent`` onto the reference time base along ``path``.

    Output frame ``i`` is the mean of the silent frames the path maps to
    reference index ``i``.
    """
    data = _frames(silent)
    pairs = path.pairs
    ref_idx, q_idx = pairs[:, 0], pairs[:, 1]
    if pairs.size == 0 or ref_idx.min() < 0 or q_idx.min() < 0:
        raise DataError("warp path has negative or no indices")
    if ref_idx.max() >= ref_len or q_idx.max() >= data.shape[0]:
        raise DataError("warp path indexes beyond the reference or silent series")
    counts = np.bincount(ref_idx, minlength=ref_len)
    if np.any(counts == 0):
        raise DataError("warp path does not cover every reference frame")
    sums = np.zeros((ref_len, data.shape[1]))
    np.add.at(sums, ref_idx, data[q_idx])
    out = sums / counts[:, None]
    if isinstance(silent, MultiChannelSeries):
        return silent.replace(out)
    return out


def align_to_reference(silent: MultiChannelSeries, aloud: MultiChannelSeries,
                       cfg: DtwConfig = DtwConfig()) -> tuple[MultiChannelSeries, WarpPath]:
    """Warp a (z-scored) silent envelope onto its paired aloud envelope."""
    path = fastdtw(aloud.data, silent.data, cfg)
    return warp_to_reference(silent, path, aloud.n_samples), path
