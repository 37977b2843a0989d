"""Permutation chance levels, Wilcoxon signed-rank tests and BH-FDR control."""

from __future__ import annotations

import warnings
import zlib
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps

from .errors import DataError
from .features import FRAME_RATE_HZ, PhonemeAlignment

EXACT_MAX_N = 25


@dataclass
class NullDistribution:
    values: np.ndarray
    threshold_95: float
    n_permutations: int

    @classmethod
    def from_values(cls, values) -> NullDistribution:
        values = np.asarray(values, dtype=np.float64)
        return cls(values, float(np.percentile(values, 95)), values.size)


@dataclass
class TestResult:
    statistic: float
    p_value: float
    n: int
    exact: bool
    significant_after_fdr: bool | None = None
    q_level: float | None = None

    __test__ = False  # not a pytest class


def span_blocks(align: PhonemeAlignment, n_frames: int, start_frame: int = 0,
                rate_hz: float = FRAME_RATE_HZ) -> np.ndarray:
    """Block id per frame of ``[start_frame, start_frame + n_frames)``.

    Blocks are the runs of frames owned by one alignment span; frames no
    span covers form their own runs.
    """
    owner = align.frame_span_index(start_frame + n_frames, rate_hz)[start_frame:]
    change = np.r_[True, owner[1:] != owner[:-1]]
    return np.cumsum(change) - 1


def _block_orders(blocks: np.ndarray, n_perm: int, rng: np.random.Generator) -> np.ndarray:
    """``(n_perm, T)`` frame indices reassembling blocks in random order."""
    n_blocks = int(blocks[-1]) + 1
    keys = rng.random((n_perm, n_blocks))
    # rank of each block in its permuted position; stable sort keeps
    # within-block order
    rank = np.argsort(np.argsort(keys, axis=1), axis=1)
    return np.argsort(rank[:, blocks], axis=1, kind="stable")


def permute_blocks(y: np.ndarray, blocks: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    order = _block_orders(np.asarray(blocks), 1, rng)[0]
    return np.asarray(y)[order]


def permute_spans(y, align: PhonemeAlignment, seed, start_frame: int = 0,
                  rate_hz: float = FRAME_RATE_HZ) -> np.ndarray:
    """Shuffle whole phoneme-span blocks of ``y`` within one utterance.

    Blocks keep their internal sample order and their own lengths, so the
    output has the input's length and sample multiset. A single-span
    utterance is returned unchanged with a ``UserWarning``.
    """
    y = np.asarray(y)
    blocks = span_blocks(align, y.shape[0], start_frame, rate_hz)
    if blocks[-1] == 0:
        warnings.warn(f"utterance {align.utterance_id!r} has a single span; not permuted",
                      stacklevel=2)
        return y.copy()
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return permute_blocks(y, blocks, rng)


def permutation_seed(seed: int, subject: str, channel: int, fold: int) -> np.random.SeedSequence:
    """Seed stream for one (subject, channel, fold); permutation k is draw k."""
    return np.random.SeedSequence([int(seed), zlib.crc32(str(subject).encode()), int(channel), int(fold)])


def null_correlations(pred, obs, blocks, n_perm: int = 1000, rng=None,
                      pooled: bool = True) -> np.ndarray:
    """Pearson r of predictions against span-permuted observations.

    ``pred``, ``obs`` and ``blocks`` are per-trial lists of 1-D arrays.
    With ``pooled`` the correlation is taken over the concatenated frames,
    otherwise per trial and then averaged. Returns ``n_perm`` values.
    """
    rng = np.random.default_rng(rng)
    if pooled:
        p = np.concatenate(pred)
        o = np.concatenate(obs)
        pc = p - p.mean()
        oc = o - o.mean()
        denom = np.sqrt((pc @ pc) * (oc @ oc))
        offsets = np.cumsum([0] + [len(x) for x in obs[:-1]])
        idx = np.hstack([off + _block_orders(np.asarray(b), n_perm, rng)
                         for off, b in zip(offsets, blocks)])
        # a constant prediction correlates with nothing
        return (oc[idx] @ pc) / denom if denom > 0 else np.zeros(n_perm)
    out = np.zeros(n_perm)
    for p, o, b in zip(pred, obs, blocks):
        pc = p - p.mean()
        oc = o - o.mean()
        idx = _block_orders(np.asarray(b), n_perm, rng)
        denom = np.sqrt((pc @ pc) * (oc @ oc))
        if denom > 0:
            out += (oc[idx] @ pc) / denom
    return out / len(pred)


def _signed_ranks(x, y):
    d = np.asarray(x, dtype=np.float64) - np.asarray(y, dtype=np.float64)
    if d.ndim != 1:
        raise DataError("paired samples must be 1-D and of equal length")
    d = d[d != 0]
    if d.size == 0:
        raise DataError("all paired differences are zero")
    return d, sps.rankdata(np.abs(d))


def exact_signed_rank_counts(ranks) -> np.ndarray:
    """Number of sign assignments giving each doubled positive-rank sum."""
    doubled = np.rint(2 * np.asarray(ranks)).astype(np.int64)
    counts = np.zeros(int(doubled.sum()) + 1, dtype=np.int64)
    counts[0] = 1
    for r in doubled:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[:-r]
        counts = counts + shifted
    return counts


def wilcoxon_signed_rank(x, y) -> TestResult:
    """Two-sided paired signed-rank test; the statistic is W+ (positive-rank sum).

    Zero differences are dropped. Up to 25 pairs the p value is exact
    (average ranks for ties, counted over all sign assignments); beyond that
    a normal approximation with tie and continuity corrections is used.
    """
    d, ranks = _signed_ranks(x, y)
    n = d.size
    if n < 5:
        warnings.warn(f"signed-rank test with only {n} nonzero differences", stacklevel=2)
    w_plus = float(ranks[d > 0].sum())
    if n <= EXACT_MAX_N:
        counts = exact_signed_rank_counts(ranks)
        k = int(round(2 * w_plus))
        total = float(2**n)
        lower = counts[: k + 1].sum() / total
        upper = counts[k:].sum() / total
        p = min(1.0, 2.0 * min(lower, upper))
        return TestResult(w_plus, p, n, True)
    mean = n * (n + 1) / 4.0
    _, tie_counts = np.unique(ranks, return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24.0 - np.sum(tie_counts**3 - tie_counts) / 48.0
    z = max(abs(w_plus - mean) - 0.5, 0.0) / np.sqrt(var)
    return TestResult(w_plus, float(min(1.0, 2.0 * sps.norm.sf(z))), n, False)


def bh_fdr(p_values, q: float = 0.05) -> np.ndarray:
    """Benjamini-Hochberg step-up rejections."""
    p = np.asarray(p_values, dtype=np.float64)
    m = p.size
    reject = np.zeros(m, dtype=bool)
    if m == 0:
        return reject
    order = np.argsort(p, kind="stable")
    below = p[order] <= q * np.arange(1, m + 1) / m
    if below.any():
        k = np.flatnonzero(below)[-1]
        reject[p <= p[order][k]] = True
    return reject


def bh_adjust(p_values) -> np.ndarray:
    """BH-adjusted p values.

    ``adjusted <= q`` reproduces :func:`bh_fdr` except for last-bit rounding
    when a p value sits exactly on a step-up boundary.
    """
    p = np.asarray(p_values, dtype=np.float64)
    m = p.size
    if m == 0:
        return p.copy()
    order = np.argsort(p, kind="stable")
    scaled = p[order] * m / np.arange(1, m + 1)
    adj = np.minimum.accumulate(scaled[::-1])[::-1]
    out = np.empty(m)
    out[order] = np.minimum(adj, 1.0)
    return out


def apply_fdr(results: list[TestResult], q: float = 0.05) -> list[TestResult]:
    """Mark each result's significance within the family ``results``."""
    flags = bh_fdr([r.p_value for r in results], q)
    for r, f in zip(results, flags):
        r.significant_after_fdr = bool(f)
        r.q_level = q
    return results


def significance_stars(p: float) -> str:
    if p < 1e-4:
        return "****"
    if p < 1e-3:
        return "***"
    if p < 1e-2:
        return "**"
    if p < 0.05:
        return "*"
    return "n.s."
