"""Post-fit summaries: accuracy tables, paired A-vs-P comparisons,
variance partitions and per-channel normalized weight maps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .crossval import EncodingResult
from .errors import DataError
from .stats import TestResult, apply_fdr, bh_adjust, significance_stars, wilcoxon_signed_rank
from .varpart import VariancePartition, partition


@dataclass
class WeightMap:
    matrix: np.ndarray                 # (feature, channel), columns peak at 1
    feature_names: tuple[str, ...]
    channel_names: tuple[str, ...]
    raw: np.ndarray | None = None      # subject-averaged sums before normalization


def weight_map(weights, feature_names=(), channel_names=(), features=None) -> WeightMap:
    """Sum |w| over lags, average over subjects, scale each channel to max 1.

    ``weights`` has shape ``(subject, channel, feature, lag)`` (a single
    subject may omit the leading axis). ``features`` optionally selects rows
    by index. All-zero channels stay all zero.
    """
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim == 3:
        w = w[None]
    if w.ndim != 4:
        raise DataError("weights must be (subject, channel, feature, lag)")
    if features is not None:
        w = w[:, :, list(features)]
        if feature_names:
            feature_names = tuple(feature_names[i] for i in features)
    raw = np.abs(w).sum(axis=3).mean(axis=0).T          # (feature, channel)
    peak = raw.max(axis=0)
    norm = np.divide(raw, peak, out=np.zeros_like(raw), where=peak > 0)
    n_f, n_c = raw.shape
    return WeightMap(norm,
                     tuple(feature_names) or tuple(f"f{i}" for i in range(n_f)),
                     tuple(channel_names) or tuple(f"ch{i + 1}" for i in range(n_c)),
                     raw)


def delta_r(result_sparc: EncodingResult, result_phoneme: EncodingResult) -> float:
    """``r_A - r_P`` for one subject, channel and mode."""
    a, p = result_sparc, result_phoneme
    if a.plan_id != p.plan_id:
        raise DataError("results come from different fold plans")
    if (a.subject_id, a.channel, a.mode) != (p.subject_id, p.channel, p.mode):
        raise DataError("results are not paired (subject, channel, mode)")
    return a.r_mean_fisher - p.r_mean_fisher


def _sem(x):
    x = np.asarray(x, dtype=np.float64)
    return float(x.std(ddof=1) / np.sqrt(x.size)) if x.size > 1 else float("nan")


def _index(results):
    out = {}
    for r in results:
        out[(r.subject_id, r.mode, r.feature_kind, r.channel)] = r
    return out


def _ordered(values):
    return list(dict.fromkeys(values))


def summarize_r(results: list[EncodingResult]) -> list[dict]:
    """Mean, SEM over subjects and mean chance threshold per (mode, kind, channel)."""
    groups: dict[tuple, list[EncodingResult]] = {}
    for r in results:
        groups.setdefault((r.mode, r.feature_kind, r.channel), []).append(r)
    rows = []
    for (mode, kind, ch), rs in groups.items():
        r = [x.r_mean_fisher for x in rs]
        rows.append(dict(mode=mode, feature_kind=kind, channel=ch, n_subjects=len(rs),
                         mean_r=float(np.mean(r)), sem_r=_sem(r),
                         chance_r=float(np.mean([x.null_threshold_95 for x in rs]))))
    return rows


@dataclass
class Comparison:
    mode: str
    channel: str
    deltas: np.ndarray
    test: TestResult
    p_adjusted: float = float("nan")

    @property
    def stars(self) -> str:
        return significance_stars(self.p_adjusted) if self.test.significant_after_fdr else "n.s."


def compare_feature_sets(results: list[EncodingResult], kind_a: str = "A", kind_b: str = "P",
                         q: float = 0.05) -> list[Comparison]:
    """Paired signed-rank test of ``r_a - r_b`` across subjects per (mode, channel).

    All (mode, channel) tests form one BH family.
    """
    idx = _index(results)
    subjects = sorted({r.subject_id for r in results})
    comps = []
    for mode in _ordered(r.mode for r in results):
        for ch in _ordered(r.channel for r in results):
            deltas = []
            for s in subjects:
                a, b = idx.get((s, mode, kind_a, ch)), idx.get((s, mode, kind_b, ch))
                if a is None or b is None:
                    continue
                deltas.append(delta_r(a, b))
            if not deltas:
                continue
            deltas = np.array(deltas)
            if np.all(deltas == 0):
                test = TestResult(0.0, 1.0, 0, True)
            else:
                test = wilcoxon_signed_rank(deltas, np.zeros_like(deltas))
            comps.append(Comparison(mode, ch, deltas, test))
    apply_fdr([c.test for c in comps], q)
    for c, padj in zip(comps, bh_adjust([c.test.p_value for c in comps])):
        c.p_adjusted = float(padj)
    return comps


def partition_results(results: list[EncodingResult]) -> list[tuple[str, str, str, VariancePartition]]:
    """(subject, mode, channel, partition) for every complete A/P/AP triple.

    r^2 is the square of each model's Fisher-averaged held-out r.
    """
    idx = _index(results)
    out = []
    for (s, mode, kind, ch), ra in sorted(idx.items()):
        if kind != "A":
            continue
        rp, rap = idx.get((s, mode, "P", ch)), idx.get((s, mode, "AP", ch))
        if rp is None or rap is None:
            continue
        out.append((s, mode, ch, partition(ra.r_mean_fisher**2, rp.r_mean_fisher**2,
                                           rap.r_mean_fisher**2)))
    return out
