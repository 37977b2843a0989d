"""Sentence-level nested cross-validation of elastic-net TRFs.

For each outer fold an inner CV on the outer-training sentences picks
(alpha, l1_ratio) per channel by mean inner-fold Pearson r; the model is
refit on all outer-training trials and scored on the held-out sentences.
Permuting phoneme-span blocks of the held-out envelopes gives each
channel's chance level.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .design import LagSpec, build_lagged, reshape_weights
from .errors import ConstantChannelError, DataError
from .solver import ElasticNetConfig, GramFactor, admm_solve
from .stats import NullDistribution, null_correlations, permutation_seed

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FoldPlan:
    outer: tuple[tuple[tuple[str, ...], tuple[str, ...]], ...]
    inner: tuple[tuple[tuple[tuple[str, ...], tuple[str, ...]], ...], ...]
    seed: int

    @property
    def n_outer(self) -> int:
        return len(self.outer)

    @property
    def plan_id(self) -> str:
        """Short fingerprint; results from different plans must not be paired."""
        import hashlib

        h = hashlib.sha1(repr((self.outer, self.inner, self.seed)).encode())
        return h.hexdigest()[:12]


@dataclass(frozen=True)
class GridSpec:
    alphas: tuple[float, ...] = (1e-3, 1e-2, 1e-1)
    lambdas: tuple[float, ...] = (0.1, 0.3, 0.5)

    def __post_init__(self):
        if not self.alphas or not self.lambdas:
            raise ValueError("grid must be nonempty")

    def points(self) -> list[tuple[float, float]]:
        return [(a, l) for a in self.alphas for l in self.lambdas]


@dataclass
class EncodingTrial:
    """One utterance ready for encoding: trimmed, standardized, frame-synchronous."""

    sentence_id: str
    envelope: np.ndarray                 # (T, C)
    features: dict[str, np.ndarray]      # kind -> (T, F)
    blocks: np.ndarray                   # phoneme-span block id per frame
    channel_names: tuple[str, ...] = ()
    feature_names: dict[str, tuple[str, ...]] = field(default_factory=dict)
    trial_id: str = ""

    @property
    def n_frames(self) -> int:
        return self.envelope.shape[0]


@dataclass
class EncodingResult:
    subject_id: str
    channel: str
    mode: str
    feature_kind: str
    r_per_fold: list[float]
    r_mean_fisher: float
    chosen_alpha: float
    chosen_lambda: float
    null_threshold_95: float
    converged: bool = True
    chosen_per_fold: list[tuple[float, float]] = field(default_factory=list)
    null_threshold_per_fold: list[float] = field(default_factory=list)
    weights: np.ndarray | None = None           # (F, L), mean over outer-fold refits
    weights_per_fold: np.ndarray | None = None  # (folds, F, L)
    n_frames: int = 0
    plan_id: str = ""


def _split(ids, k, rng):
    order = rng.permutation(len(ids))
    parts = np.array_split(order, k)
    folds = []
    for part in parts:
        test = tuple(sorted(ids[i] for i in part))
        train = tuple(s for s in ids if s not in set(test))
        folds.append((train, test))
    return tuple(folds)


def make_folds(sentence_ids, k_outer: int = 5, k_inner: int = 3, seed: int = 0) -> FoldPlan:
    """Seeded sentence-level outer folds, each with inner folds over its training set.

    Repetitions and modes of a sentence share its id and so travel together.
    """
    ids = sorted(set(str(s) for s in sentence_ids))
    if k_outer < 2:
        raise ValueError("k_outer must be at least 2")
    if len(ids) < k_outer:
        raise DataError(f"{len(ids)} sentences cannot fill {k_outer} folds")
    rng = np.random.default_rng(seed)
    outer = _split(ids, k_outer, rng)
    inner = []
    for i, (train, _) in enumerate(outer):
        if k_inner < 2:
            inner.append(())
            continue
        if len(train) < k_inner:
            raise DataError(f"outer fold {i}: {len(train)} training sentences for {k_inner} inner folds")
        inner.append(_split(list(train), k_inner, np.random.default_rng([seed, i + 1])))
    return FoldPlan(outer, tuple(inner), int(seed))


def pearson_r(pred, obs) -> float:
    pred = np.asarray(pred, dtype=np.float64)
    obs = np.asarray(obs, dtype=np.float64)
    if pred.shape != obs.shape or pred.ndim != 1 or pred.size < 2:
        raise DataError("pearson_r needs two 1-D arrays of equal length >= 2")
    pc = pred - pred.mean()
    oc = obs - obs.mean()
    ss = (pc @ pc) * (oc @ oc)
    if not ss > 0:
        raise DataError("zero-variance input to pearson_r")
    return float(np.clip((pc @ oc) / np.sqrt(ss), -1.0, 1.0))


def _columnwise_r(P: np.ndarray, O: np.ndarray) -> np.ndarray:
    pc = P - P.mean(axis=0)
    oc = O - O.mean(axis=0)
    denom = np.sqrt((pc * pc).sum(axis=0) * (oc * oc).sum(axis=0))
    with np.errstate(invalid="ignore", divide="ignore"):
        r = (pc * oc).sum(axis=0) / denom
    return np.where(denom > 0, r, 0.0)


def fisher_mean(rs) -> float:
    rs = np.asarray(rs, dtype=np.float64)
    if np.any(np.abs(rs) >= 1.0):
        raise DataError("Fisher averaging needs |r| < 1")
    return float(np.tanh(np.mean(np.arctanh(rs))))


def _score(preds, obs, pooled):
    """Per-channel r from lists of per-trial (T, C) arrays."""
    if pooled:
        return _columnwise_r(np.vstack(preds), np.vstack(obs))
    return np.mean([_columnwise_r(p, o) for p, o in zip(preds, obs)], axis=0)


class _FoldData:
    def __init__(self, designs, envelopes, trials):
        self.X = np.vstack([designs[i] for i in trials])
        self.Y = np.vstack([envelopes[i] for i in trials])
        self.trials = list(trials)
        self._factor = None

    @property
    def factor(self):
        if self._factor is None:
            self._factor = GramFactor(self.X)
        return self._factor


def _fit_grid(fold: _FoldData, points, cfg):
    """Weights (p, C) for every grid point, warm-starting along the grid."""
    Xty = fold.X.T @ fold.Y
    out, state = [], None
    for a, l in points:
        c = ElasticNetConfig(alpha=a, l1_ratio=l, rho=cfg.rho, max_iter=cfg.max_iter, tol=cfg.tol)
        state = admm_solve(fold.factor, Xty, c,
                           None if state is None else state.z, None if state is None else state.u)
        out.append((state.z.copy(), bool(state.converged.all())))
    return out


def _trial_ids(trials, sentences):
    keep = set(sentences)
    return [i for i, t in enumerate(trials) if t.sentence_id in keep]


def run_encoding(trials, feature_kind: str, plan: FoldPlan, *,
                 grid: GridSpec = GridSpec(), lag: LagSpec = LagSpec(),
                 cfg: ElasticNetConfig = ElasticNetConfig(), n_permutations: int = 1000,
                 seed: int = 0, subject_id: str = "", mode: str = "",
                 pool_test_frames: bool = True) -> list[EncodingResult]:
    """Cross-validated encoding of every envelope channel from one feature set.

    ``cfg`` supplies rho, tolerance and iteration cap; alpha and l1_ratio
    come from ``grid`` (inner CV is skipped for a single-point grid).
    Returns one :class:`EncodingResult` per channel.
    """
    trials = list(trials)
    if not trials:
        raise DataError("no trials to encode")
    n_ch = trials[0].envelope.shape[1]
    designs = [build_lagged(t.features[feature_kind], lag).matrix for t in trials]
    envelopes = [np.asarray(t.envelope, dtype=np.float64) for t in trials]
    n_feat = trials[0].features[feature_kind].shape[1]
    points = grid.points()
    names = trials[0].channel_names or tuple(f"ch{i + 1}" for i in range(n_ch))
    flat = np.flatnonzero(np.ptp(np.vstack(envelopes), axis=0) == 0)
    if flat.size:
        raise ConstantChannelError(names[flat[0]])

    fold_r, fold_null, fold_choice, fold_w = [], [], [], []
    converged = np.ones(n_ch, dtype=bool)
    n_frames = 0
    for k, (train_s, test_s) in enumerate(plan.outer):
        train_i = _trial_ids(trials, train_s)
        test_i = _trial_ids(trials, test_s)
        if not train_i or not test_i:
            raise DataError(f"outer fold {k} has no training or no test trials")

        if len(points) == 1:
            choice = np.zeros(n_ch, dtype=np.int64)
        else:
            inner_scores = np.zeros((len(points), n_ch))
            for in_train_s, in_val_s in plan.inner[k]:
                tr = _FoldData(designs, envelopes, _trial_ids(trials, in_train_s))
                val = _trial_ids(trials, in_val_s)
                for g, (W, _) in enumerate(_fit_grid(tr, points, cfg)):
                    preds = [designs[i] @ W for i in val]
                    inner_scores[g] += _score(preds, [envelopes[i] for i in val], pool_test_frames)
            # first maximum in grid order wins ties
            choice = np.argmax(inner_scores, axis=0)

        train = _FoldData(designs, envelopes, train_i)
        Xty = train.X.T @ train.Y
        W = np.zeros((designs[0].shape[1], n_ch))
        for g in np.unique(choice):
            a, l = points[g]
            c = ElasticNetConfig(alpha=a, l1_ratio=l, rho=cfg.rho, max_iter=cfg.max_iter, tol=cfg.tol)
            cols = np.flatnonzero(choice == g)
            state = admm_solve(train.factor, Xty[:, cols], c)
            W[:, cols] = state.z
            converged[cols] &= state.converged

        preds = [designs[i] @ W for i in test_i]
        obs = [envelopes[i] for i in test_i]
        n_frames += sum(len(o) for o in obs)
        fold_r.append(_score(preds, obs, pool_test_frames))
        nulls = np.zeros((n_ch, n_permutations))
        if n_permutations:
            blocks = [trials[i].blocks for i in test_i]
            for c in range(n_ch):
                rng = np.random.default_rng(permutation_seed(seed, subject_id, c, k))
                nulls[c] = null_correlations([p[:, c] for p in preds], [o[:, c] for o in obs],
                                             blocks, n_permutations, rng, pool_test_frames)
        fold_null.append(nulls)
        fold_choice.append(choice)
        fold_w.append(reshape_weights(W.T, n_feat, lag.n_lags))

    fold_r = np.array(fold_r)          # (folds, C)
    fold_null = np.array(fold_null)    # (folds, C, n_perm)
    fold_w = np.array(fold_w)          # (folds, C, F, L)
    results = []
    for c in range(n_ch):
        r = fold_r[:, c]
        if n_permutations:
            # calibrated tests are per fold; the summary threshold for the
            # fold-averaged r is the Fisher mean of the fold thresholds
            per_fold = [NullDistribution.from_values(v).threshold_95 for v in fold_null[:, c]]
            threshold = fisher_mean(np.clip(per_fold, -0.999999, 0.999999))
        else:
            threshold, per_fold = float("nan"), []
        chosen = [points[int(fc[c])] for fc in fold_choice]
        modal = sorted(Counter(chosen).items(), key=lambda kv: (-kv[1], kv[0]))[0][0]
        results.append(EncodingResult(
            subject_id=subject_id, channel=names[c], mode=mode, feature_kind=feature_kind,
            r_per_fold=[float(v) for v in r], r_mean_fisher=fisher_mean(r),
            chosen_alpha=modal[0], chosen_lambda=modal[1],
            null_threshold_95=threshold, converged=bool(converged[c]),
            chosen_per_fold=chosen, null_threshold_per_fold=per_fold,
            weights=fold_w[:, c].mean(axis=0), weights_per_fold=fold_w[:, c],
            n_frames=n_frames, plan_id=plan.plan_id,
        ))
        if not converged[c]:
            log.warning("subject %s %s %s channel %s: ADMM hit max_iter", subject_id, mode,
                        feature_kind, names[c])
    return results
