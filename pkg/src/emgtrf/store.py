"""Tab-separated results store shared by the encode and analyze steps.

Floats are written with ``repr`` so a write/read round trip is exact and
reruns are byte-identical.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .crossval import EncodingResult
from .errors import FormatError

RESULT_COLUMNS = ("subject", "mode", "feature_kind", "channel", "r_mean_fisher", "r_per_fold",
                  "null_threshold_95", "null_threshold_per_fold", "chosen_alpha", "chosen_lambda",
                  "chosen_per_fold", "converged", "n_frames", "plan_id")
WEIGHT_COLUMNS = ("subject", "mode", "feature_kind", "channel", "feature", "lag_ms", "weight")


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_table(path, columns, rows) -> Path:
    """Write dict rows as TSV with a header; values go through :func:`fmt`."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["\t".join(columns)]
    lines += ["\t".join(fmt(row[c]) for c in columns) for row in rows]
    path.write_text("\n".join(lines) + "\n")
    return path


def read_table(path) -> list[dict]:
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = list(csv.DictReader(fh, delimiter="\t"))
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    return rows


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    return path


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v]


def result_row(r: EncodingResult) -> dict:
    return dict(
        subject=r.subject_id, mode=r.mode, feature_kind=r.feature_kind, channel=r.channel,
        r_mean_fisher=r.r_mean_fisher, r_per_fold=",".join(fmt(v) for v in r.r_per_fold),
        null_threshold_95=r.null_threshold_95,
        null_threshold_per_fold=",".join(fmt(v) for v in r.null_threshold_per_fold),
        chosen_alpha=r.chosen_alpha, chosen_lambda=r.chosen_lambda,
        chosen_per_fold=",".join(f"{fmt(a)}:{fmt(l)}" for a, l in r.chosen_per_fold),
        converged=r.converged, n_frames=r.n_frames, plan_id=r.plan_id,
    )


def weight_rows(r: EncodingResult, feature_names, lags_ms):
    W = np.asarray(r.weights)
    for f, name in enumerate(feature_names):
        for j, lag in enumerate(lags_ms):
            yield dict(subject=r.subject_id, mode=r.mode, feature_kind=r.feature_kind,
                       channel=r.channel, feature=name, lag_ms=float(lag), weight=W[f, j])


def write_results(path, results) -> Path:
    return write_table(path, RESULT_COLUMNS, [result_row(r) for r in results])


def read_results(path) -> list[EncodingResult]:
    out = []
    for n, row in enumerate(read_table(path)):
        try:
            chosen = [tuple(float(x) for x in pair.split(":"))
                      for pair in row["chosen_per_fold"].split(",") if pair]
            out.append(EncodingResult(
                subject_id=row["subject"], channel=row["channel"], mode=row["mode"],
                feature_kind=row["feature_kind"], r_per_fold=_floats(row["r_per_fold"]),
                r_mean_fisher=float(row["r_mean_fisher"]),
                chosen_alpha=float(row["chosen_alpha"]), chosen_lambda=float(row["chosen_lambda"]),
                null_threshold_95=float(row["null_threshold_95"]),
                converged=row["converged"] == "true", chosen_per_fold=chosen,
                null_threshold_per_fold=_floats(row["null_threshold_per_fold"]),
                n_frames=int(row["n_frames"]), plan_id=row["plan_id"],
            ))
        except (KeyError, ValueError, TypeError) as exc:
            raise FormatError(f"{path}: bad result row {n + 2}: {exc}") from exc
    return out


def read_weights(path) -> dict[tuple[str, str, str, str], tuple[list[str], np.ndarray]]:
    """``(subject, mode, kind, channel) -> (feature names, (F, L) weights)``."""
    cells: dict[tuple, dict] = {}
    for n, row in enumerate(read_table(path)):
        try:
            key = (row["subject"], row["mode"], row["feature_kind"], row["channel"])
            cells.setdefault(key, {})[(row["feature"], float(row["lag_ms"]))] = float(row["weight"])
        except (KeyError, ValueError, TypeError) as exc:
            raise FormatError(f"{path}: bad weight row {n + 2}: {exc}") from exc
    out = {}
    for key, vals in cells.items():
        feats = list(dict.fromkeys(f for f, _ in vals))
        lags = sorted({l for _, l in vals})
        W = np.full((len(feats), len(lags)), np.nan)
        for (f, l), v in vals.items():
            W[feats.index(f), lags.index(l)] = v
        if np.isnan(W).any():
            raise FormatError(f"{path}: incomplete weight grid for {key}")
        out[key] = (feats, W)
    return out
