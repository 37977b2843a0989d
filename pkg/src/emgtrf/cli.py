"""Command-line entry point: ``emgtrf <verb> [options]``.

Verbs: ``synth``, ``validate-config``, ``preprocess``, ``encode``, ``analyze``.
Exit codes: 0 success, 1 configuration error, 2 data error, 3 some
(subject, mode) jobs failed while the rest completed. ``EMGTRF_JOBS`` sets
the number of worker processes (default 1).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np
from scipy.linalg import LinAlgError

from . import __version__
from .analysis import compare_feature_sets, partition_results, summarize_r, weight_map
from .config import RunConfig, config_from_dict, discover, envelope_dir, load_config
from .crossval import make_folds, run_encoding
from .dtw import align_to_reference
from .errors import ConfigError, DataError, EmgTrfError
from .features import SPARC_COLUMNS, SPARC_KINEMATIC, load_sparc
from .io import read_alignment, read_series, write_series
from .pipeline import prepare_trial
from .plotting import delta_bars, partition_bars, r_bars, weight_heatmap
from .preprocess import emg_to_envelope
from .store import (RESULT_COLUMNS, WEIGHT_COLUMNS, read_results, read_weights, result_row,
                    weight_rows, write_json, write_table)

log = logging.getLogger("emgtrf")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_PARTIAL = 0, 1, 2, 3
JOBS_ENV = "EMGTRF_JOBS"
JOB_ERRORS = (EmgTrfError, ValueError, LinAlgError, FloatingPointError)


def n_jobs() -> int:
    raw = os.environ.get(JOBS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{JOBS_ENV} must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"{JOBS_ENV} must be at least 1")
    return n


def _map(fn, items):
    """Ordered map, in worker processes when ``EMGTRF_JOBS`` > 1."""
    jobs = n_jobs()
    if jobs == 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as pool:
        return list(pool.map(fn, items))


# configuration -------------------------------------------------------------

def _overrides(args) -> dict:
    out = {}
    for key in ("dataset_root", "output_dir"):
        v = getattr(args, key, None)
        if v is not None:
            out[key] = str(Path(v).resolve())
    for key in ("subjects", "modes", "feature_kinds"):
        v = getattr(args, key, None)
        if v is not None:
            out[key] = [s for s in v.split(",") if s]
    for key in ("n_permutations", "seed", "k_outer", "k_inner"):
        v = getattr(args, key, None)
        if v is not None:
            out[key] = v
    return out


def resolve_config(args) -> RunConfig:
    """Config file (or defaults) with command-line flags layered on top."""
    cfg = load_config(args.config) if args.config is not None else config_from_dict({})
    over = _overrides(args)
    alphas, lambdas = getattr(args, "alphas", None), getattr(args, "lambdas", None)
    if alphas is not None or lambdas is not None:
        over["grid"] = {"alphas": alphas or list(cfg.grid.alphas),
                        "lambdas": lambdas or list(cfg.grid.lambdas)}
    if not over:
        return cfg
    merged = cfg.to_json()
    merged.update(over)
    return config_from_dict(merged)


# preprocess ----------------------------------------------------------------

def _check_parse(paths):
    bad = []
    for p in paths:
        try:
            if p.parent.name == "align":
                read_alignment(p)
            else:
                read_series(p)
        except DataError as exc:
            bad.append(str(exc))
    if bad:
        raise DataError("unreadable inputs:\n  " + "\n  ".join(bad[:20]))


def _preprocess_subject(job):
    cfg, subject, trials = job
    written = []
    try:
        for t in trials:
            raw = read_series(t.emg.get("aloud") or _aloud_path(cfg, t))
            if cfg.raw_rate_hz is not None and abs(raw.sample_rate_hz - cfg.raw_rate_hz) > 1e-9:
                raise DataError(f"{subject}/{t.trial_id}: aloud EMG at {raw.sample_rate_hz} Hz, "
                                f"config says {cfg.raw_rate_hz} Hz")
            aloud = emg_to_envelope(raw, cfg.filter)
            for mode in cfg.modes:
                if mode == "aloud":
                    env = aloud
                else:
                    silent = emg_to_envelope(read_series(t.emg[mode]), cfg.filter)
                    env, _ = align_to_reference(silent, aloud, cfg.dtw)
                out = envelope_dir(cfg) / subject / mode / f"{t.trial_id}.trf"
                written.append(str(write_series(out, env, binary=True)))
    except JOB_ERRORS as exc:
        return subject, None, f"{type(exc).__name__}: {exc}"
    return subject, written, None


def _aloud_path(cfg, t):
    base = cfg.dataset_root / t.subject / "emg" / "aloud"
    for suffix in (".trf", ".tsv"):
        if (base / f"{t.trial_id}{suffix}").exists():
            return base / f"{t.trial_id}{suffix}"
    raise DataError(f"{t.subject}/{t.trial_id}: silent trial has no aloud pair")


def cmd_preprocess(cfg: RunConfig) -> int:
    found = discover(cfg, "preprocess")
    paths = []
    for trials in found.values():
        for t in trials:
            paths += [p for p in t.emg.values()] + [_aloud_path(cfg, t)]
    _check_parse(sorted(set(paths)))
    outcome = _map(_preprocess_subject, [(cfg, s, found[s]) for s in found])
    failed = [(s, err) for s, _, err in outcome if err]
    for s, err in failed:
        log.error("preprocess %s failed: %s", s, err)
    n = sum(len(w) for _, w, _ in outcome if w)
    log.info("wrote %d envelope files under %s", n, envelope_dir(cfg))
    return EXIT_PARTIAL if failed else EXIT_OK


# encode --------------------------------------------------------------------

def load_trials(cfg: RunConfig, subject: str, mode: str, files):
    trials = []
    for t in files:
        env = read_series(t.envelope[mode])
        sparc = load_sparc(t.sparc, mode)
        align = read_alignment(t.align, t.trial_id)
        trials.append(prepare_trial(env, sparc, align, t.sentence_id, trial_id=t.trial_id))
    return trials


def _encode_job(job):
    cfg, subject, mode, files = job
    try:
        trials = load_trials(cfg, subject, mode, files)
        plan = make_folds([t.sentence_id for t in trials], cfg.k_outer, cfg.k_inner, cfg.seed)
        out = []
        for kind in cfg.feature_kinds:
            res = run_encoding(trials, kind, plan, grid=cfg.grid, lag=cfg.lag, cfg=cfg.solver,
                               n_permutations=cfg.n_permutations, seed=cfg.seed,
                               subject_id=subject, mode=mode,
                               pool_test_frames=cfg.pool_test_frames)
            out.append((kind, trials[0].feature_names[kind], res))
    except JOB_ERRORS as exc:
        return subject, mode, None, f"{type(exc).__name__}: {exc}"
    return subject, mode, out, None


def cmd_encode(cfg: RunConfig) -> int:
    found = discover(cfg, "encode")
    paths = [p for trials in found.values() for t in trials
             for p in [t.sparc, t.align, *t.envelope.values()]]
    _check_parse(paths)
    jobs = [(cfg, s, m, found[s]) for s in found for m in cfg.modes]
    outcome = _map(_encode_job, jobs)
    rows, wrows, failed, unconverged = [], [], [], 0
    lags = cfg.lag.lags_ms
    for subject, mode, out, err in outcome:
        if err:
            failed.append(dict(subject=subject, mode=mode, error=err))
            log.error("encode %s/%s failed: %s", subject, mode, err)
            continue
        for kind, names, res in out:
            for r in res:
                rows.append(result_row(r))
                wrows.extend(weight_rows(r, names, lags))
                unconverged += not r.converged
    out_dir = cfg.output_dir
    write_table(out_dir / "results.tsv", RESULT_COLUMNS, rows)
    write_table(out_dir / "weights.tsv", WEIGHT_COLUMNS, wrows)
    write_json(out_dir / "summary.json", dict(
        version=__version__, config=cfg.to_json(), n_rows=len(rows),
        n_unconverged=unconverged, failed=failed,
        subjects=sorted(found), modes=list(cfg.modes), feature_kinds=list(cfg.feature_kinds)))
    log.info("wrote %d result rows to %s", len(rows), out_dir / "results.tsv")
    return EXIT_PARTIAL if failed else EXIT_OK


# analyze -------------------------------------------------------------------

def _sem(x):
    x = np.asarray(x, dtype=np.float64)
    return float(x.std(ddof=1) / np.sqrt(x.size)) if x.size > 1 else float("nan")


def cmd_analyze(cfg: RunConfig) -> int:
    out_dir = cfg.output_dir
    results_path = out_dir / "results.tsv"
    if not results_path.exists():
        raise DataError(f"no encode results at {results_path} (run encode first)")
    results = read_results(results_path)
    subjects = sorted({r.subject_id for r in results})
    channels = list(dict.fromkeys(r.channel for r in results))
    have = {(r.subject_id, r.mode, r.feature_kind, r.channel) for r in results}
    absent = [f"{s}/{m}/{k}/{c}" for s in subjects for m in cfg.modes for k in cfg.feature_kinds
              for c in channels if (s, m, k, c) not in have]
    if not results or absent:
        shown = absent[:20] + ([f"... and {len(absent) - 20} more"] if len(absent) > 20 else [])
        raise DataError("encode results missing for:\n  " + "\n  ".join(shown or ["everything"]))
    results = [r for r in results if r.mode in cfg.modes and r.feature_kind in cfg.feature_kinds]
    figs = out_dir / "figures"
    files = []

    summary = summarize_r(results)
    cols = ("mode", "feature_kind", "channel", "n_subjects", "mean_r", "sem_r", "chance_r")
    files.append(write_table(out_dir / "r_summary.tsv", cols, summary))
    files.append(r_bars(summary, figs / "r_by_channel.svg", kinds=cfg.feature_kinds))

    if {"A", "P"} <= set(cfg.feature_kinds):
        comps = compare_feature_sets(results, "A", "P", cfg.q)
        rows = [dict(mode=c.mode, channel=c.channel, n_subjects=c.deltas.size,
                     mean_delta_r=float(c.deltas.mean()), sem_delta_r=_sem(c.deltas),
                     n_positive=int((c.deltas > 0).sum()), w_plus=c.test.statistic,
                     p_value=c.test.p_value, p_adjusted=c.p_adjusted, exact=c.test.exact,
                     significant=bool(c.test.significant_after_fdr), stars=c.stars)
                for c in comps]
        cols = ("mode", "channel", "n_subjects", "mean_delta_r", "sem_delta_r", "n_positive",
                "w_plus", "p_value", "p_adjusted", "exact", "significant", "stars")
        files.append(write_table(out_dir / "delta_r.tsv", cols, rows))
        files.append(delta_bars(comps, figs / "delta_r.svg"))

    if {"A", "P", "AP"} <= set(cfg.feature_kinds):
        parts = partition_results(results)
        cols = ("subject", "mode", "channel", "r2_a", "r2_p", "r2_ap", "unique_a", "unique_p",
                "shared")
        rows = [dict(subject=s, mode=m, channel=c, **vars(vp)) for s, m, c, vp in parts]
        files.append(write_table(out_dir / "variance_partition.tsv", cols, rows))
        means = []
        for mode in cfg.modes:
            for ch in channels:
                sub = [r for r in rows if r["mode"] == mode and r["channel"] == ch]
                if sub:
                    means.append(dict(mode=mode, channel=ch, n_subjects=len(sub),
                                      **{k: float(np.mean([r[k] for r in sub])) for k in cols[3:]}))
        files.append(write_table(out_dir / "variance_partition_mean.tsv",
                                 ("mode", "channel", "n_subjects") + cols[3:], means))
        files.append(partition_bars(means, figs / "variance_partition.svg"))

    if "A" in cfg.feature_kinds and (out_dir / "weights.tsv").exists():
        weights = read_weights(out_dir / "weights.tsv")
        for mode in cfg.modes:
            stack, names = [], None
            for s in subjects:
                per_ch = [weights.get((s, mode, "A", c)) for c in channels]
                if any(w is None for w in per_ch):
                    raise DataError(f"weights missing for subject {s}, mode {mode}")
                names = per_ch[0][0]
                stack.append([w for _, w in per_ch])
            stack = np.array(stack)   # (subject, channel, feature, lag)
            kin = [names.index(f) for f in SPARC_KINEMATIC]
            for tag, feats in (("", kin), ("_full", [names.index(f) for f in SPARC_COLUMNS
                                                     if f in names])):
                if tag and len(feats) == len(kin):
                    continue
                wm = weight_map(stack, tuple(names), tuple(channels), features=feats)
                rows = [dict(feature=f, **{c: wm.matrix[i, j] for j, c in enumerate(channels)})
                        for i, f in enumerate(wm.feature_names)]
                files.append(write_table(out_dir / f"weight_map_{mode}{tag}.tsv",
                                         ("feature",) + tuple(channels), rows))
                files.append(weight_heatmap(wm, figs / f"weight_map_{mode}{tag}.svg", mode))

    write_json(out_dir / "analysis.json", dict(
        version=__version__, config=cfg.to_json(), subjects=subjects,
        files=sorted(str(Path(f).relative_to(out_dir)) for f in files)))
    log.info("wrote %d analysis files under %s", len(files), out_dir)
    return EXIT_OK


# synth ---------------------------------------------------------------------

def cmd_synth(args) -> int:
    from .synth import SynthSpec, generate_subject, write_dataset

    spec = SynthSpec(n_sentences=args.sentences, n_repetitions=args.repetitions,
                     n_channels=args.channels, snr_db=args.snr_db, null=args.null, seed=args.seed)
    root = Path(args.out)
    for i in range(args.n_subjects):
        sid = f"S{i + 1:02d}"
        subj = generate_subject(replace(spec, seed=args.seed + i), sid)
        write_dataset([subj], root, args.raw_rate_hz, binary=not args.text)
        rows = [dict(channel=f"ch{c + 1}", feature=f, lag_ms=float(lag), weight=subj.kernels[c, j, k])
                for c in range(subj.kernels.shape[0]) for j, f in enumerate(SPARC_KINEMATIC)
                for k, lag in enumerate(subj.lag.lags_ms)]
        write_table(root / sid / "truth" / "kernels.tsv", ("channel", "feature", "lag_ms", "weight"),
                    rows)
    log.info("wrote %d synthetic subjects under %s", args.n_subjects, root)
    return EXIT_OK


def cmd_validate(cfg: RunConfig, stage: str) -> int:
    found = discover(cfg, stage)
    paths = []
    for trials in found.values():
        for t in trials:
            paths += [t.sparc, t.align, *(p for p in t.emg.values()), *t.envelope.values()]
    _check_parse(paths)
    n = sum(len(v) for v in found.values())
    print(f"config ok: {len(found)} subjects, {n} trials, modes {','.join(cfg.modes)}, "
          f"feature kinds {','.join(cfg.feature_kinds)}")
    return EXIT_OK


# argument parsing ----------------------------------------------------------

def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _run_flags(p):
    p.add_argument("--config", type=Path, help="JSON run config")
    p.add_argument("--dataset-root", dest="dataset_root")
    p.add_argument("--output-dir", dest="output_dir")
    p.add_argument("--subjects", help="comma-separated subject ids")
    p.add_argument("--modes", help="comma-separated speech modes")
    p.add_argument("--feature-kinds", dest="feature_kinds", help="comma-separated: A,P,AP")
    p.add_argument("--n-permutations", dest="n_permutations", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--k-outer", dest="k_outer", type=int)
    p.add_argument("--k-inner", dest="k_inner", type=int)
    p.add_argument("--alphas", type=_floats, help="comma-separated grid alphas")
    p.add_argument("--lambdas", type=_floats, help="comma-separated grid L1 ratios")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="emgtrf", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"emgtrf {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("synth", help="write a synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--n-subjects", dest="n_subjects", type=int, default=2)
    p.add_argument("--sentences", type=int, default=20)
    p.add_argument("--repetitions", type=int, default=1)
    p.add_argument("--channels", type=int, default=8)
    p.add_argument("--snr-db", dest="snr_db", type=float, default=10.0)
    p.add_argument("--raw-rate-hz", dest="raw_rate_hz", type=float, default=2000.0)
    p.add_argument("--null", action="store_true", help="envelopes independent of the features")
    p.add_argument("--text", action="store_true", help="write raw EMG as .tsv instead of binary")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("validate-config", help="check a config and its input files")
    _run_flags(p)
    p.add_argument("--stage", choices=("preprocess", "encode"), default="preprocess")
    for verb, text in (("preprocess", "raw EMG to aligned 50 Hz envelopes"),
                       ("encode", "cross-validated TRF encoding"),
                       ("analyze", "summary tables and figures")):
        _run_flags(sub.add_parser(verb, help=text))
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.verb == "synth":
            if args.n_subjects < 1 or args.sentences < 1:
                raise ConfigError("need at least one subject and one sentence")
            return cmd_synth(args)
        cfg = resolve_config(args)
        if args.verb == "validate-config":
            return cmd_validate(cfg, args.stage)
        return {"preprocess": cmd_preprocess, "encode": cmd_encode,
                "analyze": cmd_analyze}[args.verb](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
