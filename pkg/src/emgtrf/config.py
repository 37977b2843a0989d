"""Declarative run configuration (JSON) and fail-fast dataset discovery.

A config file looks like::

    {
      "dataset_root": "data",
      "output_dir": "out",
      "subjects": ["S01", "S02"],
      "modes": ["aloud", "mimed", "subvocal"],
      "feature_kinds": ["A", "P"],
      "lag": {"min_ms": -300, "max_ms": 300, "step_ms": 20},
      "grid": {"alphas": [0.001, 0.01, 0.1], "lambdas": [0.1, 0.3, 0.5]},
      "solver": {"rho": 0.1, "max_iter": 10000, "tol": 1e-9},
      "folds": {"k_outer": 5, "k_inner": 3},
      "n_permutations": 1000,
      "seed": 0
    }

Relative paths resolve against the config file's directory. Every key is
optional; unknown keys are rejected. ``subjects: null`` means every
subject directory under ``dataset_root``.
"""

from __future__ import annotations

import json
import re
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .crossval import GridSpec
from .design import LagSpec
from .dtw import DtwConfig
from .errors import ConfigError, DataError, InvalidSpecError
from .features import MODES
from .pipeline import KIND_CODES
from .preprocess import FilterSpec
from .solver import ElasticNetConfig

SERIES_SUFFIXES = (".trf", ".tsv")
_REPETITION = re.compile(r"_r\d+$")


def sentence_of(trial_id: str) -> str:
    """Sentence id of a trial: the trial id without a trailing ``_r<k>`` repetition tag."""
    return _REPETITION.sub("", trial_id)


@dataclass(frozen=True)
class RunConfig:
    dataset_root: Path = Path("data")
    output_dir: Path = Path("out")
    subjects: tuple[str, ...] | None = None
    modes: tuple[str, ...] = MODES
    feature_kinds: tuple[str, ...] = ("A", "P")
    lag: LagSpec = LagSpec()
    grid: GridSpec = GridSpec()
    solver: ElasticNetConfig = ElasticNetConfig()
    k_outer: int = 5
    k_inner: int = 3
    n_permutations: int = 1000
    seed: int = 0
    pool_test_frames: bool = True
    filter: FilterSpec = FilterSpec()
    dtw: DtwConfig = DtwConfig()
    raw_rate_hz: float | None = None      # None: take the rate from each file
    q: float = 0.05

    def validate(self) -> RunConfig:
        bad = [m for m in self.modes if m not in MODES]
        if bad or not self.modes:
            raise ConfigError(f"modes must be a nonempty subset of {MODES}; got {list(self.modes)}")
        if len(set(self.modes)) != len(self.modes):
            raise ConfigError("modes contain duplicates")
        bad = [k for k in self.feature_kinds if k not in KIND_CODES]
        if bad or not self.feature_kinds:
            raise ConfigError(f"feature_kinds must be a nonempty subset of {KIND_CODES}")
        if self.k_outer < 2 or self.k_inner < 0 or self.k_inner == 1:
            raise ConfigError("need k_outer >= 2 and k_inner = 0 (no inner CV) or >= 2")
        if self.n_permutations < 0:
            raise ConfigError("n_permutations must be nonnegative")
        if not 0 < self.q < 1:
            raise ConfigError("q must lie in (0, 1)")
        if self.subjects is not None and not self.subjects:
            raise ConfigError("subjects is empty")
        if any(a <= 0 for a in self.grid.alphas):
            raise ConfigError("grid alphas must be positive")
        if any(not 0 <= l < 1 for l in self.grid.lambdas):
            raise ConfigError("grid lambdas must lie in [0, 1)")
        return self

    def to_json(self) -> dict:
        """Plain-JSON echo of every setting (paths as strings)."""
        d = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if hasattr(v, "__dataclass_fields__"):
                v = asdict(v)
            elif isinstance(v, Path):
                v = str(v)
            elif isinstance(v, tuple):
                v = list(v)
            d[f.name] = v
        return d


_NESTED = {"lag": LagSpec, "grid": GridSpec, "solver": ElasticNetConfig,
           "filter": FilterSpec, "dtw": DtwConfig}


def _build(cls, raw, name):
    if not isinstance(raw, dict):
        raise ConfigError(f"{name} must be an object")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown keys in {name}: {unknown}")
    kw = {k: tuple(v) if isinstance(v, list) else v for k, v in raw.items()}
    try:
        return cls(**kw)
    except (TypeError, ValueError, InvalidSpecError) as exc:
        raise ConfigError(f"invalid {name}: {exc}") from exc


def config_from_dict(raw: dict, base_dir=None) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    raw = dict(raw)
    base = Path(base_dir) if base_dir is not None else Path.cwd()
    kw = {}
    folds = raw.pop("folds", None)
    if folds is not None:
        if not isinstance(folds, dict) or set(folds) - {"k_outer", "k_inner"}:
            raise ConfigError("folds must be an object with k_outer and/or k_inner")
        kw.update(folds)
    for key, cls in _NESTED.items():
        if key in raw:
            kw[key] = _build(cls, raw.pop(key), key)
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {unknown}")
    for key in ("dataset_root", "output_dir"):
        if key in raw:
            if not isinstance(raw[key], str):
                raise ConfigError(f"{key} must be a path string")
            p = Path(raw.pop(key))
            kw[key] = p if p.is_absolute() else base / p
    for key in ("subjects", "modes", "feature_kinds"):
        if key in raw:
            v = raw.pop(key)
            if v is not None and (not isinstance(v, list) or not all(isinstance(s, str) for s in v)):
                raise ConfigError(f"{key} must be a list of strings")
            kw[key] = None if v is None else tuple(v)
    for key, typ in (("n_permutations", int), ("seed", int), ("k_outer", int), ("k_inner", int),
                     ("pool_test_frames", bool), ("q", float), ("raw_rate_hz", float)):
        v = raw.pop(key, kw.get(key))
        if v is None:
            continue
        if typ is float and isinstance(v, int) and not isinstance(v, bool):
            v = float(v)
        if typ is int and isinstance(v, bool) or not isinstance(v, typ):
            raise ConfigError(f"{key} must be {typ.__name__}")
        kw[key] = v
    cfg = RunConfig(**kw)
    if "dataset_root" not in kw:
        cfg = replace(cfg, dataset_root=base / cfg.dataset_root)
    if "output_dir" not in kw:
        cfg = replace(cfg, output_dir=base / cfg.output_dir)
    return cfg.validate()


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return config_from_dict(raw, path.parent)


# dataset discovery ---------------------------------------------------------

@dataclass
class TrialFiles:
    subject: str
    trial_id: str
    sparc: Path
    align: Path
    emg: dict[str, Path] = field(default_factory=dict)        # mode -> raw EMG
    envelope: dict[str, Path] = field(default_factory=dict)   # mode -> preprocessed

    @property
    def sentence_id(self) -> str:
        return sentence_of(self.trial_id)


def _series_files(folder: Path) -> dict[str, Path]:
    if not folder.is_dir():
        return {}
    out = {}
    for p in sorted(folder.iterdir()):
        if p.suffix in SERIES_SUFFIXES:
            if p.stem in out:
                raise DataError(f"{folder}: trial {p.stem} exists in more than one format")
            out[p.stem] = p
    return out


def envelope_dir(cfg: RunConfig) -> Path:
    return cfg.output_dir / "envelopes"


def subjects_of(cfg: RunConfig) -> list[str]:
    root = cfg.dataset_root
    if not root.is_dir():
        raise DataError(f"dataset root {root} does not exist")
    if cfg.subjects is not None:
        missing = [s for s in cfg.subjects if not (root / s).is_dir()]
        if missing:
            raise DataError(f"subjects not found under {root}: {missing}")
        return list(cfg.subjects)
    found = sorted(p.name for p in root.iterdir() if p.is_dir() and (p / "sparc").is_dir())
    if not found:
        raise DataError(f"no subject directories under {root}")
    return found


def discover(cfg: RunConfig, stage: str) -> dict[str, list[TrialFiles]]:
    """Trials per subject with the files ``stage`` needs ("preprocess" or "encode").

    A trial is any stem with both a SPARC and an alignment file. Missing
    inputs raise :class:`DataError` naming every absent file.
    """
    out, problems = {}, []
    for subj in subjects_of(cfg):
        base = cfg.dataset_root / subj
        sparc = _series_files(base / "sparc")
        align = {p.stem: p for p in sorted((base / "align").glob("*.tsv"))}
        for stem in sorted(set(sparc) ^ set(align)):
            problems.append(f"{subj}/{stem}: has {'sparc' if stem in sparc else 'align'} file only")
        trials = []
        for stem in sorted(set(sparc) & set(align)):
            t = TrialFiles(subj, stem, sparc[stem], align[stem])
            for mode in cfg.modes:
                if stage == "preprocess":
                    p = _series_files(base / "emg" / mode).get(stem)
                    if p is None:
                        problems.append(f"{subj}/{stem}: no raw EMG for mode {mode}")
                    t.emg[mode] = p
                    if mode != "aloud" and _series_files(base / "emg" / "aloud").get(stem) is None:
                        problems.append(f"{subj}/{stem}: silent trial ({mode}) has no aloud pair")
                else:
                    p = _series_files(envelope_dir(cfg) / subj / mode).get(stem)
                    if p is None:
                        problems.append(f"{subj}/{stem}: no {mode} envelope (run preprocess)")
                    t.envelope[mode] = p
            trials.append(t)
        if not trials:
            problems.append(f"{subj}: no trials with both sparc and align files")
        out[subj] = trials
    if problems:
        shown = problems[:20] + ([f"... and {len(problems) - 20} more"] if len(problems) > 20 else [])
        raise DataError("missing inputs:\n  " + "\n  ".join(shown))
    return out
