"""Articulatory (A), phoneme one-hot (P) and concatenated [P A] feature
matrices at the 50 Hz frame rate, plus speaking-interval trimming."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, FormatError
from .series import MultiChannelSeries

FRAME_RATE_HZ = 50.0

MODES = ("aloud", "mimed", "subvocal")

# 12 kinematic channels: upper lip, lower lip, lower incisor (jaw),
# tongue tip, tongue blade, tongue dorsum; x then y for each.
SPARC_KINEMATIC = (
    "ul_x", "ul_y", "ll_x", "ll_y", "li_x", "li_y",
    "tt_x", "tt_y", "tb_x", "tb_y", "td_x", "td_y",
)
SPARC_LARYNGEAL = ("pitch", "loudness")
SPARC_COLUMNS = SPARC_KINEMATIC + SPARC_LARYNGEAL

ARPABET = (
    "AA", "AE", "AH", "AO", "AW", "AY", "B", "CH", "D", "DH", "EH", "ER", "EY",
    "F", "G", "HH", "IH", "IY", "JH", "K", "L", "M", "N", "NG", "OW", "OY", "P",
    "R", "S", "SH", "T", "TH", "UH", "UW", "V", "W", "Y", "Z", "ZH",
)
SILENCE = "SIL"
# aligner spellings that mean "no speech"
SILENCE_ALIASES = frozenset({"SIL", "SP", "", "<SIL>", "<EPS>"})

KINDS = ("articulatory", "phoneme", "concatenated")


def check_mode(mode: str) -> str:
    if mode not in MODES:
        raise ValueError(f"unknown speech mode {mode!r}; expected one of {MODES}")
    return mode


@dataclass(frozen=True)
class PhonemeInventory:
    """39 stress-free ARPAbet phonemes followed by the silence token (index 39)."""

    labels: tuple[str, ...] = ARPABET + (SILENCE,)

    def __post_init__(self):
        if len(self.labels) != 40 or len(set(self.labels)) != 40:
            raise ValueError("inventory must hold exactly 40 unique labels")
        if self.labels[-1] != SILENCE:
            raise ValueError(f"silence token {SILENCE!r} must be the last label")
        object.__setattr__(self, "_index", {lab: i for i, lab in enumerate(self.labels)})

    @property
    def silence_index(self) -> int:
        return len(self.labels) - 1

    def index(self, label: str) -> int:
        key = label.strip().upper()
        if key in SILENCE_ALIASES:
            return self.silence_index
        try:
            return self._index[key]
        except KeyError:
            raise DataError(f"unknown phoneme label {label!r}") from None

    def is_silence(self, label: str) -> bool:
        return label.strip().upper() in SILENCE_ALIASES


@dataclass(frozen=True)
class PhonemeAlignment:
    """Ordered, non-overlapping ``(start_s, end_s, label)`` spans of one utterance."""

    spans: tuple[tuple[float, float, str], ...]
    utterance_id: str = ""

    def __post_init__(self):
        spans = tuple((float(s), float(e), str(lab)) for s, e, lab in self.spans)
        prev_end = -np.inf
        for s, e, lab in spans:
            if not e > s:
                raise DataError(f"span {lab!r} has end {e} <= start {s}")
            if s < prev_end - 1e-9:
                raise DataError(f"span {lab!r} at {s} s overlaps or is out of order")
            prev_end = e
        object.__setattr__(self, "spans", spans)

    @property
    def duration_s(self) -> float:
        return self.spans[-1][1] if self.spans else 0.0

    def frame_span_index(self, n_frames: int, rate_hz: float = FRAME_RATE_HZ) -> np.ndarray:
        """Index of the span covering each frame centre, -1 where uncovered.

        Spans are half-open ``[start, end)``, so a centre exactly on a shared
        boundary belongs to the later span.
        """
        centers = (np.arange(n_frames) + 0.5) / rate_hz
        owner = np.full(n_frames, -1, dtype=np.int64)
        for k, (s, e, _) in enumerate(self.spans):
            owner[(centers >= s) & (centers < e)] = k
        return owner


@dataclass(frozen=True)
class FeatureMatrix:
    data: np.ndarray
    feature_names: tuple[str, ...]
    kind: str
    sample_rate_hz: float = FRAME_RATE_HZ
    n_phoneme: int = field(default=0)

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64)
        if data.ndim != 2:
            raise DataError("feature data must be 2-D (time, feature)")
        names = tuple(self.feature_names)
        if len(names) != data.shape[1]:
            raise DataError(f"{len(names)} names for {data.shape[1]} features")
        if self.kind not in KINDS:
            raise ValueError(f"unknown feature kind {self.kind!r}")
        if not np.all(np.isfinite(data)):
            raise DataError("features contain NaN or Inf")
        if self.kind == "phoneme" and data.size and not _is_one_hot(data):
            raise DataError("phoneme features must be one-hot rows")
        if self.kind == "articulatory" and data.shape[1] not in (12, 14):
            raise DataError(f"articulatory features must have 12 or 14 columns, got {data.shape[1]}")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "feature_names", names)

    @property
    def n_frames(self) -> int:
        return self.data.shape[0]

    @property
    def n_features(self) -> int:
        return self.data.shape[1]

    def slice_frames(self, start: int, stop: int) -> FeatureMatrix:
        return FeatureMatrix(self.data[start:stop], self.feature_names, self.kind,
                             self.sample_rate_hz, self.n_phoneme)

    def select(self, names) -> FeatureMatrix:
        idx = [self.feature_names.index(n) for n in names]
        return FeatureMatrix(self.data[:, idx], tuple(names), self.kind, self.sample_rate_hz)


def _is_one_hot(data):
    return bool(np.all((data == 0.0) | (data == 1.0)) and np.all(data.sum(axis=1) == 1.0))


def load_sparc(source, mode: str) -> FeatureMatrix:
    """Articulatory features for ``mode`` from a 14-column 50 Hz SPARC series.

    ``source`` is a :class:`MultiChannelSeries` or a path readable by
    :func:`emgtrf.io.read_series`. Aloud keeps all 14 columns; silent modes
    keep only the 12 kinematic columns (pitch and loudness are dropped, not
    zeroed).
    """
    check_mode(mode)
    if not isinstance(source, MultiChannelSeries):
        from .io import read_series

        source = read_series(source)
    if abs(source.sample_rate_hz - FRAME_RATE_HZ) > 1e-9:
        raise FormatError(f"SPARC features must be at {FRAME_RATE_HZ} Hz, got {source.sample_rate_hz}")
    names = tuple(source.channel_names)
    missing = [c for c in SPARC_COLUMNS if c not in names]
    if missing or len(names) != len(SPARC_COLUMNS):
        raise FormatError(
            f"SPARC file needs exactly the columns {SPARC_COLUMNS}; "
            f"got {len(names)} columns, missing {missing}"
        )
    keep = SPARC_COLUMNS if mode == "aloud" else SPARC_KINEMATIC
    idx = [names.index(c) for c in keep]
    return FeatureMatrix(source.data[:, idx], keep, "articulatory")


def densify_phonemes(align: PhonemeAlignment, inv: PhonemeInventory, n_frames: int,
                     rate_hz: float = FRAME_RATE_HZ) -> FeatureMatrix:
    """One-hot phoneme rows at the frame rate; uncovered frames are silence."""
    if align.spans:
        expected = round(align.duration_s * rate_hz)
        if abs(n_frames - expected) > 2:
            raise DataError(
                f"{n_frames} frames inconsistent with {align.duration_s:.3f} s alignment "
                f"({expected} frames expected)"
            )
    codes = np.array([inv.index(lab) for _, _, lab in align.spans], dtype=np.int64)
    owner = align.frame_span_index(n_frames, rate_hz)
    labels = np.where(owner >= 0, codes[owner] if codes.size else 0, inv.silence_index)
    onehot = np.zeros((n_frames, len(inv.labels)))
    onehot[np.arange(n_frames), labels] = 1.0
    return FeatureMatrix(onehot, inv.labels, "phoneme")


def speaking_bounds(align: PhonemeAlignment, n_frames: int,
                    rate_hz: float = FRAME_RATE_HZ) -> tuple[int, int]:
    """Frame range ``[start, stop)`` from the first to the last non-silence span."""
    inv = PhonemeInventory()
    speech = [k for k, (_, _, lab) in enumerate(align.spans) if not inv.is_silence(lab)]
    if not speech:
        raise DataError(f"utterance {align.utterance_id!r} contains no speech spans")
    owner = align.frame_span_index(n_frames, rate_hz)
    inside = np.flatnonzero((owner >= speech[0]) & (owner <= speech[-1]))
    if inside.size == 0:
        raise DataError(f"utterance {align.utterance_id!r}: speech spans cover no frames")
    return int(inside[0]), int(inside[-1]) + 1


def trim_to_speaking(envelope: MultiChannelSeries, features: FeatureMatrix,
                     align: PhonemeAlignment) -> tuple[MultiChannelSeries, FeatureMatrix]:
    """Drop leading and trailing silence from envelope and features alike."""
    if envelope.n_samples != features.n_frames:
        raise DataError(f"envelope has {envelope.n_samples} frames, features {features.n_frames}")
    if abs(envelope.sample_rate_hz - features.sample_rate_hz) > 1e-9:
        raise DataError("envelope and features differ in sample rate")
    start, stop = speaking_bounds(align, envelope.n_samples, envelope.sample_rate_hz)
    return envelope.slice_frames(start, stop), features.slice_frames(start, stop)


def concat_ap(p: FeatureMatrix, a: FeatureMatrix) -> FeatureMatrix:
    """Column blocks ``[P | A]``."""
    if p.kind != "phoneme" or a.kind != "articulatory":
        raise DataError(f"concat_ap expects phoneme then articulatory, got {p.kind}, {a.kind}")
    if p.n_frames != a.n_frames:
        raise DataError(f"length mismatch: P has {p.n_frames} frames, A has {a.n_frames}")
    return FeatureMatrix(np.hstack([p.data, a.data]), p.feature_names + a.feature_names,
                         "concatenated", p.sample_rate_hz, n_phoneme=p.n_features)


def standardize_features(x: FeatureMatrix) -> FeatureMatrix:
    """Z-score continuous columns; one-hot columns are left as they are.

    Constant continuous columns are centred only.
    """
    if x.kind == "phoneme":
        return x
    data = np.array(x.data)
    cols = slice(x.n_phoneme, None) if x.kind == "concatenated" else slice(None)
    block = data[:, cols]
    std = block.std(axis=0)
    std[std <= 1e-12] = 1.0
    data[:, cols] = (block - block.mean(axis=0)) / std
    return FeatureMatrix(data, x.feature_names, x.kind, x.sample_rate_hz, x.n_phoneme)
