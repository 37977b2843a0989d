"""Synthetic subjects with known ground truth.

Articulatory trajectories are low-pass filtered noise gated to a speaking
interval. Phoneme labels are derived from them (each span takes the label
of the nearest prototype to its mean articulatory state), so P carries no
information that A lacks. Envelopes are the lagged convolution of the 12
kinematic features with planted kernels plus Gaussian noise; silent modes
scale the signal, add noise and run on a jittered clock.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import signal
from scipy.ndimage import gaussian_filter1d

from .design import LagSpec, flatten_weights, lag_matrix
from .dtw import DtwConfig, align_to_reference, warp_to_reference
from .errors import DataError
from .features import (ARPABET, FRAME_RATE_HZ, MODES, SILENCE, SPARC_COLUMNS, SPARC_KINEMATIC,
                       FeatureMatrix, PhonemeAlignment)
from .pipeline import prepare_trial
from .preprocess import zscore_per_channel
from .series import MultiChannelSeries


@dataclass(frozen=True)
class ModeEffect:
    """Signal scale, noise level (dB re. the unscaled signal) and clock jitter."""

    amplitude: float = 1.0
    extra_noise_db: float = 0.0
    warp_strength: float = 0.0


DEFAULT_MODE_EFFECTS = {
    "aloud": ModeEffect(1.0, 0.0, 0.0),
    "mimed": ModeEffect(0.9, 2.0, 0.1),
    "subvocal": ModeEffect(0.5, 10.0, 0.1),
}


@dataclass(frozen=True)
class SynthSpec:
    n_sentences: int = 50
    n_repetitions: int = 1
    n_channels: int = 8
    n_artic_features: int = 12
    phoneme_count: int = 40
    snr_db: float = 10.0
    mode_effects: dict = field(default_factory=lambda: dict(DEFAULT_MODE_EFFECTS))
    speech_s: tuple[float, float] = (1.6, 2.4)
    silence_s: tuple[float, float] = (0.2, 0.4)
    span_ms: tuple[float, float, float] = (60.0, 200.0, 120.0)   # min, max, mean
    articulator_cutoff_hz: float = 20.0
    kernel_features_per_channel: int = 3
    null: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.n_artic_features != len(SPARC_KINEMATIC):
            raise ValueError("SPARC has exactly 12 kinematic features")
        if self.phoneme_count != len(ARPABET) + 1:
            raise ValueError("phoneme inventory has 40 entries")
        for mode in self.mode_effects:
            if mode not in MODES:
                raise ValueError(f"unknown mode {mode!r}")


@dataclass
class SyntheticUtterance:
    sentence_id: str
    repetition: int
    sparc: FeatureMatrix                      # 14 columns, aloud time base
    alignment: PhonemeAlignment
    envelopes: dict[str, MultiChannelSeries]  # silent modes on their own clock
    warps: dict[str, np.ndarray]              # silent frame -> aloud position

    @property
    def trial_id(self) -> str:
        return f"{self.sentence_id}_r{self.repetition}"


@dataclass
class SyntheticSubject:
    subject_id: str
    spec: SynthSpec
    utterances: list[SyntheticUtterance]
    kernels: np.ndarray            # (channel, kinematic feature, lag)
    lag: LagSpec
    prototypes: np.ndarray         # (39, 12)

    def encoding_trials(self, mode: str, align: bool = True, dtw_cfg: DtwConfig = DtwConfig()):
        """Encoding-ready trials; silent envelopes are DTW-aligned to aloud when ``align``."""
        out = []
        for utt in self.utterances:
            env = utt.envelopes[mode]
            if mode != "aloud":
                ref = utt.envelopes["aloud"]
                if align:
                    # path from standardized copies, applied to the raw-scale envelope
                    _, path = align_to_reference(zscore_per_channel(env), zscore_per_channel(ref), dtw_cfg)
                    env = warp_to_reference(env, path, ref.n_samples)
                elif env.n_samples != ref.n_samples:
                    raise DataError("silent envelope is on its own clock; align it first")
            sparc = utt.sparc if mode == "aloud" else utt.sparc.select(SPARC_KINEMATIC)
            out.append(prepare_trial(env, sparc, utt.alignment, utt.sentence_id,
                                     trial_id=utt.trial_id))
        return out


def time_warp_jitter(x, strength: float, seed) -> tuple[np.ndarray, np.ndarray]:
    """Resample ``x`` on a smooth monotone clock whose rate stays within 1 +/- ``strength``.

    Returns the warped frames and, for each, its position on the original
    time axis.
    """
    if not 0.0 <= strength <= 0.3:
        raise ValueError("strength must lie in [0, 0.3]")
    x = np.asarray(x, dtype=np.float64)
    T = x.shape[0]
    if strength == 0.0 or T < 2:
        return x.copy(), np.arange(T, dtype=np.float64)
    rng = np.random.default_rng(seed)
    n = int(np.ceil(T / (1.0 - strength))) + 2
    g = gaussian_filter1d(rng.normal(size=n), sigma=max(2.0, T / 8.0), mode="reflect")
    g /= np.max(np.abs(g))
    pos = np.concatenate([[0.0], np.cumsum(1.0 + strength * g[:-1])])
    pos = pos[pos <= T - 1]
    if x.ndim == 1:
        return np.interp(pos, np.arange(T), x), pos
    warped = np.column_stack([np.interp(pos, np.arange(T), x[:, c]) for c in range(x.shape[1])])
    return warped, pos


def _rng(spec: SynthSpec, subject_id: str, *extra) -> np.random.Generator:
    return np.random.default_rng([spec.seed, zlib.crc32(subject_id.encode()), *extra])


def _frames(seconds: float) -> int:
    return int(round(seconds * FRAME_RATE_HZ))


def _gate(n, start, stop, ramp=3):
    g = np.zeros(n)
    g[start:stop] = 1.0
    return np.clip(gaussian_filter1d(g, ramp / 2.0), 0.0, 1.0)


def _span_lengths(n_speech, spec, rng):
    lo, hi, mean = (int(round(v / 20.0)) for v in spec.span_ms)
    out = []
    while sum(out) < n_speech:
        out.append(int(np.clip(round(rng.normal(mean, 2.0)), lo, hi)))
    excess = sum(out) - n_speech
    out[-1] -= excess
    # a short remainder borrows frames from earlier spans that have slack
    need = lo - out[-1]
    for i in range(len(out) - 2, -1, -1):
        if need <= 0:
            break
        take = min(need, out[i] - lo)
        out[i] -= take
        out[-1] += take
        need -= take
    return out


def _kernels(spec, lag, rng):
    lags = lag.lags_ms
    K = np.zeros((spec.n_channels, spec.n_artic_features, lags.size))
    for c in range(spec.n_channels):
        feats = rng.choice(spec.n_artic_features, spec.kernel_features_per_channel, replace=False)
        for f in feats:
            center = rng.uniform(-100.0, 200.0)
            width = rng.uniform(30.0, 80.0)
            amp = rng.uniform(0.5, 1.5) * rng.choice([-1.0, 1.0])
            K[c, f] = amp * np.exp(-0.5 * ((lags - center) / width) ** 2)
    return K


def generate_subject(spec: SynthSpec = SynthSpec(), subject_id: str = "S01",
                     lag: LagSpec = LagSpec()) -> SyntheticSubject:
    """One synthetic subject with every mode in ``spec.mode_effects``."""
    rng = _rng(spec, subject_id)
    kernels = _kernels(spec, lag, rng)
    prototypes = rng.normal(size=(len(ARPABET), spec.n_artic_features))
    # first-order roll-off keeps enough high-frequency energy for the lagged
    # design to stay well conditioned
    sos = signal.butter(1, spec.articulator_cutoff_hz, fs=FRAME_RATE_HZ, output="sos")
    w_flat = flatten_weights(kernels)     # (C, F*L)

    drafts = []
    for s in range(spec.n_sentences):
        for rep in range(spec.n_repetitions):
            r = _rng(spec, subject_id, s, rep)
            lead = _frames(r.uniform(*spec.silence_s))
            speech = _frames(r.uniform(*spec.speech_s))
            trail = _frames(r.uniform(*spec.silence_s))
            n = lead + speech + trail
            raw = signal.sosfilt(sos, r.normal(size=(n + 100, spec.n_artic_features)), axis=0)[100:]
            gate = _gate(n, lead, lead + speech)
            kin = raw * gate[:, None]
            # standardized over the speaking interval, as the pipeline will see it
            core = kin[lead:lead + speech]
            kin = (kin - core.mean(axis=0)) / core.std(axis=0)
            slow = gaussian_filter1d(r.normal(size=n), 5.0)
            voiced = np.zeros(n, dtype=bool)
            voiced[lead:lead + speech] = True
            pitch = np.where(voiced, 120.0 + 40.0 * slow, 0.0)
            loud = voiced * (1.0 + 0.3 * gaussian_filter1d(r.normal(size=n), 3.0))
            sparc = np.column_stack([kin, pitch, loud])

            spans, t = [(0.0, lead / FRAME_RATE_HZ, SILENCE)], lead
            for length in _span_lengths(speech, spec, r):
                mean_state = kin[t:t + length].mean(axis=0)
                label = ARPABET[int(np.argmin(((prototypes - mean_state) ** 2).sum(axis=1)))]
                spans.append((t / FRAME_RATE_HZ, (t + length) / FRAME_RATE_HZ, label))
                t += length
            spans.append((t / FRAME_RATE_HZ, n / FRAME_RATE_HZ, SILENCE))
            # the response is driven by the speaking interval only, with the
            # same zero padding the encoder's lagged design uses
            clean = np.zeros((n, spec.n_channels))
            clean[lead:lead + speech] = lag_matrix(kin[lead:lead + speech], lag.lags_samples) @ w_flat.T
            drafts.append((f"s{s + 1:03d}", rep, sparc, spans, clean, gate, r))

    speech_frames = np.vstack([d[4][d[5] > 0.5] for d in drafts])
    signal_var = speech_frames.var(axis=0)
    channels = tuple(f"ch{c + 1}" for c in range(spec.n_channels))

    utterances = []
    for sid, rep, sparc, spans, clean, gate, r in drafts:
        envs, warps = {}, {}
        for mode, eff in spec.mode_effects.items():
            snr = spec.snr_db - eff.extra_noise_db
            noise_sd = np.sqrt(signal_var / 10 ** (snr / 10.0)) if np.isfinite(snr) else 0.0 * signal_var
            sig = eff.amplitude * clean
            if mode != "aloud" and eff.warp_strength > 0:
                sig, pos = time_warp_jitter(sig, eff.warp_strength, r.integers(2**32))
            else:
                pos = np.arange(sig.shape[0], dtype=np.float64)
            if spec.null:
                env = r.normal(size=sig.shape)
            else:
                env = sig + r.normal(size=sig.shape) * noise_sd
            envs[mode] = MultiChannelSeries(env, FRAME_RATE_HZ, channels)
            warps[mode] = pos
        utterances.append(SyntheticUtterance(
            sid, rep, FeatureMatrix(sparc, SPARC_COLUMNS, "articulatory"),
            PhonemeAlignment(tuple(spans), f"{sid}_r{rep}"), envs, warps))
    return SyntheticSubject(subject_id, spec, utterances, kernels, lag, prototypes)


def synthesize_emg(envelope: MultiChannelSeries, seed, rate_hz: float = 2000.0,
                   line_hz: float = 60.0) -> MultiChannelSeries:
    """Raw-rate EMG: band-limited noise carrier modulated by the envelope, plus line hum."""
    rng = np.random.default_rng(seed)
    k = int(round(rate_hz / envelope.sample_rate_hz))
    n = envelope.n_samples * k
    z = envelope.data
    z = (z - z.mean(axis=0)) / np.where(z.std(axis=0) > 0, z.std(axis=0), 1.0)
    amp = np.clip(1.0 + 0.3 * z, 0.05, None)
    t_raw = np.arange(n) / rate_hz
    t_env = (np.arange(envelope.n_samples) + 0.5) / envelope.sample_rate_hz
    amp_raw = np.column_stack([np.interp(t_raw, t_env, amp[:, c]) for c in range(amp.shape[1])])
    sos = signal.butter(4, [20.0, 400.0], btype="bandpass", fs=rate_hz, output="sos")
    carrier = signal.sosfilt(sos, rng.normal(size=(n + 2000, amp.shape[1])), axis=0)[2000:]
    carrier /= carrier.std(axis=0)
    hum = sum(a * np.sin(2 * np.pi * h * line_hz * t_raw + rng.uniform(0, 2 * np.pi))
              for h, a in ((1, 0.5), (3, 0.2), (5, 0.1)))
    return envelope.replace(amp_raw * carrier + hum[:, None], rate_hz)


def write_dataset(subjects, root, raw_rate_hz: float = 2000.0, binary: bool = True) -> Path:
    """Write raw EMG, SPARC and alignment files in the toolkit's dataset layout::

        <root>/<subject>/emg/<mode>/<trial>.trf|.tsv   raw EMG per mode
        <root>/<subject>/sparc/<trial>.tsv             14-column SPARC, 50 Hz
        <root>/<subject>/align/<trial>.tsv             phoneme spans
    """
    from .io import write_alignment, write_series

    root = Path(root)
    ext = ".trf" if binary else ".tsv"
    for subj in subjects:
        base = root / subj.subject_id
        for i, utt in enumerate(subj.utterances):
            sparc = MultiChannelSeries(utt.sparc.data, FRAME_RATE_HZ, utt.sparc.feature_names)
            write_series(base / "sparc" / f"{utt.trial_id}.tsv", sparc)
            write_alignment(base / "align" / f"{utt.trial_id}.tsv", utt.alignment)
            for j, (mode, env) in enumerate(sorted(utt.envelopes.items())):
                seed = [subj.spec.seed, zlib.crc32(subj.subject_id.encode()), i, j]
                raw = synthesize_emg(env, seed, raw_rate_hz)
                write_series(base / "emg" / mode / f"{utt.trial_id}{ext}", raw, binary=binary)
    return root
