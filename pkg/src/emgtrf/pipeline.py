"""Assemble encoding-ready trials from envelopes, SPARC features and alignments."""

from __future__ import annotations

import numpy as np

from .crossval import EncodingTrial
from .errors import DataError
from .features import (FeatureMatrix, PhonemeAlignment, PhonemeInventory, concat_ap,
                       densify_phonemes, speaking_bounds, standardize_features)
from .series import MultiChannelSeries
from .stats import span_blocks

# SPARC comes from audio and the envelope from EMG; a frame or two of
# length disagreement is rounding, more is a pairing error.
MAX_FRAME_MISMATCH = 2

KIND_CODES = ("A", "P", "AP")


def prepare_trial(envelope: MultiChannelSeries, sparc: FeatureMatrix, align: PhonemeAlignment,
                  sentence_id: str, inventory: PhonemeInventory = PhonemeInventory(),
                  trial_id: str = "") -> EncodingTrial:
    """Densify phonemes, trim to the speaking interval and standardize.

    ``sparc`` is the mode-appropriate articulatory matrix (14 columns for
    aloud, 12 otherwise). The envelope is used as given: it was standardized
    once over the whole trial during preprocessing, and rescaling each
    trimmed trial again would give every trial its own gain.
    """
    n = min(envelope.n_samples, sparc.n_frames)
    if max(envelope.n_samples, sparc.n_frames) - n > MAX_FRAME_MISMATCH:
        raise DataError(f"trial {trial_id or sentence_id}: envelope has {envelope.n_samples} "
                        f"frames but features have {sparc.n_frames}")
    envelope = envelope.slice_frames(0, n)
    sparc = sparc.slice_frames(0, n)
    phon = densify_phonemes(align, inventory, n, envelope.sample_rate_hz)
    start, stop = speaking_bounds(align, n, envelope.sample_rate_hz)
    env = envelope.slice_frames(start, stop)
    a = standardize_features(sparc.slice_frames(start, stop))
    p = phon.slice_frames(start, stop)
    ap = concat_ap(p, a)
    return EncodingTrial(
        sentence_id=str(sentence_id),
        envelope=np.array(env.data),
        features={"A": np.array(a.data), "P": np.array(p.data), "AP": np.array(ap.data)},
        blocks=span_blocks(align, stop - start, start, envelope.sample_rate_hz),
        channel_names=env.channel_names,
        feature_names={"A": a.feature_names, "P": p.feature_names, "AP": ap.feature_names},
        trial_id=trial_id,
    )
