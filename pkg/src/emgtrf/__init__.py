"""Elastic-net temporal response functions for surface-EMG envelopes.

Preprocessing, DTW alignment of silent-speech trials, lagged articulatory
and phoneme designs, ADMM elastic-net fits under nested sentence-level
cross-validation, permutation chance levels, paired statistics, variance
partitioning and weight maps.
"""

__version__ = "0.1.0"

from .errors import ConfigError, DataError, EmgTrfError, FormatError  # noqa: E402,F401
from .series import MultiChannelSeries  # noqa: E402,F401
