"""
Statistical summary of an MFCC matrix - seven statistics per coefficient
row - and z-score standardization fitted on training rows.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.stats

from core.errors import DimensionMismatch, SeriesTooShort, TooFewRows

logger = logging.getLogger(__name__)

# canonical statistic order inside each coefficient block
STATISTICS = ('mean', 'sd', 'rms', 'entropy', 'kurtosis', 'skewness', 'variance')
N_STATISTICS = len(STATISTICS)

# relative threshold under which a training column counts as constant
DEGENERATE_SD = 1e-12


@dataclass(frozen=True)
class StatSummary:
    mean: float
    sd: float
    rms: float
    entropy: float
    kurtosis: float
    skewness: float
    variance: float
    degenerate: bool = False

    def as_tuple(self):
        return tuple(getattr(self, name) for name in STATISTICS)


def feature_names(mel_coeff_count):
    return [f"f{i:03d}" for i in range(1, mel_coeff_count * N_STATISTICS + 1)]


def describe_feature(name):
    """'f009' -> (2, 'sd'): coefficient row (1-based) and statistic"""
    index = int(str(name).lstrip('f')) - 1
    if index < 0:
        raise ValueError(f"invalid feature name {name!r}")
    return index // N_STATISTICS + 1, STATISTICS[index % N_STATISTICS]


def energy_entropy(series):
    """Shannon entropy (bits) of p_j = x_j^2 / sum x_k^2; 0 for an all-zero series"""
    energy = np.square(series)
    total = energy.sum()
    if total == 0:
        return 0.0
    return float(scipy.stats.entropy(energy / total, base=2))


def summarize_row(series) -> StatSummary:
    """
    Population moments of one coefficient row. A constant (or numerically
    constant) series has undefined skewness/kurtosis; they are reported as
    0 and 3 with ``degenerate`` set.
    """
    x = np.asarray(series, dtype=np.float64).ravel()
    if x.size < 2:
        raise SeriesTooShort(f"need at least 2 values, got {x.size}")

    mean = float(np.mean(x))
    variance = float(np.var(x))
    rms = float(np.sqrt(np.mean(np.square(x))))
    entropy = energy_entropy(x)

    # below this the third and fourth moments are rounding noise
    if variance <= (np.finfo(np.float64).eps * max(1.0, abs(mean))) ** 2:
        return StatSummary(mean, float(np.sqrt(variance)), rms, entropy, 3.0, 0.0, variance, degenerate=True)

    skewness = float(scipy.stats.skew(x, bias=True))
    kurtosis = float(scipy.stats.kurtosis(x, fisher=False, bias=True))
    return StatSummary(mean, float(np.sqrt(variance)), rms, entropy, kurtosis, skewness, variance)


def feature_vector(matrix) -> np.ndarray:
    """
    Flatten an MfccMatrix (or raw M x N array) into M * 7 features, row c
    occupying indices (c-1)*7 .. (c-1)*7 + 6 in STATISTICS order.
    """
    coeffs = getattr(matrix, 'coeffs', matrix)
    coeffs = np.asarray(coeffs, dtype=np.float64)
    summaries = [summarize_row(row).as_tuple() for row in coeffs]
    return np.asarray(summaries, dtype=np.float64).reshape(-1)


@dataclass(frozen=True, eq=False)
class Standardizer:
    means: np.ndarray
    sds: np.ndarray

    @classmethod
    def fit(cls, rows) -> Standardizer:
        X = np.asarray(rows, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] < 2:
            raise TooFewRows(f"standardizer needs at least 2 training rows, got {X.shape[0] if X.ndim else 0}")
        means = X.mean(axis=0)
        sds = X.std(axis=0)
        constant = sds <= DEGENERATE_SD * np.maximum(1.0, np.abs(means))
        if constant.any():
            logger.debug("Standardizer: %d constant column(s) passed through after centering", constant.sum())
        sds = np.where(constant, 1.0, sds)
        return cls(means, sds)

    @property
    def n_features(self):
        return self.means.size

    def apply(self, rows) -> np.ndarray:
        X = np.asarray(rows, dtype=np.float64)
        if X.shape[-1] != self.means.size:
            raise DimensionMismatch(f"standardizer fitted on {self.means.size} features, got {X.shape[-1]}")
        return (X - self.means) / self.sds

    def to_dict(self):
        return {'means': self.means.tolist(), 'sds': self.sds.tolist()}

    @classmethod
    def from_dict(cls, values):
        return cls(np.asarray(values['means'], dtype=np.float64),
                   np.asarray(values['sds'], dtype=np.float64))


def fit_standardizer(table, columns=None) -> Standardizer:
    """Fit on the Train rows of a FeatureTable only, optionally on selected columns"""
    from core.corpus import Split

    train = table.subset(Split.TRAIN)
    X = train.features if columns is None else train.features[:, list(columns)]
    return Standardizer.fit(X)
