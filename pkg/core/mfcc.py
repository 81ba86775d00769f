"""
Five-stage MFCC chain: pre-emphasis, framing + Hamming window, DFT,
log filter-bank energies on the Mel scale, orthonormal DCT-II.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np
import scipy.fft

from core.corpus import Signal
from core.errors import (
    EmptySignal, InvalidConfig, NegativeFrequency, SignalTooShort,
    TooManyFilters, WindowTooShort,
)

logger = logging.getLogger(__name__)

SPECTRUM_MODES = ('power', 'magnitude')


@dataclass(frozen=True)
class MfccConfig:
    frame_length: int = 2048
    hop: int = 512
    pre_emphasis_alpha: float = 0.97
    num_filters: int = 40
    num_coeffs: int = 23
    log_floor: float = 1e-10
    spectrum_mode: str = 'power'
    keep_c0: bool = False
    expected_sample_rate: int = 44100

    def __post_init__(self):
        if not 0 < self.hop <= self.frame_length:
            raise InvalidConfig(f"hop must satisfy 0 < hop <= frame_length, got {self.hop}")
        if self.frame_length < 2 or self.frame_length & (self.frame_length - 1):
            raise InvalidConfig(f"frame_length (= fft_size) must be a power of two, got {self.frame_length}")
        if not 0 <= self.pre_emphasis_alpha < 1:
            raise InvalidConfig(f"pre_emphasis_alpha must be in [0, 1), got {self.pre_emphasis_alpha}")
        if self.num_filters < 2:
            raise InvalidConfig(f"num_filters must be >= 2, got {self.num_filters}")
        if not 2 <= self.num_coeffs <= self.num_filters - 1:
            raise InvalidConfig(
                f"num_coeffs must be in [2, {self.num_filters - 1}], got {self.num_coeffs}")
        if not self.log_floor > 0:
            raise InvalidConfig(f"log_floor must be positive, got {self.log_floor}")
        if self.spectrum_mode not in SPECTRUM_MODES:
            raise InvalidConfig(f"spectrum_mode must be one of {SPECTRUM_MODES}, got {self.spectrum_mode!r}")
        if self.expected_sample_rate <= 0:
            raise InvalidConfig(f"expected_sample_rate must be positive, got {self.expected_sample_rate}")

    @property
    def fft_size(self):
        return self.frame_length

    @property
    def overlap(self):
        return self.frame_length - self.hop

    def with_coeffs(self, num_coeffs) -> MfccConfig:
        params = asdict(self)
        params['num_coeffs'] = int(num_coeffs)
        return MfccConfig(**params)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, values):
        known = {k: v for k, v in dict(values).items() if k in cls.__dataclass_fields__}
        return cls(**known)

    def digest(self):
        """Short stable digest; identical configs give identical digests"""
        payload = json.dumps(self.to_dict(), sort_keys=True, separators=(',', ':'))
        return hashlib.sha256(payload.encode('utf-8')).hexdigest()[:16]


@dataclass(frozen=True, eq=False)
class FilterBank:
    weights: np.ndarray           # (num_filters, fft_size // 2 + 1)
    edge_frequencies: np.ndarray  # (num_filters + 2,) Hz, before bin snapping
    edge_bins: np.ndarray         # (num_filters + 2,)
    sample_rate: int
    fft_size: int

    @property
    def num_filters(self):
        return self.weights.shape[0]

    @property
    def center_frequencies(self):
        return self.edge_frequencies[1:-1]

    def band(self, index):
        """(low, high) Hz edges of filter ``index``"""
        return self.edge_frequencies[index], self.edge_frequencies[index + 2]


@dataclass(frozen=True, eq=False)
class MfccMatrix:
    coeffs: np.ndarray  # (M, n_frames)
    sample_rate: int
    config: MfccConfig

    @property
    def num_coeffs(self):
        return self.coeffs.shape[0]

    @property
    def n_frames(self):
        return self.coeffs.shape[1]


def pre_emphasize(signal: Signal, alpha: float) -> Signal:
    """y[0] = x[0]; y[n] = x[n] - alpha * x[n-1]"""
    if signal is None or len(signal) == 0:
        raise EmptySignal("cannot pre-emphasize an empty signal")
    if not 0 <= alpha < 1:
        raise InvalidConfig(f"alpha must be in [0, 1), got {alpha}")
    x = signal.samples
    y = np.empty_like(x)
    y[0] = x[0]
    y[1:] = x[1:] - alpha * x[:-1]
    return Signal(y, signal.sample_rate, resampled_from=signal.resampled_from)


def hamming_window(n: int) -> np.ndarray:
    """Symmetric Hamming window W[n] = 0.54 - 0.46 cos(2 pi n / (N - 1))"""
    if n < 2:
        raise WindowTooShort(f"window needs at least 2 samples, got {n}")
    index = np.arange(n, dtype=np.float64)
    weights = 0.54 - 0.46 * np.cos(2.0 * np.pi * index / (n - 1))
    # force exact mirror symmetry; cos rounding differs slightly at n and N-1-n
    return 0.5 * (weights + weights[::-1])


def frame_count(length, frame_length, hop):
    if length < frame_length:
        return 0
    return (length - frame_length) // hop + 1


def frame_signal(signal: Signal, cfg: MfccConfig) -> np.ndarray:
    """
    Frames of ``cfg.frame_length`` samples every ``cfg.hop`` samples, each
    multiplied by the Hamming window. Trailing partial frames are dropped.
    Returns an (n_frames, frame_length) array.
    """
    x = signal.samples
    if x.size < cfg.frame_length:
        raise SignalTooShort(f"signal of {x.size} samples is shorter than one frame ({cfg.frame_length})")
    frames = np.lib.stride_tricks.sliding_window_view(x, cfg.frame_length)[::cfg.hop]
    return frames * hamming_window(cfg.frame_length)


def hz_to_mel(f):
    f = np.asarray(f, dtype=np.float64)
    if np.any(f < 0):
        raise NegativeFrequency(f"frequency must be non-negative, got {f.min()}")
    result = 2595.0 * np.log10(1.0 + f / 700.0)
    return float(result) if result.ndim == 0 else result


def mel_to_hz(m):
    m = np.asarray(m, dtype=np.float64)
    if np.any(m < 0):
        raise NegativeFrequency(f"mel value must be non-negative, got {m.min()}")
    result = 700.0 * (10.0 ** (m / 2595.0) - 1.0)
    return float(result) if result.ndim == 0 else result


@lru_cache(maxsize=64)
def _cached_filterbank(num_filters, fft_size, sample_rate):
    n_bins = fft_size // 2 + 1
    if num_filters + 2 > n_bins:
        raise TooManyFilters(f"{num_filters} filters need more than the {n_bins} available FFT bins")

    mel_edges = np.linspace(0.0, hz_to_mel(sample_rate / 2.0), num_filters + 2)
    edge_frequencies = mel_to_hz(mel_edges)
    edge_bins = np.floor(edge_frequencies * fft_size / sample_rate + 0.5).astype(np.int64)
    edge_bins = np.minimum(edge_bins, n_bins - 1)

    weights = np.zeros((num_filters, n_bins))
    bins = np.arange(n_bins)
    for i in range(num_filters):
        left, center, right = edge_bins[i], edge_bins[i + 1], edge_bins[i + 2]
        if center > left:
            rising = (bins >= left) & (bins <= center)
            weights[i, rising] = (bins[rising] - left) / (center - left)
        if right > center:
            falling = (bins >= center) & (bins <= right)
            weights[i, falling] = (right - bins[falling]) / (right - center)
        weights[i, center] = 1.0

    weights.setflags(write=False)
    edge_frequencies.setflags(write=False)
    edge_bins.setflags(write=False)
    return FilterBank(weights, edge_frequencies, edge_bins, sample_rate, fft_size)


def build_filterbank(cfg: MfccConfig, sample_rate: int) -> FilterBank:
    """
    Triangular filters with peak 1 whose num_filters + 2 edges are equally
    spaced on the Mel axis between 0 Hz and Nyquist, snapped to FFT bins.
    Cached per (num_filters, fft_size, sample_rate).
    """
    return _cached_filterbank(int(cfg.num_filters), int(cfg.fft_size), int(sample_rate))


def spectrum(frames: np.ndarray, fft_size: int, mode='power') -> np.ndarray:
    """|DFT|^2 / fft_size (power) or |DFT| (magnitude) on bins 0..fft_size/2"""
    transform = scipy.fft.rfft(frames, n=fft_size, axis=-1)
    magnitude = np.abs(transform)
    if mode == 'magnitude':
        return magnitude
    return magnitude ** 2 / fft_size


def log_filterbank_energies(power: np.ndarray, bank: FilterBank, log_floor: float) -> np.ndarray:
    energies = power @ bank.weights.T
    return np.log(np.maximum(energies, log_floor))


def cepstral_window(cfg: MfccConfig):
    start = 0 if cfg.keep_c0 else 1
    return slice(start, start + cfg.num_coeffs)


def mfcc(signal: Signal, cfg: MfccConfig) -> MfccMatrix:
    """Mel cepstral coefficients, shape (num_coeffs, n_frames)"""
    emphasized = pre_emphasize(signal, cfg.pre_emphasis_alpha)
    frames = frame_signal(emphasized, cfg)
    bank = build_filterbank(cfg, signal.sample_rate)

    power = spectrum(frames, cfg.fft_size, cfg.spectrum_mode)
    log_energies = log_filterbank_energies(power, bank, cfg.log_floor)
    cepstra = scipy.fft.dct(log_energies, type=2, norm='ortho', axis=-1)

    coeffs = np.ascontiguousarray(cepstra[:, cepstral_window(cfg)].T)
    logger.debug("MFCC: %d frames x %d coefficients", coeffs.shape[1], coeffs.shape[0])
    return MfccMatrix(coeffs, signal.sample_rate, cfg)
