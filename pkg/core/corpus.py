"""
Corpus handling - manifest parsing, WAV decoding, clip validation and
feature-table caching.

The manifest is a CSV with header ``path,label,split``; relative clip paths
are resolved against the directory holding the manifest.
"""

from __future__ import annotations

import io
import logging
import struct
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterator

import numpy as np
import pandas as pd

from core.errors import (
    DuplicatePath, EmptySignal, InvalidSignal, IoError, MissingColumn,
    NotRiff, SchemaMismatch, TruncatedData, UnknownLabel, UnknownSplit,
    UnsupportedEncoding,
)

logger = logging.getLogger(__name__)

MANIFEST_COLUMNS = ('path', 'label', 'split')
TABLE_KEY_COLUMNS = ['clip_id', 'label', 'split']

WAVE_FORMAT_PCM = 0x0001
WAVE_FORMAT_IEEE_FLOAT = 0x0003
WAVE_FORMAT_EXTENSIBLE = 0xFFFE


class Label(Enum):
    PATIENT = 'patient'
    NON_PATIENT = 'non_patient'

    @classmethod
    def parse(cls, text, row=None):
        value = str(text).strip().lower()
        for label in cls:
            if label.value == value:
                return label
        raise UnknownLabel(f"unknown label '{text}' (expected patient or non_patient)", row=row)

    @property
    def sign(self):
        """+1 for Patient, -1 for NonPatient"""
        return 1 if self is Label.PATIENT else -1

    @classmethod
    def from_sign(cls, value):
        return cls.PATIENT if value >= 0 else cls.NON_PATIENT


class Split(Enum):
    TRAIN = 'train'
    VALIDATION = 'validation'
    TEST = 'test'

    @classmethod
    def parse(cls, text, row=None):
        value = str(text).strip().lower()
        for split in cls:
            if split.value == value:
                return split
        raise UnknownSplit(f"unknown split '{text}' (expected train, validation or test)", row=row)


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    label: Label
    split: Split
    row: int = 0

    @property
    def clip_id(self):
        return self.path


@dataclass
class Manifest:
    entries: list[ManifestEntry]
    base_dir: Path | None = None

    def __len__(self):
        return len(self.entries)

    def __iter__(self) -> Iterator[ManifestEntry]:
        return iter(self.entries)

    def resolve(self, entry: ManifestEntry) -> Path:
        path = Path(entry.path)
        if path.is_absolute() or self.base_dir is None:
            return path
        return self.base_dir / path

    def by_split(self, split: Split):
        return [entry for entry in self.entries if entry.split is split]

    def split_counts(self):
        counts = {split: 0 for split in Split}
        for entry in self.entries:
            counts[entry.split] += 1
        return counts


@dataclass(frozen=True, eq=False)
class Signal:
    """Decoded mono clip; samples are float64 in [-1, 1] after decoding"""
    samples: np.ndarray
    sample_rate: int
    resampled_from: int | None = None

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise InvalidSignal(f"signal must be one-dimensional, got shape {samples.shape}")
        if samples.size == 0:
            raise EmptySignal("signal has no samples")
        if not np.all(np.isfinite(samples)):
            raise InvalidSignal("signal contains non-finite samples")
        if int(self.sample_rate) <= 0:
            raise InvalidSignal(f"sample rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, 'samples', samples)
        object.__setattr__(self, 'sample_rate', int(self.sample_rate))

    def __len__(self):
        return self.samples.size

    @property
    def duration(self):
        return self.samples.size / self.sample_rate

    @property
    def was_resampled(self):
        return self.resampled_from is not None


# --- manifest -------------------------------------------------------------

def load_manifest(path) -> Manifest:
    """
    Parse a ``path,label,split`` manifest. Lines starting with ``#`` are
    comments. Errors name the 1-based data row they were found on.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8-sig')
    except OSError as e:
        raise IoError(f"cannot read manifest {path}: {e}") from e

    lines = [line for line in text.splitlines() if not line.startswith('#')]
    if not any(line.strip() for line in lines):
        raise MissingColumn("manifest is empty; expected header path,label,split", row=0)

    frame = pd.read_csv(io.StringIO('\n'.join(lines)), dtype=str,
                        keep_default_na=False, skipinitialspace=True)
    frame.columns = [str(col).strip().lower() for col in frame.columns]

    missing = [col for col in MANIFEST_COLUMNS if col not in frame.columns]
    if missing:
        raise MissingColumn(f"missing column(s): {', '.join(missing)}", row=0)

    entries = []
    seen = set()
    for row_number, record in enumerate(frame[list(MANIFEST_COLUMNS)].itertuples(index=False), start=1):
        clip_path = str(record.path).strip()
        if not clip_path:
            raise MissingColumn("empty path", row=row_number)
        label = Label.parse(record.label, row=row_number)
        split = Split.parse(record.split, row=row_number)
        if clip_path in seen:
            raise DuplicatePath(f"duplicate path '{clip_path}'", row=row_number)
        seen.add(clip_path)
        entries.append(ManifestEntry(clip_path, label, split, row_number))

    manifest = Manifest(entries, base_dir=path.resolve().parent)
    counts = manifest.split_counts()
    logger.info("📊 Manifest loaded: %d clips (train %d, validation %d, test %d)",
                len(manifest), counts[Split.TRAIN], counts[Split.VALIDATION], counts[Split.TEST])
    return manifest


def summarize_manifest(manifest: Manifest) -> pd.DataFrame:
    """Split x label counts with totals (the dataset's sample distribution)"""
    frame = pd.DataFrame({
        'split': pd.Categorical([e.split.value for e in manifest],
                                categories=[s.value for s in Split]),
        'label': pd.Categorical([e.label.value for e in manifest],
                                categories=[l.value for l in Label]),
    })
    return pd.crosstab(frame['split'], frame['label'], margins=True,
                       margins_name='total', dropna=False)


# --- WAV ------------------------------------------------------------------

def _parse_fmt(body):
    if len(body) < 16:
        raise TruncatedData("fmt chunk shorter than 16 bytes")
    format_tag, channels, sample_rate, _, block_align, bits = struct.unpack('<HHIIHH', body[:16])
    if format_tag == WAVE_FORMAT_EXTENSIBLE:
        if len(body) < 40:
            raise TruncatedData("extensible fmt chunk shorter than 40 bytes")
        # sub-format GUID starts at byte 24; its first two bytes are the real tag
        format_tag = struct.unpack('<H', body[24:26])[0]
    if channels < 1:
        raise UnsupportedEncoding(f"invalid channel count {channels}")
    if sample_rate < 1:
        raise UnsupportedEncoding(f"invalid sample rate {sample_rate}")

    if format_tag == WAVE_FORMAT_PCM and bits in (8, 16, 24, 32):
        pass
    elif format_tag == WAVE_FORMAT_IEEE_FLOAT and bits in (32, 64):
        pass
    else:
        raise UnsupportedEncoding(f"unsupported encoding: format tag {format_tag:#06x}, {bits} bits")

    if block_align != channels * (bits // 8):
        raise UnsupportedEncoding(
            f"block align {block_align} does not match {channels} channel(s) of {bits} bits")
    return format_tag, channels, sample_rate, bits


def _pcm_to_float(payload, format_tag, bits):
    if format_tag == WAVE_FORMAT_IEEE_FLOAT:
        data = np.frombuffer(payload, dtype='<f4' if bits == 32 else '<f8').astype(np.float64)
        if not np.all(np.isfinite(data)):
            raise InvalidSignal("float WAV contains non-finite samples")
        return np.clip(data, -1.0, 1.0)
    if bits == 8:
        # 8-bit WAV is unsigned with a 128 offset
        return (np.frombuffer(payload, dtype=np.uint8).astype(np.float64) - 128.0) / 128.0
    if bits == 16:
        return np.frombuffer(payload, dtype='<i2').astype(np.float64) / 2.0 ** 15
    if bits == 24:
        raw = np.frombuffer(payload, dtype=np.uint8).reshape(-1, 3)
        padded = np.zeros((raw.shape[0], 4), dtype=np.uint8)
        padded[:, 1:] = raw
        return (padded.view('<i4').ravel() >> 8).astype(np.float64) / 2.0 ** 23
    return np.frombuffer(payload, dtype='<i4').astype(np.float64) / 2.0 ** 31


def decode_wav(path) -> Signal:
    """
    Decode a RIFF/WAVE file to a mono Signal. Integer PCM is divided by
    2^(bits-1); channels are averaged; chunks other than ``fmt `` and
    ``data`` are skipped.
    """
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as e:
        raise IoError(f"cannot read {path}: {e}") from e

    if len(blob) < 12 or blob[0:4] != b'RIFF' or blob[8:12] != b'WAVE':
        raise NotRiff(f"{path} is not a RIFF/WAVE file")

    fmt = None
    payload = None
    position = 12
    while position + 8 <= len(blob):
        chunk_id = blob[position:position + 4]
        size = struct.unpack('<I', blob[position + 4:position + 8])[0]
        start = position + 8
        end = start + size
        if chunk_id == b'fmt ':
            if end > len(blob):
                raise TruncatedData(f"{path}: fmt chunk runs past end of file")
            fmt = _parse_fmt(blob[start:end])
        elif chunk_id == b'data':
            if fmt is None:
                raise NotRiff(f"{path}: data chunk appears before fmt chunk")
            if end > len(blob):
                raise TruncatedData(
                    f"{path}: data chunk declares {size} bytes, only {len(blob) - start} present")
            payload = blob[start:end]
            break
        position = end + (size & 1)  # chunks are word aligned

    if fmt is None:
        raise NotRiff(f"{path}: no fmt chunk")
    if payload is None:
        raise TruncatedData(f"{path}: no data chunk")

    format_tag, channels, sample_rate, bits = fmt
    frame_bytes = channels * (bits // 8)
    if len(payload) % frame_bytes:
        raise TruncatedData(f"{path}: data size {len(payload)} is not a multiple of frame size {frame_bytes}")

    samples = _pcm_to_float(payload, format_tag, bits)
    if channels > 1:
        samples = samples.reshape(-1, channels).mean(axis=1)
    return Signal(samples, sample_rate)


def write_wav(path, data, sample_rate, bits=16):
    """
    Write samples in [-1, 1] as PCM (8/16/24 bits) or 32-bit float.
    ``data`` is (n,) for mono or (n, channels).
    """
    samples = np.asarray(data, dtype=np.float64)
    if samples.ndim == 1:
        samples = samples[:, None]
    channels = samples.shape[1]
    interleaved = samples.reshape(-1)

    if bits == 32:
        format_tag = WAVE_FORMAT_IEEE_FLOAT
        payload = interleaved.astype('<f4').tobytes()
    elif bits in (8, 16, 24):
        format_tag = WAVE_FORMAT_PCM
        scale = 2.0 ** (bits - 1)
        quantized = np.clip(np.round(interleaved * scale), -scale, scale - 1).astype(np.int64)
        if bits == 8:
            payload = (quantized + 128).astype(np.uint8).tobytes()
        elif bits == 16:
            payload = quantized.astype('<i2').tobytes()
        else:
            payload = quantized.astype('<i4').view(np.uint8).reshape(-1, 4)[:, :3].tobytes()
    else:
        raise UnsupportedEncoding(f"cannot write {bits}-bit WAV")

    block_align = channels * (bits // 8)
    fmt_body = struct.pack('<HHIIHH', format_tag, channels, int(sample_rate),
                           int(sample_rate) * block_align, block_align, bits)
    pad = b'\x00' if len(payload) % 2 else b''
    riff_size = 4 + (8 + len(fmt_body)) + (8 + len(payload) + len(pad))

    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'wb') as fh:
            fh.write(b'RIFF' + struct.pack('<I', riff_size) + b'WAVE')
            fh.write(b'fmt ' + struct.pack('<I', len(fmt_body)) + fmt_body)
            fh.write(b'data' + struct.pack('<I', len(payload)) + payload + pad)
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}") from e
    return path


def validate_clip(signal: Signal, expected_rate: int) -> Signal:
    """
    Return the clip unchanged at the expected rate, otherwise resample it by
    linear interpolation and mark it with ``resampled_from``.
    """
    if signal is None or len(signal) == 0:
        raise EmptySignal("cannot validate an empty clip")
    if signal.sample_rate == expected_rate:
        return signal

    n = len(signal)
    out_length = max(1, int(np.floor(n * expected_rate / signal.sample_rate + 0.5)))
    positions = np.arange(out_length) * (signal.sample_rate / expected_rate)
    resampled = np.interp(positions, np.arange(n), signal.samples)
    logger.warning("⚠️ Clip at %d Hz resampled to %d Hz (%d -> %d samples)",
                   signal.sample_rate, expected_rate, n, out_length)
    return Signal(resampled, expected_rate, resampled_from=signal.sample_rate)


# --- feature tables -------------------------------------------------------

@dataclass(eq=False)
class FeatureTable:
    clip_ids: list
    labels: list
    splits: list
    features: np.ndarray
    mel_coeff_count: int
    feature_names: list = field(default=None)
    config_digest: str | None = None

    def __post_init__(self):
        from core.features import feature_names as canonical_names

        self.clip_ids = [str(c) for c in self.clip_ids]
        self.labels = list(self.labels)
        self.splits = list(self.splits)
        n_rows = len(self.clip_ids)
        width = int(self.mel_coeff_count) * 7
        features = np.asarray(self.features, dtype=np.float64)
        if features.size == 0:
            features = features.reshape(n_rows, width)
        self.features = features
        if self.feature_names is None:
            self.feature_names = canonical_names(self.mel_coeff_count)
        self.feature_names = list(self.feature_names)

        if len(self.feature_names) != width:
            raise SchemaMismatch(
                f"{len(self.feature_names)} feature names for mel_coeff_count={self.mel_coeff_count} "
                f"(expected {width})")
        if features.ndim != 2 or features.shape != (n_rows, width):
            raise SchemaMismatch(f"feature matrix shape {features.shape} does not match ({n_rows}, {width})")
        if len(self.labels) != n_rows or len(self.splits) != n_rows:
            raise SchemaMismatch("clip ids, labels and splits must have equal length")

    def __len__(self):
        return len(self.clip_ids)

    @property
    def n_features(self):
        return self.features.shape[1]

    def targets(self):
        """Labels as +1 (Patient) / -1 (NonPatient)"""
        return np.array([label.sign for label in self.labels], dtype=np.int64)

    def subset(self, *splits: Split) -> FeatureTable:
        mask = [s in splits for s in self.splits]
        return self._take(np.flatnonzero(mask))

    def _take(self, index):
        return FeatureTable(
            clip_ids=[self.clip_ids[i] for i in index],
            labels=[self.labels[i] for i in index],
            splits=[self.splits[i] for i in index],
            features=self.features[index],
            mel_coeff_count=self.mel_coeff_count,
            feature_names=self.feature_names,
            config_digest=self.config_digest,
        )

    def truncate_mel(self, mel_coeff_count, config_digest=None) -> FeatureTable:
        """Keep coefficient rows 1..M; statistics of lower rows do not depend on M"""
        if not 1 <= mel_coeff_count <= self.mel_coeff_count:
            raise SchemaMismatch(
                f"cannot truncate a table of {self.mel_coeff_count} coefficients to {mel_coeff_count}")
        width = mel_coeff_count * 7
        return FeatureTable(
            clip_ids=list(self.clip_ids),
            labels=list(self.labels),
            splits=list(self.splits),
            features=self.features[:, :width].copy(),
            mel_coeff_count=mel_coeff_count,
            config_digest=config_digest,
        )

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.features, columns=self.feature_names)
        frame.insert(0, 'split', [s.value for s in self.splits])
        frame.insert(0, 'label', [l.value for l in self.labels])
        frame.insert(0, 'clip_id', self.clip_ids)
        return frame

    def equals(self, other) -> bool:
        return (
            isinstance(other, FeatureTable)
            and self.clip_ids == other.clip_ids
            and self.labels == other.labels
            and self.splits == other.splits
            and self.mel_coeff_count == other.mel_coeff_count
            and self.feature_names == other.feature_names
            and self.features.shape == other.features.shape
            and np.array_equal(self.features, other.features)
        )


def write_feature_table(table: FeatureTable, path):
    """Write with a provenance comment line and 17 significant digits"""
    path = Path(path)
    frame = table.to_frame()
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8', newline='') as fh:
            fh.write(f"# mel_coeff_count={table.mel_coeff_count} "
                     f"config_digest={table.config_digest or '-'}\n")
            frame.to_csv(fh, index=False, float_format='%.17g', lineterminator='\n')
    except OSError as e:
        raise IoError(f"cannot write feature table {path}: {e}") from e
    return path


def _parse_provenance(line):
    values = {}
    for token in line.lstrip('#').split():
        key, _, value = token.partition('=')
        values[key] = value
    return values


def read_feature_table(path) -> FeatureTable:
    path = Path(path)
    try:
        with open(path, 'r', encoding='utf-8') as fh:
            first_line = fh.readline()
    except OSError as e:
        raise IoError(f"cannot read feature table {path}: {e}") from e

    provenance = _parse_provenance(first_line) if first_line.startswith('#') else {}
    try:
        frame = pd.read_csv(path, skiprows=1 if provenance else 0,
                            dtype={'clip_id': str, 'label': str, 'split': str},
                            keep_default_na=False, float_precision='round_trip')
    except (OSError, pd.errors.ParserError) as e:
        raise IoError(f"cannot parse feature table {path}: {e}") from e

    if list(frame.columns[:3]) != TABLE_KEY_COLUMNS:
        raise SchemaMismatch(f"{path}: header must start with clip_id,label,split")
    feature_columns = list(frame.columns[3:])

    if 'mel_coeff_count' in provenance:
        mel_coeff_count = int(provenance['mel_coeff_count'])
    elif len(feature_columns) % 7 == 0:
        mel_coeff_count = len(feature_columns) // 7
    else:
        raise SchemaMismatch(f"{path}: {len(feature_columns)} feature columns is not a multiple of 7")

    from core.features import feature_names as canonical_names
    expected = canonical_names(mel_coeff_count)
    if feature_columns != expected:
        raise SchemaMismatch(
            f"{path}: header has {len(feature_columns)} feature columns, "
            f"mel_coeff_count={mel_coeff_count} requires {len(expected)} (f001..f{len(expected):03d})")

    try:
        features = frame[feature_columns].to_numpy(dtype=np.float64)
    except (TypeError, ValueError) as e:
        raise SchemaMismatch(f"{path}: non-numeric feature value: {e}") from e
    if not np.isfinite(features).all():
        raise SchemaMismatch(f"{path}: {int((~np.isfinite(features)).sum())} non-finite feature value(s)")

    digest = provenance.get('config_digest')
    return FeatureTable(
        clip_ids=frame['clip_id'].tolist(),
        labels=[Label.parse(v, row=i) for i, v in enumerate(frame['label'], start=1)],
        splits=[Split.parse(v, row=i) for i, v in enumerate(frame['split'], start=1)],
        features=features,
        mel_coeff_count=mel_coeff_count,
        feature_names=feature_columns,
        config_digest=None if digest in (None, '-') else digest,
    )
