"""Manifest parsing, WAV decoding, clip validation and feature-table files"""

import struct

import numpy as np
import pytest

from core.corpus import (
    FeatureTable, Label, Split, Signal, decode_wav, load_manifest,
    read_feature_table, summarize_manifest, validate_clip, write_feature_table, write_wav,
)
from core.errors import (
    DuplicatePath, EmptySignal, MissingColumn, NotRiff, SchemaMismatch,
    TruncatedData, UnknownLabel, UnknownSplit, UnsupportedEncoding,
)


def raw_wav(format_tag=1, channels=1, rate=8000, bits=16, payload=b'', declared=None):
    block_align = channels * (bits // 8)
    fmt = struct.pack('<HHIIHH', format_tag, channels, rate, rate * block_align, block_align, bits)
    size = len(payload) if declared is None else declared
    body = b'WAVE' + b'fmt ' + struct.pack('<I', len(fmt)) + fmt + b'data' + struct.pack('<I', size) + payload
    return b'RIFF' + struct.pack('<I', len(body)) + body


def write_manifest(tmp_path, text):
    path = tmp_path / 'manifest.csv'
    path.write_text(text, encoding='utf-8')
    return path


# --- manifest -------------------------------------------------------------

def test_manifest_counts_and_path_resolution(wav_corpus):
    manifest = load_manifest(wav_corpus)

    assert len(manifest) == 12
    assert manifest.split_counts() == {Split.TRAIN: 4, Split.VALIDATION: 4, Split.TEST: 4}
    first = manifest.entries[0]
    assert manifest.resolve(first) == wav_corpus.parent / first.path
    assert manifest.resolve(first).exists()


def test_manifest_skips_comments_and_reports_row(tmp_path):
    path = write_manifest(tmp_path, "# recorded 2019\npath,label,split\na.wav,patient,train\nb.wav,healthy,train\n")

    with pytest.raises(UnknownLabel) as excinfo:
        load_manifest(path)
    assert excinfo.value.row == 2
    assert 'row 2' in str(excinfo.value)


def test_manifest_rejects_unknown_split(tmp_path):
    path = write_manifest(tmp_path, "path,label,split\na.wav,patient,holdout\n")
    with pytest.raises(UnknownSplit):
        load_manifest(path)


def test_manifest_missing_column(tmp_path):
    path = write_manifest(tmp_path, "path,label\na.wav,patient\n")
    with pytest.raises(MissingColumn):
        load_manifest(path)


def test_manifest_duplicate_path(tmp_path):
    path = write_manifest(tmp_path, "path,label,split\na.wav,patient,train\na.wav,non_patient,test\n")
    with pytest.raises(DuplicatePath) as excinfo:
        load_manifest(path)
    assert excinfo.value.row == 2


def test_summarize_manifest_totals(wav_corpus):
    table = summarize_manifest(load_manifest(wav_corpus))

    assert table.loc['train', 'patient'] == 2
    assert table.loc['test', 'non_patient'] == 2
    assert table.loc['total', 'total'] == 12


# --- WAV ------------------------------------------------------------------

def test_decode_16_bit_within_quantization(tmp_path):
    samples = np.linspace(-0.9, 0.9, 400)
    path = write_wav(tmp_path / 'ramp.wav', samples, 8000, bits=16)

    signal = decode_wav(path)

    assert signal.sample_rate == 8000
    assert np.max(np.abs(signal.samples - samples)) <= 1.0 / 2 ** 15


def test_decode_8_bit_is_unsigned_with_offset(tmp_path):
    path = tmp_path / 'eight.wav'
    path.write_bytes(raw_wav(bits=8, payload=bytes([128, 255, 0, 192])))

    signal = decode_wav(path)

    np.testing.assert_allclose(signal.samples, [0.0, 127 / 128, -1.0, 0.5])


def test_decode_24_bit_sign_extension(tmp_path):
    # -1 and 2^22 as little-endian 24-bit integers
    payload = b'\xff\xff\xff' + b'\x00\x00\x40'
    path = tmp_path / 'deep.wav'
    path.write_bytes(raw_wav(bits=24, payload=payload))

    signal = decode_wav(path)

    np.testing.assert_allclose(signal.samples, [-1 / 2 ** 23, 0.5])


def test_decode_downmixes_stereo(tmp_path):
    stereo = np.c_[np.full(100, 0.5), np.full(100, -0.25)]
    path = write_wav(tmp_path / 'stereo.wav', stereo, 8000, bits=32)

    signal = decode_wav(path)

    assert len(signal) == 100
    np.testing.assert_allclose(signal.samples, 0.125, atol=1e-7)


def test_decode_skips_unknown_chunks(tmp_path):
    blob = raw_wav(payload=struct.pack('<4h', 0, 100, -100, 0))
    # insert an odd-sized LIST chunk (padded to even) between fmt and data
    fmt_end = 12 + 8 + 16
    extra = b'LIST' + struct.pack('<I', 3) + b'abc' + b'\x00'
    blob = blob[:fmt_end] + extra + blob[fmt_end:]
    blob = blob[:4] + struct.pack('<I', len(blob) - 8) + blob[8:]
    path = tmp_path / 'list.wav'
    path.write_bytes(blob)

    assert len(decode_wav(path)) == 4


def test_decode_rejects_non_riff(tmp_path):
    path = tmp_path / 'noise.wav'
    path.write_bytes(b'ID3\x03' + bytes(60))
    with pytest.raises(NotRiff):
        decode_wav(path)


def test_decode_rejects_truncated_data(tmp_path):
    path = tmp_path / 'short.wav'
    path.write_bytes(raw_wav(payload=bytes(10), declared=400))
    with pytest.raises(TruncatedData):
        decode_wav(path)


def test_decode_rejects_compressed_formats(tmp_path):
    path = tmp_path / 'adpcm.wav'
    path.write_bytes(raw_wav(format_tag=2, bits=4, payload=bytes(8)))
    with pytest.raises(UnsupportedEncoding):
        decode_wav(path)


def test_empty_signal_is_rejected():
    with pytest.raises(EmptySignal):
        Signal(np.array([]), 8000)


def test_validate_clip_resamples_to_expected_rate():
    signal = Signal(np.sin(np.linspace(0, 20, 1001)), 16000)

    same = validate_clip(signal, 16000)
    halved = validate_clip(signal, 8000)

    assert same is signal
    assert len(halved) == int(np.floor(1001 * 8000 / 16000 + 0.5))
    assert halved.sample_rate == 8000
    assert halved.resampled_from == 16000


# --- feature tables -------------------------------------------------------

def make_table(n_rows=5, mel=2, digest='abc123'):
    rng = np.random.default_rng(3)
    labels = [Label.PATIENT if i % 2 else Label.NON_PATIENT for i in range(n_rows)]
    splits = [list(Split)[i % 3] for i in range(n_rows)]
    return FeatureTable([f"clip_{i}.wav" for i in range(n_rows)], labels, splits,
                        rng.standard_normal((n_rows, mel * 7)) * 1e3, mel, config_digest=digest)


def test_feature_table_file_is_exact(tmp_path):
    table = make_table()
    path = write_feature_table(table, tmp_path / 'features.csv')

    loaded = read_feature_table(path)

    assert loaded.equals(table)
    assert loaded.config_digest == 'abc123'
    assert path.read_text().startswith('# mel_coeff_count=2 config_digest=abc123\nclip_id,label,split,f001')


def test_feature_table_header_mismatch(tmp_path):
    path = write_feature_table(make_table(), tmp_path / 'features.csv')
    text = path.read_text().replace('f014', 'f015')
    path.write_text(text)

    with pytest.raises(SchemaMismatch):
        read_feature_table(path)


def test_feature_table_with_missing_values_is_a_schema_error(tmp_path):
    table = make_table()
    table.features[2, 5] = np.nan
    path = write_feature_table(table, tmp_path / 'features.csv')

    with pytest.raises(SchemaMismatch):
        read_feature_table(path)


def test_feature_table_with_text_values_is_a_schema_error(tmp_path):
    path = write_feature_table(make_table(), tmp_path / 'features.csv')
    lines = path.read_text().splitlines()
    lines[2] = lines[2].rsplit(',', 1)[0] + ',abc'
    path.write_text('\n'.join(lines) + '\n')

    with pytest.raises(SchemaMismatch):
        read_feature_table(path)


def test_feature_table_subset_and_truncate():
    table = make_table(n_rows=6, mel=3)

    train = table.subset(Split.TRAIN)
    truncated = table.truncate_mel(2, 'other')

    assert all(s is Split.TRAIN for s in train.splits)
    assert len(train) == 2
    assert truncated.n_features == 14
    assert truncated.feature_names[-1] == 'f014'
    np.testing.assert_array_equal(truncated.features, table.features[:, :14])
    assert list(table.targets()) == [-1, 1, -1, 1, -1, 1]
