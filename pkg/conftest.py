"""
Shared fixtures: a synthetic 12-clip WAV corpus with a manifest, a small
MFCC configuration for it, and toy classification datasets.
"""

import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from core.corpus import Label, Split, write_wav  # noqa: E402
from core.mfcc import MfccConfig  # noqa: E402

FIXTURE_RATE = 8000
FIXTURE_SECONDS = 0.5

# (name, label, split); two clips per label in every split
FIXTURE_CLIPS = [
    (f"{label.value}_{split.value}_{i}.wav", label, split)
    for split in Split
    for label in Label
    for i in range(2)
]


def synthetic_clip(label, seed, rate=FIXTURE_RATE, seconds=FIXTURE_SECONDS):
    """Patient clips carry a strong 1.2 kHz component, non-patient clips a 250 Hz hum"""
    rng = np.random.default_rng(seed)
    t = np.arange(int(rate * seconds)) / rate
    tone = 1200.0 if label is Label.PATIENT else 250.0
    signal = 0.5 * np.sin(2 * np.pi * tone * t + rng.uniform(0, np.pi))
    signal += 0.05 * rng.standard_normal(t.size)
    return np.clip(signal, -1.0, 1.0)


@pytest.fixture
def fixture_mfcc_config():
    return MfccConfig(frame_length=256, hop=128, num_filters=12, num_coeffs=4,
                      expected_sample_rate=FIXTURE_RATE)


@pytest.fixture
def wav_corpus(tmp_path):
    """Directory with 12 WAV clips and manifest.csv; returns the manifest path"""
    corpus = tmp_path / 'corpus'
    lines = ['path,label,split']
    for seed, (name, label, split) in enumerate(FIXTURE_CLIPS):
        write_wav(corpus / 'audio' / name, synthetic_clip(label, seed), FIXTURE_RATE)
        lines.append(f"audio/{name},{label.value},{split.value}")
    manifest = corpus / 'manifest.csv'
    manifest.write_text('\n'.join(lines) + '\n', encoding='utf-8')
    return manifest


@pytest.fixture
def pipeline_config(tmp_path):
    """TOML config matching the fixture corpus, with small ensembles"""
    path = tmp_path / 'respire.toml'
    path.write_text(
        "[mfcc]\n"
        "frame_length = 256\n"
        "hop = 128\n"
        "num_filters = 12\n"
        "num_coeffs = 4\n"
        f"expected_sample_rate = {FIXTURE_RATE}\n"
        "\n[bagging]\n"
        "n_learners = 5\n"
        "\n[adaboost]\n"
        "rounds = 5\n",
        encoding='utf-8',
    )
    return path


@pytest.fixture(autouse=True)
def testing_environment(monkeypatch):
    monkeypatch.setenv('RESPIRE_ENV', 'testing')
    monkeypatch.delenv('RESPIRE_SEED', raising=False)


@pytest.fixture
def xor_data():
    """100 points in four Gaussian blobs labelled by XOR of the quadrant signs"""
    rng = np.random.default_rng(7)
    centers = np.array([[1, 1], [-1, -1], [1, -1], [-1, 1]], dtype=float)
    labels = np.array([1, 1, -1, -1])
    which = np.arange(100) % 4
    X = centers[which] + 0.15 * rng.standard_normal((100, 2))
    return X, labels[which]


@pytest.fixture
def two_moons():
    """Noisy interleaved half circles, labels +1 / -1"""
    rng = np.random.default_rng(11)
    n = 200
    angle = rng.uniform(0, np.pi, n)
    upper = np.arange(n) % 2 == 0
    X = np.where(upper[:, None],
                 np.c_[np.cos(angle), np.sin(angle)],
                 np.c_[1 - np.cos(angle), 0.5 - np.sin(angle)])
    X += 0.25 * rng.standard_normal((n, 2))
    return X, np.where(upper, 1, -1)
