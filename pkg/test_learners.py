import json

import numpy as np
import pytest

from core.corpus import FeatureTable, Label, Split
from core.ensemble import ADABOOST_M1, BAGGING, AdaBoostConfig, BaggingConfig
from core.errors import CorruptModel, DimensionMismatch, EmptyData, InvalidConfig, SchemaVersionMismatch, SplitLeak
from core.learners import (
    LEARNER_KINDS, SVM, TREE, LearnerConfigs, TrainedModel, load_model, save_model, train_model,
)
from core.mfcc import MfccConfig

SMALL = LearnerConfigs(bagging=BaggingConfig(n_learners=4, max_splits=8),
                       adaboost=AdaBoostConfig(rounds=4, max_splits=2))


def development_table(n=40, seed=0):
    rng = np.random.default_rng(seed)
    y = np.where(np.arange(n) % 2 == 0, 1, -1)
    X = rng.standard_normal((n, 14)) * 5 + 3
    X[:, 3] = 10 * y + rng.standard_normal(n)
    splits = [Split.TRAIN if i < n * 3 // 4 else Split.VALIDATION for i in range(n)]
    return FeatureTable([f"c{i}" for i in range(n)], [Label.from_sign(v) for v in y], splits, X, 2,
                        config_digest='feedbeef')


@pytest.mark.parametrize('kind', LEARNER_KINDS)
def test_every_learner_trains_and_predicts(kind):
    table = development_table()

    model = train_model(kind, table, SMALL, selected_features=[3, 0, 7])

    labels, scores = model.decide(table.features)
    assert model.kind == kind
    assert labels.shape == scores.shape == (len(table),)
    assert np.mean(labels == table.targets()) >= 0.9
    assert set(model.predict_labels(table.features[:2])) <= set(Label)


@pytest.mark.parametrize('kind', [SVM, ADABOOST_M1, TREE, BAGGING])
def test_saved_model_decides_identically(tmp_path, kind):
    table = development_table(seed=1)
    model = train_model(kind, table, SMALL, selected_features=[3, 5], seed=7,
                        mel_config=MfccConfig(num_coeffs=2))

    loaded = load_model(save_model(model, tmp_path / f"{kind}.json"))

    queries = np.random.default_rng(2).standard_normal((25, 14)) * 5
    expected_labels, expected_scores = model.decide(queries)
    labels, scores = loaded.decide(queries)
    np.testing.assert_array_equal(labels, expected_labels)
    np.testing.assert_array_equal(scores, expected_scores)
    assert loaded.selected_features == [3, 5]
    assert loaded.config_digest == 'feedbeef'
    assert loaded.mel_config == MfccConfig(num_coeffs=2)


def test_model_file_is_deterministic(tmp_path):
    table = development_table()
    first = save_model(train_model(BAGGING, table, SMALL, seed=3), tmp_path / 'a.json')
    second = save_model(train_model(BAGGING, table, SMALL, seed=3), tmp_path / 'b.json')

    assert first.read_bytes() == second.read_bytes()


def test_unknown_schema_version(tmp_path):
    path = save_model(train_model(TREE, development_table()), tmp_path / 'tree.json')
    document = json.loads(path.read_text())
    document['schema_version'] = 99
    path.write_text(json.dumps(document))

    with pytest.raises(SchemaVersionMismatch):
        load_model(path)


def test_corrupt_model_files(tmp_path):
    garbage = tmp_path / 'garbage.json'
    garbage.write_text('{not json')
    truncated = tmp_path / 'truncated.json'
    truncated.write_text('{"schema_version": 1, "kind": "svm"}')

    with pytest.raises(CorruptModel):
        load_model(garbage)
    with pytest.raises(CorruptModel):
        load_model(truncated)


def test_training_refuses_test_rows():
    table = development_table()
    table.splits[-1] = Split.TEST

    with pytest.raises(SplitLeak):
        train_model(TREE, table)


def test_training_needs_train_rows():
    table = development_table()
    validation_only = table.subset(Split.VALIDATION)

    with pytest.raises(EmptyData):
        train_model(TREE, validation_only)


def test_bad_selection_and_kind():
    table = development_table()

    with pytest.raises(DimensionMismatch):
        train_model(TREE, table, selected_features=[14])
    with pytest.raises(InvalidConfig):
        train_model('forest', table)


def test_prepare_checks_raw_width():
    model = train_model(TREE, development_table())

    assert isinstance(model, TrainedModel)
    with pytest.raises(DimensionMismatch):
        model.prepare(np.zeros((1, 7)))


def test_parameter_descriptions():
    configs = LearnerConfigs()

    assert configs.describe(SVM) == 'sigma=1, C=1'
    assert configs.describe(BAGGING) == '"MaxNumSplits"=3715'
    assert configs.describe(ADABOOST_M1) == '"MaxNumSplits"=20'
    assert configs.describe(TREE) == '"MaxNumSplits"=100'
