import numpy as np
import pytest

from core.corpus import FeatureTable, Label, Split
from core.errors import CardinalityOutOfRange, InsufficientFeatures, MissingTrace, SchemaMismatch, SplitLeak
from core.learners import SVM, TREE, LearnerConfigs
from core.selection import (
    SelectionStep, SelectionTrace, apply_selection, candidate_accuracy, load_trace,
    parsimonious_k, save_trace, sfs,
)


def make_table(X, y, split):
    labels = [Label.from_sign(v) for v in y]
    return FeatureTable([f"{split.value}_{i}" for i in range(len(y))], labels, [split] * len(y), X, 1,
                        config_digest='d1')


def informative_tables(seed=0, n_train=40, n_valid=30):
    """Seven columns of noise except column 2, which separates the classes"""
    rng = np.random.default_rng(seed)
    tables = []
    for n, split in ((n_train, Split.TRAIN), (n_valid, Split.VALIDATION)):
        y = np.where(np.arange(n) % 2 == 0, 1, -1)
        X = rng.standard_normal((n, 7))
        X[:, 2] = y + 0.1 * rng.standard_normal(n)
        tables.append(make_table(X, y, split))
    return tables


def trace_of(accuracies, kind=TREE):
    return SelectionTrace(kind, [SelectionStep(k, k - 1, a) for k, a in enumerate(accuracies, start=1)])


def test_informative_feature_is_picked_first():
    train, valid = informative_tables()

    trace = sfs(train, valid, TREE, max_features=1)

    assert trace.features == [2]
    assert trace.accuracies == [1.0]


def test_steps_are_distinct_and_recomputable():
    train, valid = informative_tables(seed=1)
    configs = LearnerConfigs()

    trace = sfs(train, valid, TREE, configs, max_features=4)

    assert [s.k for s in trace.steps] == [1, 2, 3, 4]
    assert len(set(trace.features)) == 4
    for step in trace.steps:
        expected = candidate_accuracy(TREE, train.features, train.targets(), valid.features, valid.targets(),
                                      trace.selected(step.k), configs)
        assert step.accuracy == expected


def test_first_step_is_the_best_single_feature():
    rng = np.random.default_rng(2)
    y_train = np.where(rng.random(50) < 0.5, 1, -1)
    y_valid = np.where(rng.random(40) < 0.5, 1, -1)
    X_train = rng.standard_normal((50, 7)) + 0.4 * y_train[:, None] * np.linspace(0, 1, 7)
    X_valid = rng.standard_normal((40, 7)) + 0.4 * y_valid[:, None] * np.linspace(0, 1, 7)
    train = make_table(X_train, y_train, Split.TRAIN)
    valid = make_table(X_valid, y_valid, Split.VALIDATION)

    scores = [candidate_accuracy(TREE, X_train, y_train, X_valid, y_valid, [c], LearnerConfigs()) for c in range(7)]
    trace = sfs(train, valid, TREE, max_features=1)

    assert trace.features[0] == int(np.argmax(scores))
    assert trace.accuracies[0] == max(scores)


def six_feature_tables(seed=11):
    rng = np.random.default_rng(seed)
    tables = []
    for n, split in ((40, Split.TRAIN), (30, Split.VALIDATION)):
        y = np.where(np.arange(n) % 2 == 0, 1, -1)
        X = rng.standard_normal((n, 6)) + 0.8 * y[:, None] * np.array([0.2, 1.0, 0.0, 0.6, 0.4, 0.0])
        tables.append(make_table(X, y, split))
    return tables


@pytest.mark.parametrize('kind', [TREE, SVM])
def test_first_two_steps_match_exhaustive_search(kind):
    train, valid = six_feature_tables()
    configs = LearnerConfigs()

    def score(columns):
        return candidate_accuracy(kind, train.features, train.targets(), valid.features, valid.targets(),
                                  columns, configs)

    first = max(range(6), key=lambda c: (score([c]), -c))
    second = max((c for c in range(6) if c != first), key=lambda c: (score([first, c]), -c))

    trace = sfs(train, valid, kind, configs, max_features=2)

    assert trace.features == [first, second]
    assert trace.accuracies == [score([first]), score([first, second])]


def test_selecting_every_feature_orders_the_full_set():
    train, valid = informative_tables(seed=6)

    trace = sfs(train, valid, TREE, max_features=7)

    assert sorted(trace.features) == list(range(7))
    assert trace.features[0] == 2
    assert [s.k for s in trace.steps] == list(range(1, 8))


def test_training_row_order_does_not_matter():
    train, valid = informative_tables(seed=3)
    order = np.random.default_rng(4).permutation(len(train))
    shuffled = make_table(train.features[order], train.targets()[order], Split.TRAIN)

    original = sfs(train, valid, TREE, max_features=3)
    permuted = sfs(shuffled, valid, TREE, max_features=3)

    assert original.steps == permuted.steps


def test_parallel_candidates_match_serial():
    train, valid = informative_tables(seed=5)

    serial = sfs(train, valid, TREE, max_features=2, n_jobs=1)
    parallel = sfs(train, valid, TREE, max_features=2, n_jobs=2)

    assert serial.steps == parallel.steps


def test_test_rows_are_refused():
    train, valid = informative_tables()
    leaked = make_table(valid.features, valid.targets(), Split.TEST)

    with pytest.raises(SplitLeak):
        sfs(train, leaked, TREE, max_features=1)


def test_max_features_beyond_table():
    train, valid = informative_tables()
    with pytest.raises(InsufficientFeatures):
        sfs(train, valid, TREE, max_features=8)


def test_best_and_parsimonious_cardinality():
    trace = trace_of([0.5, 0.7, 0.798, 0.8, 0.79])

    assert trace.best_k == 4
    assert parsimonious_k(trace) == 3
    assert parsimonious_k(trace, tolerance=0.0) == 4


def test_best_k_prefers_the_smaller_subset_on_ties():
    assert trace_of([0.6, 0.9, 0.9]).best_k == 2


def test_selected_cardinality_range():
    trace = trace_of([0.5, 0.6])

    assert trace.selected(2) == [0, 1]
    with pytest.raises(CardinalityOutOfRange):
        trace.selected(3)
    with pytest.raises(CardinalityOutOfRange):
        trace.selected(0)


def test_apply_selection_keeps_selection_order():
    trace = SelectionTrace(TREE, [SelectionStep(1, 4, 0.7), SelectionStep(2, 1, 0.8)])
    rows = np.arange(14, dtype=float).reshape(2, 7)

    np.testing.assert_array_equal(apply_selection(trace, 2, rows), [[4.0, 1.0], [11.0, 8.0]])


def test_trace_file_round_trip(tmp_path):
    train, valid = informative_tables()
    trace = sfs(train, valid, TREE, max_features=2)

    loaded = load_trace(save_trace(trace, tmp_path / 'traces' / 'tree_m1.json'))

    assert loaded.steps == trace.steps
    assert loaded.config_digest == 'd1'
    assert loaded.learner_kind == TREE


def test_missing_and_malformed_trace(tmp_path):
    with pytest.raises(MissingTrace):
        load_trace(tmp_path / 'absent.json')

    broken = tmp_path / 'broken.json'
    broken.write_text('{"learner_kind": "tree", "steps": [{"k": 2, "feature": 0, "accuracy": 0.5}]}')
    with pytest.raises(SchemaMismatch):
        load_trace(broken)
