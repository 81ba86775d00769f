"""
Wrapper-based sequential forward selection: grow a feature subset one
column at a time, keeping the candidate with the best validation accuracy
for a given learner.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from core.corpus import FeatureTable, Split
from core.errors import (
    CardinalityOutOfRange, EmptyData, InsufficientFeatures, IoError,
    MissingTrace, SchemaMismatch, SplitLeak,
)
from core.features import Standardizer
from core.learners import LearnerConfigs, check_kind, fit_estimator

logger = logging.getLogger(__name__)

DEFAULT_MAX_FEATURES = 80


@dataclass(frozen=True)
class SelectionStep:
    k: int
    feature: int
    accuracy: float


@dataclass
class SelectionTrace:
    learner_kind: str
    steps: list = field(default_factory=list)
    max_features: int = DEFAULT_MAX_FEATURES
    config_digest: str | None = None
    params: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.steps)

    @property
    def features(self):
        return [step.feature for step in self.steps]

    @property
    def accuracies(self):
        return [step.accuracy for step in self.steps]

    @property
    def best_accuracy(self):
        return max(self.accuracies) if self.steps else float('nan')

    @property
    def best_k(self):
        """Smallest cardinality reaching the best accuracy"""
        if not self.steps:
            return 0
        best = self.best_accuracy
        return next(step.k for step in self.steps if step.accuracy == best)

    def selected(self, k):
        if not 1 <= k <= len(self.steps):
            raise CardinalityOutOfRange(f"k={k} outside 1..{len(self.steps)} recorded steps")
        return self.features[:k]

    def accuracy_at(self, k):
        if not 1 <= k <= len(self.steps):
            raise CardinalityOutOfRange(f"k={k} outside 1..{len(self.steps)} recorded steps")
        return self.steps[k - 1].accuracy

    def to_frame(self):
        return pd.DataFrame(
            [(s.k, s.feature, s.accuracy) for s in self.steps],
            columns=['k', 'feature', 'accuracy'],
        )


def _reject_test_rows(*tables):
    for table in tables:
        if any(split is Split.TEST for split in table.splits):
            raise SplitLeak("feature selection received test rows")


def candidate_accuracy(kind, X_train, y_train, X_valid, y_valid, columns, configs, seed=61080):
    """Validation accuracy of ``kind`` trained on exactly ``columns``"""
    standardizer = Standardizer.fit(X_train[:, columns])
    estimator = fit_estimator(kind, standardizer.apply(X_train[:, columns]), y_train, configs, seed)
    predictions = estimator.predict(standardizer.apply(X_valid[:, columns]))
    return float(np.mean(predictions == y_valid))


def sfs(train: FeatureTable, validation: FeatureTable, kind, configs: LearnerConfigs | None = None,
        max_features=DEFAULT_MAX_FEATURES, seed=61080, n_jobs=1, progress_callback=None) -> SelectionTrace:
    """
    Greedy forward selection. Each step retrains one model per remaining
    candidate on the Train rows and scores it on the Validation rows; the
    best candidate is added, ties going to the lower feature index.
    """
    check_kind(kind)
    configs = configs or LearnerConfigs()
    _reject_test_rows(train, validation)
    if len(train) == 0 or len(validation) == 0:
        raise EmptyData("feature selection needs non-empty train and validation rows")
    if train.n_features != validation.n_features:
        raise SchemaMismatch(
            f"train has {train.n_features} features, validation has {validation.n_features}")
    if not 1 <= max_features <= train.n_features:
        raise InsufficientFeatures(
            f"max_features={max_features} but the table only has {train.n_features} features")

    X_train, y_train = train.features, train.targets()
    X_valid, y_valid = validation.features, validation.targets()

    trace = SelectionTrace(
        learner_kind=kind,
        max_features=int(max_features),
        config_digest=train.config_digest,
        params=configs.params(kind),
    )
    chosen = []
    remaining = list(range(train.n_features))

    for k in range(1, max_features + 1):
        scores = Parallel(n_jobs=n_jobs)(
            delayed(candidate_accuracy)(kind, X_train, y_train, X_valid, y_valid, chosen + [c], configs, seed)
            for c in remaining
        )
        # remaining is ascending, so argmax keeps the lowest index on ties
        best = int(np.argmax(scores))
        feature = remaining.pop(best)
        chosen.append(feature)
        trace.steps.append(SelectionStep(k, feature, float(scores[best])))

        logger.info("🔄 SFS[%s] k=%d: +%s (validation accuracy %.4f)",
                    kind, k, train.feature_names[feature], scores[best])
        if progress_callback:
            progress_callback(f"k={k}: {train.feature_names[feature]}", int(100 * k / max_features))

    logger.info("✅ SFS[%s] finished: best k=%d with accuracy %.4f", kind, trace.best_k, trace.best_accuracy)
    return trace


def apply_selection(trace: SelectionTrace, k, rows):
    """Project rows (FeatureTable or 2-D array) onto the first k selected columns, in selection order"""
    columns = trace.selected(k)
    X = rows.features if isinstance(rows, FeatureTable) else np.atleast_2d(np.asarray(rows, dtype=np.float64))
    return X[:, columns]


def parsimonious_k(trace: SelectionTrace, tolerance=0.005):
    """Smallest k whose validation accuracy is within ``tolerance`` of the best"""
    if not trace.steps:
        raise MissingTrace("empty selection trace")
    floor = trace.best_accuracy - tolerance
    return next(step.k for step in trace.steps if step.accuracy >= floor)


def trace_to_dict(trace: SelectionTrace):
    return {
        'learner_kind': trace.learner_kind,
        'config_digest': trace.config_digest,
        'max_features': trace.max_features,
        'params': trace.params,
        'steps': [{'k': s.k, 'feature': s.feature, 'accuracy': s.accuracy} for s in trace.steps],
    }


def save_trace(trace: SelectionTrace, path):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8') as fh:
            json.dump(trace_to_dict(trace), fh, sort_keys=True, indent=1)
            fh.write('\n')
    except OSError as e:
        raise IoError(f"cannot write selection trace {path}: {e}") from e
    return path


def load_trace(path) -> SelectionTrace:
    path = Path(path)
    if not path.exists():
        raise MissingTrace(f"no selection trace at {path}")
    try:
        with open(path, 'r', encoding='utf-8') as fh:
            values = json.load(fh)
        steps = [SelectionStep(int(s['k']), int(s['feature']), float(s['accuracy'])) for s in values['steps']]
        trace = SelectionTrace(
            learner_kind=check_kind(values['learner_kind']),
            steps=steps,
            max_features=int(values.get('max_features', len(steps))),
            config_digest=values.get('config_digest'),
            params=values.get('params', {}),
        )
    except OSError as e:
        raise IoError(f"cannot read selection trace {path}: {e}") from e
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise SchemaMismatch(f"{path}: malformed selection trace ({e})") from e

    if [s.k for s in steps] != list(range(1, len(steps) + 1)) or len(set(trace.features)) != len(steps):
        raise SchemaMismatch(f"{path}: steps must have consecutive cardinalities and distinct features")
    return trace
