"""
Learner facade: one entry point to train any of the four classifiers on a
feature table, the TrainedModel that bundles feature selection and
standardization with the estimator, and JSON model persistence.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from core.corpus import FeatureTable, Label, Split
from core.decision_tree import TreeConfig, TreeModel, train_tree
from core.ensemble import (
    ADABOOST_M1, BAGGING, AdaBoostConfig, BaggingConfig, EnsembleModel,
    ensemble_from_dict, ensemble_to_dict, train_adaboost_m1, train_bagging,
)
from core.errors import (
    CorruptModel, DimensionMismatch, EmptyData, InvalidConfig, IoError,
    SchemaVersionMismatch, SplitLeak,
)
from core.features import Standardizer
from core.mfcc import MfccConfig
from core.svm import SvmConfig, SvmModel, SvmTrainingInfo, train_svm

logger = logging.getLogger(__name__)

SVM = 'svm'
TREE = 'tree'
LEARNER_KINDS = (SVM, TREE, BAGGING, ADABOOST_M1)
LEARNER_TITLES = {SVM: 'SVM', TREE: 'Decision tree', BAGGING: 'Bagging', ADABOOST_M1: 'AdaBoost.M1'}

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class LearnerConfigs:
    svm: SvmConfig = field(default_factory=SvmConfig)
    tree: TreeConfig = field(default_factory=TreeConfig)
    bagging: BaggingConfig = field(default_factory=BaggingConfig)
    adaboost: AdaBoostConfig = field(default_factory=AdaBoostConfig)

    def for_kind(self, kind):
        check_kind(kind)
        return {SVM: self.svm, TREE: self.tree, BAGGING: self.bagging, ADABOOST_M1: self.adaboost}[kind]

    def params(self, kind):
        return asdict(self.for_kind(kind))

    def describe(self, kind):
        """Short parameter string for report tables"""
        cfg = self.for_kind(kind)
        if kind == SVM:
            return f"sigma={cfg.sigma:g}, C={cfg.C:g}"
        return f'"MaxNumSplits"={cfg.max_splits}'


def check_kind(kind):
    if kind not in LEARNER_KINDS:
        raise InvalidConfig(f"unknown learner '{kind}' (expected one of {', '.join(LEARNER_KINDS)})")
    return kind


def fit_estimator(kind, X, y, configs: LearnerConfigs | None = None, seed=61080, n_jobs=1):
    """Train the bare estimator on already prepared rows"""
    configs = configs or LearnerConfigs()
    check_kind(kind)
    if kind == SVM:
        return train_svm(X, y, configs.svm)
    if kind == TREE:
        return train_tree(X, y, configs.tree)
    if kind == BAGGING:
        return train_bagging(X, y, configs.bagging, seed=seed, n_jobs=n_jobs)
    return train_adaboost_m1(X, y, configs.adaboost)


@dataclass(eq=False)
class TrainedModel:
    kind: str
    estimator: object
    selected_features: list
    standardizer: Standardizer
    n_input_features: int
    mel_config: MfccConfig | None = None
    config_digest: str | None = None
    params: dict = field(default_factory=dict)
    seed: int | None = None

    def prepare(self, raw_rows) -> np.ndarray:
        """Raw feature rows -> selected, standardized columns"""
        X = np.atleast_2d(np.asarray(raw_rows, dtype=np.float64))
        if X.shape[1] != self.n_input_features:
            raise DimensionMismatch(
                f"model expects {self.n_input_features} raw features, got {X.shape[1]}")
        return self.standardizer.apply(X[:, self.selected_features])

    def decide(self, raw_rows):
        """
        (labels, scores): scores are SVM decision values, ensemble vote
        margins, or the tree leaf's Patient fraction.
        """
        X = self.prepare(raw_rows)
        if isinstance(self.estimator, SvmModel):
            scores = self.estimator.decision_function(X)
            return np.where(scores >= 0, 1, -1), scores
        if isinstance(self.estimator, EnsembleModel):
            return self.estimator.predict_with_margin(X)
        return self.estimator.predict(X), self.estimator.patient_probability(X)

    def predict(self, raw_rows) -> np.ndarray:
        return self.decide(raw_rows)[0]

    def predict_labels(self, raw_rows):
        return [Label.from_sign(v) for v in self.predict(raw_rows)]


def train_model(kind, table: FeatureTable, configs: LearnerConfigs | None = None,
                selected_features=None, seed=61080, n_jobs=1, mel_config=None) -> TrainedModel:
    """
    Fit on the Train rows of ``table``. A table carrying any Test row is
    refused outright so test data can never reach a trainer.
    """
    check_kind(kind)
    configs = configs or LearnerConfigs()
    if any(split is Split.TEST for split in table.splits):
        raise SplitLeak(f"train_model({kind}) received test rows")

    train = table.subset(Split.TRAIN)
    if len(train) == 0:
        raise EmptyData("feature table has no training rows")

    selected = list(range(table.n_features)) if selected_features is None else [int(i) for i in selected_features]
    if not selected or min(selected) < 0 or max(selected) >= table.n_features:
        raise DimensionMismatch(f"selected feature indices out of range for {table.n_features} features")

    columns = train.features[:, selected]
    standardizer = Standardizer.fit(columns)
    estimator = fit_estimator(kind, standardizer.apply(columns), train.targets(), configs, seed, n_jobs)

    return TrainedModel(
        kind=kind,
        estimator=estimator,
        selected_features=selected,
        standardizer=standardizer,
        n_input_features=table.n_features,
        mel_config=mel_config,
        config_digest=table.config_digest,
        params=configs.params(kind),
        seed=int(seed) if kind == BAGGING else None,
    )


# --- persistence ----------------------------------------------------------

def _payload(model: TrainedModel):
    estimator = model.estimator
    if isinstance(estimator, SvmModel):
        info = estimator.info
        return {
            'n_features': estimator.n_features,
            'support_vectors': estimator.support_vectors.tolist(),
            'dual_coef': estimator.dual_coef.tolist(),
            'bias': estimator.bias,
            'sigma': estimator.sigma,
            'info': {
                'iterations': info.iterations,
                'converged': info.converged,
                'kkt_gap': info.kkt_gap,
                'max_kkt_violation': info.max_kkt_violation,
                'dual_objective': info.dual_objective,
                'n_support': info.n_support,
            },
        }
    if isinstance(estimator, TreeModel):
        return estimator.to_dict()
    return ensemble_to_dict(estimator)


def _estimator_from_payload(kind, payload):
    if kind == SVM:
        vectors = np.asarray(payload['support_vectors'], dtype=np.float64)
        return SvmModel(
            support_vectors=vectors.reshape(-1, int(payload['n_features'])),
            dual_coef=np.asarray(payload['dual_coef'], dtype=np.float64),
            bias=float(payload['bias']),
            sigma=float(payload['sigma']),
            info=SvmTrainingInfo(**payload.get('info', {})),
        )
    if kind == TREE:
        return TreeModel.from_dict(payload)
    return ensemble_from_dict(payload)


def model_to_dict(model: TrainedModel):
    return {
        'schema_version': SCHEMA_VERSION,
        'kind': model.kind,
        'mel_config': model.mel_config.to_dict() if model.mel_config else None,
        'config_digest': model.config_digest,
        'selected_features': list(model.selected_features),
        'n_input_features': model.n_input_features,
        'standardizer': model.standardizer.to_dict(),
        'params': model.params,
        'seed': model.seed,
        'payload': _payload(model),
    }


def save_model(model: TrainedModel, path):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8') as fh:
            json.dump(model_to_dict(model), fh, sort_keys=True, separators=(',', ':'))
            fh.write('\n')
    except OSError as e:
        raise IoError(f"cannot write model {path}: {e}") from e
    logger.info("✅ Model saved: %s (%s)", path, model.kind)
    return path


def load_model(path) -> TrainedModel:
    path = Path(path)
    try:
        with open(path, 'r', encoding='utf-8') as fh:
            document = json.load(fh)
    except OSError as e:
        raise IoError(f"cannot read model {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise CorruptModel(f"{path} is not valid JSON: {e}") from e

    if not isinstance(document, dict):
        raise CorruptModel(f"{path}: model file must hold a JSON object")
    version = document.get('schema_version')
    if version != SCHEMA_VERSION:
        raise SchemaVersionMismatch(f"{path}: schema_version {version!r}, this build reads {SCHEMA_VERSION}")

    try:
        kind = check_kind(document['kind'])
        mel = document.get('mel_config')
        return TrainedModel(
            kind=kind,
            estimator=_estimator_from_payload(kind, document['payload']),
            selected_features=[int(i) for i in document['selected_features']],
            standardizer=Standardizer.from_dict(document['standardizer']),
            n_input_features=int(document['n_input_features']),
            mel_config=MfccConfig.from_dict(mel) if mel else None,
            config_digest=document.get('config_digest'),
            params=document.get('params', {}),
            seed=document.get('seed'),
        )
    except (KeyError, TypeError, ValueError, InvalidConfig) as e:
        raise CorruptModel(f"{path}: malformed model file ({e})") from e
