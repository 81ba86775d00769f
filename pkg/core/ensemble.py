"""
Tree ensembles: bootstrap aggregation (bagging) and AdaBoost.M1.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed

from core.decision_tree import TreeConfig, TreeModel, train_tree
from core.errors import DimensionMismatch, EmptyData, InvalidConfig, SingleClassData, WeakLearnerFailed

logger = logging.getLogger(__name__)

BAGGING = 'bagging'
ADABOOST_M1 = 'adaboost_m1'

# beta used when a boosting round fits the weighted data perfectly
BETA_FLOOR = 1e-10


@dataclass(frozen=True)
class BaggingConfig:
    n_learners: int = 100
    max_splits: int = 3715
    min_leaf: int = 1

    def __post_init__(self):
        if self.n_learners < 1:
            raise InvalidConfig(f"n_learners must be >= 1, got {self.n_learners}")

    @property
    def tree(self):
        return TreeConfig(max_splits=self.max_splits, min_leaf=self.min_leaf)


@dataclass(frozen=True)
class AdaBoostConfig:
    rounds: int = 100
    max_splits: int = 20
    min_leaf: int = 1

    def __post_init__(self):
        if self.rounds < 1:
            raise InvalidConfig(f"rounds must be >= 1, got {self.rounds}")

    @property
    def tree(self):
        return TreeConfig(max_splits=self.max_splits, min_leaf=self.min_leaf)


@dataclass
class BoostingRound:
    error: float
    beta: float
    member_weight: float
    weight_sum: float
    accepted: bool


@dataclass(eq=False)
class EnsembleModel:
    kind: str
    members: list
    member_weights: np.ndarray
    rng_seed: int = 0
    patient_prior: float = 0.5
    rounds: list = field(default_factory=list)

    @property
    def n_features(self):
        return self.members[0].n_features

    def votes(self, X):
        """(patient_votes, non_patient_votes) per row"""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_features:
            raise DimensionMismatch(f"ensemble expects {self.n_features} features, got {X.shape[1]}")
        patient = np.zeros(X.shape[0])
        other = np.zeros(X.shape[0])
        for tree, weight in zip(self.members, self.member_weights):
            predictions = tree.predict(X)
            patient += np.where(predictions > 0, weight, 0.0)
            other += np.where(predictions > 0, 0.0, weight)
        return patient, other

    def predict_with_margin(self, X):
        patient, other = self.votes(X)
        # ties go to the class with the higher training prior, then Patient
        tie_label = -1 if self.patient_prior < 0.5 else 1
        labels = np.where(patient > other, 1, np.where(patient < other, -1, tie_label))
        margin = np.abs(patient - other) / float(np.sum(self.member_weights))
        return labels, margin

    def predict(self, X):
        return self.predict_with_margin(X)[0]

    @property
    def training_error_bound(self):
        """prod 2 sqrt(e_t (1 - e_t)) over accepted boosting rounds"""
        accepted = [r.error for r in self.rounds if r.accepted]
        return float(np.prod([2.0 * math.sqrt(e * (1.0 - e)) for e in accepted])) if accepted else 1.0


def bootstrap_indices(n_rows, seed, member):
    """Draw n_rows indices with replacement from the stream of (seed, member)"""
    rng = np.random.default_rng([int(seed), int(member)])
    return rng.integers(0, n_rows, size=n_rows)


def _fit_bagged_member(X, y, cfg, seed, member):
    index = bootstrap_indices(y.size, seed, member)
    return train_tree(X[index], y[index], cfg.tree)


def _check_rows(X, y):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y).ravel()
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyData("no training rows")
    if X.shape[0] != y.size:
        raise DimensionMismatch(f"{X.shape[0]} rows but {y.size} labels")
    return X, y


def train_bagging(X, y, cfg: BaggingConfig | None = None, seed=61080, n_jobs=1) -> EnsembleModel:
    """
    Each member t is an unweighted tree on a bootstrap drawn from the
    stream (seed, t), so serial and parallel runs build identical members.
    """
    cfg = cfg or BaggingConfig()
    X, y = _check_rows(X, y)
    members = Parallel(n_jobs=n_jobs)(
        delayed(_fit_bagged_member)(X, y, cfg, seed, member) for member in range(1, cfg.n_learners + 1)
    )
    logger.info("✅ Bagging: %d trees (MaxNumSplits=%d, seed=%d)", len(members), cfg.max_splits, seed)
    return EnsembleModel(
        kind=BAGGING,
        members=list(members),
        member_weights=np.ones(len(members)),
        rng_seed=int(seed),
        patient_prior=float(np.mean(y > 0)),
    )


def adaboost_member_weight(error):
    """ln(1 / beta) with beta = e / (1 - e), floored for a perfect learner"""
    beta = max(error / (1.0 - error), BETA_FLOOR)
    return math.log(1.0 / beta)


def train_adaboost_m1(X, y, cfg: AdaBoostConfig | None = None) -> EnsembleModel:
    """
    AdaBoost.M1 by reweighting: each round fits a weighted tree, scales the
    weights of correctly classified rows by beta = e / (1 - e) and
    renormalizes. A round with e >= 0.5 is discarded and ends training; a
    round with e = 0 is kept (beta floored) and ends training.
    """
    cfg = cfg or AdaBoostConfig()
    X, y = _check_rows(X, y)
    if np.unique(y).size < 2:
        raise SingleClassData("AdaBoost.M1 needs both classes")

    weights = np.full(y.size, 1.0 / y.size)
    members, member_weights, rounds = [], [], []

    for round_number in range(1, cfg.rounds + 1):
        tree = train_tree(X, y, cfg.tree, sample_weights=weights)
        correct = tree.predict(X) == y
        error = float(weights[~correct].sum())

        if error >= 0.5:
            rounds.append(BoostingRound(error, 1.0, 0.0, float(weights.sum()), accepted=False))
            logger.info("⚠️ AdaBoost.M1 round %d: weighted error %.4f >= 0.5, stopping", round_number, error)
            break

        beta = max(error / (1.0 - error), BETA_FLOOR)
        members.append(tree)
        member_weights.append(math.log(1.0 / beta))

        if error == 0:
            rounds.append(BoostingRound(error, beta, member_weights[-1], float(weights.sum()), accepted=True))
            logger.info("✅ AdaBoost.M1 round %d fits the training data exactly, stopping", round_number)
            break

        weights = np.where(correct, weights * beta, weights)
        weights = weights / weights.sum()
        rounds.append(BoostingRound(error, beta, member_weights[-1], float(weights.sum()), accepted=True))

    if not members:
        raise WeakLearnerFailed(
            f"first boosting round already has weighted error {rounds[0].error:.4f} >= 0.5")

    logger.info("✅ AdaBoost.M1: %d members (MaxNumSplits=%d)", len(members), cfg.max_splits)
    return EnsembleModel(
        kind=ADABOOST_M1,
        members=members,
        member_weights=np.asarray(member_weights),
        patient_prior=float(np.mean(y > 0)),
        rounds=rounds,
    )


def predict_ensemble(model: EnsembleModel, x):
    """(label sign, vote margin) for one feature vector"""
    x = np.asarray(x, dtype=np.float64).ravel()
    labels, margins = model.predict_with_margin(x[None, :])
    return int(labels[0]), float(margins[0])


def ensemble_to_dict(model: EnsembleModel):
    return {
        'kind': model.kind,
        'rng_seed': model.rng_seed,
        'patient_prior': model.patient_prior,
        'member_weights': model.member_weights.tolist(),
        'members': [tree.to_dict() for tree in model.members],
        'rounds': [vars(r) for r in model.rounds],
    }


def ensemble_from_dict(values):
    return EnsembleModel(
        kind=values['kind'],
        members=[TreeModel.from_dict(m) for m in values['members']],
        member_weights=np.asarray(values['member_weights'], dtype=np.float64),
        rng_seed=int(values.get('rng_seed', 0)),
        patient_prior=float(values.get('patient_prior', 0.5)),
        rounds=[BoostingRound(**r) for r in values.get('rounds', [])],
    )
