"""
Classification metrics, the Mel-coefficient and SFS-cardinality sweeps,
the final test-split evaluation and comparison against the
reference figures.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import pandas as pd

from core.corpus import FeatureTable, Split
from core.errors import DimensionMismatch, EmptyData, IoError, MissingTrace, SplitLeak
from core.learners import LEARNER_KINDS, LEARNER_TITLES, LearnerConfigs, TrainedModel, train_model

logger = logging.getLogger(__name__)

MEL_RANGE = range(2, 40)

# accuracy, sensitivity-patient, sensitivity-non-patient at M=23, k=74
REFERENCE_RESULTS = {
    'validation': {
        'tree': (0.7596, 0.7752, 0.7344),
        'adaboost_m1': (0.8022, 0.8603, 0.7087),
        'bagging': (0.8014, 0.8484, 0.7259),
        'svm': (0.8318, 0.8776, 0.7580),
    },
    'test': {
        'tree': (0.7754, 0.8180, 0.7082),
        'adaboost_m1': (0.7518, 0.8367, 0.6177),
        'bagging': (0.7784, 0.8377, 0.6848),
        'svm': (0.7076, 0.7240, 0.6817),
    },
}
REFERENCE_PARAMETERS = {
    'tree': '"MaxNumSplits"=100',
    'adaboost_m1': '"MaxNumSplits"=20',
    'bagging': '"MaxNumSplits"=3715',
    'svm': 'sigma=1',
}
METRICS = ('accuracy', 'sensitivity_patient', 'sensitivity_non_patient')


@dataclass(frozen=True)
class EvalReport:
    tp: int
    fn: int
    fp: int
    tn: int
    learner: str | None = None
    split: str | None = None

    @classmethod
    def from_predictions(cls, y_true, y_pred, learner=None, split=None) -> EvalReport:
        """Labels as +1 (Patient) / -1 (NonPatient)"""
        y_true = np.asarray(y_true).ravel()
        y_pred = np.asarray(y_pred).ravel()
        if y_true.size != y_pred.size:
            raise DimensionMismatch(f"{y_true.size} labels but {y_pred.size} predictions")
        if y_true.size == 0:
            raise EmptyData("cannot evaluate on zero rows")
        patient, predicted = y_true > 0, y_pred > 0
        return cls(
            tp=int(np.sum(patient & predicted)),
            fn=int(np.sum(patient & ~predicted)),
            fp=int(np.sum(~patient & predicted)),
            tn=int(np.sum(~patient & ~predicted)),
            learner=learner,
            split=split,
        )

    @property
    def n(self):
        return self.tp + self.fn + self.fp + self.tn

    @property
    def confusion(self):
        """Rows: true Patient / NonPatient; columns: predicted Patient / NonPatient"""
        return np.array([[self.tp, self.fn], [self.fp, self.tn]])

    @property
    def accuracy(self):
        return (self.tp + self.tn) / self.n

    @property
    def sensitivity_patient(self):
        positives = self.tp + self.fn
        return self.tp / positives if positives else None

    @property
    def sensitivity_non_patient(self):
        negatives = self.tn + self.fp
        return self.tn / negatives if negatives else None

    def to_dict(self):
        return {
            'learner': self.learner,
            'split': self.split,
            'n': self.n,
            'tp': self.tp, 'fn': self.fn, 'fp': self.fp, 'tn': self.tn,
            'accuracy': self.accuracy,
            'sensitivity_patient': self.sensitivity_patient,
            'sensitivity_non_patient': self.sensitivity_non_patient,
        }


class SplitGuard:
    """
    Gatekeeper for split reads. Every read is recorded (and appended to the
    audit log when one is configured); test rows are refused until
    ``unlock_test`` is called by the final evaluation.
    """

    def __init__(self, audit_path=None):
        self.audit_path = Path(audit_path) if audit_path else None
        self.test_unlocked = False
        self.records = []

    def unlock_test(self, operation='final_test'):
        self.test_unlocked = True
        logger.info("🔓 Test split unlocked for %s", operation)

    def read(self, table: FeatureTable, *splits: Split, operation='read') -> FeatureTable:
        if Split.TEST in splits and not self.test_unlocked:
            raise SplitLeak(f"{operation} tried to read the test split before final evaluation")
        subset = table.subset(*splits)
        for split in splits:
            rows = sum(s is split for s in subset.splits)
            self._record(split, rows, operation)
        return subset

    def test_reads(self):
        return [r for r in self.records if r['split'] == Split.TEST.value]

    def _record(self, split, rows, operation):
        record = {
            'timestamp': datetime.now(timezone.utc).isoformat(timespec='seconds'),
            'split': split.value,
            'rows_read': int(rows),
            'operation': operation,
        }
        self.records.append(record)
        if self.audit_path is None:
            return
        try:
            self.audit_path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.audit_path, 'a', encoding='utf-8') as fh:
                fh.write(json.dumps(record) + '\n')
        except OSError as e:
            raise IoError(f"cannot append to audit log {self.audit_path}: {e}") from e


def evaluate(model: TrainedModel, table: FeatureTable, split=None) -> EvalReport:
    if len(table) == 0:
        raise EmptyData("cannot evaluate on zero rows")
    predictions = model.predict(table.features)
    if split is None:
        present = {s.value for s in table.splits}
        split = present.pop() if len(present) == 1 else 'mixed'
    return EvalReport.from_predictions(table.targets(), predictions, learner=model.kind, split=split)


@dataclass
class SweepReport:
    axis_name: str
    axis: list
    series: dict = field(default_factory=dict)

    def __post_init__(self):
        self.axis = [int(a) for a in self.axis]
        for learner, values in self.series.items():
            if len(values) != len(self.axis):
                raise DimensionMismatch(
                    f"series '{learner}' has {len(values)} points for an axis of {len(self.axis)}")

    @property
    def learners(self):
        return list(self.series)

    def chosen_point(self, learner):
        """(axis value, accuracy) of the best point; ties go to the smaller axis value"""
        values = np.asarray(self.series[learner], dtype=np.float64)
        if np.all(np.isnan(values)):
            return None
        best = np.nanmax(values)
        axis_value = min(a for a, v in zip(self.axis, values) if v == best)
        return axis_value, float(best)

    def chosen_points(self):
        return {learner: self.chosen_point(learner) for learner in self.series}

    def to_long_frame(self):
        rows = [
            (a, learner, values[i])
            for i, a in enumerate(self.axis)
            for learner, values in self.series.items()
        ]
        return pd.DataFrame(rows, columns=['axis', 'learner', 'accuracy'])

    def to_wide_frame(self):
        return pd.DataFrame(self.series, index=pd.Index(self.axis, name=self.axis_name))


def _table_source(source):
    if isinstance(source, FeatureTable):
        return lambda m: source if m == source.mel_coeff_count else source.truncate_mel(m, source.config_digest)
    return source


def sweep_mel(source, mel_values=MEL_RANGE, configs: LearnerConfigs | None = None, learners=LEARNER_KINDS,
              seed=61080, n_jobs=1, guard: SplitGuard | None = None, progress_callback=None) -> SweepReport:
    """
    For each Mel coefficient count M train every learner on Train and score
    it on Validation. ``source`` is a FeatureTable extracted at the largest
    M (smaller tables are prefixes of it) or a callable M -> FeatureTable.
    """
    configs = configs or LearnerConfigs()
    guard = guard or SplitGuard()
    table_for = _table_source(source)
    mel_values = [int(m) for m in mel_values]
    series = {kind: [] for kind in learners}

    for position, m in enumerate(mel_values, start=1):
        table = table_for(m)
        train = guard.read(table, Split.TRAIN, operation=f'sweep_mel:M={m}')
        validation = guard.read(table, Split.VALIDATION, operation=f'sweep_mel:M={m}')
        for kind in learners:
            model = train_model(kind, train, configs, seed=seed, n_jobs=n_jobs)
            series[kind].append(evaluate(model, validation).accuracy)
        logger.info("📊 M=%d: %s", m, ", ".join(f"{k}={series[k][-1]:.4f}" for k in learners))
        if progress_callback:
            progress_callback(f"M={m}", int(100 * position / len(mel_values)))

    report = SweepReport('mel', mel_values, series)
    for kind, point in report.chosen_points().items():
        logger.info("✅ %s best at M=%d (accuracy %.4f)", kind, *point)
    return report


def sweep_sfs(traces) -> SweepReport:
    """
    Accuracy against cardinality per learner from SelectionTraces (a
    mapping learner -> trace or a list of traces). Shorter traces are padded
    with NaN up to the longest.
    """
    if isinstance(traces, dict):
        traces = list(traces.values())
    traces = list(traces or [])
    if not traces or any(t is None or not t.steps for t in traces):
        raise MissingTrace("sweep over cardinality needs a non-empty trace per learner")

    length = max(len(t) for t in traces)
    series = {
        t.learner_kind: t.accuracies + [float('nan')] * (length - len(t))
        for t in traces
    }
    return SweepReport('k', list(range(1, length + 1)), series)


def final_test(models, table: FeatureTable, guard: SplitGuard | None = None):
    """One EvalReport per model on the Test split; the only place test rows are read"""
    guard = guard or SplitGuard()
    if isinstance(models, dict):
        models = list(models.values())
    guard.unlock_test()
    test = guard.read(table, Split.TEST, operation='final_test')
    if len(test) == 0:
        raise EmptyData("feature table has no test rows")
    reports = [evaluate(model, test, split=Split.TEST.value) for model in models]
    for report in reports:
        logger.info("📊 %s on test: accuracy %.4f", report.learner, report.accuracy)
    return reports


def summary_table(reports, parameters=None) -> pd.DataFrame:
    """Classifier | parameters | accuracy | sensitivity-patient | sensitivity-non-patient"""
    parameters = parameters or {}
    rows = []
    for report in reports:
        rows.append({
            'classifier': LEARNER_TITLES.get(report.learner, report.learner),
            'parameters': parameters.get(report.learner, ''),
            'accuracy': report.accuracy,
            'sensitivity_patient': report.sensitivity_patient,
            'sensitivity_non_patient': report.sensitivity_non_patient,
        })
    return pd.DataFrame(rows, columns=['classifier', 'parameters', *METRICS])


def compare_with_reference(reports, split='validation', reference=None, tolerance=0.05) -> pd.DataFrame:
    """Per-metric deltas against the reference figures; a report, never an assertion"""
    reference = (reference or REFERENCE_RESULTS)[split]
    rows = []
    for report in reports:
        expected = reference.get(report.learner)
        if expected is None:
            continue
        for metric, target in zip(METRICS, expected):
            observed = getattr(report, metric)
            delta = None if observed is None else observed - target
            rows.append({
                'learner': report.learner,
                'metric': metric,
                'observed': observed,
                'reference': target,
                'delta': delta,
                'within_tolerance': delta is not None and abs(delta) <= tolerance,
            })
    return pd.DataFrame(rows, columns=['learner', 'metric', 'observed', 'reference', 'delta', 'within_tolerance'])


def feature_selection_gain(full_report: EvalReport, selected_report: EvalReport):
    """Accuracy change from the full feature set to the selected subset"""
    return selected_report.accuracy - full_report.accuracy
