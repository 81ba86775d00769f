import argparse
import sys

from config import Config
from core.learners import LEARNER_KINDS
from core.corpus import Split

ALL_LEARNERS = 'all'


class CliParser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit code 1"""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _common_options():
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument('--config', help='TOML file with [run], [mfcc], [svm], [tree], [bagging], [adaboost] sections')
    parent.add_argument('--output', help=f'Artifact directory (default: {Config.OUTPUT_FOLDER})')
    parent.add_argument('--seed', type=int, help='Master seed (default 61080, or RESPIRE_SEED)')
    parent.add_argument('--jobs', type=int, help='Worker processes for extraction and selection')
    verbosity = parent.add_mutually_exclusive_group()
    verbosity.add_argument('--verbose', action='store_true', help='Debug logging')
    verbosity.add_argument('--quiet', action='store_true', help='Warnings and errors only')
    return parent


def _learner_options():
    parent = argparse.ArgumentParser(add_help=False)
    group = parent.add_argument_group('learner parameters')
    group.add_argument('--svm-c', type=float, help='SVM regularization C (default 1.0)')
    group.add_argument('--svm-sigma', type=float, help='RBF width sigma (default 1.0)')
    group.add_argument('--tree-max-splits', type=int, help='Decision tree MaxNumSplits (default 100)')
    group.add_argument('--bagging-learners', type=int, help='Bagged trees (default 100)')
    group.add_argument('--bagging-max-splits', type=int, help='MaxNumSplits per bagged tree (default 3715)')
    group.add_argument('--adaboost-rounds', type=int, help='AdaBoost.M1 rounds (default 100)')
    group.add_argument('--adaboost-max-splits', type=int, help='MaxNumSplits per boosted tree (default 20)')
    return parent


def _learner_choice(value):
    if value != ALL_LEARNERS and value not in LEARNER_KINDS:
        raise argparse.ArgumentTypeError(
            f"invalid learner '{value}' (choose from {', '.join(LEARNER_KINDS)}, {ALL_LEARNERS})")
    return value


def build_parser():
    parser = CliParser(
        prog='respire',
        description='Respiratory sound classification: MFCC statistics, feature selection and four classifiers',
    )
    sub = parser.add_subparsers(dest='command', metavar='command', parser_class=CliParser)
    sub.required = True
    common, learners = _common_options(), _learner_options()

    extract = sub.add_parser('extract', parents=[common], help='Extract feature tables from a manifest')
    extract.add_argument('--manifest', help='CSV manifest with path,label,split columns')
    extract.add_argument('--mel', default=None, help="Mel coefficient count(s): '23', '2..4' or '13,23'")
    extract.add_argument('--allow-skips', action='store_true', help='Exit 0 even when some clips fail to decode')

    train = sub.add_parser('train', parents=[common, learners], help='Train model(s) on the Train split')
    train.add_argument('--learner', nargs='+', type=_learner_choice, default=[ALL_LEARNERS])
    train.add_argument('--mel', type=int, default=None, help='Mel coefficient count of the feature table')
    train.add_argument('--k', type=int, default=None, help='Use the first k features of the selection trace')

    select = sub.add_parser('select', parents=[common, learners], help='Sequential forward selection per learner')
    select.add_argument('--learner', nargs='+', type=_learner_choice, default=[ALL_LEARNERS])
    select.add_argument('--mel', type=int, default=None)
    select.add_argument('--max', dest='max_features', type=int, default=None, help='Selection budget (default 80)')

    evaluate = sub.add_parser('evaluate', parents=[common], help='Evaluate trained model(s) on a split')
    evaluate.add_argument('--learner', nargs='+', type=_learner_choice, default=[ALL_LEARNERS])
    evaluate.add_argument('--mel', type=int, default=None)
    evaluate.add_argument('--k', type=int, default=None)
    evaluate.add_argument('--split', choices=[s.value for s in Split], default=Split.VALIDATION.value)
    evaluate.add_argument('--excel', action='store_true', help='Also write an Excel workbook')

    predict = sub.add_parser('predict', parents=[common], help='Classify WAV clips with a saved model')
    predict.add_argument('--model', required=True, help='Model JSON file')
    predict.add_argument('wav', nargs='+', help='WAV file(s) to classify')

    sweep_mel = sub.add_parser('sweep-mel', parents=[common, learners],
                               help='Validation accuracy per learner for each Mel coefficient count')
    sweep_mel.add_argument('--manifest')
    sweep_mel.add_argument('--mel-range', default='2..39', help="Range of M, e.g. '2..39'")
    sweep_mel.add_argument('--learner', nargs='+', type=_learner_choice, default=[ALL_LEARNERS])
    sweep_mel.add_argument('--allow-skips', action='store_true')
    sweep_mel.add_argument('--plot', action='store_true', help='Also render a PNG chart')
    sweep_mel.add_argument('--excel', action='store_true')

    sweep_sfs = sub.add_parser('sweep-sfs', parents=[common],
                               help='Accuracy against selected-feature count from saved traces')
    sweep_sfs.add_argument('--learner', nargs='+', type=_learner_choice, default=[ALL_LEARNERS])
    sweep_sfs.add_argument('--mel', type=int, default=None)
    sweep_sfs.add_argument('--plot', action='store_true')
    sweep_sfs.add_argument('--excel', action='store_true')

    describe = sub.add_parser('describe', parents=[common], help='Split and label distribution of a manifest')
    describe.add_argument('--manifest')
    describe.add_argument('--plot', action='store_true')

    return parser


def expand_learners(values):
    if not values or ALL_LEARNERS in values:
        return list(LEARNER_KINDS)
    return list(dict.fromkeys(values))
