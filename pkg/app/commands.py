"""
Command handlers. Each takes the resolved RunConfig and the parsed
arguments and returns a process exit code; library errors propagate to
the CLI factory, which maps them to exit codes.
"""

import logging

from app.forms import expand_learners
from app.utils import (
    EXIT_OK, UsageError, check_digest, format_file_size, model_path,
    parse_mel_values, require_file, trace_path,
)
from core.corpus import Label, Split, load_manifest, read_feature_table, summarize_manifest
from core.errors import CorruptModel
from core.evaluation import SplitGuard, evaluate, final_test, sweep_mel, sweep_sfs
from core.extraction_processor import FeatureExtractionProcessor, clip_features, feature_table_path
from core.learners import load_model, save_model, train_model
from core.report_exporter import ReportExportHandler
from core.selection import load_trace, parsimonious_k, save_trace, sfs

logger = logging.getLogger(__name__)

EXIT_DATA_ERROR = 2


def _load_manifest(run):
    if run.manifest is None:
        raise UsageError("no manifest given: pass --manifest or set [run] manifest in the config file")
    return load_manifest(require_file(run.manifest, 'manifest'))


def _mel(run, args):
    return getattr(args, 'mel', None) or run.mfcc.num_coeffs


def _load_features(run, mel):
    path = require_file(feature_table_path(run.output_dir, mel), f'feature table for M={mel}')
    table = read_feature_table(path)
    check_digest(run.mfcc.with_coeffs(mel).digest(), table.config_digest, str(path))
    return table


def _load_trace(run, kind, mel, table):
    path = require_file(trace_path(run.output_dir, kind, mel), f'{kind} selection trace')
    trace = load_trace(path)
    check_digest(table.config_digest, trace.config_digest, str(path))
    return trace


def _report_files(result):
    for info in ReportExportHandler().create_file_listing(result):
        print(f"✅ {info}")
    for error in result['errors']:
        print(f"❌ {error}")


def cmd_extract(run, args):
    manifest = _load_manifest(run)
    mel_values = parse_mel_values(args.mel, run.mfcc.num_coeffs)
    processor = FeatureExtractionProcessor(run.mfcc, run.chunk_size, run.n_jobs, run.show_progress)
    result = processor.process_manifest(manifest, mel_values, run.output_dir)

    for path in result['files_created']:
        print(f"✅ {path}")
    if not result['tables']:
        print(f"❌ {result['message']}")
        return EXIT_DATA_ERROR

    failed = processor.stats['failed_clips']
    print(f"📊 {result['message']}")
    if failed and not run.allow_skips:
        logger.error("❌ %d clip(s) failed; rerun with --allow-skips to accept partial tables", failed)
        return EXIT_DATA_ERROR
    return EXIT_OK


def cmd_train(run, args):
    mel = _mel(run, args)
    table = _load_features(run, mel)
    guard = SplitGuard(run.audit_log)
    train = guard.read(table, Split.TRAIN, operation='train')

    for kind in expand_learners(args.learner):
        selected = _load_trace(run, kind, mel, table).selected(args.k) if args.k else None
        model = train_model(kind, train, run.learners, selected, seed=run.seed,
                            n_jobs=run.n_jobs, mel_config=run.mfcc.with_coeffs(mel))
        path = save_model(model, model_path(run.output_dir, kind, mel, args.k))
        print(f"✅ {kind}: {path} ({format_file_size(path.stat().st_size)})")
    return EXIT_OK


def cmd_select(run, args):
    mel = _mel(run, args)
    table = _load_features(run, mel)
    guard = SplitGuard(run.audit_log)
    train = guard.read(table, Split.TRAIN, operation='select')
    validation = guard.read(table, Split.VALIDATION, operation='select')

    for kind in expand_learners(args.learner):
        trace = sfs(train, validation, kind, run.learners, run.max_features, seed=run.seed, n_jobs=run.n_jobs)
        path = save_trace(trace, trace_path(run.output_dir, kind, mel))
        print(f"✅ {kind}: best k={trace.best_k} accuracy={trace.best_accuracy:.4f} "
              f"(within 0.005 from k={parsimonious_k(trace)}) -> {path}")
    return EXIT_OK


def cmd_evaluate(run, args):
    mel = _mel(run, args)
    table = _load_features(run, mel)

    models = []
    for kind in expand_learners(args.learner):
        path = require_file(model_path(run.output_dir, kind, mel, args.k), f'{kind} model')
        model = load_model(path)
        check_digest(table.config_digest, model.config_digest, str(path))
        models.append(model)

    guard = SplitGuard(run.audit_log)
    split = Split.parse(args.split)
    if split is Split.TEST:
        reports = final_test(models, table, guard)
    else:
        rows = guard.read(table, split, operation='evaluate')
        reports = [evaluate(model, rows, split=split.value) for model in models]

    name = f"eval_{split.value}_m{mel}" + (f"_k{args.k}" if args.k else '')
    formats = ['csv', 'txt'] + (['excel'] if args.excel else [])
    parameters = {model.kind: run.learners.describe(model.kind) for model in models}
    reference = split.value if split is not Split.TRAIN else None
    result = ReportExportHandler().export_eval_reports(
        reports, run.output_dir / 'reports', name, formats, parameters, reference, table.config_digest)

    for report in reports:
        print(f"📊 {report.learner:12} accuracy={report.accuracy:.4f} n={report.n}")
    _report_files(result)
    return EXIT_OK if result['success'] else EXIT_DATA_ERROR


def cmd_predict(run, args):
    path = require_file(args.model, 'model')
    model = load_model(path)
    if model.mel_config is None:
        raise CorruptModel(f"{path}: model carries no MFCC configuration, cannot featurize audio")
    check_digest(model.mel_config.digest(), model.config_digest, str(path))

    for wav in args.wav:
        vector, _, _ = clip_features(require_file(wav, 'WAV file'), model.mel_config)
        labels, scores = model.decide(vector[None, :])
        print(f"{Label.from_sign(labels[0]).value} {float(scores[0]):.6g}")
    return EXIT_OK


def cmd_sweep_mel(run, args):
    manifest = _load_manifest(run)
    mel_values = parse_mel_values(args.mel_range, run.mfcc.num_coeffs)
    top = max(mel_values)
    processor = FeatureExtractionProcessor(run.mfcc, run.chunk_size, run.n_jobs, run.show_progress)
    table = processor.load_or_extract(manifest, top, run.output_dir)
    if processor.stats['failed_clips'] and not run.allow_skips:
        logger.error("❌ %d clip(s) failed; rerun with --allow-skips", processor.stats['failed_clips'])
        return EXIT_DATA_ERROR

    def table_for(m):
        return table if m == top else table.truncate_mel(m, run.mfcc.with_coeffs(m).digest())

    report = sweep_mel(table_for, mel_values, run.learners, expand_learners(args.learner),
                       seed=run.seed, n_jobs=run.n_jobs, guard=SplitGuard(run.audit_log))
    return _export_sweep(run, args, report, 'sweep_mel', 'Validation accuracy by Mel coefficient count',
                         table.config_digest)


def cmd_sweep_sfs(run, args):
    mel = _mel(run, args)
    table = _load_features(run, mel)
    traces = {kind: _load_trace(run, kind, mel, table) for kind in expand_learners(args.learner)}
    report = sweep_sfs(traces)
    return _export_sweep(run, args, report, f'sweep_sfs_m{mel}', 'Validation accuracy after forward selection',
                         table.config_digest)


def _export_sweep(run, args, report, name, title, config_digest):
    formats = ['csv', 'txt'] + (['excel'] if args.excel else [])
    result = ReportExportHandler().export_sweep(report, run.output_dir / 'sweeps', name, formats, config_digest)
    for learner, point in report.chosen_points().items():
        if point:
            print(f"📊 {learner:12} best {report.axis_name}={point[0]} accuracy={point[1]:.4f}")
    _report_files(result)
    if args.plot:
        from core.sweep_visualizer import SweepVisualizer

        chart = SweepVisualizer().plot_sweep(report, run.output_dir / 'plots' / f'{name}.png', title)
        if chart:
            print(f"✅ PNG   {chart}")
    return EXIT_OK if result['success'] else EXIT_DATA_ERROR


def cmd_describe(run, args):
    manifest = _load_manifest(run)
    distribution = summarize_manifest(manifest)
    print(distribution.to_string())

    path = run.output_dir / 'reports' / 'distribution.csv'
    path.parent.mkdir(parents=True, exist_ok=True)
    distribution.to_csv(path, lineterminator='\n')
    print(f"✅ CSV   {path}")
    if args.plot:
        from core.sweep_visualizer import SweepVisualizer

        chart = SweepVisualizer().plot_distribution(distribution, run.output_dir / 'plots' / 'distribution.png')
        if chart:
            print(f"✅ PNG   {chart}")
    return EXIT_OK


COMMANDS = {
    'extract': cmd_extract,
    'train': cmd_train,
    'select': cmd_select,
    'evaluate': cmd_evaluate,
    'predict': cmd_predict,
    'sweep-mel': cmd_sweep_mel,
    'sweep-sfs': cmd_sweep_sfs,
    'describe': cmd_describe,
}
