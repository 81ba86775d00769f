import json
import logging
import os
import re

import pandas as pd

from core.evaluation import EvalReport, SweepReport, compare_with_reference, summary_table

logger = logging.getLogger(__name__)


class ReportExportHandler:
    """Exports evaluation and sweep reports as CSV, plain-text tables, JSON and Excel"""

    FORMATS = ('csv', 'txt', 'json', 'excel')

    def __init__(self, float_precision=4):
        self.float_precision = float_precision

    def _expand_formats(self, formats):
        if 'all' in formats:
            return list(self.FORMATS)
        unknown = set(formats) - set(self.FORMATS)
        if unknown:
            raise ValueError(f"unknown export format(s): {', '.join(sorted(unknown))}")
        return list(formats)

    def export_eval_reports(self, reports, output_dir, filename_base, formats=('csv', 'txt', 'json'),
                            parameters=None, reference_split=None, config_digest=None):
        """
        One row per EvalReport. With ``reference_split`` ('validation' or
        'test') a comparison against the reference figures is added.
        ``config_digest`` of the evaluated feature table goes into the text,
        JSON and Excel outputs.
        """
        result = {
            'success': False,
            'files_created': [],
            'errors': [],
        }

        try:
            os.makedirs(output_dir, exist_ok=True)
            formats = self._expand_formats(formats)
            reports = list(reports)

            machine = pd.DataFrame([r.to_dict() for r in reports])
            table = summary_table(reports, parameters)
            comparison = compare_with_reference(reports, reference_split) if reference_split else None

            if 'csv' in formats:
                path = os.path.join(output_dir, f"{filename_base}.csv")
                machine.to_csv(path, index=False, lineterminator='\n')
                self._add_file(result, 'csv', path, 'Confusion counts and rates per learner')

            if 'txt' in formats:
                path = os.path.join(output_dir, f"{filename_base}.txt")
                with open(path, 'w', encoding='utf-8') as fh:
                    fh.write(self._provenance_line(config_digest))
                    fh.write(self._text_table(table))
                    for report in reports:
                        fh.write('\n\n' + self._confusion_text(report))
                    if comparison is not None and not comparison.empty:
                        fh.write(f"\n\nReference comparison ({reference_split})\n")
                        fh.write(self._text_table(comparison))
                    fh.write('\n')
                self._add_file(result, 'txt', path, 'Human-readable summary table')

            if 'json' in formats:
                path = os.path.join(output_dir, f"{filename_base}.json")
                with open(path, 'w', encoding='utf-8') as fh:
                    json.dump({'config_digest': config_digest, 'reports': [r.to_dict() for r in reports]}, fh,
                              sort_keys=True, indent=1)
                    fh.write('\n')
                self._add_file(result, 'json', path, 'Reports as JSON')

            if 'excel' in formats:
                path = os.path.join(output_dir, f"{filename_base}.xlsx")
                with pd.ExcelWriter(path, engine='openpyxl') as writer:
                    table.to_excel(writer, sheet_name='Summary', index=False)
                    machine.to_excel(writer, sheet_name='Confusion', index=False)
                    if comparison is not None and not comparison.empty:
                        comparison.to_excel(writer, sheet_name=self._sanitize_sheet_name(f'Reference {reference_split}'),
                                            index=False)
                    self._provenance_frame(config_digest).to_excel(writer, sheet_name='Provenance', index=False)
                self._add_file(result, 'excel', path, 'Excel workbook with summary sheet')

            result['success'] = len(result['files_created']) > 0

        except (OSError, ValueError) as e:
            logger.error("❌ Report export error: %s", e)
            result['errors'].append(str(e))

        return result

    def export_sweep(self, report: SweepReport, output_dir, filename_base, formats=('csv', 'txt'),
                     config_digest=None):
        """Long `axis,learner,accuracy` CSV plus a wide table with best points"""
        result = {
            'success': False,
            'files_created': [],
            'errors': [],
        }

        try:
            os.makedirs(output_dir, exist_ok=True)
            formats = self._expand_formats(formats)
            long_frame = report.to_long_frame()
            wide_frame = report.to_wide_frame()
            best = pd.DataFrame(
                [(learner, *(point or (None, None))) for learner, point in report.chosen_points().items()],
                columns=['learner', report.axis_name, 'accuracy'],
            )

            if 'csv' in formats:
                path = os.path.join(output_dir, f"{filename_base}.csv")
                long_frame.to_csv(path, index=False, lineterminator='\n')
                self._add_file(result, 'csv', path, f'Accuracy by {report.axis_name}, long format')

            if 'txt' in formats:
                path = os.path.join(output_dir, f"{filename_base}.txt")
                with open(path, 'w', encoding='utf-8') as fh:
                    fh.write(self._provenance_line(config_digest))
                    fh.write(self._text_table(wide_frame.reset_index()))
                    fh.write('\n\nBest points\n')
                    fh.write(self._text_table(best))
                    fh.write('\n')
                self._add_file(result, 'txt', path, 'Sweep table with best points')

            if 'json' in formats:
                path = os.path.join(output_dir, f"{filename_base}.json")
                payload = {
                    'config_digest': config_digest,
                    'axis_name': report.axis_name,
                    'axis': report.axis,
                    'series': {k: [None if pd.isna(v) else v for v in vs] for k, vs in report.series.items()},
                }
                with open(path, 'w', encoding='utf-8') as fh:
                    json.dump(payload, fh, sort_keys=True, indent=1)
                    fh.write('\n')
                self._add_file(result, 'json', path, 'Sweep series as JSON')

            if 'excel' in formats:
                path = os.path.join(output_dir, f"{filename_base}.xlsx")
                with pd.ExcelWriter(path, engine='openpyxl') as writer:
                    best.to_excel(writer, sheet_name='Summary', index=False)
                    wide_frame.to_excel(writer, sheet_name=self._sanitize_sheet_name(f'By {report.axis_name}'))
                    self._provenance_frame(config_digest).to_excel(writer, sheet_name='Provenance', index=False)
                self._add_file(result, 'excel', path, 'Sweep workbook')

            result['success'] = len(result['files_created']) > 0

        except (OSError, ValueError) as e:
            logger.error("❌ Sweep export error: %s", e)
            result['errors'].append(str(e))

        return result

    def _provenance_line(self, config_digest):
        return f"Feature config digest: {config_digest or '-'}\n\n"

    def _provenance_frame(self, config_digest):
        return pd.DataFrame([('config_digest', config_digest or '-')], columns=['key', 'value'])

    def _text_table(self, frame):
        return frame.to_string(index=False, na_rep='-', float_format=lambda v: f"{v:.{self.float_precision}f}")

    def _confusion_text(self, report: EvalReport):
        width = max(len(str(v)) for v in (report.tp, report.fn, report.fp, report.tn, 'Patient'))
        header = f"{report.learner or 'model'} on {report.split or 'rows'} (n={report.n})"
        return '\n'.join([
            header,
            f"{'':>14} {'Patient':>{width}} {'NonPatient':>{max(width, 10)}}",
            f"{'Patient':>14} {report.tp:>{width}} {report.fn:>{max(width, 10)}}",
            f"{'NonPatient':>14} {report.fp:>{width}} {report.tn:>{max(width, 10)}}",
        ])

    def _add_file(self, result, fmt, path, description):
        result['files_created'].append({
            'format': fmt,
            'path': path,
            'filename': os.path.basename(path),
            'size': os.path.getsize(path),
            'description': description,
        })
        logger.info("✅ %s: %s", fmt.upper(), path)

    def _sanitize_sheet_name(self, name):
        safe_name = re.sub(r'[^\w\s-]', '', name)
        safe_name = re.sub(r'[\s_]+', '_', safe_name)
        return safe_name[:30]

    def create_file_listing(self, export_results):
        """Lines describing created files, for the command-line summary"""
        if not export_results['success']:
            return []
        return [
            f"{f['format'].upper():5} {f['path']} ({f['size']:,} bytes) - {f['description']}"
            for f in export_results['files_created']
        ]
