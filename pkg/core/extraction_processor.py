"""
Feature Extraction Processor
Orchestrates decoding, MFCC computation and statistical summarization for
every clip of a manifest, in chunks, with per-clip failures collected
instead of aborting the batch.
"""

import logging
from datetime import datetime
from pathlib import Path

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from tqdm import tqdm

from core.corpus import FeatureTable, decode_wav, read_feature_table, validate_clip, write_feature_table
from core.errors import ConfigDigestMismatch, MissingArtifact, RespireError
from core.features import feature_vector
from core.mfcc import MfccConfig, mfcc

logger = logging.getLogger(__name__)

ERROR_SIDECAR = 'extract_errors.csv'


def feature_table_path(output_dir, mel_coeff_count):
    return Path(output_dir) / 'features' / f'features_m{int(mel_coeff_count)}.csv'


def clip_features(path, cfg: MfccConfig):
    """(feature vector, frame count, resampled) for one clip"""
    signal = validate_clip(decode_wav(path), cfg.expected_sample_rate)
    matrix = mfcc(signal, cfg)
    return feature_vector(matrix), matrix.n_frames, signal.was_resampled


def _extract_one(entry, path, cfg):
    try:
        vector, frames, resampled = clip_features(path, cfg)
        return {'entry': entry, 'vector': vector, 'frames': frames, 'resampled': resampled, 'error': None}
    except RespireError as e:
        return {'entry': entry, 'vector': None, 'error': type(e).__name__, 'message': str(e)}


class FeatureExtractionProcessor:
    """
    Extracts feature tables from a manifest. Every table is computed at the
    largest requested Mel coefficient count; smaller ones are its prefixes.
    """

    def __init__(self, mfcc_config=None, chunk_size=256, n_jobs=1, show_progress=True):
        self.mfcc_config = mfcc_config or MfccConfig()
        self.chunk_size = chunk_size
        self.n_jobs = n_jobs
        self.show_progress = show_progress

        self.stats = {
            'total_clips': 0,
            'processed_clips': 0,
            'failed_clips': 0,
            'resampled_clips': 0,
            'chunks_processed': 0,
            'frame_counts': {},
            'processing_time': None,
            'errors': [],
            'warnings': [],
        }

    def process_manifest(self, manifest, mel_values=None, output_dir=None, progress_callback=None):
        """
        Extract one FeatureTable per requested M and, when ``output_dir`` is
        given, write them as features/features_m{M}.csv plus an error
        sidecar listing clips that could not be processed.
        """
        start_time = datetime.now()
        mel_values = sorted({int(m) for m in (mel_values or [self.mfcc_config.num_coeffs])})

        def update_progress(message, progress=None):
            if progress_callback:
                progress_callback(message, progress)
            else:
                logger.info("📊 Progress: %s", message)

        try:
            update_progress(f"Extracting {len(manifest)} clips for M={mel_values}", 5)
            full = self.extract_table(manifest, max(mel_values), progress_callback)

            tables = {}
            for m in mel_values:
                digest = self.mfcc_config.with_coeffs(m).digest()
                tables[m] = full if m == full.mel_coeff_count else full.truncate_mel(m, digest)

            files_created = []
            if output_dir is not None:
                update_progress("Writing feature tables...", 90)
                for m, table in tables.items():
                    files_created.append(str(write_feature_table(table, feature_table_path(output_dir, m))))
                sidecar = self._write_error_sidecar(output_dir)
                if sidecar:
                    files_created.append(str(sidecar))

            self.stats['processing_time'] = str(datetime.now() - start_time).split('.')[0]
            update_progress("Extraction finished", 100)

            return {
                'success': self.stats['failed_clips'] == 0,
                'tables': tables,
                'files_created': files_created,
                'errors': self.stats['errors'],
                'stats': self.stats,
                'message': f"{self.stats['processed_clips']} clips extracted, {self.stats['failed_clips']} failed",
            }

        except RespireError as e:
            error_msg = f"Extraction failed: {e}"
            logger.error("❌ %s", error_msg)
            self.stats['errors'].append({'clip_id': None, 'row': None, 'error': type(e).__name__, 'message': str(e)})
            return {
                'success': False,
                'tables': {},
                'files_created': [],
                'errors': self.stats['errors'],
                'stats': self.stats,
                'message': error_msg,
            }

    def extract_table(self, manifest, mel_coeff_count=None, progress_callback=None) -> FeatureTable:
        """FeatureTable of the clips that decode cleanly, in manifest order"""
        cfg = self.mfcc_config.with_coeffs(mel_coeff_count or self.mfcc_config.num_coeffs)
        entries = list(manifest)
        self.stats['total_clips'] = len(entries)

        results = []
        chunks = [entries[i:i + self.chunk_size] for i in range(0, len(entries), self.chunk_size)]
        for number, chunk in enumerate(tqdm(chunks, desc='Extracting', unit='chunk',
                                            disable=not self.show_progress), start=1):
            results.extend(Parallel(n_jobs=self.n_jobs)(
                delayed(_extract_one)(entry, manifest.resolve(entry), cfg) for entry in chunk
            ))
            self.stats['chunks_processed'] += 1
            if progress_callback:
                progress_callback(f"Chunk {number}/{len(chunks)}", 5 + 80 * number / len(chunks))

        kept = [r for r in results if r['error'] is None]
        for r in results:
            if r['error'] is not None:
                self._record_failure(r)
            else:
                self.stats['frame_counts'][r['entry'].clip_id] = int(r['frames'])
        self.stats['processed_clips'] = len(kept)
        self.stats['resampled_clips'] = sum(bool(r['resampled']) for r in kept)

        if self.stats['resampled_clips']:
            self.stats['warnings'].append(f"{self.stats['resampled_clips']} clip(s) resampled")
        logger.info("✅ %d/%d clips extracted (M=%d, %d failed)",
                    len(kept), len(entries), cfg.num_coeffs, len(entries) - len(kept))

        width = cfg.num_coeffs * 7
        return FeatureTable(
            clip_ids=[r['entry'].clip_id for r in kept],
            labels=[r['entry'].label for r in kept],
            splits=[r['entry'].split for r in kept],
            features=np.vstack([r['vector'] for r in kept]) if kept else np.empty((0, width)),
            mel_coeff_count=cfg.num_coeffs,
            config_digest=cfg.digest(),
        )

    def load_or_extract(self, manifest, mel_coeff_count, output_dir):
        """Cached feature table for M: read it when present and consistent, extract otherwise"""
        path = feature_table_path(output_dir, mel_coeff_count)
        expected = self.mfcc_config.with_coeffs(mel_coeff_count).digest()
        if path.exists():
            table = read_feature_table(path)
            if table.config_digest != expected:
                raise ConfigDigestMismatch(expected, table.config_digest, what=str(path))
            logger.info("🔄 Using cached feature table %s", path)
            return table

        result = self.process_manifest(manifest, [mel_coeff_count], output_dir)
        if not result['tables']:
            raise MissingArtifact(path, what=f"feature table (extraction failed: {result['message']})")
        return result['tables'][mel_coeff_count]

    def _record_failure(self, result):
        entry = result['entry']
        self.stats['failed_clips'] += 1
        self.stats['errors'].append({
            'clip_id': entry.clip_id,
            'row': entry.row,
            'error': result['error'],
            'message': result['message'],
        })
        logger.warning("⚠️ Skipping %s (row %d): %s", entry.clip_id, entry.row, result['message'])

    def _write_error_sidecar(self, output_dir):
        failures = [e for e in self.stats['errors'] if e.get('clip_id')]
        path = Path(output_dir) / 'features' / ERROR_SIDECAR
        if not failures:
            path.unlink(missing_ok=True)
            return None
        path.parent.mkdir(parents=True, exist_ok=True)
        pd.DataFrame(failures, columns=['clip_id', 'row', 'error', 'message']).to_csv(
            path, index=False, lineterminator='\n')
        logger.warning("⚠️ %d failed clip(s) listed in %s", len(failures), path)
        return path

    def get_summary(self):
        return {
            'total_clips': self.stats['total_clips'],
            'processed_clips': self.stats['processed_clips'],
            'failed_clips': self.stats['failed_clips'],
            'resampled_clips': self.stats['resampled_clips'],
            'mean_frames': float(np.mean(list(self.stats['frame_counts'].values()))) if self.stats['frame_counts'] else 0.0,
            'processing_time': self.stats['processing_time'],
        }
