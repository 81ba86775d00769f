import logging
import os

import matplotlib

matplotlib.use('Agg')

import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402
import seaborn as sns  # noqa: E402

from core.learners import LEARNER_TITLES  # noqa: E402

logger = logging.getLogger(__name__)

AXIS_LABELS = {
    'mel': 'Number of Mel coefficients (M)',
    'k': 'Number of selected features (k)',
}


class SweepVisualizer:
    """
    Line charts of sweep reports (accuracy against M or k per learner, best
    points annotated) and the split/label distribution of a manifest.
    """

    def __init__(self, dpi=150):
        self.dpi = dpi
        self.setup_plot_style()

    def setup_plot_style(self):
        sns.set_style("whitegrid")
        plt.rcParams.update({
            'figure.figsize': (12, 7),
            'font.size': 10,
            'axes.titlesize': 12,
            'axes.labelsize': 10,
            'legend.fontsize': 9,
            'grid.alpha': 0.3,
        })

    def plot_sweep(self, report, path, title=None):
        """One accuracy curve per learner; returns the written path or None"""
        try:
            frame = report.to_long_frame()
            frame['learner'] = frame['learner'].map(lambda k: LEARNER_TITLES.get(k, k))

            fig, ax = plt.subplots()
            sns.lineplot(data=frame, x='axis', y='accuracy', hue='learner', marker='o', markersize=4, ax=ax)

            for learner, point in report.chosen_points().items():
                if point is None:
                    continue
                axis_value, accuracy = point
                ax.annotate(f"{LEARNER_TITLES.get(learner, learner)}: {accuracy:.4f} @ {axis_value}",
                            xy=(axis_value, accuracy), xytext=(5, 8), textcoords='offset points',
                            fontsize=8, fontweight='bold')
                ax.scatter([axis_value], [accuracy], s=60, facecolors='none', edgecolors='black')

            ax.set_xlabel(AXIS_LABELS.get(report.axis_name, report.axis_name), fontweight='bold')
            ax.set_ylabel('Validation accuracy', fontweight='bold')
            ax.set_title(title or f"Accuracy by {report.axis_name}", fontweight='bold', fontsize=14)
            ax.legend(title=None)
            return self._save_figure(fig, path)

        except (OSError, ValueError, KeyError) as e:
            logger.warning("⚠️ Error creating sweep chart: %s", e)
            plt.close('all')
            return None

    def plot_distribution(self, distribution: pd.DataFrame, path, title='Sample distribution'):
        """Grouped bars from the split x label table of summarize_manifest"""
        try:
            counts = distribution.drop(index='total', columns='total', errors='ignore')
            frame = counts.reset_index().melt(id_vars=counts.index.name or 'index',
                                              var_name='label', value_name='clips')
            frame = frame.rename(columns={counts.index.name or 'index': 'split'})

            fig, ax = plt.subplots(figsize=(10, 6))
            sns.barplot(data=frame, x='split', y='clips', hue='label', ax=ax)
            for container in ax.containers:
                ax.bar_label(container, fmt='%d', fontsize=9, fontweight='bold')
            ax.set_title(title, fontweight='bold', fontsize=14)
            ax.set_xlabel('Split', fontweight='bold')
            ax.set_ylabel('Clips', fontweight='bold')
            return self._save_figure(fig, path)

        except (OSError, ValueError, KeyError) as e:
            logger.warning("⚠️ Error creating distribution chart: %s", e)
            plt.close('all')
            return None

    def _save_figure(self, fig, path):
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        fig.tight_layout()
        fig.savefig(path, format='png', dpi=self.dpi, bbox_inches='tight', facecolor='white', edgecolor='none')
        plt.close(fig)
        logger.info("✅ Chart saved: %s", path)
        return path
