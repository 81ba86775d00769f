from .extraction_processor import FeatureExtractionProcessor
from .learners import LEARNER_KINDS, TrainedModel, load_model, save_model, train_model
from .report_exporter import ReportExportHandler

__all__ = ['FeatureExtractionProcessor', 'LEARNER_KINDS', 'TrainedModel', 'load_model', 'save_model',
           'train_model', 'ReportExportHandler']
