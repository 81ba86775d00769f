import os
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from dotenv import load_dotenv

from core.decision_tree import TreeConfig
from core.ensemble import AdaBoostConfig, BaggingConfig
from core.errors import InvalidConfig, IoError
from core.learners import LearnerConfigs
from core.mfcc import MfccConfig
from core.svm import SvmConfig

BASE_DIR = os.path.dirname(os.path.abspath(__file__))


class Config:
    # Artifacts
    OUTPUT_FOLDER = os.path.join(BASE_DIR, 'output')
    AUDIT_LOG = 'audit.log'

    # Reproducibility
    SEED = 61080
    EXPECTED_SAMPLE_RATE = 44100

    # Processing settings
    CHUNK_SIZE = 256  # Clips per extraction chunk
    N_JOBS = 1
    SHOW_PROGRESS = True

    # Protocol defaults
    MEL_COEFFS = 23
    MEL_RANGE = (2, 39)
    MAX_FEATURES = 80
    SELECTED_K = 74

    # Logging
    LOG_LEVEL = 'INFO'


class DevelopmentConfig(Config):
    """Development configuration"""
    DEBUG = True
    LOG_LEVEL = 'DEBUG'


class ProductionConfig(Config):
    """Production configuration"""
    DEBUG = False
    LOG_LEVEL = 'WARNING'


class TestingConfig(Config):
    """Testing configuration"""
    TESTING = True
    SHOW_PROGRESS = False
    LOG_LEVEL = 'WARNING'


# Configuration dictionary
config = {
    'development': DevelopmentConfig,
    'production': ProductionConfig,
    'testing': TestingConfig,
    'default': DevelopmentConfig
}


def active_config(env_name=None):
    name = env_name or os.environ.get('RESPIRE_ENV', 'default')
    if name not in config:
        raise InvalidConfig(f"RESPIRE_ENV must be one of {', '.join(config)}, got '{name}'")
    return config[name]


# --- run configuration ----------------------------------------------------

RUN_KEYS = {
    'manifest': 'manifest',
    'output': 'output_dir',
    'seed': 'seed',
    'jobs': 'n_jobs',
    'chunk_size': 'chunk_size',
    'max_features': 'max_features',
    'allow_skips': 'allow_skips',
}
SECTION_TYPES = {
    'mfcc': MfccConfig,
    'svm': SvmConfig,
    'tree': TreeConfig,
    'bagging': BaggingConfig,
    'adaboost': AdaBoostConfig,
}


@dataclass
class RunConfig:
    """
    Settings for one command. Resolution order, later wins: environment
    config class, TOML file, RESPIRE_SEED, command-line flags.
    """
    output_dir: Path
    manifest: Path | None = None
    mfcc: MfccConfig = field(default_factory=MfccConfig)
    learners: LearnerConfigs = field(default_factory=LearnerConfigs)
    seed: int = Config.SEED
    n_jobs: int = Config.N_JOBS
    chunk_size: int = Config.CHUNK_SIZE
    max_features: int = Config.MAX_FEATURES
    allow_skips: bool = False
    show_progress: bool = True
    log_level: str = Config.LOG_LEVEL

    @classmethod
    def from_env_class(cls, env_class):
        return cls(
            output_dir=Path(env_class.OUTPUT_FOLDER),
            mfcc=MfccConfig(num_coeffs=env_class.MEL_COEFFS, expected_sample_rate=env_class.EXPECTED_SAMPLE_RATE),
            seed=env_class.SEED,
            n_jobs=env_class.N_JOBS,
            chunk_size=env_class.CHUNK_SIZE,
            max_features=env_class.MAX_FEATURES,
            show_progress=env_class.SHOW_PROGRESS,
            log_level=env_class.LOG_LEVEL,
        )

    @property
    def audit_log(self):
        return self.output_dir / Config.AUDIT_LOG

    def apply_toml(self, path):
        path = Path(path)
        try:
            with open(path, 'rb') as fh:
                document = tomllib.load(fh)
        except OSError as e:
            raise IoError(f"cannot read config file {path}: {e}") from e
        except tomllib.TOMLDecodeError as e:
            raise InvalidConfig(f"{path}: {e}") from e

        unknown = set(document) - {'run', *SECTION_TYPES}
        if unknown:
            raise InvalidConfig(f"{path}: unknown section(s) {', '.join(sorted(unknown))}")

        run = dict(document.get('run', {}))
        bad = set(run) - set(RUN_KEYS)
        if bad:
            raise InvalidConfig(f"{path}: unknown [run] key(s) {', '.join(sorted(bad))}")
        for key, value in run.items():
            if key in ('manifest', 'output'):
                value = (path.parent / value).resolve()
            setattr(self, RUN_KEYS[key], value)

        self.mfcc = _merge_section(self.mfcc, document.get('mfcc'), 'mfcc', path)
        self.learners = LearnerConfigs(
            svm=_merge_section(self.learners.svm, document.get('svm'), 'svm', path),
            tree=_merge_section(self.learners.tree, document.get('tree'), 'tree', path),
            bagging=_merge_section(self.learners.bagging, document.get('bagging'), 'bagging', path),
            adaboost=_merge_section(self.learners.adaboost, document.get('adaboost'), 'adaboost', path),
        )
        return self

    def apply_environment(self, environ=None):
        environ = os.environ if environ is None else environ
        seed = environ.get('RESPIRE_SEED')
        if seed:
            try:
                self.seed = int(seed)
            except ValueError as e:
                raise InvalidConfig(f"RESPIRE_SEED must be an integer, got '{seed}'") from e
        return self

    def apply_flags(self, args):
        """Override with every flag the user actually passed (None means not given)"""
        get = lambda name: getattr(args, name, None)  # noqa: E731

        if get('manifest') is not None:
            self.manifest = Path(get('manifest'))
        if get('output') is not None:
            self.output_dir = Path(get('output'))
        for flag, attr in (('seed', 'seed'), ('jobs', 'n_jobs'), ('max_features', 'max_features')):
            if get(flag) is not None:
                setattr(self, attr, int(get(flag)))
        if get('allow_skips'):
            self.allow_skips = True
        if get('quiet'):
            self.log_level = 'WARNING'
        elif get('verbose'):
            self.log_level = 'DEBUG'

        svm = _override(self.learners.svm, C=get('svm_c'), sigma=get('svm_sigma'))
        tree = _override(self.learners.tree, max_splits=get('tree_max_splits'))
        bagging = _override(self.learners.bagging, n_learners=get('bagging_learners'),
                            max_splits=get('bagging_max_splits'))
        adaboost = _override(self.learners.adaboost, rounds=get('adaboost_rounds'),
                             max_splits=get('adaboost_max_splits'))
        self.learners = LearnerConfigs(svm=svm, tree=tree, bagging=bagging, adaboost=adaboost)
        return self

    @classmethod
    def resolve(cls, args=None, env_name=None, environ=None):
        load_dotenv(override=False)
        environ = os.environ if environ is None else environ
        run_config = cls.from_env_class(active_config(env_name or environ.get('RESPIRE_ENV')))
        config_path = getattr(args, 'config', None)
        if config_path:
            run_config.apply_toml(config_path)
        run_config.apply_environment(environ)
        if args is not None:
            run_config.apply_flags(args)
        run_config.output_dir = Path(run_config.output_dir).resolve()
        if run_config.manifest is not None:
            run_config.manifest = Path(run_config.manifest).resolve()
        return run_config

    def describe(self):
        return {
            'output_dir': str(self.output_dir),
            'manifest': str(self.manifest) if self.manifest else None,
            'seed': self.seed,
            'n_jobs': self.n_jobs,
            'mfcc': self.mfcc.to_dict(),
            'learners': {name: asdict(getattr(self.learners, name)) for name in ('svm', 'tree', 'bagging', 'adaboost')},
        }


def _merge_section(current, values, section, path):
    if not values:
        return current
    known = {f.name for f in fields(current)}
    unknown = set(values) - known
    if unknown:
        raise InvalidConfig(f"{path}: unknown [{section}] key(s) {', '.join(sorted(unknown))}")
    return replace(current, **values)


def _override(current, **values):
    given = {k: v for k, v in values.items() if v is not None}
    return replace(current, **given) if given else current
