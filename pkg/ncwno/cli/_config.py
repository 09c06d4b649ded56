import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import yaml

from ncwno.continual import TrainConfig
from ncwno.exceptions import ConfigError
from ncwno.model import ModelConfig
from ncwno.pde import recipe

COMMANDS = ('generate', 'train-foundation', 'transfer', 'evaluate', 'ablate-experts')
SECTIONS = ('seed', 'paths', 'model', 'train', 'transfer', 'generate', 'evaluate', 'ablation', 'tasks')
ROLES = ('foundation', 'transfer')
ENV_PREFIX = 'NCWNO_'


@dataclass
class PathsConfig:
    """Locations of datasets, the checkpoint stem, reports and the training log, relative to the config file."""
    data: str = 'data'
    checkpoint: str = 'checkpoints/ncwno'
    reports: str = 'reports'
    log: str = None


@dataclass
class GenerateConfig:
    n_jobs: int = 1


@dataclass
class TransferConfig:
    """Transfer-phase options: a :class:`TrainConfig` plus the stored task whose gates start the transfer."""
    train: TrainConfig = field(default_factory=lambda: TrainConfig(phase='transfer'))
    base_label: int = None


@dataclass
class EvaluateConfig:
    n_jobs: int = 1
    batch_size: int = 20
    horizon: int = None


@dataclass
class AblationConfig:
    n_experts: tuple = (3, 6)
    seeds: tuple = (0, 1, 2)

    def __post_init__(self):
        self.n_experts = tuple(int(n) for n in self.n_experts)
        self.seeds = tuple(int(s) for s in self.seeds)


@dataclass
class TaskEntry:
    """One task of a run: a recipe (or an external dataset directory), its label and its role."""
    name: str
    label: int
    recipe: str = None
    role: str = 'foundation'
    n_samples: int = 100
    n_test: int = 20
    path: str = None
    overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError('`%s` is not implemented.' % self.role)
        if not 0 <= self.n_test <= self.n_samples:
            raise ValueError('`n_test` must lie in [0, n_samples].')

    @property
    def recipe_name(self):
        return self.recipe or self.name

    def build_recipe(self):
        return recipe(self.recipe_name, **self.overrides)


@dataclass
class RunConfig:
    """Validated run configuration."""
    command: str = None
    seed: int = 0
    root: Path = Path('.')
    paths: PathsConfig = field(default_factory=PathsConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    transfer: TransferConfig = field(default_factory=TransferConfig)
    generate: GenerateConfig = field(default_factory=GenerateConfig)
    evaluate: EvaluateConfig = field(default_factory=EvaluateConfig)
    ablation: AblationConfig = field(default_factory=AblationConfig)
    tasks: list = field(default_factory=list)

    def path(self, name):
        value = getattr(self.paths, name)
        return None if value is None else self.root / value

    def tasks_with_role(self, role):
        return [task for task in self.tasks if task.role == role]

    def canonical(self):
        """Configuration document without the command and root, used for the reproducibility hash."""
        document = asdict(self)
        document.pop('command')
        document.pop('root')
        return document

    def digest(self):
        text = json.dumps(self.canonical(), sort_keys=True, default=str)
        return hashlib.sha256(text.encode('utf-8')).hexdigest()


def _keys(cls, exclude=()):
    return {f.name for f in fields(cls)} - set(exclude)


def _check_keys(section, document, allowed):
    if not isinstance(document, dict):
        raise ConfigError('Section `%s` must be a mapping, got %r.' % (section, document))
    unknown = sorted(set(document) - set(allowed))
    if unknown:
        raise ConfigError('Unknown key `%s.%s`.' % (section, unknown[0]))


def _build(section, cls, document, **extra):
    try:
        return cls(**document, **extra)
    except (TypeError, ValueError, AssertionError) as e:
        raise ConfigError('Invalid section `%s`: %s' % (section, e)) from e


def apply_env_overrides(document, environ):
    """Apply ``NCWNO_<SECTION>__<KEY>`` (or ``NCWNO_SEED``) variables; values are parsed as YAML scalars."""
    document = dict(document)
    for key in sorted(environ):
        if not key.startswith(ENV_PREFIX):
            continue
        section, _, name = key[len(ENV_PREFIX):].lower().partition('__')
        if section not in SECTIONS or section == 'tasks' or bool(name) == (section == 'seed'):
            raise ConfigError('Unknown override `%s`.' % key)
        value = yaml.safe_load(environ[key])
        if section == 'seed':
            document['seed'] = value
        else:
            document[section] = dict(document.get(section) or {})
            document[section][name] = value
    return document


def _parse_task(index, document):
    if not isinstance(document, dict):
        raise ConfigError('Task %d must be a mapping, got %r.' % (index, document))
    known = _keys(TaskEntry, exclude=('overrides',))
    for required in ('name', 'label'):
        if required not in document:
            raise ConfigError('Task %d lacks `%s`.' % (index, required))
    entry = _build('tasks[%d]' % index, TaskEntry, {k: v for k, v in document.items() if k in known},
                   overrides={k: v for k, v in document.items() if k not in known})
    if entry.path is None:
        try:
            entry.build_recipe()
        except (TypeError, ValueError) as e:
            raise ConfigError('Invalid task `%s`: %s' % (entry.name, e)) from e
    elif entry.overrides:
        raise ConfigError('Unknown key `tasks[%d].%s`.' % (index, sorted(entry.overrides)[0]))
    return entry


def _infer_model(document, tasks):
    """Fill rank, grid and input channels from the first recipe-backed task when the model section omits them."""
    document = dict(document)
    for task in tasks:
        if task.path is None:
            r = task.build_recipe()
            document.setdefault('grid_shape', list(r.pde.shape))
            document.setdefault('rank', len(r.pde.shape))
            document.setdefault('in_channels', r.window)
            break
    return document


def build_config(document, command=None, root='.'):
    """Validate a configuration document (already parsed and overridden) into a :class:`RunConfig`."""
    document = document or {}
    _check_keys('config', document, SECTIONS)
    if command is not None and command not in COMMANDS:
        raise ConfigError('`%s` is not implemented.' % command)
    seed = document.get('seed', 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2 ** 64:
        raise ConfigError('`seed` must be an unsigned 64-bit integer, got %r.' % (seed,))

    tasks_doc = document.get('tasks') or []
    if not isinstance(tasks_doc, list):
        raise ConfigError('Section `tasks` must be a list.')
    tasks = [_parse_task(i, t) for i, t in enumerate(tasks_doc)]
    labels = [t.label for t in tasks]
    names = [t.name for t in tasks]
    if len(set(labels)) != len(labels):
        raise ConfigError('Duplicate task label in %s.' % labels)
    if len(set(names)) != len(names):
        raise ConfigError('Duplicate task name in %s.' % names)

    root = Path(root)
    for task in tasks:
        if task.path is not None and not (root / task.path).exists():
            raise ConfigError('Dataset path `%s` of task `%s` does not exist.' % (task.path, task.name))

    sections = {}
    for name, cls in (('paths', PathsConfig), ('generate', GenerateConfig), ('evaluate', EvaluateConfig),
                      ('ablation', AblationConfig)):
        section = document.get(name) or {}
        _check_keys(name, section, _keys(cls))
        sections[name] = _build(name, cls, section)

    model_doc = document.get('model') or {}
    _check_keys('model', model_doc, _keys(ModelConfig))
    model = _build('model', ModelConfig, _infer_model(model_doc, tasks))
    if labels and max(labels) >= model.max_tasks:
        raise ConfigError('Task label %d does not fit `model.max_tasks` = %d.' % (max(labels), model.max_tasks))

    train_doc = dict(document.get('train') or {})
    _check_keys('train', train_doc, _keys(TrainConfig, exclude=('phase',)))
    if model.rank == 2:
        train_doc.setdefault('epochs', 100)
    train = _build('train', TrainConfig, train_doc, phase='foundation')

    transfer_doc = dict(document.get('transfer') or {})
    _check_keys('transfer', transfer_doc, _keys(TrainConfig, exclude=('phase',)) | {'base_label'})
    base_label = transfer_doc.pop('base_label', None)
    transfer = TransferConfig(_build('transfer', TrainConfig, transfer_doc, phase='transfer'), base_label)

    return RunConfig(command=command, seed=seed, root=root, model=model, train=train, transfer=transfer, tasks=tasks,
                     **sections)


def parse_config(path, command=None, environ=None):
    """Read a YAML run configuration.

    Parameters
    ----------
    path : str or Path
        UTF-8 YAML file. Relative paths inside it are resolved against its directory.
    command : str, optional
        Subcommand recorded in the result.
    environ : mapping, optional
        Source of ``NCWNO_*`` overrides; ``os.environ`` by default.

    Returns
    -------
    config : RunConfig
    """
    path = Path(path)
    with open(path, encoding='utf-8') as f:
        text = f.read()
    try:
        document = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, 'problem_mark', None)
        where = ' at line %d, column %d' % (mark.line + 1, mark.column + 1) if mark is not None else ''
        raise ConfigError('Cannot parse %s%s: %s' % (path, where, getattr(e, 'problem', e))) from e
    if document is not None and not isinstance(document, dict):
        raise ConfigError('%s must hold a mapping of sections.' % path)
    document = apply_env_overrides(document or {}, os.environ if environ is None else environ)
    return build_config(document, command=command, root=path.parent)


def with_seed(config, seed):
    if not 0 <= seed < 2 ** 64:
        raise ConfigError('`seed` must be an unsigned 64-bit integer, got %r.' % (seed,))
    return replace(config, seed=seed)
