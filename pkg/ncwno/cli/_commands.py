import csv
import logging
from dataclasses import replace
from pathlib import Path

import numpy as np

from ncwno.cli._artifacts import write_plot_script, write_stamp
from ncwno.continual import (RolloutSpec, RunLog, activate_task, combinatorial_transfer, evaluate_rollout,
                             load_checkpoint, save_checkpoint, similarity_matrix, train_foundation,
                             write_metrics_csv, write_similarity_csv)
from ncwno.exceptions import ConfigError
from ncwno.model import init_state
from ncwno.pde import load_dataset, save_dataset, split_dataset, splitmix64

logger = logging.getLogger(__name__)

ABLATION_COLUMNS = ('n_experts', 'seed', 'task', 'phase', 'rel_l2')


def _dataset_dir(config, task):
    return config.root / task.path if task.path is not None else config.path('data') / task.name


def load_task(config, task):
    """Train and test parts of a configured task, relabelled with the task's configured name and label."""
    dataset = load_dataset(_dataset_dir(config, task))
    dataset = replace(dataset, name=task.name, label=task.label)
    n_test = min(task.n_test, dataset.n_samples)
    return split_dataset(dataset, n_test)


def generate(config, out):
    for task in config.tasks:
        if task.path is not None:
            logger.info('Task `%s` reads external data from %s.', task.name, task.path)
            continue
        r = task.build_recipe()
        dataset = r.build(task.n_samples, base_seed=splitmix64(config.seed, task.label), label=task.label,
                          n_jobs=config.generate.n_jobs)
        save_dataset(replace(dataset, name=task.name), _dataset_dir(config, task))


def _log(config, out):
    path = config.path('log')
    return RunLog(path if path is not None else Path(out) / 'train.log')


def _foundation(config, model, seed, run_log=None):
    tasks = config.tasks_with_role('foundation')
    if not tasks:
        raise ConfigError('No task has role `foundation`.')
    train_parts = [load_task(config, task)[0] for task in tasks]
    state = init_state(model, random_state=seed)
    return train_foundation(train_parts, state, config.train, run_log=run_log)


def _transfer(config, state, memory, run_log=None):
    foundation = config.tasks_with_role('foundation')
    base_label = config.transfer.base_label
    if base_label is None and foundation:
        base_label = foundation[0].label
    for task in config.tasks_with_role('transfer'):
        train, _ = load_task(config, task)
        combinatorial_transfer(state, memory, train, config.transfer.train, base_label=base_label, run_log=run_log)
    return state, memory


def train_foundation_command(config, out):
    state, memory, _ = _foundation(config, config.model, config.seed, _log(config, out))
    save_checkpoint(state, memory, config.path('checkpoint'), metadata={'config_sha256': config.digest()})


def transfer_command(config, out):
    if not config.tasks_with_role('transfer'):
        raise ConfigError('No task has role `transfer`.')
    state, memory, metadata = load_checkpoint(config.path('checkpoint'))
    _transfer(config, state, memory, _log(config, out))
    save_checkpoint(state, memory, config.path('checkpoint'), metadata=metadata)


def _rollout_spec(config, dataset):
    if not dataset.time_dependent:
        return None
    horizon = dataset.horizon if config.evaluate.horizon is None else config.evaluate.horizon
    return RolloutSpec(window=dataset.window, horizon=horizon)


def evaluate_tasks(config, state, memory, tasks):
    """Accuracy curves of ``tasks`` with their stored gates, keyed by task name."""
    curves = {}
    for task in tasks:
        if task.label not in memory:
            raise KeyError('Task `%s` (label %d) has no stored gates.' % (task.name, task.label))
        activate_task(state, memory, task.label)
        _, test = load_task(config, task)
        curves[task.name] = evaluate_rollout(state, test, _rollout_spec(config, test), n_jobs=config.evaluate.n_jobs,
                                             batch_size=config.evaluate.batch_size)
    return curves


def evaluate(config, out, task_names=None):
    state, memory, _ = load_checkpoint(config.path('checkpoint'), read_only=True)
    tasks = config.tasks
    if task_names:
        unknown = sorted(set(task_names) - {t.name for t in tasks})
        if unknown:
            raise ConfigError('Unknown task `%s`.' % unknown[0])
        tasks = [t for t in tasks if t.name in task_names]
    curves = evaluate_tasks(config, state, memory, tasks)
    write_metrics_csv(Path(out) / 'metrics.csv', curves)
    write_plot_script(out)
    outputs = [load_task(config, task)[1].outputs for task in tasks]
    if len({o.shape[2:] for o in outputs}) == 1:
        write_similarity_csv(Path(out) / 'similarity.csv', [t.name for t in tasks], similarity_matrix(outputs))
    else:
        logger.warning('Tasks live on different grids; similarity.csv is not written.')


def ablate_experts(config, out):
    rows = []
    for n_experts in config.ablation.n_experts:
        model = replace(config.model, n_experts=n_experts, bases=None)
        for seed in config.ablation.seeds:
            logger.info('Ablation run with %d experts, seed %d.', n_experts, seed)
            state, memory, _ = _foundation(config, model, seed)
            state, memory = _transfer(config, state, memory)
            curves = evaluate_tasks(config, state, memory, config.tasks)
            for task in config.tasks:
                rows.append((n_experts, seed, task.name, task.role, float(np.mean(1 - curves[task.name]))))
    with open(Path(out) / 'ablation.csv', 'w', encoding='utf-8', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(ABLATION_COLUMNS)
        for n_experts, seed, task, phase, error in rows:
            writer.writerow([n_experts, seed, task, phase, '%.10g' % error])


COMMANDS = {
    'generate': generate,
    'train-foundation': train_foundation_command,
    'transfer': transfer_command,
    'evaluate': evaluate,
    'ablate-experts': ablate_experts,
}


def run_command(config, out=None, task_names=None):
    """Run ``config.command`` and write its artifacts and ``stamp.json`` to ``out`` (the reports path by default).

    Returns
    -------
    status : int
        0 on success; failures raise.
    """
    if config.command not in COMMANDS:
        raise ConfigError('`%s` is not implemented.' % config.command)
    out = Path(out) if out is not None else config.path('reports')
    out.mkdir(parents=True, exist_ok=True)
    logger.info('Running `%s` into %s.', config.command, out)
    if config.command == 'evaluate':
        evaluate(config, out, task_names)
    else:
        COMMANDS[config.command](config, out)
    write_stamp(out, config)
    return 0
