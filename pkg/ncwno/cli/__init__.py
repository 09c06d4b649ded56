from ._config import (RunConfig, PathsConfig, TaskEntry, TransferConfig, EvaluateConfig, GenerateConfig,
                      AblationConfig, parse_config, build_config, apply_env_overrides, with_seed)
from ._commands import run_command, load_task
from ._artifacts import write_stamp, write_plot_script, package_versions
from ._main import main, build_parser, error_category

__all__ = ['RunConfig', 'PathsConfig', 'TaskEntry', 'TransferConfig', 'EvaluateConfig', 'GenerateConfig',
           'AblationConfig', 'parse_config', 'build_config', 'apply_env_overrides', 'with_seed', 'run_command',
           'load_task', 'write_stamp', 'write_plot_script', 'package_versions', 'main', 'build_parser',
           'error_category']
