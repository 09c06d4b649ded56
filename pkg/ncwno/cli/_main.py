import argparse
import logging
import sys

from ncwno.cli._commands import run_command
from ncwno.cli._config import COMMANDS, parse_config, with_seed
from ncwno.exceptions import ConfigError, NumericalError, StabilityError

logger = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    """Argument parser raising :class:`ConfigError` so that usage errors share the config exit status."""

    def error(self, message):
        raise ConfigError(message)


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument('--config', required=True, help='YAML run configuration')
    common.add_argument('--seed', type=int, default=None, help='override the configured seed (unsigned 64-bit)')
    common.add_argument('--out', default=None, help='output directory for reports and stamp.json')
    common.add_argument('--verbose', '-v', action='store_true', help='log progress at INFO level')

    parser = _Parser(prog='ncwno', description='Continual neural operators for parametric PDEs.')
    subparsers = parser.add_subparsers(dest='command', metavar='command', parser_class=_Parser)
    subparsers.required = True
    helps = {
        'generate': 'simulate the configured tasks and write dataset containers',
        'train-foundation': 'train the foundation model on the foundation tasks',
        'transfer': 'fit gate parameters for each transfer task',
        'evaluate': 'write accuracy curves, similarity matrix and plotting script',
        'ablate-experts': 'rerun foundation training and transfer over expert counts',
    }
    for command in COMMANDS:
        sub = subparsers.add_parser(command, parents=[common], help=helps[command])
        if command == 'evaluate':
            sub.add_argument('--task', action='append', default=None, help='evaluate only this task (repeatable)')
    return parser


def error_category(error):
    """Exit status and category name of an exception raised by a command."""
    if isinstance(error, (NumericalError, StabilityError, FloatingPointError)):
        return 2, 'numerical'
    if isinstance(error, (ConfigError, ValueError, KeyError, TypeError, AssertionError)):
        return 1, 'config'
    if isinstance(error, OSError):
        return 3, 'io'
    return 1, 'config'


def main(argv=None):
    """Entry point of the ``ncwno`` command; returns the exit status."""
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format='%(asctime)s %(levelname)s %(name)s: %(message)s')
        config = parse_config(args.config, command=args.command)
        if args.seed is not None:
            config = with_seed(config, args.seed)
        return run_command(config, out=args.out, task_names=getattr(args, 'task', None))
    except Exception as e:
        status, category = error_category(e)
        logger.debug('Command failed.', exc_info=True)
        message = str(e.args[0]) if isinstance(e, KeyError) and e.args else str(e)
        print('error category=%s message=%s' % (category, ' '.join(message.split())), file=sys.stderr)
        return status
