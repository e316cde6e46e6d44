"""
Command line surface: `stencil <command> [flags]`.

Every StencilError is logged, written to stderr as JSON and turned into its
exit code (1 usage, 2 I/O, 3 numerical).
"""
import argparse
import json
import logging
import sys
import typing as t

from ..exceptions import StencilError, UsageError
from ..logging import configure_logger
from ..settings import LOG_LEVEL
from .commands import cmd_eval, cmd_finetune, cmd_gen_data, cmd_inspect_attn, cmd_pretrain, cmd_sample
from .config import RunConfig, parse_strength


logger = logging.getLogger(__name__)


class ArgumentParser(argparse.ArgumentParser):
    """argparse that raises UsageError instead of exiting."""

    def error(self, message):
        raise UsageError(f'{self.prog}: {message}')


def _sampling_flags(parser: argparse.ArgumentParser):
    parser.add_argument('--checkpoint', required=True)
    parser.add_argument('--labels', required=True, help='P5 label map.')
    parser.add_argument('--text', default='', help='Global words appended after the concepts.')
    parser.add_argument('--bind', default='', help='Rebind words to classes: "word=class,...".')
    parser.add_argument('--concept', action='append', default=[], help='Replace the words of a class: "class=words".')
    parser.add_argument('--override', default=None, help='Attention overrides: "swap:a,b|share:src,dst".')
    parser.add_argument('--lambda', dest='strength', default=None, help='Rectification strength, "inf" for hard masking.')
    parser.add_argument('--steps', type=int, default=None)
    parser.add_argument('--scale', type=float, default=None)
    parser.add_argument('--seed', type=int, default=None)
    parser.add_argument('--method', default=None, choices=('ddpm', 'ddim', 'plms'))
    parser.add_argument('--no-layout', action='store_true', help='Text-only baseline: the same words with no layout.')


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(prog='stencil', description='Layout-conditioned diffusion with rectified cross-attention.')
    parser.add_argument('--config', default=None, help='JSON run configuration.')
    parser.add_argument('--log-level', default=LOG_LEVEL)
    parser.add_argument('--quiet', action='store_true', help='No progress bars.')
    commands = parser.add_subparsers(dest='command', parser_class=ArgumentParser)
    commands.required = True

    gen_data = commands.add_parser('gen-data', help='Render a synthetic scene dataset.')
    gen_data.add_argument('--out', required=True)
    gen_data.add_argument('--n', type=int, required=True)
    gen_data.add_argument('--seed', type=int, default=0)
    gen_data.add_argument('--holdout', default='', help='Comma separated "color shape" combos kept out of fine-tuning.')
    gen_data.add_argument('--workers', type=int, default=None)
    gen_data.set_defaults(handler=cmd_gen_data)

    for name, handler in (('pretrain', cmd_pretrain), ('finetune', cmd_finetune)):
        train = commands.add_parser(name, help=f'Run the {name} stage.')
        train.add_argument('--manifest', default=None)
        train.add_argument('--out', default=None)
        train.add_argument('--steps', type=int, default=None)
        if name == 'finetune':
            train.add_argument('--init', required=True, help='Pre-trained checkpoint.')
        train.set_defaults(handler=handler)

    sample = commands.add_parser('sample', help='Generate one image from a label map.')
    _sampling_flags(sample)
    sample.add_argument('--out', required=True)
    sample.set_defaults(handler=cmd_sample)

    inspect = commands.add_parser('inspect-attn', help='Dump attention heat maps of one sampling step.')
    _sampling_flags(inspect)
    inspect.add_argument('--layer', default=None)
    inspect.add_argument('--step', type=int, default=0)
    inspect.add_argument('--out', required=True, help='Directory of PGM heat maps.')
    inspect.set_defaults(handler=cmd_inspect_attn)

    evaluate = commands.add_parser('eval', help='Score samples against their layouts.')
    evaluate.add_argument('--checkpoint', default=None)
    evaluate.add_argument('--manifest', default=None)
    evaluate.add_argument('--out', required=True)
    evaluate.add_argument('--split', default='test')
    evaluate.add_argument('--samples-per-layout', type=int, default=1)
    evaluate.add_argument('--bypass', action='store_true', help='Score the ground-truth images instead of samples.')
    evaluate.add_argument('--limit', type=int, default=None)
    evaluate.add_argument('--workers', type=int, default=None)
    evaluate.set_defaults(handler=cmd_eval)

    return parser


def main(argv: t.Sequence[str] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        configure_logger(level=args.log_level.upper())
        return args.handler(args)
    except StencilError as ex:
        logger.error('%s: %s', type(ex).__name__, ex.message)
        print(json.dumps(ex.to_response()), file=sys.stderr)
        return ex.exit_code
    except ValueError as ex:
        # Raised by settings for a malformed environment.
        logger.error('%s', ex)
        print(json.dumps({'error': 'UsageError', 'message': str(ex), 'details': None}), file=sys.stderr)
        return UsageError.exit_code


__all__ = ['main', 'build_parser', 'RunConfig', 'parse_strength']
