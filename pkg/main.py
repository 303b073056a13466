"""
RM Toolbox - command-line entry point.

Runs one experiment per invocation and writes its table, summary and plot:

    python main.py ghzw-sweep --unitaries 400 --shots 500 --out results
    python main.py chessboard-sweep --grid measured --format csv --format svg
    python main.py estimate-moments --state chessboard --param 0.1291
    python main.py tomography-roundtrip --p 0.1291 --replicas 100
    python main.py bound --r2 0.2355

Exit codes: 0 success, 1 unexpected failure, 2 invalid configuration,
3 failed numerical self-check or solver failure.
"""

import argparse
import logging
import sys
from typing import Dict, List, Optional

from config import ConfigError, VALID_FORMATS, VALID_GRIDS, __version__, load_config_file
from experiments import create_experiment_runner
from result_exporter import create_result_exporter
from rm_protocol import NumericalConsistencyError
from tomography import MLE_METHODS

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', metavar='PATH', help='JSON configuration file')
    common.add_argument('--seed', type=int, metavar='U64', help='master seed (protocol.seed)')
    common.add_argument('--unitaries', type=int, metavar='M', help='local unitaries per repetition')
    common.add_argument('--shots', type=int, metavar='N', help='shots per unitary')
    common.add_argument('--repetitions', type=int, help='independent protocol repetitions')
    common.add_argument('--out', metavar='DIR', help='output directory (export.output_dir)')
    common.add_argument('--format', dest='formats', action='append', choices=VALID_FORMATS,
                        help='output format; repeat for several')
    common.add_argument('--workers', type=int, help='worker threads (advanced.max_worker_threads)')
    common.add_argument('--save-config', metavar='PATH', help='write the effective configuration as JSON')
    common.add_argument('-v', '--verbose', action='store_true', help='debug logging')

    parser = argparse.ArgumentParser(
        prog='rm-toolbox',
        description='Entanglement detection from randomized measurements: simulations and criteria.',
    )
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    sub = parser.add_subparsers(dest='experiment', required=True, metavar='EXPERIMENT')

    ghzw = sub.add_parser('ghzw-sweep', parents=[common], help='sector-length criteria along GHZ-W mixtures')
    ghzw.add_argument('--no-estimate', dest='estimate', action='store_false', default=None,
                      help='exact columns only')
    ghzw.add_argument('--g-step', type=float, help='grid step in g')

    chess = sub.add_parser('chessboard-sweep', parents=[common], help='moment criterion along the noisy chessboard state')
    chess.add_argument('--grid', choices=VALID_GRIDS, help='uniform p grid or the experimental noise levels')
    chess.add_argument('--p-stop', type=float, help='largest p of the uniform grid')
    chess.add_argument('--tomography', action='store_true', default=None,
                       help='add simulated tomography with bootstrap errors per p')

    moments = sub.add_parser('estimate-moments', parents=[common], help='finite-shot randomized moments')
    moments.add_argument('--state', choices=('chessboard', 'ghzw'), default='chessboard')
    moments.add_argument('--param', type=float, default=0.0, help='noise level p or GHZ weight g')

    tomo = sub.add_parser('tomography-roundtrip', parents=[common], help='simulate, reconstruct and bootstrap')
    tomo.add_argument('--p', type=float, default=0.1291, help='injected white-noise level')
    tomo.add_argument('--replicas', type=int, help='bootstrap replicas')
    tomo.add_argument('--shots-per-setting', type=int, help='signal counts per tomography setting')
    tomo.add_argument('--mle-method', choices=MLE_METHODS, help='maximum-likelihood iteration (tomography.method)')

    bound = sub.add_parser('bound', parents=[common], help='minimal R4 at fixed R2 for separable states')
    bound.add_argument('--r2', type=float, nargs='+', help='R2 values (default: config grid)')
    bound.add_argument('--no-cross-check', dest='cross_check', action='store_false', default=None,
                       help='skip the numeric solver')
    return parser


def config_overrides(args: argparse.Namespace) -> Dict[str, object]:
    """Dotted config keys set by command-line flags; unset flags map to None."""
    return {
        'protocol.seed': args.seed,
        'protocol.num_unitaries': args.unitaries,
        'protocol.shots_per_unitary': args.shots,
        'protocol.repetitions': args.repetitions,
        'export.output_dir': args.out,
        'export.formats': args.formats,
        'advanced.max_worker_threads': args.workers,
        'advanced.debug_mode': True if args.verbose else None,
        'ghzw_sweep.g_step': getattr(args, 'g_step', None),
        'chessboard_sweep.grid': getattr(args, 'grid', None),
        'chessboard_sweep.p_stop': getattr(args, 'p_stop', None),
        'chessboard_sweep.shots_per_setting': getattr(args, 'shots_per_setting', None),
        'tomography.method': getattr(args, 'mle_method', None),
    }


def experiment_kwargs(args: argparse.Namespace) -> Dict[str, object]:
    if args.experiment == 'ghzw-sweep':
        return {'estimate': args.estimate}
    if args.experiment == 'chessboard-sweep':
        return {'tomography': args.tomography}
    if args.experiment == 'estimate-moments':
        return {'state': args.state, 'parameter': args.param}
    if args.experiment == 'tomography-roundtrip':
        return {'p': args.p, 'replicas': args.replicas}
    return {'r2_values': args.r2, 'cross_check': args.cross_check}


def setup_logging(log_file: str, debug: bool) -> logging.Logger:
    logging.basicConfig(
        level=logging.DEBUG if debug else logging.INFO,
        format='%(asctime)s - %(levelname)s - %(message)s',
        handlers=[
            logging.FileHandler(log_file),
            logging.StreamHandler()
        ],
        force=True
    )
    return logging.getLogger(__name__)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)

    try:
        config = load_config_file(args.config)
        config.apply_overrides(config_overrides(args))
    except ConfigError as e:
        print(f"Configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    logger = setup_logging(config.get('advanced.log_file', 'rm_toolbox.log'),
                           bool(config.get('advanced.debug_mode', False)))
    logger.info(f"RM toolbox {__version__}: {args.experiment}")

    try:
        config.ensure_valid()
        if args.save_config:
            config.save_config(args.save_config)
        runner = create_experiment_runner(config=config)
        result = runner.run(args.experiment, **experiment_kwargs(args))
        exporter = create_result_exporter(config=config)
        written = exporter.export(result.name, result.table, result.results, result.plot, seed=result.seed)
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG
    except NumericalConsistencyError as e:
        logger.error(f"Numerical self-check failed: {e}")
        return EXIT_NUMERICAL
    except RuntimeError as e:
        logger.error(f"{args.experiment}: numerical failure: {e}")
        return EXIT_NUMERICAL
    except (ValueError, OSError) as e:
        logger.error(f"{args.experiment} failed: {e}")
        return EXIT_FAILURE

    for format_type, path in written.items():
        logger.info(f"{format_type.upper()}: {path}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
