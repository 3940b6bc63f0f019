"""
Command line entry point: ``porowave <experiment> [options]``.
"""
import argparse
import json
import logging
import sys

from . import VERSION, settings
from .config import load_config
from .exceptions import ValidationError
from .experiments import run_experiment
from .handlers import friendly_exception_handler
from .output import write_reference_matrices
from .refelem import build_reference

logger = logging.getLogger(__name__)

# flag dest -> dotted config key
OVERRIDES = {
    'material': 'material.preset',
    'material_file': 'material.file',
    'N': 'run.N',
    'dim': 'run.dim',
    'K1D': 'mesh.k1d',
    'mesh': 'mesh.file',
    'boundary': 'mesh.boundary',
    'alpha_tau': 'flux.alpha_tau',
    'alpha_v': 'flux.alpha_v',
    'cfl': 'time.cfl',
    'final_time': 'time.final_time',
    'scheme': 'time.scheme',
    'plane': 'run.plane',
    'mode': 'run.mode',
    'jobs': 'run.jobs',
    'out': 'output.directory',
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog='porowave',
        description='DG solver for the low-frequency Biot wave equations.')
    parser.add_argument('experiment', nargs='?', choices=settings.EXPERIMENTS,
                        help='what to run (default from the config)')
    parser.add_argument('--config', help='INI-style run configuration')
    parser.add_argument('--material', help='material preset name')
    parser.add_argument('--material-file', help='material property file')
    parser.add_argument('--N', type=int, help='polynomial degree')
    parser.add_argument('--dim', type=int, choices=(2, 3))
    parser.add_argument('--K1D', type=int, help='elements per side')
    parser.add_argument('--mesh', help='mesh file instead of a box')
    parser.add_argument('--boundary',
                        choices=('free', 'abc', 'exact', 'periodic'))
    parser.add_argument('--alpha-tau', type=float)
    parser.add_argument('--alpha-v', type=float)
    parser.add_argument('--cfl', type=float)
    parser.add_argument('--final-time', type=float)
    parser.add_argument('--scheme', choices=('unified', 'strang'))
    parser.add_argument('--plane', choices=('xy', 'xz'))
    parser.add_argument('--mode', choices=('full13', 'compact2d'))
    parser.add_argument('--jobs', type=int,
                        help='concurrent convergence levels')
    parser.add_argument('--out', help='output directory')
    parser.add_argument('--dump-refelem', action='store_true',
                        help='print reference element data and exit; with '
                             '--out also write its matrices as CSV')
    parser.add_argument('-v', '--verbose', action='count', default=0)
    parser.add_argument('--quiet', action='store_true')
    parser.add_argument('--version', action='version',
                        version='porowave %s' % VERSION)
    return parser


def configure_logging(verbose=0, quiet=False):
    if quiet:
        level = logging.ERROR
    elif verbose >= 2:
        level = logging.DEBUG
    elif verbose == 1:
        level = logging.INFO
    else:
        level = logging.WARNING
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(settings.LOG_FORMAT))
    root = logging.getLogger()
    root.handlers = [handler]
    root.setLevel(level)


def overrides_from_args(args):
    overrides = {key: getattr(args, dest) for dest, key in OVERRIDES.items()
                 if getattr(args, dest, None) is not None}
    if args.experiment:
        overrides['run.experiment'] = args.experiment
    return overrides


def refelem_summary(dim, N, directory=None):
    ref = build_reference(dim, N)
    summary = {'dim': ref.dim, 'N': ref.N, 'Np': ref.Np, 'Nq': ref.Nq,
               'Nfq': ref.Nfq, 'nfaces': ref.nfaces,
               'mass_condition': ref.mass_condition,
               'quadrature_weight_sum': float(ref.quad_weights.sum())}
    if directory:
        summary['files'] = write_reference_matrices(ref, directory)
    return summary


def summarize(name, result):
    if name == 'converge':
        return {'errors': result.errors, 'rates': result.rates,
                'metadata': result.metadata}
    if name == 'spectra':
        return [{'alpha': r.alpha, 'radius': r.radius,
                 'max_real': r.max_real, 'estimate': r.estimate}
                for r in result]
    if name == 'simulate':
        return {'t': result.state.t, 'outputs': result.outputs,
                'energy': result.energy.rows[-1][2] if result.energy.rows
                else None}
    if name == 'heterogeneity':
        return {'N': result.N, 'k1d': result.k1d,
                'difference': result.difference}
    return {'rows': len(result)}


def main(argv=None):
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose, args.quiet)
    try:
        config = load_config(args.config, overrides=overrides_from_args(args))
        if args.dump_refelem:
            summary = refelem_summary(config['run.dim'], config['run.N'],
                                      args.out)
        else:
            name = config['run.experiment']
            logger.info('running %s', name)
            summary = summarize(name, run_experiment(config))
    except Exception as exc:
        payload = friendly_exception_handler(
            exc, context={'experiment': args.experiment})
        if payload is None:
            raise
        sys.stderr.write(json.dumps(payload, indent=2, default=str) + '\n')
        return 2 if isinstance(exc, ValidationError) else 1
    sys.stdout.write(json.dumps(summary, indent=2, default=str) + '\n')
    return 0


if __name__ == '__main__':
    sys.exit(main())
