"""
Command-line interface of the ULE laboratory.

Results go to stdout as JSON; logging goes to stderr. Exit codes: 0 success,
1 internal error, 2 invalid input, 3 inconclusive or non-converged.
"""

import argparse
import logging
import sys
from typing import Any, Dict, List, Optional

from .chain_parser import parse_chain, parse_float_list, parse_int_list
from .errors import LabError
from .hull import condition_A, hulls_isomorphic, maximalize
from .lab_service import LabService
from .report_writer import to_json_text
from .run_config import load_config_file, resolve_config

logger = logging.getLogger(__name__)

RUN_COMMANDS = ('potential', 'spectrum', 'dress', 'ule', 'dynloc', 'sweep', 'distality', 'approx')


def _add_run_arguments(parser: argparse.ArgumentParser):
    parser.add_argument('--config', help='Path to a JSON run configuration (flags override it)')
    parser.add_argument('--chain', help='Frequency chain, e.g. "2,8,512" or "2 -> 8 -> 512 ... cube"')
    parser.add_argument('--pattern', help='Growth pattern of the chain (powers, square, cube, power:M, ...)')
    parser.add_argument('--m', type=int, help='Growth exponent of the distal generator')
    parser.add_argument('--generator', choices=('distal', 'poeschel'), help='Potential generator')
    parser.add_argument('--eps', help='Coupling values, comma-separated')
    parser.add_argument('--N', help='Window sizes, comma-separated')
    parser.add_argument('--t', help='Phase shifts, comma-separated or a range like 0..7')
    parser.add_argument('--k-layers', type=int, help='Layers summed per site')
    parser.add_argument('--tol', type=float, help='Dressed-potential tolerance')
    parser.add_argument('--floor', type=float, help='Magnitude floor for decay fits')
    parser.add_argument('--margin', type=int, help='Interior margin excluded at each window edge')
    parser.add_argument('--max-iter', type=int, help='Maximum dressed-potential iterations')
    parser.add_argument('--form', choices=('standard', 'poeschel'), help='Operator normalization')
    parser.add_argument('--offset', type=int, help='First lattice site of the window')
    parser.add_argument('--threads', type=int, help='Worker threads for sweeps')
    parser.add_argument('--full-vectors', action='store_true', default=None,
                        help='Also write every eigenvector (spectrum)')
    parser.add_argument('--float', dest='exact', action='store_false', default=None,
                        help='Evaluate the distal generator in floating point')
    parser.add_argument('-o', '--output', help='Output directory (default: output)')


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with one subcommand per laboratory operation."""
    parser = argparse.ArgumentParser(
        prog='ule_lab',
        description='Limit-periodic potentials, distal sequences and ULE reports'
    )
    parser.add_argument('-v', '--verbose', action='store_true', help='Debug logging on stderr')
    commands = parser.add_subparsers(dest='command', required=True)

    hull = commands.add_parser('hull', help='Hull predicates on frequency chains')
    hull_commands = hull.add_subparsers(dest='hull_command', required=True)
    maximalize_parser = hull_commands.add_parser('maximalize', help='Canonical prime-step chain')
    maximalize_parser.add_argument('--chain', required=True)
    maximalize_parser.add_argument('--pattern')
    maximalize_parser.add_argument('--depth', type=int)
    isomorphic_parser = hull_commands.add_parser('isomorphic', help='Hull isomorphism of two chains')
    isomorphic_parser.add_argument('--a', required=True)
    isomorphic_parser.add_argument('--b', required=True)
    isomorphic_parser.add_argument('--pattern', help='Growth pattern applied to both chains')
    isomorphic_parser.add_argument('--depth', type=int)
    condition_parser = hull_commands.add_parser('condition-a', help='Condition A and its minimal exponent')
    condition_parser.add_argument('--chain', required=True)
    condition_parser.add_argument('--pattern')
    condition_parser.add_argument('--m-bound', type=int)

    run_parsers = {}
    for name in RUN_COMMANDS:
        run_parsers[name] = commands.add_parser(name, help=f"Run the {name} pipeline")
        _add_run_arguments(run_parsers[name])
    distality = run_parsers['distality']
    distality.add_argument('--window', help='Scan range lo,hi (half-open)')
    distality.add_argument('--max-separation', type=int, help='Largest separation |k| scanned')
    return parser


def cmd_hull(args: argparse.Namespace) -> Dict[str, Any]:
    """Run one hull subcommand and return its JSON report."""
    if args.hull_command == 'maximalize':
        chain = parse_chain(args.chain, args.pattern)
        result = maximalize(chain, args.depth or chain.depth)
        return {'chain': list(result.elements), 'pattern': result.pattern}
    if args.hull_command == 'isomorphic':
        a = parse_chain(args.a, args.pattern)
        b = parse_chain(args.b, args.pattern)
        verdict = hulls_isomorphic(a, b, args.depth or max(a.depth, b.depth))
        return verdict.to_json()
    chain = parse_chain(args.chain, args.pattern)
    return condition_A(chain, args.m_bound).to_json()


def config_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    """RunConfig overrides from the parsed flags; unset flags map to None."""
    overrides = {
        'chain': args.chain,
        'pattern': args.pattern,
        'm': args.m,
        'generator': args.generator,
        'eps': parse_float_list(args.eps, 'eps') if args.eps else None,
        'N': parse_int_list(args.N, 'N') if args.N else None,
        't': parse_int_list(args.t, 't') if args.t else None,
        'k_layers': args.k_layers,
        'tol': args.tol,
        'floor': args.floor,
        'interior_margin': args.margin,
        'max_iter': args.max_iter,
        'form': args.form,
        'offset': args.offset,
        'threads': args.threads,
        'full_vectors': args.full_vectors,
        'exact': args.exact,
        'output_dir': args.output,
    }
    if args.command == 'distality':
        overrides['window'] = parse_int_list(args.window, 'window') if args.window else None
        overrides['max_separation'] = args.max_separation
    return overrides


def cmd_run(args: argparse.Namespace) -> Dict[str, Any]:
    """Resolve the configuration and run one laboratory pipeline."""
    file_data = load_config_file(args.config) if args.config else None
    config = resolve_config(file_data, config_overrides(args))
    service = LabService(config)
    return service.run(args.command)


def main(argv: Optional[List[str]] = None) -> int:
    """
    Main entry point.

    Args:
        argv: Arguments without the program name (default: sys.argv[1:])

    Returns:
        Process exit code
    """
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format='%(levelname)s %(name)s: %(message)s',
        stream=sys.stderr,
    )

    try:
        result = cmd_hull(args) if args.command == 'hull' else cmd_run(args)
    except LabError as e:
        logger.error("%s", e)
        print(to_json_text({'error': str(e), 'type': type(e).__name__, 'exit_code': e.exit_code}))
        return e.exit_code
    except Exception as e:
        logger.exception("Unexpected failure")
        print(to_json_text({'error': f"ERROR: {e}", 'type': type(e).__name__, 'exit_code': 1}))
        return 1

    print(to_json_text(result))
    return 0


if __name__ == '__main__':
    sys.exit(main())
