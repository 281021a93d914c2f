"""
Command-line front end.

    python cli.py analytic two-state --alpha 0.0625 --beta 0.1875
    python cli.py simulate dm1 --alpha 1 --beta 0.909090909 --n 50000 --seed 7 -o trace.csv
    python cli.py estimate block --B 2 --input trace.csv
    python cli.py rate-curve --alpha 0.0625 --beta 0.1875 -o fig1.csv
    python cli.py experiment convergence --family dm1 --alpha 1 --beta 0.909090909 \
        --estimator block --n-max 50000 --seed 1 -o fig2_left.csv
    python cli.py experiment mc-ldp --family dm1 --alpha 1 --beta 0.909090909 \
        --estimator block --m 10000 --seed 1 --workers 4 -o fig2_right.csv
    python cli.py compare --input trace.csv --theta-star-ref 0.17613

Exit codes: 0 success, 1 parameter or usage error, 2 data, format or I/O error.
"""

import argparse
import json
import logging
import sys
from typing import Any, Callable, Dict, List, Optional

import numpy as np
import pandas as pd

import config
from analytic import dm1_exponent, spectral_radius, two_state_exponent
from compare_service import compare_estimators, comparison_table
from errors import (
    EXIT_DATA, EXIT_OK, EXIT_PARAMETER, ConfigurationError, LoynesError,
    ParameterError, UsageError, exit_code_for,
)
from estimators import (
    block_evaluator, exponent_from_scgf, extremal_estimate, infer_states,
    legendre_rate_curve, markov_evaluator, markov_mle, scgf_curve,
)
from experiments import (
    convergence_table, convexity_violation, curve_metadata, mc_ldp_table,
    rate_curve_table, rate_curve_two_state, run_convergence, run_mc_ldp,
)
from export import emit_csv, export_workbook
from formatting import format_fixed, format_real, parse_real
from lindley import block_sums, lindley_recursion
from models import (
    ConvergenceConfig, Dm1Spec, EstimatorKind, EstimatorSpec, FiniteMarkovSpec,
    McLdpConfig, ProcessFamily, RunManifest, TraceKind, TwoStateSpec,
)
from processes import load_trace, sample
from storage import load_manifest, save_manifest, save_trace

logger = logging.getLogger(__name__)

PROG = "loynes"

DEFAULTS: Dict[str, Any] = {
    'B': 1,
    'w0': 0.0,
    'warmup': 0,
    'input_kind': TraceKind.INCREMENTS.value,
    'm': config.DEFAULT_REPLICAS,
    'workers': config.DEFAULT_WORKERS,
    'n_list': [50, 100, 200, 400],
    'x_list': [0.02, 0.04, 0.08],
    'x_min': 0.01,
    'x_max': 1.5,
    'points': 150,
}


# ============================================================================
# ARGUMENT PARSING
# ============================================================================

class _Parser(argparse.ArgumentParser):
    """ArgumentParser that raises UsageError instead of exiting with status 2."""

    def error(self, message):
        raise UsageError(message, self.format_usage())


def _common_options() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument('--config', help="JSON file with option values (a run manifest works too)")
    common.add_argument('--log-level', dest='log_level', default=None,
                        help="DEBUG, INFO, WARNING (default) or ERROR; logs go to stderr")
    common.add_argument('--output', '-o', default=None, help="output CSV (default stdout)")
    common.add_argument('--manifest', default=None,
                        help="run manifest path (default <output>.manifest.json)")
    return common


def _process_options(parser: argparse.ArgumentParser, with_family: bool):
    if with_family:
        parser.add_argument('--family', choices=[f.value for f in ProcessFamily], default=None)
    parser.add_argument('--alpha', type=float, default=None)
    parser.add_argument('--beta', type=float, default=None)
    parser.add_argument('--Pi', dest='Pi', default=None, help="transition matrix as JSON, e.g. [[0.9,0.1],[0.3,0.7]]")
    parser.add_argument('--f', dest='f', default=None, help="state values, comma separated, e.g. -1,1")
    parser.add_argument('--init', type=int, default=None, help="initial state index (default stationary)")
    parser.add_argument('--warmup', type=int, default=None, help="D/M/1 draws discarded before the trace")
    parser.add_argument('--seed', type=int, default=None)


def _estimator_options(parser: argparse.ArgumentParser, with_kind: bool):
    if with_kind:
        parser.add_argument('--estimator', choices=[k.value for k in EstimatorKind], default=None)
    parser.add_argument('--B', dest='B', type=int, default=None, help="block size (block estimator)")
    parser.add_argument('--states', default=None, help="state values, comma separated, e.g. -1,1 (Markov estimator)")
    parser.add_argument('--w0', type=float, default=None, help="initial wait (extremal estimator)")


def build_parser() -> argparse.ArgumentParser:
    common = _common_options()
    parser = _Parser(prog=PROG, description="Loynes exponent estimation and large-deviation experiments")
    parser.add_argument('--version', action='version', version=config.ARTIFACT_VERSION)
    commands = parser.add_subparsers(dest='command', required=True, parser_class=_Parser)

    # simulate
    simulate = commands.add_parser('simulate', parents=[common], help="sample an increments trace")
    simulate.add_argument('mode', choices=[f.value for f in ProcessFamily])
    _process_options(simulate, with_family=False)
    simulate.add_argument('--n', type=int, default=None)
    simulate.add_argument('--waits', action='store_true', default=None,
                          help="emit Lindley waiting times instead of increments")
    simulate.add_argument('--w0', type=float, default=None)
    simulate.set_defaults(handler=cmd_simulate)

    # estimate
    estimate = commands.add_parser('estimate', parents=[common], help="estimate theta* from a trace")
    estimate.add_argument('mode', choices=[k.value for k in EstimatorKind])
    estimate.add_argument('--input', default=None)
    estimate.add_argument('--input-kind', dest='input_kind', default=None,
                          choices=[k.value for k in TraceKind])
    _estimator_options(estimate, with_kind=False)
    estimate.add_argument('--scgf-grid', dest='scgf_grid', default=None,
                          help="theta grid lo:hi:count for the sCGF table")
    estimate.add_argument('--scgf-output', dest='scgf_output', default=None)
    estimate.set_defaults(handler=cmd_estimate)

    # analytic
    analytic = commands.add_parser('analytic', parents=[common], help="closed-form quantities")
    analytic.add_argument('mode', choices=['two-state', 'dm1', 'spectral-radius'])
    analytic.add_argument('--alpha', type=float, default=None)
    analytic.add_argument('--beta', type=float, default=None)
    analytic.add_argument('--matrix', default=None, help="nonnegative matrix as JSON")
    analytic.set_defaults(handler=cmd_analytic)

    # rate-curve
    rate = commands.add_parser('rate-curve', parents=[common],
                               help="two-state J(x), or I_hat(n, x) of a trace with --input")
    rate.add_argument('--alpha', type=float, default=None)
    rate.add_argument('--beta', type=float, default=None)
    rate.add_argument('--x-min', dest='x_min', type=float, default=None)
    rate.add_argument('--x-max', dest='x_max', type=float, default=None)
    rate.add_argument('--points', type=int, default=None)
    rate.add_argument('--x-grid', dest='x_grid', default=None, help="explicit x values, comma separated")
    rate.add_argument('--input', default=None)
    _estimator_options(rate, with_kind=True)
    rate.add_argument('--excel', default=None, help="also write an Excel workbook")
    rate.set_defaults(handler=cmd_rate_curve)

    # experiment
    experiment = commands.add_parser('experiment', parents=[common], help="Monte Carlo experiments")
    experiment.add_argument('mode', choices=['convergence', 'mc-ldp'])
    _process_options(experiment, with_family=True)
    _estimator_options(experiment, with_kind=True)
    experiment.add_argument('--n-max', dest='n_max', type=int, default=None)
    experiment.add_argument('--checkpoints', default=None, help="comma separated prefix lengths")
    experiment.add_argument('--m', type=int, default=None, help="replicas (mc-ldp)")
    experiment.add_argument('--n-list', dest='n_list', default=None)
    experiment.add_argument('--x-list', dest='x_list', default=None)
    experiment.add_argument('--theta-star-ref', dest='theta_star_ref', type=float, default=None)
    experiment.add_argument('--workers', type=int, default=None, help="worker processes (results do not change)")
    experiment.add_argument('--progress', action='store_true', default=None)
    experiment.add_argument('--excel', default=None, help="also write an Excel workbook")
    experiment.set_defaults(handler=cmd_experiment)

    # compare
    compare = commands.add_parser('compare', parents=[common], help="all estimators on one trace")
    compare.add_argument('--input', default=None)
    _estimator_options(compare, with_kind=False)
    compare.add_argument('--theta-star-ref', dest='theta_star_ref', type=float, default=None)
    compare.set_defaults(handler=cmd_compare)

    return parser


# ============================================================================
# OPTION RESOLUTION
# ============================================================================

def _float_list(value) -> List[float]:
    if isinstance(value, str):
        return [parse_real(v) for v in value.split(',') if v.strip()]
    return [float(v) for v in value]


def _int_list(value) -> List[int]:
    if isinstance(value, str):
        return [int(v) for v in value.split(',') if v.strip()]
    return [int(v) for v in value]


def _matrix(value) -> List[List[float]]:
    if isinstance(value, str):
        value = json.loads(value)
    return [[float(p) for p in row] for row in value]


def _grid(value) -> List[float]:
    if isinstance(value, str):
        lo, hi, count = value.split(':')
        return np.linspace(parse_real(lo), parse_real(hi), int(count)).tolist()
    return [float(v) for v in value]


class Options:
    """Resolved options; records what a command used for the manifest and CSV header."""

    def __init__(self, values: Dict[str, Any]):
        self._values = values
        self.used: Dict[str, Any] = {}

    def get(self, key: str, cast: Optional[Callable] = None, required: bool = False,
            record: bool = True) -> Any:
        value = self._values.get(key)
        if value is None:
            if required:
                raise ConfigurationError(f"missing required option --{key.replace('_', '-')}")
            return None
        if cast is not None:
            try:
                value = cast(value)
            except (TypeError, ValueError) as e:
                raise ParameterError(f"invalid value for --{key.replace('_', '-')}: {value!r} ({e})")
        if record:
            self.used[key] = value
        return value

    def seed(self) -> int:
        seed = self._values.get('seed')
        if seed is None:
            raise ConfigurationError("--seed is required for stochastic commands")
        return self.get('seed', int)


def _process_spec(opts: Options, family: str, n: int, seed: int):
    if family == ProcessFamily.TWO_STATE.value:
        return TwoStateSpec(opts.get('alpha', float, True), opts.get('beta', float, True), n, seed)
    if family == ProcessFamily.FINITE_MARKOV.value:
        return FiniteMarkovSpec(
            Pi=opts.get('Pi', _matrix, True),
            f=opts.get('f', _float_list, True),
            n=n, seed=seed,
            init=opts.get('init', int),
        )
    if family == ProcessFamily.DM1.value:
        return Dm1Spec(opts.get('alpha', float, True), opts.get('beta', float, True), n, seed,
                       warmup=opts.get('warmup', int))
    raise ConfigurationError(f"unknown process family {family!r}")


def _estimator_spec(opts: Options, kind: str) -> EstimatorSpec:
    kind = EstimatorKind(kind)
    if kind == EstimatorKind.BLOCK:
        return EstimatorSpec(kind, block_size=opts.get('B', int))
    if kind == EstimatorKind.MARKOV:
        return EstimatorSpec(kind, states=opts.get('states', _float_list))
    return EstimatorSpec(kind, w0=opts.get('w0', float))


# ============================================================================
# OUTPUT
# ============================================================================

def _manifest_path(opts: Options) -> Optional[str]:
    path = opts.get('manifest', record=False)
    if path:
        return path
    output = opts.get('output', record=False)
    if output and output != '-':
        return f"{output}.manifest.json"
    return None


def _finish(opts: Options, argv: List[str], base_seed: Optional[int],
            outputs: List[str], notes: Optional[Dict[str, Any]] = None) -> int:
    manifest = RunManifest(
        command=list(argv),
        parameters=dict(opts.used),
        base_seed=base_seed,
        outputs=[o for o in outputs if o],
        notes=notes or {},
    )
    path = _manifest_path(opts)
    if path:
        save_manifest(manifest, path)
    else:
        logger.debug("manifest: %s", manifest.to_dict())
    return EXIT_OK


def _metadata(opts: Options, extra: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    meta: Dict[str, Any] = {'version': config.ARTIFACT_VERSION}
    meta.update(opts.used)
    meta.update(extra or {})
    return meta


# ============================================================================
# COMMANDS
# ============================================================================

def cmd_simulate(opts: Options, argv: List[str]) -> int:
    family = opts.get('mode')
    seed = opts.seed()
    n = opts.get('n', int, required=True)
    spec = _process_spec(opts, family, n, seed)
    trace = sample(spec)
    if opts.get('waits', bool):
        trace = lindley_recursion(trace, opts.get('w0', float))
    output = opts.get('output', record=False)
    save_trace(trace, output)
    return _finish(opts, argv, seed, [output])


def cmd_estimate(opts: Options, argv: List[str]) -> int:
    kind = EstimatorKind(opts.get('mode'))
    path = opts.get('input', str, required=True)
    input_kind = TraceKind(opts.get('input_kind'))
    trace = load_trace(path, input_kind)
    notes: Dict[str, Any] = {}
    scgf = None

    if kind == EstimatorKind.EXTREMAL:
        waits = trace if input_kind == TraceKind.WAITS else lindley_recursion(trace, opts.get('w0', float))
        estimate = extremal_estimate(waits)
    else:
        if input_kind != TraceKind.INCREMENTS:
            raise ConfigurationError(f"the {kind.value} estimator needs an increments trace")
        if kind == EstimatorKind.BLOCK:
            blocked = block_sums(trace, opts.get('B', int))
            scgf = block_evaluator(blocked)
            notes['dropped'] = blocked.dropped
            notes['blocks'] = len(blocked)
        else:
            states = opts.get('states', _float_list)
            est = markov_mle(trace, states if states is not None else infer_states(trace))
            scgf = markov_evaluator(est)
            notes['transitions'] = est.transitions
        estimate = exponent_from_scgf(scgf)

    table = pd.DataFrame([{
        'estimator': kind.value, 'n': len(trace), 'value': estimate.value,
        'status': estimate.status.value, 'residual': estimate.residual,
    }], columns=['estimator', 'n', 'value', 'status', 'residual'])
    output = opts.get('output', record=False)
    emit_csv(table, output, _metadata(opts, notes))

    outputs = [output]
    grid = opts.get('scgf_grid', _grid)
    if grid is not None:
        if scgf is None:
            raise ConfigurationError("--scgf-grid needs the block or Markov estimator")
        scgf_output = opts.get('scgf_output', record=False)
        if not scgf_output:
            raise ConfigurationError("--scgf-grid needs --scgf-output")
        emit_csv(scgf_curve(scgf, grid), scgf_output, _metadata(opts, notes))
        outputs.append(scgf_output)

    notes.update(estimate.to_dict())
    return _finish(opts, argv, trace.seed, outputs, notes)


def cmd_analytic(opts: Options, argv: List[str]) -> int:
    mode = opts.get('mode')
    if mode == 'two-state':
        value = two_state_exponent(opts.get('alpha', float, True), opts.get('beta', float, True))
    elif mode == 'dm1':
        value = dm1_exponent(opts.get('alpha', float, True), opts.get('beta', float, True))
    else:
        value = spectral_radius(opts.get('matrix', _matrix, True))
    sys.stdout.write(format_fixed(value, 6) + "\n")
    return _finish(opts, argv, None, [], {'value': format_real(value)})


def cmd_rate_curve(opts: Options, argv: List[str]) -> int:
    x_grid = opts.get('x_grid', _float_list)
    if x_grid is None:
        x_grid = np.linspace(opts.get('x_min', float), opts.get('x_max', float),
                             opts.get('points', int)).tolist()

    path = opts.get('input', str)
    if path is None:
        curve = rate_curve_two_state(opts.get('alpha', float, True), opts.get('beta', float, True), x_grid)
        seed = None
    else:
        trace = load_trace(path, TraceKind.INCREMENTS)
        kind = EstimatorKind(opts.get('estimator') or EstimatorKind.BLOCK.value)
        if kind == EstimatorKind.BLOCK:
            scgf = block_evaluator(block_sums(trace, opts.get('B', int)))
        elif kind == EstimatorKind.MARKOV:
            states = opts.get('states', _float_list)
            scgf = markov_evaluator(markov_mle(trace, states if states is not None else infer_states(trace)))
        else:
            raise ConfigurationError("the extremal estimator has no sCGF, so no rate curve")
        curve = legendre_rate_curve(scgf, x_grid)
        seed = trace.seed

    witness = convexity_violation(curve)
    notes = {'convexity_violation': list(witness) if witness else None}
    if witness:
        logger.info("midpoint convexity fails at x = %s", witness)

    table = rate_curve_table(curve)
    output = opts.get('output', record=False)
    emit_csv(table, output, _metadata(opts, curve_metadata(curve)))
    outputs = [output]
    excel = opts.get('excel', record=False)
    if excel:
        export_workbook({'rate_curve': table}, _metadata(opts, curve_metadata(curve)), excel)
        outputs.append(excel)
    return _finish(opts, argv, seed, outputs, notes)


def _checkpoints(opts: Options, n_max: int) -> List[int]:
    checkpoints = opts.get('checkpoints', _int_list)
    if checkpoints is None:
        checkpoints = sorted({max(1, round(n_max * k / 100)) for k in range(1, 101)})
        opts.used['checkpoints'] = checkpoints
    return checkpoints


def cmd_experiment(opts: Options, argv: List[str]) -> int:
    mode = opts.get('mode')
    family = opts.get('family', str, required=True)
    estimator = _estimator_spec(opts, opts.get('estimator', str, required=True))
    seed = opts.seed()
    output = opts.get('output', record=False)
    excel = opts.get('excel', record=False)
    notes: Dict[str, Any] = {}

    if mode == 'convergence':
        n_max = opts.get('n_max', int, required=True)
        cfg = ConvergenceConfig(
            process=_process_spec(opts, family, n_max, seed),
            estimator=estimator,
            n_max=n_max,
            checkpoints=tuple(_checkpoints(opts, n_max)),
            seed=seed,
        )
        table = convergence_table(run_convergence(cfg))
        meta = _metadata(opts)
        sheet = 'convergence'
    else:
        n_list = opts.get('n_list', _int_list)
        if not n_list:
            raise ParameterError("--n-list must hold at least one sample size")
        cfg = McLdpConfig(
            process=_process_spec(opts, family, max(n_list), seed),
            estimator=estimator,
            m=opts.get('m', int),
            n_list=tuple(n_list),
            x_list=tuple(opts.get('x_list', _float_list)),
            base_seed=seed,
            theta_star_ref=opts.get('theta_star_ref', float),
            workers=opts.get('workers', int, record=False),
        )
        result = run_mc_ldp(cfg, progress=bool(opts.get('progress', record=False)))
        table = mc_ldp_table(result)
        notes['insufficient'] = {str(n): c for n, c in result.insufficient.items()}
        notes['seeds'] = result.seeds
        meta = _metadata(opts, {'theta_star_ref': result.theta_star_ref,
                                'seed_first': result.seeds['first'],
                                'seed_last': result.seeds['last']})
        sheet = 'mc_ldp'

    emit_csv(table, output, meta)
    outputs = [output]
    if excel:
        export_workbook({sheet: table}, meta, excel)
        outputs.append(excel)
    return _finish(opts, argv, seed, outputs, notes)


def cmd_compare(opts: Options, argv: List[str]) -> int:
    trace = load_trace(opts.get('input', str, required=True), TraceKind.INCREMENTS)
    comparison = compare_estimators(
        trace,
        B=opts.get('B', int),
        states=opts.get('states', _float_list),
        theta_star_ref=opts.get('theta_star_ref', float),
        w0=opts.get('w0', float),
    )
    output = opts.get('output', record=False)
    emit_csv(comparison_table(comparison), output, _metadata(opts))
    return _finish(opts, argv, trace.seed, [output])


# ============================================================================
# ENTRY POINT
# ============================================================================

_AMBIENT_KEYS = ('command', 'handler', 'config', 'log_level')


# list-valued options whose first entry may be negative
_LIST_OPTIONS = frozenset({'--states', '--f', '--x-grid', '--x-list', '--scgf-grid'})


def _attach_list_values(argv: List[str]) -> List[str]:
    """Rewrite `--states -1,1` as `--states=-1,1` so argparse does not read -1,1 as a flag."""
    joined: List[str] = []
    tokens = iter(argv)
    for token in tokens:
        if token in _LIST_OPTIONS:
            value = next(tokens, None)
            if value is None:
                joined.append(token)
            elif value[:1] == '-' and (value[1:2].isdigit() or value[1:2] == '.'):
                joined.append(f"{token}={value}")
            else:
                joined.extend([token, value])
        else:
            joined.append(token)
    return joined


def load_run_options(path: Optional[str]) -> Dict[str, Any]:
    """--config options: a flat JSON mapping, or the parameters of a saved run manifest."""
    options = config.load_config_file(path)
    if isinstance(options.get('parameters'), dict):
        return config.normalize_option_keys(load_manifest(path).parameters)
    return options


def dispatch(argv: Optional[List[str]] = None) -> int:
    """Parse argv, run one subcommand and return its exit code."""
    argv = _attach_list_values(list(sys.argv[1:] if argv is None else argv))
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        sys.stderr.write(e.usage)
        sys.stderr.write(f"{PROG}: error: {e}\n")
        return EXIT_PARAMETER
    except SystemExit as e:  # --help and --version
        return int(e.code or 0)

    try:
        config.setup_logging(args.log_level or "WARNING")
        flags = {k: v for k, v in vars(args).items() if k not in _AMBIENT_KEYS}
        file_options = load_run_options(args.config)
        opts = Options(config.merge_options(flags, file_options, DEFAULTS))
        return args.handler(opts, argv)
    except LoynesError as e:
        logger.debug("command failed", exc_info=True)
        sys.stderr.write(f"{PROG}: error: {e}\n")
        return exit_code_for(e)
    except OSError as e:
        sys.stderr.write(f"{PROG}: error: {e}\n")
        return EXIT_DATA


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
