"""
Command line front end.

    mqrk converge --method mq-rk2 --problem eg1 --steps 20,40,80,160,320
    mqrk stability --method mq-rk4-c2-plus --window -6:2:-4.5:4.5 --out region.csv

Exit codes: 0 on success, 1 if an integration left the domain (partial output is still written and
marked aborted), 2 on usage errors.
"""
import argparse
import json
import logging
import pathlib
import sys
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from . import harness
from .__about__ import __version__
from .config import FORMATS, ChainConfig, CliConfig
from .errors import DomainError, IntegrationAborted, UsageError
from .methods import describe, get_method, method_ids
from .shape import compute_shape
from .stability import rasterize_region, real_stability_interval, region_csv, stability_polynomial
from .stepper import export_trajectory, integrate


LOG = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ABORTED = 1
EXIT_USAGE = 2

#: Energy runs use this step size unless --h is given.
DEFAULT_ENERGY_H = 0.06

#: Flags whose value may start with a minus sign, e.g. --window -6:2:-4.5:4.5.
_SIGNED_FLAGS = ('--window', '--u', '--t', '--hs')

_REQUIRED: Dict[str, Sequence[str]] = {
    'solve': ('method', 'problem'),
    'converge': ('method', 'problem'),
    'compare': ('problem',),
    'stability': ('method',),
    'shape': ('method', 'problem'),
    'local-order': ('method', 'problem'),
    'energy': ('method',),
}

#: Commands that run the stepper or the shape formulas on a problem.
_INTEGRATING = ('solve', 'converge', 'compare', 'shape', 'local-order', 'energy')


def _id_list(value: str) -> List[str]:
    return [item.strip() for item in value.split(',') if item.strip()]


def _attach_signed_values(argv: Sequence[str]) -> List[str]:
    result = []
    it = iter(argv)

    for arg in it:
        if arg in _SIGNED_FLAGS:
            value = next(it, None)
            result.append(arg if value is None else f'{arg}={value}')
        else:
            result.append(arg)

    return result


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument('-v', '--verbose', action='count', help="More logging; repeat for debug output")
    common.add_argument('--config', dest='config_file', metavar='FILE',
                        help="JSON file with option values; flags take precedence")
    common.add_argument('--out', metavar='PATH', help=CliConfig.out.doc)
    common.add_argument('--format', choices=FORMATS, help=CliConfig.format.doc)
    common.add_argument('--threads', type=int, metavar='N', help=CliConfig.threads.doc)

    run_flags = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    run_flags.add_argument('--method', metavar='ID', help=CliConfig.method.doc)
    run_flags.add_argument('--problem', metavar='ID', help=CliConfig.problem.doc)

    parser = argparse.ArgumentParser(prog='mqrk', description="MQ-RBF Runge-Kutta methods and benchmarks.")
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    commands = parser.add_subparsers(dest='command', metavar='COMMAND')
    commands.required = True

    commands.add_parser('list-methods', parents=[common], help="List the method catalog")

    p = commands.add_parser('solve', parents=[common, run_flags], help="Integrate once and write the trajectory")
    p.add_argument('--steps', metavar='N', help="Number of steps")
    p.add_argument('--h', type=float, help=CliConfig.h.doc)

    p = commands.add_parser('converge', parents=[common, run_flags], help="Convergence table of one method")
    p.add_argument('--steps', metavar='N,N,...', help=CliConfig.steps.doc)

    p = commands.add_parser('compare', parents=[common, run_flags], help="Convergence tables side by side")
    p.add_argument('--methods', type=_id_list, metavar='ID,ID,...', help=CliConfig.methods.doc)
    p.add_argument('--steps', metavar='N,N,...', help=CliConfig.steps.doc)

    p = commands.add_parser('stability', parents=[common], help="Rasterize the stability region")
    p.add_argument('--method', metavar='ID', help=CliConfig.method.doc)
    p.add_argument('--window', metavar='RE0:RE1:IM0:IM1', help=CliConfig.window.doc)
    p.add_argument('--step', type=float, help=CliConfig.step.doc)

    p = commands.add_parser('shape', parents=[common, run_flags], help="Shape parameters at one state")
    p.add_argument('--t', type=float, help=CliConfig.t.doc)
    p.add_argument('--u', metavar='X,X,...', help=CliConfig.u.doc)

    p = commands.add_parser('local-order', parents=[common, run_flags], help="Slope of the one-step error")
    p.add_argument('--t', type=float, help=CliConfig.t.doc)
    p.add_argument('--u', metavar='X,X,...', help=CliConfig.u.doc)
    p.add_argument('--hs', metavar='H,H,... | 2^a..2^b', help=CliConfig.hs.doc)

    p = commands.add_parser('energy', parents=[common, run_flags], help="Duffing energy history")
    p.add_argument('--h', type=float, help=CliConfig.h.doc)

    return parser


def validate(config: CliConfig) -> None:
    """
    @raise UsageError: If an option is missing or the options name something the command cannot run.
    """
    missing = [name for name in _REQUIRED.get(config.command, ()) if config[name] is None]

    if config.command == 'compare' and not (config.method or config.methods):
        missing.append('methods')

    if missing:
        raise UsageError(f"{config.command}: missing --{', --'.join(missing)}")

    known_methods = method_ids()

    for method_id in ([config.method] if config.method else []) + list(config.methods or ()):
        if method_id not in known_methods:
            raise UsageError(f"--method: unknown method {method_id!r}; expected one of: {', '.join(known_methods)}")

    if config.problem is not None and config.problem not in harness.problem_ids():
        raise UsageError(f"--problem: unknown problem {config.problem!r}; "
                         f"expected one of: {', '.join(harness.problem_ids())}")

    if config.command == 'energy' and config.problem not in (None, 'eg5'):
        raise UsageError(f"--problem: energy is defined for eg5, got {config.problem!r}")

    problem_id = config.problem or ('eg5' if config.command == 'energy' else None)

    if config.command in _INTEGRATING and problem_id is not None:
        problem = harness.get_problem(problem_id)

        for method_id in ([config.method] if config.method else []) + list(config.methods or ()):
            spec = get_method(method_id)

            if problem.dim > 1 and spec.stages > 2 and not spec.classical:
                raise UsageError(f"--method: {method_id} supports scalar problems only, {problem.name} has "
                                 f"{problem.dim} components")

    if config.steps and config.command in ('converge', 'compare') and config.steps != sorted(set(config.steps)):
        raise UsageError(f"--steps: step counts must be strictly increasing, got {config.steps}")

    if config.hs is not None and len(config.hs) < 2:
        raise UsageError(f"--hs: at least two step sizes are required, got {len(config.hs)}")

    if config.h is not None and not config.h > 0:
        raise UsageError(f"--h: step size must be positive, got {config.h}")

    if not config.step > 0:
        raise UsageError(f"--step: grid step must be positive, got {config.step}")

    if config.threads < 0:
        raise UsageError(f"--threads: must not be negative, got {config.threads}")


def parse_args(argv: Optional[Sequence[str]] = None) -> CliConfig:
    """
    Parse the command line into a validated config.

    Options of a --config file fill in whatever the flags leave unset. Usage errors exit with code 2.
    """
    parser = build_parser()
    namespace = vars(parser.parse_args(_attach_signed_values(sys.argv[1:] if argv is None else argv)))
    config_file = namespace.pop('config_file', None)

    try:
        flags = CliConfig()

        for name, value in namespace.items():
            flags[name] = value

        maps = [flags] + ([CliConfig.from_file(config_file)] if config_file else [])
        config = ChainConfig(*maps).flatten()
        validate(config)
    except (UsageError, TypeError) as e:
        parser.error(str(e))

    return config


def configure_logging(verbose: int) -> None:
    level = logging.WARNING if verbose <= 0 else logging.INFO if verbose == 1 else logging.DEBUG
    logging.basicConfig(stream=sys.stderr, level=level, format='%(levelname)s %(name)s: %(message)s')


def write_output(text: str, out: Optional[pathlib.Path]) -> None:
    """
    Write text to out or stdout, UTF-8 with LF line endings.
    """
    if out is None:
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        with open(out, 'w', encoding='utf-8', newline='\n') as f:
            f.write(text)

        LOG.info("Wrote %s", out)


#{ Commands

def _list_methods(config: CliConfig) -> int:
    lines = ['id\tstages\torder\tratios'] + [describe(get_method(m)) for m in method_ids()]
    write_output('\n'.join(lines) + '\n', config.out)
    return EXIT_OK


def _solve(config: CliConfig) -> int:
    spec = get_method(config.method)
    problem = harness.get_problem(config.problem)

    if config.steps:
        n = config.steps[0]
    elif config.h is not None:
        n = harness.energy_steps(config.h, problem.name)
    else:
        n = harness.default_steps(problem.name)[0]

    try:
        trajectory = integrate(spec, problem, n, override=harness.override_for(spec.id, problem.name))
    except IntegrationAborted as e:
        LOG.error("%s", e)
        write_output(export_trajectory(e.trajectory), config.out)
        return EXIT_ABORTED

    LOG.info("%s on %s with N=%s: error %.3e at t=%s, %s", spec.id, problem.name, n,
             harness.global_error(trajectory, problem), problem.t_end, trajectory.monitors)
    write_output(export_trajectory(trajectory), config.out)
    return EXIT_OK


def _converge(config: CliConfig) -> int:
    report, = harness.sweep_convergence([config.method], config.problem, config.steps, config=config)

    if report.aborted:
        LOG.error("%s", report.detail)

    write_output(harness.emit_report(report, config.format), config.out)
    return EXIT_ABORTED if report.aborted else EXIT_OK


def _compare(config: CliConfig) -> int:
    methods = config.methods or harness.with_counterparts([config.method])
    reports = harness.sweep_convergence(methods, config.problem, config.steps, config=config)

    for report in reports:
        if report.aborted:
            LOG.error("%s", report.detail)

    write_output(harness.emit_comparison(reports, config.format), config.out)
    return EXIT_ABORTED if any(r.aborted for r in reports) else EXIT_OK


def _stability(config: CliConfig) -> int:
    poly = stability_polynomial(get_method(config.method))
    endpoint = real_stability_interval(poly)
    LOG.info("%s: real stability interval [%.6f, 0]", config.method, endpoint)
    window = config.window
    grid = rasterize_region(poly, window[:2], window[2:], config.step)
    write_output(region_csv(grid), config.out)

    if config.out is not None:
        sys.stdout.write(f'{config.method},{endpoint:.6f}\n')

    return EXIT_OK


def _state(config: CliConfig):
    problem = harness.get_problem(config.problem)
    t = problem.t0 if config.t is None else config.t
    u = problem.exact_at(t) if config.u is None else np.asarray(config.u, dtype=float)

    if u.shape != (problem.dim,):
        raise UsageError(f"--u: {problem.name} has {problem.dim} components, got {u.size}")

    return problem, t, u


def _shape(config: CliConfig) -> int:
    spec = get_method(config.method)
    problem, t, u = _state(config)
    result = compute_shape(spec, problem, t, u, harness.override_for(spec.id, problem.name))
    eps_sq = result.eps_sq.reshape(-1, 1) if problem.dim == 1 else result.eps_sq

    if config.format == 'json':
        payload = {
            'method': spec.id,
            'problem': problem.name,
            't': t,
            'u': u.tolist(),
            'status': result.status.value,
            'eps_sq': result.eps_sq.tolist(),
            'reason': result.diag.reason,
        }
        text = json.dumps(payload, indent=2) + '\n'
    else:
        columns = ['eps_sq'] if problem.dim == 1 else [f'eps_sq_{k + 1}' for k in range(problem.dim)]
        lines = [','.join(['stage'] + columns)]
        lines.extend(','.join([str(j + 2)] + [f'{x:.17g}' for x in row]) for j, row in enumerate(eps_sq))
        lines.append(f'# status: {result.status.value}')
        text = '\n'.join(lines) + '\n'

    write_output(text, config.out)
    return EXIT_OK


def _local_order(config: CliConfig) -> int:
    problem, t, u = _state(config)
    hs = config.hs or harness.probe_steps(config.method)

    try:
        slope = harness.local_order_probe(config.method, problem.name, t, hs, u=u)
    except DomainError as e:
        LOG.error("%s", e)
        return EXIT_ABORTED

    write_output(f'method,problem,slope\n{config.method},{problem.name},{slope:.4f}\n', config.out)
    return EXIT_OK


def _energy(config: CliConfig) -> int:
    spec = get_method(config.method)
    problem = harness.get_problem(config.problem or 'eg5')
    n = harness.energy_steps(config.h or DEFAULT_ENERGY_H, problem.name)

    try:
        trajectory = integrate(spec, problem, n)
    except IntegrationAborted as e:
        LOG.error("%s", e)
        write_output(harness.emit_energy(harness.duffing_energy(e.trajectory)), config.out)
        return EXIT_ABORTED

    LOG.info("%s with N=%s: max energy drift %.6g", spec.id, n, harness.energy_drift(trajectory))
    write_output(harness.emit_energy(harness.duffing_energy(trajectory)), config.out)
    return EXIT_OK


_COMMANDS: Dict[str, Callable[[CliConfig], int]] = {
    'list-methods': _list_methods,
    'solve': _solve,
    'converge': _converge,
    'compare': _compare,
    'stability': _stability,
    'shape': _shape,
    'local-order': _local_order,
    'energy': _energy,
}

#}


def run(config: CliConfig) -> int:
    """
    Execute the command of a validated config and return the exit code.
    """
    try:
        return _COMMANDS[config.command](config)
    except UsageError as e:
        LOG.error("%s", e)
        return EXIT_USAGE
    except (DomainError, IntegrationAborted) as e:
        LOG.error("%s", e)
        return EXIT_ABORTED


def main(argv: Optional[Sequence[str]] = None) -> int:
    config = parse_args(argv)
    configure_logging(config.verbose)
    return run(config)
