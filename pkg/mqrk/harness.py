"""
Benchmark problems, convergence studies and report emitters.

The registry holds five initial value problems with known solutions:

  - eg1: u' = -u², u(0) = 1 on [0, 1]
  - eg2: u' = -4t³u², u(-10) = 1/10001 on [-10, 0] (stiff)
  - eg3: u' = (2t² - u)/(t²u - t), u(1) = 2 on [1, 2] (stiff)
  - eg4: a linear 2×2 system with e^t forcing on [0, 5]
  - eg5: the Duffing oscillator as a first-order system (p, q) on [0, 20]
"""
import dataclasses
import enum
import functools
import io
import json
import logging
import math
import time
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import jet
from .app import run_sweep
from .elliptic import jacobi_sn_cn_dn
from .errors import IntegrationAborted, MqrkError
from .methods import classical_counterpart, get_method
from .problem import OdeProblem
from .shape import ShapeOverride
from .stepper import Trajectory, integrate, mq_step


LOG = logging.getLogger(__name__)

#: Version of the JSON report layout.
SCHEMA = 1

#: Duffing parameters of eg5.
DUFFING_K = 0.03
DUFFING_OMEGA = 10.0


#{ Problems

def _eg1(t, u):
    return -u ** 2


def _eg2(t, u):
    return -4 * t ** 3 * u ** 2


def _eg3(t, u):
    return (2 * t ** 2 - u) / (t ** 2 * u - t)


def _eg4(t, u):
    return (jet.exp(t) - 5 * u[0] + 3 * u[1], -3 * u[0] + u[1])


def _eg4_exact(t):
    decay = math.exp(-2 * t)
    return ((1 - 2 * t) * decay, (1 / 3 - 2 * t) * decay - math.exp(t) / 3)


def _eg5(t, u):
    p, q = u[0], u[1]
    return (-DUFFING_OMEGA ** 2 * q + DUFFING_K ** 2 * (2 * q ** 3 - q), p)


def _eg5_exact(t):
    sn, cn, dn = jacobi_sn_cn_dn(DUFFING_OMEGA * t, DUFFING_K / DUFFING_OMEGA)
    return (DUFFING_OMEGA * float(cn) * float(dn), float(sn))


def _build_registry() -> Dict[str, OdeProblem]:
    problems = [
        OdeProblem('eg1', _eg1, 0.0, [1.0], 1.0, exact=lambda t: 1 / (t + 1),
                   description="u' = -u^2, u(0) = 1"),
        OdeProblem('eg2', _eg2, -10.0, [1 / 10001], 0.0, exact=lambda t: 1 / (t ** 4 + 1),
                   description="u' = -4t^3u^2, u(-10) = 1/10001"),
        OdeProblem('eg3', _eg3, 1.0, [2.0], 2.0, exact=lambda t: 1 / t + math.sqrt(1 / t ** 2 + 4 * t - 4),
                   description="u' = (2t^2 - u)/(t^2u - t), u(1) = 2"),
        OdeProblem('eg4', _eg4, 0.0, [1.0, 0.0], 5.0, exact=_eg4_exact,
                   description="u1' = e^t - 5u1 + 3u2, u2' = -3u1 + u2, u(0) = (1, 0)"),
        OdeProblem('eg5', _eg5, 0.0, [DUFFING_OMEGA, 0.0], 20.0, exact=_eg5_exact,
                   description="Duffing oscillator (p, q), k = 0.03, omega = 10"),
    ]
    return {p.name: p for p in problems}


_REGISTRY = _build_registry()


def registry() -> List[OdeProblem]:
    return list(_REGISTRY.values())


def problem_ids() -> List[str]:
    return list(_REGISTRY)


def get_problem(problem_id: str) -> OdeProblem:
    """
    @raise KeyError: If problem_id is unknown; the message lists valid ids.
    """
    try:
        return _REGISTRY[problem_id]
    except KeyError:
        raise KeyError(f"unknown problem {problem_id!r}; expected one of: {', '.join(_REGISTRY)}") from None


class ReferenceKind(str, enum.Enum):
    CLOSED_FORM = 'closed_form'
    JACOBI_SN = 'jacobi_sn'
    FINE_INTEGRATION = 'fine_integration'


@dataclasses.dataclass(frozen=True)
class ReferenceSolution:
    kind: ReferenceKind
    evaluator: Callable[[float], np.ndarray]


def reference(problem_id: str) -> ReferenceSolution:
    problem = get_problem(problem_id)
    kind = ReferenceKind.JACOBI_SN if problem_id == 'eg5' else ReferenceKind.CLOSED_FORM
    return ReferenceSolution(kind, problem.exact_at)


def fine_integration(problem: OdeProblem, method_id: str = 'rk4-c2', h: float = 1e-4) -> ReferenceSolution:
    """
    Reference solution from integrating problem with a small step.

    The evaluator integrates from t0 to the requested time with steps of at most h.
    """
    spec = get_method(method_id)

    def evaluator(t: float) -> np.ndarray:
        if t == problem.t0:
            return problem.u0

        n = max(1, math.ceil((t - problem.t0) / h))
        return integrate(spec, problem.replace(t_end=t, exact=None), n).final_u

    return ReferenceSolution(ReferenceKind.FINE_INTEGRATION, evaluator)


def _b1_eg1_override(t, u, table):
    return 450 * float(u[0]) ** 2


#: (method, problem) -> ShapeOverride applied by the convergence runs
OVERRIDES: Dict[Tuple[str, str], ShapeOverride] = {
    ('mq-rk3-b1', 'eg1'): _b1_eg1_override,
}


def override_for(method_id: str, problem_id: str) -> Optional[ShapeOverride]:
    return OVERRIDES.get((method_id, problem_id))


_DEFAULT_STEPS = {
    'eg1': (20, 5),
    'eg2': (200, 6),
    'eg3': (20, 5),
    'eg4': (20, 5),
    'eg5': (640, 5),
}


def default_steps(problem_id: str) -> List[int]:
    """
    Doubling sequence of step counts used for problem_id's tables.
    """
    first, count = _DEFAULT_STEPS.get(problem_id, (20, 5))
    return [first * 2 ** i for i in range(count)]

#}


#{ Convergence

@dataclasses.dataclass(frozen=True)
class ConvergenceRow:
    n: int
    error: float
    order: Optional[float] = None


@dataclasses.dataclass
class ConvergenceReport:
    """
    Errors at t_end for a sequence of step counts.

    @ivar status: ok, or aborted if a run left the domain; rows then hold the completed runs.
    """
    problem: str
    method: str
    rows: List[ConvergenceRow] = dataclasses.field(default_factory=list)
    wall_time: float = 0.0
    status: str = 'ok'
    detail: str = ''

    @property
    def aborted(self) -> bool:
        return self.status == 'aborted'

    def to_dict(self) -> dict:
        return {
            'schema': SCHEMA,
            'problem': self.problem,
            'method': self.method,
            'status': self.status,
            'rows': [{'N': r.n, 'error': _round_error(r.error), 'order': _round_order(r.order)} for r in self.rows],
            'wall_time_s': round(self.wall_time, 6),
        }


def observed_order(previous: ConvergenceRow, error: float, n: int) -> Optional[float]:
    """
    log(e_prev/e)/log(n/n_prev); log₂ of the error ratio for doubling.
    """
    if previous.error <= 0 or error <= 0:
        return None

    return math.log(previous.error / error) / math.log(n / previous.n)


def global_error(trajectory: Trajectory, problem: OdeProblem) -> float:
    """
    Distance between the final state and the exact solution at t_end; Euclidean for systems.
    """
    return float(np.linalg.norm(trajectory.final_u - problem.exact_at(problem.t_end)))


def run_single(method_id: str, problem_id: str, n: int, *, problem: Optional[OdeProblem] = None) -> float:
    """
    Integrate one (method, problem, N) combination and return its global error.

    @raise IntegrationAborted: If a step leaves the domain.
    """
    spec = get_method(method_id)
    problem = problem or get_problem(problem_id)
    trajectory = integrate(spec, problem, n, override=override_for(method_id, problem_id))
    return global_error(trajectory, problem)


def assemble_report(method_id: str, problem_id: str, results: Sequence[Tuple[int, float]],
                    wall_time: float = 0.0) -> ConvergenceReport:
    report = ConvergenceReport(problem_id, method_id, wall_time=wall_time)

    for n, error in results:
        order = observed_order(report.rows[-1], error, n) if report.rows else None
        report.rows.append(ConvergenceRow(n, error, order))

    return report


def validate_steps(ns: Sequence[int]) -> List[int]:
    ns = [int(n) for n in ns]

    if not ns:
        raise ValueError("at least one step count is required")

    if any(n < 1 for n in ns):
        raise ValueError(f"step counts must be positive: {ns}")

    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise ValueError(f"step counts must be strictly increasing: {ns}")

    return ns


def run_convergence(method_id: str, problem_id: str, ns: Optional[Sequence[int]] = None, *,
                    partial: bool = False) -> ConvergenceReport:
    """
    Integrate with each N in ns and tabulate the errors and observed orders.

    @param partial: If True, an aborted run ends the study and the report is returned with status
        aborted; otherwise IntegrationAborted propagates.
    """
    ns = validate_steps(ns if ns is not None else default_steps(problem_id))
    problem = get_problem(problem_id)
    get_method(method_id)
    results = []
    started = time.perf_counter()
    detail = ''

    for n in ns:
        try:
            results.append((n, run_single(method_id, problem_id, n, problem=problem)))
        except IntegrationAborted as e:
            if not partial:
                raise

            detail = str(e)
            break

    report = assemble_report(method_id, problem_id, results, time.perf_counter() - started)

    if detail:
        report.status, report.detail = 'aborted', detail

    LOG.info("%s on %s: %s rows in %.3fs", method_id, problem_id, len(report.rows), report.wall_time)
    return report


def run_comparison(problem_id: str, method_ids: Sequence[str], ns: Optional[Sequence[int]] = None, *,
                   partial: bool = False) -> List[ConvergenceReport]:
    """
    Convergence studies of several methods on one problem, e.g. a classical method and its MQ variant.
    """
    return [run_convergence(m, problem_id, ns, partial=partial) for m in method_ids]


def sweep_convergence(method_ids: Sequence[str], problem_id: str, ns: Optional[Sequence[int]] = None, *,
                      config=None, partial: bool = True) -> List[ConvergenceReport]:
    """
    Same reports as run_comparison, with every (method, N) integration run concurrently.

    @param config: Config whose threads option sizes the worker pool.
    """
    ns = validate_steps(ns if ns is not None else default_steps(problem_id))
    problem = get_problem(problem_id)
    method_ids = list(method_ids)

    for method_id in method_ids:
        get_method(method_id)

    jobs = [functools.partial(run_single, m, problem_id, n, problem=problem) for m in method_ids for n in ns]
    started = time.perf_counter()
    outcomes = run_sweep(jobs, config=config)
    wall_time = time.perf_counter() - started
    reports = []

    for i, method_id in enumerate(method_ids):
        results = []
        detail = ''

        for n, outcome in zip(ns, outcomes[i * len(ns):(i + 1) * len(ns)]):
            if isinstance(outcome, IntegrationAborted) and partial:
                detail = str(outcome)
                break
            elif isinstance(outcome, BaseException):
                raise outcome

            results.append((n, outcome))

        report = assemble_report(method_id, problem_id, results, wall_time)

        if detail:
            report.status, report.detail = 'aborted', detail

        reports.append(report)

    LOG.info("Swept %s methods on %s in %.3fs", len(method_ids), problem_id, wall_time)
    return reports


def with_counterparts(method_ids: Sequence[str]) -> List[str]:
    """
    Expand each MQ method into (classical counterpart, method), keeping order and removing duplicates.
    """
    expanded = []

    for method_id in method_ids:
        spec = get_method(method_id)

        for m in (classical_counterpart(spec).id, spec.id):
            if m not in expanded:
                expanded.append(m)

    return expanded

#}


#{ Local order

def local_order_probe(method_id: str, problem_id: str, t: float, hs: Sequence[float], u=None) -> float:
    """
    Least-squares slope of log|local error| against log h over single steps from the exact state.

    @param u: Starting state; the exact solution at t when omitted.
    @raise DomainError: If a step leaves the domain.
    """
    spec = get_method(method_id)
    problem = get_problem(problem_id)
    u = problem.exact_at(t) if u is None else np.atleast_1d(np.asarray(u, dtype=float))
    override = override_for(method_id, problem_id)
    hs = [float(h) for h in hs]

    if len(hs) < 2:
        raise ValueError("at least two step sizes are required")

    errors = []

    for h in hs:
        record = mq_step(spec, problem, t, u, h, override=override)
        errors.append(float(np.linalg.norm(record.u_next - problem.exact_at(t + h))))

    if min(errors) <= 0:
        raise MqrkError(f"local error of {method_id} vanished, the slope is undefined")

    slope, _ = np.polyfit(np.log(hs), np.log(errors), 1)
    return float(slope)


#: Stage count -> exponents of the default probe steps. Smaller steps drown the one-step error in
#: roundoff, larger ones are not yet asymptotic.
PROBE_EXPONENTS: Dict[int, Tuple[int, int]] = {2: (-5, -10), 3: (-4, -8), 4: (-4, -7)}


def probe_steps(method_id: str) -> List[float]:
    """
    Default step sizes of local_order_probe for method_id.
    """
    return doubling_steps(*PROBE_EXPONENTS[get_method(method_id).stages])


def doubling_steps(first_exponent: int, last_exponent: int) -> List[float]:
    """
    [2^first, ..., 2^last] for decreasing exponents, e.g. doubling_steps(-6, -12).
    """
    step = -1 if last_exponent < first_exponent else 1
    return [2.0 ** e for e in range(first_exponent, last_exponent + step, step)]

#}


#{ Duffing energy

def duffing_energy_at(p: float, q: float, k: float = DUFFING_K, omega: float = DUFFING_OMEGA) -> float:
    """
    First integral p²/2 + ω²q²/2 + k²(q²/2 − q⁴/2) of the Duffing oscillator.
    """
    return p * p / 2 + omega ** 2 * q * q / 2 + k ** 2 * (q * q / 2 - q ** 4 / 2)


def duffing_energy(trajectory: Trajectory) -> List[Tuple[float, float]]:
    """
    Energy at every node of an eg5 trajectory.
    """
    if trajectory.problem != 'eg5':
        raise ValueError(f"energy is defined for eg5, got {trajectory.problem}")

    return [(float(t), duffing_energy_at(*u)) for t, u in zip(trajectory.times(), trajectory.states())]


def energy_drift(trajectory: Trajectory) -> float:
    """
    max |E(t) − E(t0)| over the run.
    """
    history = duffing_energy(trajectory)
    initial = history[0][1]
    return max(abs(e - initial) for _, e in history)


def energy_steps(h: float, problem_id: str = 'eg5') -> int:
    """
    Number of uniform steps closest to step size h.
    """
    problem = get_problem(problem_id)
    return max(1, round((problem.t_end - problem.t0) / h))

#}


#{ Emitters

FORMATS = ('csv', 'markdown', 'json')


def _round_error(error: float) -> float:
    return float(f'{error:.2e}')


def _round_order(order: Optional[float]) -> Optional[float]:
    return None if order is None else round(order, 4)


def _format_error(error: float) -> str:
    return f'{error:.2e}'


def _format_order(order: Optional[float]) -> str:
    return '' if order is None else f'{order:.4f}'


def emit_report(report: ConvergenceReport, fmt: str = 'csv') -> str:
    """
    Serialize a report as csv, markdown or json.

    Errors are written with 3 significant digits, orders with 4 decimals. An aborted report ends with
    a status: aborted marker.
    """
    if fmt == 'json':
        return json.dumps(report.to_dict(), indent=2) + '\n'

    lines = []

    if fmt == 'csv':
        lines.append('N,error,order')
        lines.extend(f'{r.n},{_format_error(r.error)},{_format_order(r.order)}' for r in report.rows)

        if report.aborted:
            lines.append('# status: aborted')
    elif fmt == 'markdown':
        lines.append(f'**{report.method}** on **{report.problem}**')
        lines.append('')
        lines.append('| N | error | order |')
        lines.append('|---:|---:|---:|')
        lines.extend(f'| {r.n} | {_format_error(r.error)} | {_format_order(r.order) or "-"} |' for r in report.rows)

        if report.aborted:
            lines.append('')
            lines.append('status: aborted')
    else:
        raise ValueError(f"unknown format {fmt!r}; expected one of: {', '.join(FORMATS)}")

    return '\n'.join(lines) + '\n'


def emit_comparison(reports: Sequence[ConvergenceReport], fmt: str = 'csv') -> str:
    """
    Serialize several reports on the same problem side by side: one error/order column pair per method.
    """
    if not reports:
        raise ValueError("nothing to compare")

    problems = {r.problem for r in reports}

    if len(problems) != 1:
        raise ValueError(f"reports cover several problems: {', '.join(sorted(problems))}")

    if fmt == 'json':
        payload = {
            'schema': SCHEMA,
            'problem': reports[0].problem,
            'status': 'aborted' if any(r.aborted for r in reports) else 'ok',
            'methods': [r.to_dict() for r in reports],
        }
        return json.dumps(payload, indent=2) + '\n'

    ns = sorted({row.n for r in reports for row in r.rows})
    by_n = [{row.n: row for row in r.rows} for r in reports]
    lines = []

    def cells(n):
        out = []

        for rows in by_n:
            row = rows.get(n)
            out += [_format_error(row.error), _format_order(row.order)] if row else ['', '']

        return out

    if fmt == 'csv':
        header = ['N'] + [f'{r.method} {col}' for r in reports for col in ('error', 'order')]
        lines.append(','.join(header))
        lines.extend(','.join([str(n)] + cells(n)) for n in ns)

        if any(r.aborted for r in reports):
            lines.append('# status: aborted')
    elif fmt == 'markdown':
        lines.append(f'Problem **{reports[0].problem}**')
        lines.append('')
        lines.append('| N | ' + ' | '.join(f'{r.method} error | {r.method} order' for r in reports) + ' |')
        lines.append('|---:|' + '---:|---:|' * len(reports))
        lines.extend('| ' + ' | '.join([str(n)] + [c or '-' for c in cells(n)]) + ' |' for n in ns)

        if any(r.aborted for r in reports):
            lines.append('')
            lines.append('status: aborted')
    else:
        raise ValueError(f"unknown format {fmt!r}; expected one of: {', '.join(FORMATS)}")

    return '\n'.join(lines) + '\n'


def emit_energy(history: Sequence[Tuple[float, float]]) -> str:
    """
    CSV t,E of an energy history.
    """
    buffer = io.StringIO()
    buffer.write('t,E\n')

    for t, e in history:
        buffer.write(f'{t:.17g},{e:.17g}\n')

    return buffer.getvalue()

#}
