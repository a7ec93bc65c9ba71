"""
Single steps and fixed-step integration for every catalog method.

Stage j of an MQ method evaluates f at

    t + c_j·h,  (1 + ε_j²(c_j·h)²/2)·(u + h·Σ a_jk·K_k)

where all ε_j² of a step come from the state at the start of the step. Classical methods and
fallback steps skip the scaling altogether, so they follow the exact arithmetic of the plain
Runge-Kutta step.
"""
import csv
import dataclasses
import io
import logging
from typing import List, Optional, Tuple

import numpy as np

from .errors import DomainError, IntegrationAborted
from .methods import MethodSpec
from .problem import OdeProblem
from .shape import ShapeOverride, ShapeResult, ShapeStatus, compute_shape


LOG = logging.getLogger(__name__)

#: Threshold of max|ε²|·h² above which integrate warns that ε is not bounded.
EPS_MONITOR_LIMIT = 10.0


@dataclasses.dataclass(frozen=True, eq=False)
class StepRecord:
    """
    One step from (t, u) to (t + h, u_next).

    @ivar stage_values: K_1, ..., K_s; K_1 = f(t, u).
    """
    t: float
    u: np.ndarray
    h: float
    shape: ShapeResult
    stage_values: Tuple[np.ndarray, ...]
    u_next: np.ndarray


@dataclasses.dataclass(eq=False)
class Trajectory:
    """
    Result of integrate: the step records and the run monitors.

    @ivar max_eps_h2: max |ε_j²|·h² over all steps and stages.
    @ivar fallback_count: Number of MQ steps that reverted to the classical step.
    @ivar aborted: True if a step left the domain; records then stop before t_end.
    """
    problem: str
    method: str
    n: int
    t0: float
    u0: np.ndarray
    h: float
    records: List[StepRecord] = dataclasses.field(default_factory=list)
    max_eps_h2: float = 0.0
    fallback_count: int = 0
    aborted: bool = False

    @property
    def final_u(self) -> np.ndarray:
        return self.records[-1].u_next if self.records else self.u0

    @property
    def final_t(self) -> float:
        return self.records[-1].t + self.records[-1].h if self.records else self.t0

    @property
    def monitors(self) -> dict:
        return {'max_eps_h2': self.max_eps_h2, 'fallback_count': self.fallback_count}

    def times(self) -> np.ndarray:
        """
        Nodes t_0, ..., t_k of the computed part of the run.
        """
        return self.t0 + self.h * np.arange(len(self.records) + 1)

    def states(self) -> np.ndarray:
        """
        States at the nodes as a (k+1)×dim array.
        """
        return np.array([self.u0] + [r.u_next for r in self.records])

    def __repr__(self):
        return f'<Trajectory({self.method} on {self.problem}, N={self.n}, steps={len(self.records)})>'


def _accumulate(coefficients: np.ndarray, values: List[np.ndarray]) -> np.ndarray:
    total = coefficients[0] * values[0]

    for coefficient, value in zip(coefficients[1:], values[1:]):
        total = total + coefficient * value

    return total


def mq_step(spec: MethodSpec, problem: OdeProblem, t: float, u, h: float, *,
            override: Optional[ShapeOverride] = None, shape: Optional[ShapeResult] = None) -> StepRecord:
    """
    Advance one step of size h from (t, u).

    @param override: ShapeOverride used instead of the closed form.
    @param shape: Precomputed shape parameters; computed from (t, u) when omitted.

    @raise DomainError: If a stage argument is outside of the domain; stage is set, 1-based.
    """
    if not h > 0:
        raise ValueError(f"step size must be positive, got {h}")

    u = np.atleast_1d(np.asarray(u, dtype=float))

    if shape is None:
        shape = compute_shape(spec, problem, t, u, override)

    scaled = not spec.classical and shape.status is not ShapeStatus.FALLBACK_ZERO
    c, a = spec.c, spec.a
    stages: List[np.ndarray] = []

    for j in range(spec.stages):
        if j == 0:
            argument = u
        else:
            argument = u + h * _accumulate(a[j, :j], stages)

            if scaled:
                argument = (1.0 + shape.eps_sq[j - 1] * (c[j] * h) ** 2 / 2) * argument

        stage_t = t + c[j] * h

        try:
            stages.append(problem.rhs(stage_t, argument))
        except DomainError as e:
            raise e.at(stage_t, argument, stage=j + 1) from e.__cause__

    u_next = u + h * _accumulate(spec.w, stages)
    return StepRecord(t, u, h, shape, tuple(stages), u_next)


def integrate(spec: MethodSpec, problem: OdeProblem, n: int, *,
              override: Optional[ShapeOverride] = None) -> Trajectory:
    """
    Integrate problem over [t0, t_end] with n uniform steps.

    @raise IntegrationAborted: If a step leaves the domain. The partial trajectory is attached and
        the DomainError is chained.
    """
    if n < 1:
        raise ValueError(f"number of steps must be positive, got {n}")

    h = (problem.t_end - problem.t0) / n
    trajectory = Trajectory(problem.name, spec.id, n, problem.t0, problem.u0, h)
    u = problem.u0

    for i in range(n):
        t = problem.t0 + i * h

        try:
            record = mq_step(spec, problem, t, u, h, override=override)
        except DomainError as e:
            trajectory.aborted = True
            LOG.info("%s on %s with N=%s aborted at step %s: %s", spec.id, problem.name, n, i, e)
            raise IntegrationAborted(f"{spec.id} on {problem.name} with N={n} aborted at step {i}: {e}",
                                     trajectory) from e

        trajectory.records.append(record)
        trajectory.max_eps_h2 = max(trajectory.max_eps_h2, record.shape.max_abs * h * h)

        if not spec.classical and record.shape.is_fallback:
            trajectory.fallback_count += 1

        u = record.u_next

    if trajectory.max_eps_h2 > EPS_MONITOR_LIMIT:
        LOG.warning("Shape parameters of %s on %s with N=%s are not bounded: max|eps^2|h^2 = %.3g",
                    spec.id, problem.name, n, trajectory.max_eps_h2)

    LOG.debug("%s on %s with N=%s done, %s fallback steps", spec.id, problem.name, n, trajectory.fallback_count)
    return trajectory


def equivalent_iterative_step(spec: MethodSpec, problem: OdeProblem, t: float, u, h: float, *,
                              override: Optional[ShapeOverride] = None) -> np.ndarray:
    """
    Two-stage step written as a predictor and a corrector.

    u⁽¹⁾ = s·(u + a_21·h·f(t, u)) with s = 1 + ε²(c_2h)²/2, then
    u⁺ = (1 − w_1/a_21)·u + (w_1/a_21)·u⁽¹⁾/s + w_2·h·f(t + c_2h, u⁽¹⁾).

    Algebraically identical to mq_step; kept to cross-check it.
    """
    if spec.stages != 2:
        raise ValueError(f"{spec.id} is not a two-stage method")

    a21 = spec.a[1, 0]

    if a21 == 0:
        raise ValueError(f"{spec.id} has a_21 = 0")

    u = np.atleast_1d(np.asarray(u, dtype=float))
    shape = compute_shape(spec, problem, t, u, override)
    eps_sq = shape.eps_sq[0] if not spec.classical and not shape.is_fallback else 0.0
    scale = 1.0 + eps_sq * (spec.c[1] * h) ** 2 / 2

    if np.any(scale == 0):
        raise ValueError(f"singular scaling factor at t={t}")

    predictor = scale * (u + a21 * h * problem.rhs(t, u))
    w1, w2 = spec.w
    return (1 - w1 / a21) * u + (w1 / a21) * predictor / scale + w2 * h * problem.rhs(t + spec.c[1] * h, predictor)


def export_trajectory(trajectory: Trajectory) -> str:
    """
    Serialize a trajectory as CSV: one row per node.

    Row i holds (t_i, u_i) and the shape parameters of the step starting there. For systems the
    columns of ε_2² are eps2_sq_1..eps2_sq_dim. The last row has empty shape columns and status final,
    or aborted if the run stopped early.
    """
    dim = len(trajectory.u0)
    stages = len(trajectory.records[0].stage_values) if trajectory.records else 2

    if dim == 1:
        eps_columns = [f'eps{j}_sq' for j in range(2, stages + 1)]
    else:
        eps_columns = [f'eps2_sq_{k}' for k in range(1, dim + 1)]

    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(['i', 't'] + [f'u_{k}' for k in range(1, dim + 1)] + eps_columns + ['status'])

    for i, record in enumerate(trajectory.records):
        eps = np.ravel(record.shape.eps_sq)
        writer.writerow([i, _number(record.t)] + [_number(x) for x in record.u] + [_number(x) for x in eps]
                        + [record.shape.status.value])

    last = len(trajectory.records)
    writer.writerow([last, _number(trajectory.final_t)] + [_number(x) for x in trajectory.final_u]
                    + [''] * len(eps_columns) + ['aborted' if trajectory.aborted else 'final'])
    return buffer.getvalue()


def _number(x) -> str:
    return f'{float(x):.17g}'
