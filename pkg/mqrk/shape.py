"""
Per-step shape parameters ε_j² of the MQ methods.

Each MQ variant chooses ε_2² so that the leading term of its local truncation error vanishes; the
remaining ε_j² follow from the fixed ratios κ_j of the method. Singular denominators and quadratics
without real roots fall back to ε ≡ 0, i.e. to the classical method of the same tableau.
"""
import dataclasses
import enum
import logging
import math
from typing import Callable, Dict, NamedTuple, Optional, Tuple

import numpy as np

from .errors import DomainError
from .jet import INDICES
from .methods import MethodSpec, RootChoice, catalog
from .problem import OdeProblem, PartialTable, partials_at, second_derivative


LOG = logging.getLogger(__name__)

#: Relative tolerance of the denominator guard.
TOL_DENOMINATOR = 1e-10

#: Relative tolerance for treating a quadratic coefficient as zero.
TOL_QUADRATIC = 1e-12

S33 = math.sqrt(33.0)

#: (t, u, table) -> ε_2²
ShapeOverride = Callable[[float, np.ndarray, PartialTable], float]


class ShapeStatus(str, enum.Enum):
    OPTIMAL = 'optimal'
    FALLBACK_ZERO = 'fallback_zero'
    OVERRIDE = 'override'


@dataclasses.dataclass(frozen=True)
class ShapeDiagnostics:
    """
    @ivar denominator_magnitude: |denominator| of a closed-form shape formula compared against TOL_DENOMINATOR.
    @ivar leading_coefficient: |α| of a four-stage quadratic compared against TOL_QUADRATIC, or |β| once the
        quadratic degraded to its linear root.
    """
    denominator_magnitude: Optional[float] = None
    discriminant: Optional[float] = None
    root_choice_used: str = 'none'
    fallback_components: Tuple[int, ...] = ()
    reason: str = ''
    leading_coefficient: Optional[float] = None


@dataclasses.dataclass(frozen=True, eq=False)
class ShapeResult:
    """
    ε_2², ..., ε_s² for one step.

    For scalar problems eps_sq has shape (s-1,); for systems (s-1, dim), one value per component.
    """
    eps_sq: np.ndarray
    status: ShapeStatus
    diag: ShapeDiagnostics = ShapeDiagnostics()

    @classmethod
    def zeros(cls, stages: int, dim: int = 1, *, status: ShapeStatus = ShapeStatus.FALLBACK_ZERO,
              diag: ShapeDiagnostics = ShapeDiagnostics()) -> 'ShapeResult':
        shape = (stages - 1,) if dim == 1 else (stages - 1, dim)
        return cls(np.zeros(shape), status, diag)

    @property
    def is_fallback(self) -> bool:
        return self.status is ShapeStatus.FALLBACK_ZERO

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.eps_sq))) if self.eps_sq.size else 0.0

    def __repr__(self):
        return f'<ShapeResult({self.status.value}, eps_sq={self.eps_sq.tolist()})>'


def guard(numerator: float, denominator: float) -> Optional[float]:
    """
    Return numerator/denominator unless the denominator is negligible relative to 1+|numerator|.
    """
    if abs(denominator) <= TOL_DENOMINATOR * (1.0 + abs(numerator)):
        return None

    return numerator / denominator


def _coupled(eps2: float, ratios: np.ndarray) -> np.ndarray:
    return eps2 * ratios


def _ratios(kappa) -> np.ndarray:
    return np.array([1.0] + [float(k) for k in kappa])


def shape_rk2(table: PartialTable, u) -> ShapeResult:
    """
    ε_2² = u''/u, componentwise for systems.
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    upp = second_derivative(None, table)

    if table.dim == 1:
        eps2 = guard(upp[0], u[0])

        if eps2 is None:
            return ShapeResult.zeros(2, diag=ShapeDiagnostics(abs(u[0]), reason='u vanishes'))

        return ShapeResult(np.array([eps2]), ShapeStatus.OPTIMAL, ShapeDiagnostics(abs(u[0])))

    eps_sq = np.zeros(table.dim)
    fallback = []

    for i in range(table.dim):
        value = guard(upp[i], u[i])

        if value is None:
            fallback.append(i)
        else:
            eps_sq[i] = value

    status = ShapeStatus.FALLBACK_ZERO if len(fallback) == table.dim else ShapeStatus.OPTIMAL
    diag = ShapeDiagnostics(float(np.min(np.abs(u))), fallback_components=tuple(fallback))
    return ShapeResult(eps_sq.reshape(1, table.dim), status, diag)


def _rk3_fraction(variant: str, p: PartialTable, u: float) -> Tuple[float, float]:
    f, f_t, f_u = p.f, p.f_t, p.f_u
    f_tt, f_tu, f_uu = p.f_tt, p.f_tu, p.f_uu
    upp = f_t + f_u * f

    if variant == 'b1':
        g = f_uu * f - f_u ** 2 + f_tu
        return g * upp, g * u + f_u * f
    elif variant in ('b2a', 'b2b'):
        r = 3 + S33 if variant == 'b2a' else 3 - S33
        q = 15 + S33 if variant == 'b2a' else 15 - S33
        numerator = 12 * f_u ** 2 * upp + r * (f ** 2 * f_uu - f_tt) * f_u + 2 * r * (f_uu * f + f_tu) * f_t
        denominator = (2 * r * (f * f_uu + f_tu) + q * f_u ** 2) * u + 2 * r * f_u * f
        return numerator, denominator
    elif variant == 'b3a':
        numerator = f_u ** 2 * upp - (f_tu * f + f_tt) * f_u + (f_uu * f + f_tu) * f_t
        denominator = (f_uu * f + f_tu + 2 * f_u ** 2) * u + f_u * f
        return numerator, denominator
    elif variant == 'b3b':
        numerator = 3 * f_u ** 2 * upp + (f_tu * f + f_tt) * f_u - (f_uu * f + f_tu) * f_t
        denominator = (-f_uu * f - f_tu + 2 * f_u ** 2) * u - f_u * f
        return numerator, denominator
    elif variant == 'b4':
        numerator = 12 * f_u ** 2 * upp + p.f_ttt + p.f_uuu * f ** 3 + 3 * (p.f_ttu + p.f_tuu * f) * f
        denominator = 3 * (-f_uu * f - f_tu + 4 * f_u ** 2) * u - 3 * f_u * f
        return numerator, denominator
    else:
        raise ValueError(f"unknown three-stage variant {variant!r}")


#: κ_3 per three-stage variant
RK3_KAPPA: Dict[str, Tuple[float]] = {
    'b1': (-1.0,),
    'b2a': ((-7 - S33) / 4,),
    'b2b': ((-7 + S33) / 4,),
    'b3a': (-1.0,),
    'b3b': (-0.2,),
    'b4': (-1 / 3,),
}

#: (κ_3, κ_4) per four-stage variant
RK4_KAPPA: Dict[str, Tuple[float, float]] = {
    'c1': (-2 / 3, 2 / 11),
    'c2': (-1 / 6, 1 / 10),
}


def shape_rk3(variant: str, table: PartialTable, u, *, kappa=None) -> ShapeResult:
    """
    ε_2² of a three-stage variant (b1, b2a, b2b, b3a, b3b, b4) and ε_3² = κ_3·ε_2².

    @param kappa: Overrides the variant's κ_3; the catalog passes its exact value.
    """
    if table.dim != 1:
        raise ValueError("three-stage shape formulas are defined for scalar problems only")

    u = float(np.atleast_1d(u)[0])
    numerator, denominator = _rk3_fraction(variant, table, u)
    diag = ShapeDiagnostics(abs(denominator))
    eps2 = guard(numerator, denominator)

    if eps2 is None:
        return ShapeResult.zeros(3, diag=dataclasses.replace(diag, reason='singular denominator'))

    return ShapeResult(_coupled(eps2, _ratios(kappa or RK3_KAPPA[variant])), ShapeStatus.OPTIMAL, diag)


class QuadraticRoot(NamedTuple):
    root: Optional[float]
    kind: str  # plus, minus, linear or none
    discriminant: Optional[float] = None


def solve_shape_quadratic(alpha: float, beta: float, gamma: float, choice) -> QuadraticRoot:
    """
    Return the requested real root of αx² + βx + γ = 0.

    plus is the algebraically larger root, minus the smaller. A vanishing α degrades to the linear
    root; a negative discriminant or a vanishing α and β yield root None.
    """
    choice = RootChoice(choice)
    tol = TOL_QUADRATIC * max(abs(alpha), abs(beta), abs(gamma), 1.0)

    if abs(alpha) > tol:
        discriminant = beta * beta - 4 * alpha * gamma

        if discriminant < 0:
            return QuadraticRoot(None, 'none', discriminant)

        s = math.sqrt(discriminant)
        # cancellation-free pair
        q = -0.5 * (beta + math.copysign(s, beta))
        roots = (q / alpha, gamma / q) if q != 0 else (0.0, 0.0)
        root = max(roots) if choice is not RootChoice.MINUS else min(roots)
        return QuadraticRoot(root, choice.value if choice is not RootChoice.NONE else 'plus', discriminant)
    elif abs(beta) > tol:
        return QuadraticRoot(-gamma / beta, 'linear')
    else:
        return QuadraticRoot(None, 'none')


def rk4_coefficients(variant: str, p: PartialTable, u: float) -> Tuple[float, float, float]:
    """
    Return (α, β, γ) of the quadratic whose root is ε_2² for a four-stage variant.
    """
    f, f_t, f_u = p.f, p.f_t, p.f_u
    f_tt, f_tu, f_uu = p.f_tt, p.f_tu, p.f_uu
    f_ttt, f_ttu, f_tuu, f_uuu = p.f_ttt, p.f_ttu, p.f_tuu, p.f_uuu
    f_tttt, f_tttu, f_ttuu, f_tuuu, f_uuuu = p.f_tttt, p.f_tttu, p.f_ttuu, p.f_tuuu, p.f_uuuu
    upp = f_t + f_u * f

    if variant == 'c1':
        alpha = 168 * f_uu * u ** 2
        beta = ((66 * f_ttu + 66 * f_uuu * f ** 2 + 132 * f_tuu * f - 462 * f_tu * f_u - 270 * f_uu * f_t
                 - 732 * f_uu * f_u * f + 330 * f_u ** 3) * u
                + 132 * f ** 2 * f_uu - 402 * f_u ** 2 * f + 132 * f_tu * f - 270 * f_t * f_u)
        gamma = (11 * (f_tttt + f_uuuu * f ** 4 + 4 * f_tttu * f + 4 * f_tuuu * f ** 3 + 6 * f_ttuu * f ** 2)
                 - 44 * (f_ttt * f_u + 3 * f_ttu * f_u * f + 3 * f_u * f_tuu * f ** 2 + f_u * f_uuu * f ** 3)
                 + 330 * f_t * f_tu * f_u + 330 * f_tu * f_u ** 2 * f + 135 * f_t ** 2 * f_uu
                 + 600 * f_t * f_u * f_uu * f + 465 * f_u ** 2 * f_uu * f ** 2 - 330 * f_u ** 3 * upp)
    elif variant == 'c2':
        alpha = 3 * f_uu * u ** 2
        beta = (6 * (f_ttu + f ** 2 * f_uuu + 2 * f_tuu * f - 7 * f_tu * f_u - 7 * f_uu * f_u * f + 5 * f_u ** 3) * u
                + 12 * (f_uu * f ** 2 - f_u ** 2 * f + f_tu * f))
        gamma = (f_tttt + 4 * f_tttu * f + 6 * f_ttuu * f ** 2 + 4 * f_tuuu * f ** 3 + f_uuuu * f ** 4
                 - 4 * (f_ttt + 3 * f_ttu * f + 3 * f_tuu * f ** 2 + f_uuu * f ** 3) * f_u
                 + 18 * f_tt * f_tu + 18 * f_tt * f_uu * f + 18 * f_uu ** 2 * f ** 3 + 36 * f_tu ** 2 * f
                 + 54 * f_tu * f_uu * f ** 2 + 30 * f_uu * f_u ** 2 * f ** 2 + 48 * f_uu * f_t * f_u * f
                 + 48 * f_tu * f_t * f_u + 12 * f_tu * f_u ** 2 * f - 18 * f_tt * f_u ** 2 - 48 * f_u ** 3 * upp)
    else:
        raise ValueError(f"unknown four-stage variant {variant!r}")

    return alpha, beta, gamma


def shape_rk4(variant: str, root_choice, table: PartialTable, u, *, kappa=None) -> ShapeResult:
    """
    ε_2² of a four-stage variant (c1, c2) as a root of its quadratic, then ε_3², ε_4² from κ_3, κ_4.
    """
    if table.dim != 1:
        raise ValueError("four-stage shape formulas are defined for scalar problems only")

    u = float(np.atleast_1d(u)[0])
    alpha, beta, gamma = rk4_coefficients(variant, table, u)
    solution = solve_shape_quadratic(alpha, beta, gamma, root_choice)
    leading = alpha if solution.discriminant is not None else beta
    diag = ShapeDiagnostics(discriminant=solution.discriminant, root_choice_used=solution.kind,
                            leading_coefficient=abs(leading))

    if solution.root is None:
        return ShapeResult.zeros(4, diag=dataclasses.replace(diag, reason='no real root'))

    return ShapeResult(_coupled(solution.root, _ratios(kappa or RK4_KAPPA[variant])), ShapeStatus.OPTIMAL, diag)


def shape_from_table(spec: MethodSpec, table: PartialTable, u) -> ShapeResult:
    """
    Dispatch on the spec's closed form.
    """
    if spec.classical:
        return ShapeResult.zeros(spec.stages, table.dim, status=ShapeStatus.OPTIMAL)
    elif spec.stages == 2:
        return shape_rk2(table, u)
    elif spec.stages == 3:
        return shape_rk3(spec.shape_formula, table, u, kappa=spec.kappa)
    else:
        return shape_rk4(spec.shape_formula, spec.root_choice, table, u, kappa=spec.kappa)


def compute_shape(spec: MethodSpec, problem: OdeProblem, t: float, u, override: Optional[ShapeOverride] = None,
                  *, table: Optional[PartialTable] = None) -> ShapeResult:
    """
    Return the shape parameters of spec for the step starting at (t, u).

    An installed override replaces the closed form for ε_2²; the ratios κ_j still apply.
    A DomainError while obtaining partials becomes a fallback.
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))

    if spec.classical:
        return ShapeResult.zeros(spec.stages, problem.dim, status=ShapeStatus.OPTIMAL)

    if problem.dim > 1 and spec.stages > 2:
        raise ValueError(f"{spec.id} supports scalar problems only")

    try:
        if table is None:
            table = partials_at(problem, t, u)
    except DomainError as e:
        LOG.debug("Partials of %s are singular at t=%s: %s.", problem.name, t, e)
        return ShapeResult.zeros(spec.stages, problem.dim, diag=ShapeDiagnostics(reason=str(e)))

    if override is not None:
        eps2 = float(override(t, u, table))
        eps_sq = eps2 * spec.ratios

        if problem.dim > 1:
            eps_sq = np.outer(eps_sq, np.ones(problem.dim))

        return ShapeResult(eps_sq, ShapeStatus.OVERRIDE)

    result = shape_from_table(spec, table, u)

    if result.is_fallback:
        LOG.debug("%s falls back to the classical step at t=%s: %s.", spec.id, t, result.diag.reason)

    return result


def linear_shape_ratios() -> Dict[str, Optional[Tuple[float, ...]]]:
    """
    Return ε_j²/λ² of every MQ method on u' = λu, or None where the closed form is singular there.

    The values come from the production formulas evaluated on the partials of f = λu at λ = u = 1.
    """
    entries = {key: 0.0 for key in INDICES}
    entries[(0, 0)] = 1.0
    entries[(0, 1)] = 1.0
    table = PartialTable(1, entries)
    ratios = {}

    for spec in catalog():
        if spec.classical:
            continue

        result = shape_from_table(spec, table, 1.0)
        ratios[spec.id] = None if result.is_fallback else tuple(float(x) for x in result.eps_sq)

    return ratios
