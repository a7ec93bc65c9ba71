"""
Catalog of explicit Runge-Kutta parameter sets: classical RK2/3/4 and their MQ counterparts.

Every tableau is kept exactly as sympy expressions (√33 included) and evaluated to double precision
once, at import. MQ methods carry the ratios κ_j of their shape parameters, ε_j² = κ_j·ε_2².
"""
import dataclasses
import enum
import logging
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import sympy as sp


LOG = logging.getLogger(__name__)


class RootChoice(str, enum.Enum):
    PLUS = 'plus'
    MINUS = 'minus'
    NONE = 'none'


@dataclasses.dataclass(frozen=True)
class Tableau:
    """
    Exact Butcher tableau. c and w have s entries (c[0] = 0), a is s×s strictly lower-triangular.
    """
    c: Tuple[sp.Expr, ...]
    a: Tuple[Tuple[sp.Expr, ...], ...]
    w: Tuple[sp.Expr, ...]

    @classmethod
    def from_rows(cls, c: Sequence, a: Sequence[Sequence], w: Sequence) -> 'Tableau':
        """
        @param c: Nodes c_2..c_s.
        @param a: Rows a_2, ..., a_s of the couplings, row j holding a_j1..a_j(j-1).
        @param w: Weights w_1..w_s.
        """
        s = len(w)

        if len(c) != s - 1 or len(a) != s - 1:
            raise ValueError(f"inconsistent tableau for {s} stages")

        matrix = [[sp.S.Zero] * s for _ in range(s)]

        for j, row in enumerate(a, start=1):
            if len(row) != j:
                raise ValueError(f"row {j + 1} of a must have {j} entries, got {len(row)}")

            for k, value in enumerate(row):
                matrix[j][k] = sp.sympify(value)

        return cls(
            c=(sp.S.Zero,) + tuple(sp.sympify(x) for x in c),
            a=tuple(tuple(row) for row in matrix),
            w=tuple(sp.sympify(x) for x in w),
        )

    @property
    def stages(self) -> int:
        return len(self.w)


@dataclasses.dataclass(frozen=True, eq=False)
class MethodSpec:
    """
    Parameters of an explicit s-stage method.

    @ivar c: Nodes as floats, c[0] = 0.
    @ivar a: Strictly lower-triangular couplings as an s×s float array.
    @ivar w: Weights.
    @ivar kappa: κ_3 (and κ_4); empty for two-stage methods.
    @ivar shape_formula: Closed form for ε_2², None for classical methods.
    @ivar family: Tableau family (ralston, b1, b2a, ..., c2); selects the extra order conditions.
    @ivar linear_shape_ratio: ε_2²/λ² on u' = λu, None when the formula is singular there.
    """
    id: str
    tableau: Tableau
    kappa: Tuple[sp.Expr, ...] = ()
    shape_formula: Optional[str] = None
    root_choice: RootChoice = RootChoice.NONE
    family: Optional[str] = None
    linear_shape_ratio: Optional[sp.Expr] = None
    description: str = ''

    c: np.ndarray = dataclasses.field(init=False, repr=False)
    a: np.ndarray = dataclasses.field(init=False, repr=False)
    w: np.ndarray = dataclasses.field(init=False, repr=False)
    ratios: np.ndarray = dataclasses.field(init=False, repr=False)

    def __post_init__(self):
        s = self.tableau.stages

        if self.shape_formula is not None and len(self.kappa) != s - 2:
            raise ValueError(f"{self.id} needs {s - 2} shape ratios, got {len(self.kappa)}")

        object.__setattr__(self, 'c', np.array([_to_float(x) for x in self.tableau.c]))
        object.__setattr__(self, 'a', np.array([[_to_float(x) for x in row] for row in self.tableau.a]))
        object.__setattr__(self, 'w', np.array([_to_float(x) for x in self.tableau.w]))
        # ε_j²/ε_2² for j = 2..s
        object.__setattr__(self, 'ratios', np.array([1.0] + [_to_float(k) for k in self.kappa]))

    @property
    def stages(self) -> int:
        return self.tableau.stages

    @property
    def classical(self) -> bool:
        return self.shape_formula is None

    @property
    def formal_order(self) -> int:
        return self.stages if self.classical else self.stages + 1

    def __repr__(self):
        return f'<MethodSpec({self.id}, stages={self.stages})>'


def _to_float(x) -> float:
    return float(sp.N(x, 30))


S33 = sp.sqrt(33)
R = sp.Rational

RALSTON = Tableau.from_rows(c=[R(2, 3)], a=[[R(2, 3)]], w=[R(1, 4), R(3, 4)])

B1 = Tableau.from_rows(
    c=[R(1, 2), 1],
    a=[[R(1, 2)], [-1, 2]],
    w=[R(1, 6), R(2, 3), R(1, 6)])


def _b2(sign: int) -> Tableau:
    c2 = R(5, 8) + sign * S33 / 24
    return Tableau.from_rows(
        c=[c2, R(5, 8) - sign * S33 / 24],
        a=[[c2], [-R(49, 256) + sign * 29 * S33 / 768, R(209, 256) - sign * 61 * S33 / 768]],
        w=[R(1, 8), R(7, 16) - sign * 3 * S33 / 176, R(7, 16) + sign * 3 * S33 / 176])


B2A = _b2(+1)
B2B = _b2(-1)

B3A = Tableau.from_rows(
    c=[1, R(1, 2)],
    a=[[1], [R(1, 4), R(1, 4)]],
    w=[R(1, 6), R(1, 6), R(2, 3)])

B3B = Tableau.from_rows(
    c=[R(1, 3), R(5, 6)],
    a=[[R(1, 3)], [-R(5, 12), R(5, 4)]],
    w=[R(1, 10), R(1, 2), R(2, 5)])

B4 = Tableau.from_rows(
    c=[R(1, 2), R(3, 4)],
    a=[[R(1, 2)], [0, R(3, 4)]],
    w=[R(2, 9), R(1, 3), R(4, 9)])

C1 = Tableau.from_rows(
    c=[R(2, 5), R(3, 5), 1],
    a=[[R(2, 5)], [-R(3, 20), R(3, 4)], [R(19, 44), -R(15, 44), R(10, 11)]],
    w=[R(11, 72), R(25, 72), R(25, 72), R(11, 72)])

C2 = Tableau.from_rows(
    c=[R(1, 4), R(3, 5), 1],
    a=[[R(1, 4)], [-R(6, 25), R(21, 25)], [R(6, 5), -R(57, 35), R(10, 7)]],
    w=[R(1, 9), R(16, 63), R(125, 252), R(5, 36)])


def _build_catalog() -> Dict[str, MethodSpec]:
    specs = [
        MethodSpec('rk2', RALSTON, family='ralston', description="Ralston's two-stage method"),
        MethodSpec('mq-rk2', RALSTON, shape_formula='rk2', family='ralston', linear_shape_ratio=sp.S.One,
                   description="MQ two-stage method on Ralston's tableau"),
    ]

    three_stage = [
        # family, tableau, κ_3, λu ratio
        ('b1', B1, -sp.S.One, None),
        ('b2a', B2A, (-7 - S33) / 4, (7 - S33) / 4),
        ('b2b', B2B, (-7 + S33) / 4, (7 + S33) / 4),
        ('b3a', B3A, -sp.S.One, R(1, 3)),
        ('b3b', B3B, -R(1, 5), sp.Integer(3)),
        ('b4', B4, -R(1, 3), R(4, 3)),
    ]

    for family, tableau, kappa, ratio in three_stage:
        specs.append(MethodSpec(f'rk3-{family}', tableau, family=family,
                                description=f"classical three-stage method on the {family.upper()} tableau"))
        specs.append(MethodSpec(f'mq-rk3-{family}', tableau, kappa=(kappa,), shape_formula=family, family=family,
                                linear_shape_ratio=ratio,
                                description=f"MQ three-stage method, variant {family.upper()}"))

    four_stage = [
        ('c1', C1, (-R(2, 3), R(2, 11)), -R(55, 12)),
        ('c2', C2, (-R(1, 6), R(1, 10)), R(8, 3)),
    ]

    for family, tableau, kappa, ratio in four_stage:
        specs.append(MethodSpec(f'rk4-{family}', tableau, family=family,
                                description=f"classical four-stage method on the {family.upper()} tableau"))

        for choice in (RootChoice.PLUS, RootChoice.MINUS):
            specs.append(MethodSpec(f'mq-rk4-{family}-{choice.value}', tableau, kappa=kappa, shape_formula=family,
                                    root_choice=choice, family=family, linear_shape_ratio=ratio,
                                    description=f"MQ four-stage method, variant {family.upper()}, {choice.value} root"))

    return {s.id: s for s in specs}


_CATALOG = _build_catalog()


def catalog() -> List[MethodSpec]:
    """
    Return every method in a stable order.
    """
    return list(_CATALOG.values())


def method_ids() -> List[str]:
    return list(_CATALOG)


def get_method(method_id: str) -> MethodSpec:
    """
    @raise KeyError: If method_id is unknown; the message lists valid ids.
    """
    try:
        return _CATALOG[method_id]
    except KeyError:
        raise KeyError(f"unknown method {method_id!r}; expected one of: {', '.join(_CATALOG)}") from None


def classical_counterpart(spec: MethodSpec) -> MethodSpec:
    """
    Return the classical method sharing spec's tableau.
    """
    if spec.classical:
        return spec

    if spec.stages == 2:
        return _CATALOG['rk2']
    else:
        return _CATALOG[f'rk{spec.stages}-{spec.family}']


#{ Order conditions

Condition = Callable[[np.ndarray, np.ndarray, np.ndarray], float]


def _standard_conditions(s: int) -> List[Tuple[str, Condition]]:
    # c, a, w are 0-based: c[1] is c_2, a[2, 1] is a_32
    conditions = [('sum(w) = 1', lambda c, a, w: w.sum() - 1)]
    conditions.extend((f'sum(a_{j + 1}k) = c_{j + 1}', lambda c, a, w, j=j: a[j, :j].sum() - c[j])
                      for j in range(1, s))
    conditions.append(('2 sum(w c) = 1', lambda c, a, w: 2 * (w @ c) - 1))

    if s >= 3:
        conditions += [
            ('3 sum(w c^2) = 1', lambda c, a, w: 3 * (w @ c ** 2) - 1),
            ('6 sum(w a c) = 1', lambda c, a, w: 6 * (w @ a @ c) - 1),
        ]

    if s >= 4:
        conditions += [
            ('4 sum(w c^3) = 1', lambda c, a, w: 4 * (w @ c ** 3) - 1),
            ('8 sum(w c a c) = 1', lambda c, a, w: 8 * ((w * c) @ a @ c) - 1),
            ('12 sum(w a c^2) = 1', lambda c, a, w: 12 * (w @ a @ c ** 2) - 1),
            ('24 a32 a43 w4 c2 = 1', lambda c, a, w: 24 * a[2, 1] * a[3, 2] * w[3] * c[1] - 1),
        ]

    return conditions


_B_QUARTIC = ('4 (w2 c2^3 + w3 c3^3) = 1', lambda c, a, w: 4 * (w[1] * c[1] ** 3 + w[2] * c[2] ** 3) - 1)
_C_TENTH = ('10 (a32 c2 c3^2 w3 + (a42 c2 + a43 c3) c4^2 w4) = 1',
            lambda c, a, w: 10 * (a[2, 1] * c[1] * c[2] ** 2 * w[2]
                                  + (a[3, 1] * c[1] + a[3, 2] * c[2]) * c[3] ** 2 * w[3]) - 1)

#: Identities each family satisfies on top of the standard ones.
FAMILY_CONDITIONS: Dict[str, List[Tuple[str, Condition]]] = {
    'ralston': [('3 w2 a21^2 = 1', lambda c, a, w: 3 * w[1] * a[1, 0] ** 2 - 1)],
    'b1': [_B_QUARTIC, ('12 a32 c2^2 w3 = 1', lambda c, a, w: 12 * a[2, 1] * c[1] ** 2 * w[2] - 1)],
    'b2a': [_B_QUARTIC, ('24 a32 c2 (c2 + c3) w3 = 5',
                         lambda c, a, w: 24 / 5 * a[2, 1] * c[1] * (c[1] + c[2]) * w[2] - 1)],
    'b3a': [_B_QUARTIC, ('6 (a32 c2^2 w3 / 2 + a32 c2 c3 w3) = 1',
                         lambda c, a, w: 6 * (a[2, 1] * c[1] ** 2 * w[2] / 2 + a[2, 1] * c[1] * c[2] * w[2]) - 1)],
    'b4': [('8 a32 c2 c3 w3 = 1', lambda c, a, w: 8 * a[2, 1] * c[1] * c[2] * w[2] - 1),
           ('12 a32 c2^2 w3 = 1', lambda c, a, w: 12 * a[2, 1] * c[1] ** 2 * w[2] - 1)],
    'c1': [_C_TENTH, ('15 (a32 c2^2 c3 w3 + (a42 c2^2 + a43 c3^2) c4 w4) = 1',
                      lambda c, a, w: 15 * (a[2, 1] * c[1] ** 2 * c[2] * w[2]
                                            + (a[3, 1] * c[1] ** 2 + a[3, 2] * c[2] ** 2) * c[3] * w[3]) - 1)],
    'c2': [_C_TENTH, ('20 (a32^2 c2^2 w3 + (a42 c2 + a43 c3)^2 w4) = 1',
                      lambda c, a, w: 20 * (a[2, 1] ** 2 * c[1] ** 2 * w[2]
                                            + (a[3, 1] * c[1] + a[3, 2] * c[2]) ** 2 * w[3]) - 1)],
}
FAMILY_CONDITIONS['b2b'] = FAMILY_CONDITIONS['b2a']
FAMILY_CONDITIONS['b3b'] = FAMILY_CONDITIONS['b3a']


def _shape_conditions(s: int) -> List[Tuple[str, Callable]]:
    # r holds ε_j²/ε_2² for j = 2..s at positions 1..s-1
    conditions = [('sum(w c^2 eps^2) = 0', lambda c, a, w, r: (w * c ** 2) @ r)]

    if s == 4:
        conditions += [
            ('sum(w c^3 eps^2) = 0', lambda c, a, w, r: (w * c ** 3) @ r),
            ('sum(w a c^2 eps^2) = 0', lambda c, a, w, r: w @ a @ (c ** 2 * r)),
        ]

    return conditions


def verify_order_conditions(spec: MethodSpec) -> List[Tuple[str, float]]:
    """
    Return (condition, residual) for every order condition spec should satisfy.

    Standard conditions for its stage count, the extra identities of its family and, for MQ methods,
    the conditions tying the shape ratios to the tableau.
    """
    c, a, w = spec.c, spec.a, spec.w
    report = [(name, float(cond(c, a, w))) for name, cond in _standard_conditions(spec.stages)]

    if spec.family is not None:
        report.extend((name, float(cond(c, a, w))) for name, cond in FAMILY_CONDITIONS[spec.family])

    if not spec.classical and spec.stages > 2:
        r = np.concatenate(([0.0], spec.ratios))
        report.extend((name, float(cond(c, a, w, r))) for name, cond in _shape_conditions(spec.stages))

    return report

#}


def describe(spec: MethodSpec) -> str:
    """
    One-line summary: id, stages, formal order and shape ratios.
    """
    ratios = ', '.join(f'k{j + 3}={k}' for j, k in enumerate(spec.kappa)) or '-'
    return f'{spec.id}\t{spec.stages}\t{spec.formal_order}\t{ratios}'
