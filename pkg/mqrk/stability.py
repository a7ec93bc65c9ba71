"""
Stability functions R(z) of the catalog methods and their stability regions.

On u' = λu every shape formula reduces to ε_2² = r·λ², so one step multiplies u by a polynomial in
z = λh. The polynomial is derived exactly with sympy by running the stage recursion symbolically.
"""
import csv
import dataclasses
import io
import logging
import math
from typing import Dict, Optional, Tuple

import numpy as np
import sympy as sp
from numpy.polynomial import polynomial as P
from scipy import optimize

from .methods import MethodSpec, catalog, get_method


LOG = logging.getLogger(__name__)

Z = sp.Symbol('z')

#: Published stability function of the B1 variant. Its shape formula is singular on u' = λu, so it
#: cannot come out of derive_stability_poly.
B1_COEFFS = (1.0, 1.0, 1 / 2, 1 / 6, 0.0, -1 / 32, -1 / 192, -1 / 134)

#: Resolution of the scan along the negative real axis.
SCAN_STEP = 1e-3

#: Absolute tolerance of the bisection of the interval endpoint.
BISECT_XTOL = 1e-9

#: |R| ≤ 1 + TANGENCY counts as inside.
TANGENCY = 1e-12

#: Default window: Re [-6, 2], Im [-4.5, 4.5].
DEFAULT_WINDOW = (-6.0, 2.0, -4.5, 4.5)
DEFAULT_STEP = 0.01


@dataclasses.dataclass(frozen=True, eq=False)
class StabilityPolynomial:
    """
    R(z) = Σ coeffs[k]·z^k.

    @ivar exact: sympy coefficients when derived symbolically, None for published polynomials.
    @ivar claimed_order: Order the method is designed for.
    """
    method: str
    coeffs: np.ndarray
    claimed_order: int
    exact: Optional[Tuple[sp.Expr, ...]] = None

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=float)

        if coeffs.ndim != 1 or len(coeffs) < 2:
            raise ValueError(f"stability polynomial of {self.method} needs at least two coefficients")

        if not np.all(np.isfinite(coeffs)):
            raise ValueError(f"stability polynomial of {self.method} has non-finite coefficients")

        object.__setattr__(self, 'coeffs', coeffs)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, z):
        return evaluate(self, z)

    def __repr__(self):
        return f'<StabilityPolynomial({self.method}, degree={self.degree})>'


def _linear_scales(spec: MethodSpec):
    # (1 + ε_j²(c_j·h)²/2) per stage with ε_j²h² = κ_j·r·z²
    if spec.classical:
        return [sp.S.One] * spec.stages

    if spec.linear_shape_ratio is None:
        raise ValueError(f"{spec.id} has no shape parameter on u' = λu")

    ratios = (sp.S.One,) + tuple(spec.kappa)
    return [sp.S.One] + [1 + ratios[j - 1] * spec.linear_shape_ratio * Z ** 2 * spec.tableau.c[j] ** 2 / 2
                         for j in range(1, spec.stages)]


def derive_stability_poly(spec: MethodSpec) -> StabilityPolynomial:
    """
    Run the stages of spec on u' = λu, u = 1, and collect u⁺ as a polynomial in z = λh.

    @raise ValueError: If spec's shape formula has no value on u' = λu (B1); use stability_polynomial.
    """
    tableau = spec.tableau
    scales = _linear_scales(spec)
    hk = []  # h·K_j

    for j in range(spec.stages):
        argument = 1 + sum((tableau.a[j][k] * hk[k] for k in range(j)), sp.S.Zero)
        hk.append(sp.expand(Z * scales[j] * argument))

    update = sp.expand(1 + sum((w * k for w, k in zip(tableau.w, hk)), sp.S.Zero))
    exact = tuple(sp.radsimp(x) for x in reversed(sp.Poly(update, Z).all_coeffs()))
    coeffs = np.array([float(sp.N(x, 30)) for x in exact])
    return StabilityPolynomial(spec.id, coeffs, spec.formal_order, exact)


def stability_polynomial(spec: MethodSpec) -> StabilityPolynomial:
    """
    Return the stability polynomial of spec; the published one for B1.
    """
    if spec.id == 'mq-rk3-b1':
        return StabilityPolynomial(spec.id, np.array(B1_COEFFS), 3)

    return derive_stability_poly(spec)


def stability_polynomials() -> Dict[str, StabilityPolynomial]:
    return {spec.id: stability_polynomial(spec) for spec in catalog()}


def evaluate(poly: StabilityPolynomial, z):
    """
    Evaluate R at real or complex z; arrays are evaluated elementwise.
    """
    return P.polyval(z, poly.coeffs)


def exp_match_order(poly: StabilityPolynomial, *, tol: float = 1e-12) -> int:
    """
    Return the largest p such that the coefficients of z^0..z^p agree with 1/k!.
    """
    p = -1

    for k, c in enumerate(poly.coeffs):
        if abs(c - 1 / math.factorial(k)) > tol:
            break

        p = k

    return p


def real_stability_interval(poly: StabilityPolynomial, *, limit: float = 50.0) -> float:
    """
    Return x* < 0 such that [x*, 0] is the largest interval with |R(x)| ≤ 1 on it.

    The negative axis is scanned with SCAN_STEP until |R| first exceeds 1, then the crossing is
    bisected to BISECT_XTOL.

    @raise ValueError: If |R| stays bounded by 1 down to -limit.
    """
    def excess(x):
        return abs(evaluate(poly, x)) - 1 - TANGENCY

    xs = -SCAN_STEP * np.arange(1, int(limit / SCAN_STEP) + 1)
    outside = np.flatnonzero(np.abs(evaluate(poly, xs)) > 1 + TANGENCY)

    if not outside.size:
        raise ValueError(f"{poly.method} is stable on [-{limit}, 0]")

    k = outside[0]

    if k == 0:
        return float(optimize.bisect(excess, xs[0], 0.0, xtol=BISECT_XTOL))

    return float(optimize.bisect(excess, xs[k], xs[k - 1], xtol=BISECT_XTOL))


@dataclasses.dataclass(frozen=True, eq=False)
class RegionGrid:
    """
    |R(x + iy)| ≤ 1 sampled on a rectangular grid; inside[i, j] belongs to (xs[j], ys[i]).
    """
    method: str
    xs: np.ndarray
    ys: np.ndarray
    inside: np.ndarray

    @property
    def area(self) -> float:
        """
        Area of the sampled region, in units of the window.
        """
        dx = self.xs[1] - self.xs[0] if len(self.xs) > 1 else 0.0
        dy = self.ys[1] - self.ys[0] if len(self.ys) > 1 else 0.0
        return float(self.inside.sum() * dx * dy)


def _axis(lo: float, hi: float, step: float) -> np.ndarray:
    count = int(round((hi - lo) / step)) + 1
    return np.round(lo + step * np.arange(count), 12)


def rasterize_region(poly: StabilityPolynomial, re_range: Tuple[float, float] = DEFAULT_WINDOW[:2],
                     im_range: Tuple[float, float] = DEFAULT_WINDOW[2:], step: float = DEFAULT_STEP) -> RegionGrid:
    if not step > 0:
        raise ValueError(f"grid step must be positive, got {step}")

    if re_range[1] < re_range[0] or im_range[1] < im_range[0]:
        raise ValueError(f"empty window {re_range} x {im_range}")

    xs = _axis(*re_range, step)
    ys = _axis(*im_range, step)
    values = evaluate(poly, xs[np.newaxis, :] + 1j * ys[:, np.newaxis])
    return RegionGrid(poly.method, xs, ys, np.abs(values) <= 1 + TANGENCY)


def region_csv(grid: RegionGrid) -> str:
    """
    Serialize a grid as CSV with columns x, y, inside (0 or 1), row by row in y.
    """
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(['x', 'y', 'inside'])

    for i, y in enumerate(grid.ys):
        for j, x in enumerate(grid.xs):
            writer.writerow([f'{x:.10g}', f'{y:.10g}', int(grid.inside[i, j])])

    return buffer.getvalue()


def interval_ranking(method_ids) -> Tuple[Tuple[str, float], ...]:
    """
    Sort methods by the length of their real stability interval, longest first.
    """
    endpoints = [(m, real_stability_interval(stability_polynomial(get_method(m)))) for m in method_ids]
    return tuple(sorted(endpoints, key=lambda item: item[1]))
