"""
Truncated bivariate Taylor arithmetic in (t, u) up to total degree 4.

A Jet4 stores the coefficients c_ab of Σ c_ab δt^a δu^b densely, in graded-lex order. Evaluating a
right-hand side on seeded jets yields every partial ∂ᵃₜ∂ᵇᵤf with a+b ≤ 4 at once:

>>> t, u = seed(1.0, 0.5)
>>> j = -4 * t ** 3 * u ** 2
>>> j.partial(1, 1)
-12.0

The module-level exp and sqrt dispatch on their argument so that one right-hand side definition
serves both float and jet evaluation.
"""
import math
import numbers
import operator
from typing import Callable, Dict, List, Tuple, Union

import numpy as np

from .errors import DomainError, UnsupportedFunction


DEGREE = 4

#: (a, b) pairs in storage order: (0,0), (1,0), (0,1), (2,0), (1,1), (0,2), ...
INDICES: Tuple[Tuple[int, int], ...] = tuple((a, d - a) for d in range(DEGREE + 1) for a in range(d, -1, -1))
SIZE = len(INDICES)

_POSITION: Dict[Tuple[int, int], int] = {ab: i for i, ab in enumerate(INDICES)}


def _multiplication_table() -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    left, right, target = [], [], []

    for i, (a1, b1) in enumerate(INDICES):
        for j, (a2, b2) in enumerate(INDICES):
            if a1 + b1 + a2 + b2 <= DEGREE:
                left.append(i)
                right.append(j)
                target.append(_POSITION[(a1 + a2, b1 + b2)])

    return np.array(left), np.array(right), np.array(target)


_MUL_LEFT, _MUL_RIGHT, _MUL_TARGET = _multiplication_table()

Scalar = Union[int, float]


class Jet4:
    """
    Truncated Taylor expansion of a function of (t, u) around a point.

    Jets combine with each other and with real scalars through the usual arithmetic operators.
    Terms of total degree above 4 are discarded.
    """
    __slots__ = ('_coeffs',)

    # Make numpy defer to the reflected operators and to __array_ufunc__.
    __array_priority__ = 1000

    def __init__(self, coeffs=None) -> None:
        if coeffs is None:
            self._coeffs = np.zeros(SIZE)
        else:
            c = np.array(coeffs, dtype=float)

            if c.shape != (SIZE,):
                raise ValueError(f"expected {SIZE} coefficients, got shape {c.shape}")

            self._coeffs = c

    @classmethod
    def constant(cls, value: float) -> 'Jet4':
        c = np.zeros(SIZE)
        c[0] = value
        return cls(c)

    @classmethod
    def _wrap(cls, coeffs: np.ndarray) -> 'Jet4':
        j = cls.__new__(cls)
        j._coeffs = coeffs
        return j

    @property
    def coeffs(self) -> np.ndarray:
        """
        Copy of the coefficients in storage order.
        """
        return self._coeffs.copy()

    @property
    def value(self) -> float:
        """
        Constant coefficient, i.e. the value of the function at the expansion point.
        """
        return float(self._coeffs[0])

    def coefficient(self, a: int, b: int) -> float:
        try:
            return float(self._coeffs[_POSITION[(a, b)]])
        except KeyError:
            raise ValueError(f"({a}, {b}) exceeds degree {DEGREE}") from None

    def partial(self, a: int, b: int) -> float:
        """
        Return ∂ᵃₜ∂ᵇᵤ of the represented function at the expansion point.
        """
        return math.factorial(a) * math.factorial(b) * self.coefficient(a, b)

    def partials(self) -> Dict[Tuple[int, int], float]:
        return {(a, b): self.partial(a, b) for a, b in INDICES}

    #{ Arithmetic

    def __add__(self, other):
        if isinstance(other, Jet4):
            return self._wrap(self._coeffs + other._coeffs)
        elif isinstance(other, numbers.Real):
            c = self._coeffs.copy()
            c[0] += other
            return self._wrap(c)
        else:
            return NotImplemented

    __radd__ = __add__

    def __neg__(self):
        return self._wrap(-self._coeffs)

    def __pos__(self):
        return self

    def __sub__(self, other):
        if isinstance(other, (Jet4, numbers.Real)):
            return self + (-other)
        else:
            return NotImplemented

    def __rsub__(self, other):
        if isinstance(other, numbers.Real):
            return (-self) + other
        else:
            return NotImplemented

    def __mul__(self, other):
        if isinstance(other, Jet4):
            products = self._coeffs[_MUL_LEFT] * other._coeffs[_MUL_RIGHT]
            return self._wrap(np.bincount(_MUL_TARGET, weights=products, minlength=SIZE))
        elif isinstance(other, numbers.Real):
            return self._wrap(self._coeffs * other)
        else:
            return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet4):
            return self * other.reciprocal()
        elif isinstance(other, numbers.Real):
            if other == 0:
                raise DomainError(tag='div', detail='division by zero')

            return self._wrap(self._coeffs / other)
        else:
            return NotImplemented

    def __rtruediv__(self, other):
        if isinstance(other, numbers.Real):
            return self.reciprocal() * other
        else:
            return NotImplemented

    def __pow__(self, exponent):
        if isinstance(exponent, Jet4):
            raise UnsupportedFunction("jet exponents are not supported")
        elif isinstance(exponent, numbers.Integral) or (isinstance(exponent, numbers.Real) and float(exponent).is_integer()):
            n = int(exponent)

            if n < 0:
                return self.reciprocal() ** -n

            result = Jet4.constant(1.0)
            base = self

            while n:
                if n & 1:
                    result = result * base

                n >>= 1

                if n:
                    base = base * base

            return result
        elif isinstance(exponent, numbers.Real):
            raise UnsupportedFunction(f"non-integer power {exponent} is not supported for jets")
        else:
            return NotImplemented

    def __rpow__(self, base):
        raise UnsupportedFunction("jet exponents are not supported")

    #}

    #{ Elementary functions

    def _compose(self, derivatives: List[float]) -> 'Jet4':
        """
        Compose a univariate function with the jet.

        @param derivatives: g(y₀), g'(y₀), ..., g⁽⁴⁾(y₀) where y₀ is the constant coefficient.
        """
        d = self._coeffs.copy()
        d[0] = 0.0
        shift = self._wrap(d)

        result = np.zeros(SIZE)
        result[0] = derivatives[0]
        power = Jet4.constant(1.0)

        for n in range(1, DEGREE + 1):
            power = power * shift
            result += derivatives[n] / math.factorial(n) * power._coeffs

        return self._wrap(result)

    def reciprocal(self) -> 'Jet4':
        y0 = self.value

        if y0 == 0.0:
            raise DomainError(tag='div', detail='jet with zero constant term')

        return self._compose([(-1) ** n * math.factorial(n) / y0 ** (n + 1) for n in range(DEGREE + 1)])

    def exp(self) -> 'Jet4':
        e = math.exp(self.value)
        return self._compose([e] * (DEGREE + 1))

    def sqrt(self) -> 'Jet4':
        y0 = self.value

        if y0 <= 0.0:
            raise DomainError(tag='sqrt', detail=f'constant term {y0!r} is not positive')

        derivatives = []
        coefficient = 1.0

        for n in range(DEGREE + 1):
            derivatives.append(coefficient * y0 ** (0.5 - n))
            coefficient *= 0.5 - n

        return self._compose(derivatives)

    #}

    def __array_ufunc__(self, ufunc, method, *inputs, **kwargs):
        op = _UFUNCS.get(ufunc)

        if method != '__call__' or kwargs or op is None:
            raise UnsupportedFunction(f"{ufunc.__name__} is not supported for jets")

        return op(*(float(x) if isinstance(x, np.generic) else x for x in inputs))

    def __eq__(self, other):
        if isinstance(other, Jet4):
            return bool(np.array_equal(self._coeffs, other._coeffs))
        else:
            return NotImplemented

    __hash__ = None

    def __repr__(self):
        terms = ', '.join(f'{a}{b}: {c:g}' for (a, b), c in zip(INDICES, self._coeffs) if c != 0.0)
        return f'Jet4({{{terms}}})'


def exp(x):
    if isinstance(x, Jet4):
        return x.exp()
    else:
        return np.exp(x)


def sqrt(x):
    if isinstance(x, Jet4):
        return x.sqrt()
    else:
        return np.sqrt(x)


_UFUNCS: Dict[np.ufunc, Callable] = {
    np.add: operator.add,
    np.subtract: operator.sub,
    np.multiply: operator.mul,
    np.true_divide: operator.truediv,
    np.power: operator.pow,
    np.negative: operator.neg,
    np.positive: operator.pos,
    np.square: lambda x: x * x,
    np.reciprocal: lambda x: 1.0 / x,
    np.exp: exp,
    np.sqrt: sqrt,
}


def seed(t: float, u: float) -> Tuple[Jet4, Jet4]:
    """
    Return the jets of the coordinate functions at (t, u).
    """
    tj = np.zeros(SIZE)
    tj[0], tj[_POSITION[(1, 0)]] = t, 1.0
    uj = np.zeros(SIZE)
    uj[0], uj[_POSITION[(0, 1)]] = u, 1.0
    return Jet4._wrap(tj), Jet4._wrap(uj)


def lift(value) -> Jet4:
    """
    Return value as a jet; real numbers become constant jets.
    """
    if isinstance(value, Jet4):
        return value
    elif isinstance(value, numbers.Real):
        return Jet4.constant(float(value))
    else:
        raise UnsupportedFunction(f"cannot lift {type(value).__name__} into a jet")


def jet_to_partials(j: Jet4):
    """
    Convert the jet of f into the table of its partials.
    """
    from .problem import PartialTable

    return PartialTable(1, j.partials())
