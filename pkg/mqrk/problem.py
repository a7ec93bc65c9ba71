"""
Initial value problems u'(t) = f(t, u), u(t0) = u0 and the partial derivatives of f.

A problem is defined by a single generic right-hand side ``func(t, u)``: for dim=1 it receives u as
a scalar, for dim>1 as an indexable sequence. It must be written with arithmetic operators and the
elementary functions of :mod:`mqrk.jet` so that it can be evaluated on floats as well as on jets.
"""
import abc
import dataclasses
import logging
from typing import Callable, Dict, Iterable, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import DomainError, MqrkError, ProviderError
from .jet import INDICES, Jet4, jet_to_partials, lift, seed


LOG = logging.getLogger(__name__)

Key = Tuple[int, int]
Vector = np.ndarray

#: Entries required for systems: f, f_t and the Jacobian.
SYSTEM_KEYS: Tuple[Key, ...] = ((0, 0), (1, 0), (0, 1))


def partial_name(a: int, b: int) -> str:
    """
    Return the conventional name of ∂ᵃₜ∂ᵇᵤf, e.g. f_tuu for (1, 2).
    """
    return 'f' if a == b == 0 else 'f_' + 't' * a + 'u' * b


_KEYS_BY_NAME: Dict[str, Key] = {partial_name(a, b): (a, b) for a, b in INDICES}


class PartialTable:
    """
    Partials ∂ᵃₜ∂ᵇᵤf at a point.

    For dim=1 all entries with a+b ≤ 4 are real numbers. For dim>1 only f (vector), f_t (vector)
    and f_u (the dim×dim Jacobian) are held.

    Entries are available by key and by name:

    >>> table[(1, 1)] == table.f_tu
    True
    """
    __slots__ = ('_dim', '_entries')

    def __init__(self, dim: int, entries: Mapping[Key, Union[float, Vector]]) -> None:
        if dim < 1:
            raise ValueError(f"dim must be positive, got {dim}")

        required = INDICES if dim == 1 else SYSTEM_KEYS
        missing = [partial_name(*k) for k in required if k not in entries]

        if missing:
            raise ProviderError(missing)

        if dim == 1:
            self._entries = {k: float(entries[k]) for k in required}
        else:
            self._entries = {
                (0, 0): np.asarray(entries[(0, 0)], dtype=float).reshape(dim),
                (1, 0): np.asarray(entries[(1, 0)], dtype=float).reshape(dim),
                (0, 1): np.asarray(entries[(0, 1)], dtype=float).reshape(dim, dim),
            }

        self._dim = dim

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def jacobian(self) -> Vector:
        """
        f_u as a matrix; 1×1 for scalar problems.
        """
        return np.atleast_2d(self._entries[(0, 1)])

    def keys(self) -> Iterable[Key]:
        return self._entries.keys()

    def items(self):
        return self._entries.items()

    def __getitem__(self, key: Key):
        try:
            return self._entries[key]
        except KeyError:
            raise ProviderError([partial_name(*key)], 'not held by the table') from None

    def __getattr__(self, name: str):
        try:
            key = _KEYS_BY_NAME[name]
        except KeyError:
            raise AttributeError(f"'{type(self).__name__}' object has no attribute '{name}'") from None

        return self[key]

    def __repr__(self):
        return f'<PartialTable(dim={self._dim}, f={self._entries[(0, 0)]!r})>'


class DerivativeProvider(abc.ABC):
    """
    Source of PartialTables for a problem.

    A provider either returns a complete table or raises; it never returns a partial one.
    """
    kind: str

    @abc.abstractmethod
    def partials(self, problem: 'OdeProblem', t: float, u: Vector) -> PartialTable:
        pass

    def __repr__(self):
        return f'<{type(self).__name__}>'


class ExactProvider(DerivativeProvider):
    """
    Partials from user-supplied closures keyed by name (f_t, f_uu, ...; jacobian for systems).

    f itself is always taken from the problem's right-hand side.

    >>> ExactProvider({'f_u': lambda t, u: -2 * u, 'f_uu': lambda t, u: -2.0}, default=0.0)
    """
    kind = 'exact'

    def __init__(self, closures: Mapping[str, Callable], *, default: Optional[float] = None) -> None:
        """
        @param closures: Map from partial name to a callable (t, u) -> value.
        @param default: Value of partials without a closure. If None, such partials are an error.
        """
        closures = dict(closures)

        if 'jacobian' in closures:
            closures['f_u'] = closures.pop('jacobian')

        unknown = set(closures) - set(_KEYS_BY_NAME)

        if unknown:
            raise ValueError(f"unknown partials: {', '.join(sorted(unknown))}")

        self._closures = closures
        self._default = default

    def partials(self, problem, t, u):
        u = np.asarray(u, dtype=float)
        arg = problem.argument(u)
        required = INDICES if problem.dim == 1 else SYSTEM_KEYS
        entries = {(0, 0): problem.rhs(t, u)}
        missing = []

        for key in required[1:]:
            closure = self._closures.get(partial_name(*key))

            if closure is not None:
                entries[key] = _evaluate(closure, t, u, arg, partial_name(*key))
            elif self._default is not None:
                entries[key] = np.full((problem.dim,) * (key[1] + 1) if problem.dim > 1 else (), self._default)
            else:
                missing.append(partial_name(*key))

        if missing:
            raise ProviderError(missing)

        if problem.dim == 1:
            entries[(0, 0)] = entries[(0, 0)][0]

        return PartialTable(problem.dim, entries)


class JetProvider(DerivativeProvider):
    """
    Partials by evaluating the right-hand side on seeded jets.

    Systems are handled without vector jets: seeding t together with a single component u_j yields
    f_t and column j of the Jacobian.
    """
    kind = 'jet'

    def partials(self, problem, t, u):
        u = np.asarray(u, dtype=float)

        try:
            if problem.dim == 1:
                tj, uj = seed(t, float(u[0]))
                return jet_to_partials(self._call(problem, tj, uj))
            else:
                return self._system_partials(problem, t, u)
        except DomainError as e:
            raise e.at(t, u) from e.__cause__

    def _system_partials(self, problem, t, u):
        dim = problem.dim
        f = problem.rhs(t, u)
        f_t = np.zeros(dim)
        jacobian = np.zeros((dim, dim))

        for j in range(dim):
            tj, uj = seed(t, float(u[j]))
            arg = [uj if k == j else Jet4.constant(float(x)) for k, x in enumerate(u)]
            value = self._call(problem, tj, arg)

            if len(value) != dim:
                raise ProviderError(['f'], f"right-hand side returned {len(value)} components, expected {dim}")

            for i, component in enumerate(value):
                component = lift(component)
                f_t[i] = component.coefficient(1, 0)
                jacobian[i, j] = component.coefficient(0, 1)

        return PartialTable(dim, {(0, 0): f, (1, 0): f_t, (0, 1): jacobian})

    @staticmethod
    def _call(problem, tj, uj):
        with np.errstate(all='raise'):
            try:
                value = problem.func(tj, uj)
            except (FloatingPointError, ZeroDivisionError, OverflowError) as e:
                raise DomainError(tag='rhs', detail=str(e)) from e

        return lift(value) if problem.dim == 1 else value


class FiniteDifferenceProvider(DerivativeProvider):
    """
    Partials by central differences on tensor-product stencils.

    Meant for validating the other providers; orders above 2 are only rough.
    """
    kind = 'finite-difference'

    #: order -> (offsets, weights)
    STENCILS = {
        0: ((0,), (1.0,)),
        1: ((-1, 1), (-0.5, 0.5)),
        2: ((-1, 0, 1), (1.0, -2.0, 1.0)),
        3: ((-2, -1, 1, 2), (-0.5, 1.0, -1.0, 0.5)),
        4: ((-2, -1, 0, 1, 2), (1.0, -4.0, 6.0, -4.0, 1.0)),
    }

    #: total order -> base step, scaled by |t|+|u|+1
    STEPS = {1: 1e-5, 2: 1e-4, 3: 2e-3, 4: 5e-3}

    def __init__(self, step: Optional[float] = None) -> None:
        """
        @param step: Base step for first-order partials; overrides the first entry of STEPS.
        """
        self._steps = dict(self.STEPS)

        if step is not None:
            self._steps[1] = step

    def partials(self, problem, t, u):
        u = np.asarray(u, dtype=float)
        scale = abs(t) + float(np.abs(u).sum()) + 1.0

        if problem.dim == 1:
            entries = {(0, 0): float(problem.rhs(t, u)[0])}

            for a, b in INDICES[1:]:
                entries[(a, b)] = float(self._stencil(problem, t, u, a, b, self._steps[a + b] * scale)[0])

            return PartialTable(1, entries)
        else:
            h = self._steps[1] * scale
            jacobian = np.empty((problem.dim, problem.dim))

            for j in range(problem.dim):
                e = np.zeros(problem.dim)
                e[j] = h
                jacobian[:, j] = (problem.rhs(t, u + e) - problem.rhs(t, u - e)) / (2 * h)

            return PartialTable(problem.dim, {
                (0, 0): problem.rhs(t, u),
                (1, 0): self._stencil(problem, t, u, 1, 0, h),
                (0, 1): jacobian,
            })

    def _stencil(self, problem, t, u, a, b, h):
        t_offsets, t_weights = self.STENCILS[a]
        u_offsets, u_weights = self.STENCILS[b]
        total = 0.0

        for i, wt in zip(t_offsets, t_weights):
            for j, wu in zip(u_offsets, u_weights):
                total = total + wt * wu * problem.rhs(t + i * h, u + j * h)

        return total / h ** (a + b)


@dataclasses.dataclass(frozen=True)
class OdeProblem:
    """
    Initial value problem u'(t) = f(t, u), u(t0) = u0 on [t0, t_end].

    @ivar func: Generic right-hand side, see module docs.
    @ivar exact: Optional exact solution t -> u(t); returns a scalar for dim=1 or a sequence.
    @ivar provider: Source of partial derivatives; jets by default.
    """
    name: str
    func: Callable
    t0: float
    u0: Vector
    t_end: float
    exact: Optional[Callable[[float], Union[float, Sequence[float]]]] = None
    provider: DerivativeProvider = dataclasses.field(default_factory=lambda: JetProvider())
    description: str = ''

    def __post_init__(self):
        u0 = np.atleast_1d(np.asarray(self.u0, dtype=float))

        if u0.ndim != 1:
            raise ValueError(f"u0 of {self.name} must be a vector")

        object.__setattr__(self, 'u0', u0)

        if not self.t_end > self.t0:
            raise ValueError(f"t_end must be greater than t0 for {self.name}: {self.t_end} <= {self.t0}")

        if self.exact is not None:
            gap = float(np.linalg.norm(self.exact_at(self.t0) - u0))

            if gap >= 1e-12:
                raise ValueError(f"exact solution of {self.name} does not match u0 at t0 (gap {gap:.3e})")

    @property
    def dim(self) -> int:
        return len(self.u0)

    @property
    def has_exact(self) -> bool:
        return self.exact is not None

    def argument(self, u: Vector):
        """
        Convert a state vector into the argument func expects.
        """
        return float(u[0]) if self.dim == 1 else u

    def rhs(self, t: float, u) -> Vector:
        """
        Evaluate f(t, u) as a vector of length dim.

        @raise DomainError: If f is singular or not finite at (t, u).
        """
        u = np.atleast_1d(np.asarray(u, dtype=float))

        try:
            with np.errstate(all='raise'):
                value = np.asarray(self.func(t, self.argument(u)), dtype=float).reshape(self.dim)
        except (FloatingPointError, ZeroDivisionError, OverflowError) as e:
            raise DomainError(t, u, 'rhs', detail=str(e)) from e
        except DomainError as e:
            raise e.at(t, u) from e.__cause__

        if not np.all(np.isfinite(value)):
            raise DomainError(t, u, 'rhs', detail='non-finite value')

        return value

    def exact_at(self, t: float) -> Vector:
        if self.exact is None:
            raise MqrkError(f"{self.name} has no exact solution")

        return np.atleast_1d(np.asarray(self.exact(t), dtype=float)).reshape(-1)

    def partials(self, t: float, u) -> PartialTable:
        return partials_at(self, t, u)

    def residual(self, t: float) -> Vector:
        """
        Return u'(t) − f(t, u(t)) for the exact solution.

        u' comes from a fourth-order central difference of the exact evaluator.
        """
        h = 1e-3 * (1.0 + abs(t))
        derivative = (self.exact_at(t - 2 * h) - 8 * self.exact_at(t - h)
                      + 8 * self.exact_at(t + h) - self.exact_at(t + 2 * h)) / (12 * h)
        return derivative - self.rhs(t, self.exact_at(t))

    def times(self, n: int) -> Vector:
        """
        Uniform grid t0 + i·h, i = 0..n.
        """
        return self.t0 + (self.t_end - self.t0) * np.arange(n + 1) / n

    def replace(self, **changes) -> 'OdeProblem':
        return dataclasses.replace(self, **changes)


def partials_at(problem: OdeProblem, t: float, u) -> PartialTable:
    """
    Return the PartialTable of problem at (t, u) from the problem's provider.

    @raise DomainError: If f or one of its partials is singular at (t, u).
    @raise ProviderError: If the provider cannot produce a complete table.
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    table = problem.provider.partials(problem, t, u)

    if table.dim != problem.dim:
        raise ProviderError(['f'], f"provider returned dim {table.dim} for a dim {problem.dim} problem")

    for (a, b), value in table.items():
        if not np.all(np.isfinite(value)):
            raise DomainError(t, u, partial_name(a, b), detail='non-finite partial')

    return table


def second_derivative(problem: OdeProblem, table: PartialTable) -> Vector:
    """
    Return u'' = f_t + f_u·f, with the Jacobian applied on the left for systems.
    """
    if table.dim == 1:
        return np.array([table.f_t + table.f_u * table.f])
    else:
        return table.f_t + table.jacobian @ table.f


def _evaluate(closure: Callable, t: float, u: Vector, arg, name: str):
    try:
        with np.errstate(all='raise'):
            value = closure(t, arg)
    except (FloatingPointError, ZeroDivisionError, OverflowError) as e:
        raise DomainError(t, u, name, detail=str(e)) from e

    value = np.asarray(value, dtype=float)

    if not np.all(np.isfinite(value)):
        raise DomainError(t, u, name, detail='non-finite value')

    return value if value.ndim else float(value)
