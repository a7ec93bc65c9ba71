"""
Exceptions raised by mqrk.

Every exception derives from MqrkError and from the builtin exception that describes its nature,
so callers can catch either.
"""
import copy
from typing import Any, Optional, Sequence


class MqrkError(Exception):
    pass


class DomainError(MqrkError, ArithmeticError):
    """
    Evaluation point lies outside of the domain of the right-hand side or of one of its sub-expressions.

    @ivar t: Time of the evaluation or None if unknown at the raise site.
    @ivar u: State of the evaluation or None if unknown at the raise site.
    @ivar tag: Offending sub-expression, e.g. rhs, div, sqrt, pow.
    @ivar stage: 1-based stage index when raised inside a step.
    """
    def __init__(self, t: Optional[float] = None, u: Any = None, tag: str = 'rhs', *,
                 stage: Optional[int] = None, detail: Optional[str] = None) -> None:
        self.t = t
        self.u = u
        self.tag = tag
        self.stage = stage
        self.detail = detail
        super().__init__(self._message())

    def _message(self) -> str:
        parts = [f"{self.tag} is singular"]

        if self.t is not None:
            parts.append(f"at t={self.t!r}, u={_format_state(self.u)}")

        if self.stage is not None:
            parts.append(f"in stage {self.stage}")

        if self.detail:
            parts.append(f"({self.detail})")

        return ' '.join(parts)

    def at(self, t: float, u: Any, *, stage: Optional[int] = None) -> 'DomainError':
        """
        Return a copy with the evaluation point (and optionally the stage) filled in.

        Values already known are kept.
        """
        e = copy.copy(self)
        e.t = self.t if self.t is not None else t
        e.u = self.u if self.u is not None else u
        e.stage = self.stage if self.stage is not None else stage
        e.args = (e._message(),)
        return e


class ProviderError(MqrkError, LookupError):
    """
    Derivative provider cannot produce a complete table.
    """
    def __init__(self, missing: Sequence[str], reason: str = 'missing partial') -> None:
        self.missing = tuple(missing)
        super().__init__(f"{reason}: {', '.join(self.missing)}")


class UnsupportedFunction(MqrkError, TypeError):
    pass


class IntegrationAborted(MqrkError):
    """
    Integration stopped because a step left the domain.

    The partial trajectory is attached, the DomainError is chained as __cause__.
    """
    def __init__(self, message: str, trajectory) -> None:
        super().__init__(message)
        self.trajectory = trajectory


class UsageError(MqrkError, ValueError):
    pass


def _format_state(u) -> str:
    try:
        return '(' + ', '.join(f'{float(x):.17g}' for x in u) + ')'
    except TypeError:
        return repr(u)
