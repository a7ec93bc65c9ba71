import asyncio
import functools


#: Seconds an async test may run; sweeps in the worker pool need more than the event loop alone.
DEFAULT_TIMEOUT = 5.0


def with_timeout(timeout=DEFAULT_TIMEOUT):
    def decorator(coro):
        @functools.wraps(coro)
        async def wrapper(self, *args, **kwargs):
            return await asyncio.wait_for(coro(self, *args, **kwargs), timeout=timeout)

        return wrapper
    return decorator
