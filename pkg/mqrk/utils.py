import asyncio
import logging
from typing import Any, Awaitable, Collection, List


LOG = logging.getLogger(__name__)


class TaskGroup(Collection[asyncio.Future]):
    """
    Track tasks of a sweep; cancel and await the pending ones upon exit.

    Tasks leave the group when they complete, while gather returns every result in the order the
    tasks were added, regardless of the order in which they complete.

    >>> async def run(jobs):
    >>>     async with TaskGroup() as tasks:
    >>>         for job in jobs:
    >>>             tasks.add_task(loop.run_in_executor(executor, job))
    >>>
    >>>         return await tasks.gather()
    """
    LOG = LOG.getChild('TaskGroup')

    def __init__(self) -> None:
        self._tasks = set()
        self._submitted: List[asyncio.Future] = []

    def add_task(self, coro_or_future: Awaitable) -> asyncio.Future:
        """
        Schedule a task into the current loop and add it to the group.
        """
        task = asyncio.ensure_future(coro_or_future)

        if task not in self._tasks:
            self._tasks.add(task)
            self._submitted.append(task)
            task.add_done_callback(self._on_task_done)

        return task

    def remove_task(self, task: asyncio.Future) -> None:
        task.remove_done_callback(self._on_task_done)
        self._tasks.discard(task)

    def _on_task_done(self, task) -> None:
        self.LOG.debug("Done %s.", task)
        self.remove_task(task)

    async def gather(self, *, return_exceptions: bool = True) -> List[Any]:
        """
        Await every task added so far and return their results in submission order.

        @param return_exceptions: If True, a failed task contributes its exception instead of raising it.
        """
        return await asyncio.gather(*self._submitted, return_exceptions=return_exceptions)

    async def __aenter__(self):
        return self

    async def __aexit__(self, exc_type, exc_val, exc_tb):
        if self._tasks:
            for t in self._tasks:
                self.LOG.debug("Cancelling %s.", t)
                t.cancel()

            await asyncio.wait(self._tasks, return_when=asyncio.ALL_COMPLETED)
            self._tasks = set()

        self._submitted = []

    def __len__(self):
        return len(self._tasks)

    def __iter__(self):
        for t in frozenset(self._tasks):
            yield t

    def __contains__(self, task):
        return task in self._tasks

    def __del__(self):
        if self._tasks:
            self.LOG.error("Destroying TaskGroup with pending tasks: %s.", self._tasks)
