"""
Asynchronous runtime of the command line front end.

An App owns the event loop and a thread pool; a SweepService fans independent integrations out to
that pool and collects their results in submission order.
"""
import abc
import asyncio
import collections.abc
import concurrent.futures
import contextlib
import inspect
import logging
import os
import signal
import sys
from typing import Any, Awaitable, Callable, Dict, Generic, List, Optional, Sequence, Type, TypeVar, Union
import weakref

from .config import Config
from .utils import TaskGroup

LOG = logging.getLogger(__name__)


Self = TypeVar('Self')


class Runnable(collections.abc.Awaitable):
    """
    Wrapper around asyncio.Task with a distinct flow:
      - `initialize` is called only once and may abort execution
      - `main` is where all the work happens
      - `cleanup` is called only once after main returns or raises

    Completion due to exception (including cancellation) is an abort.

    @cvar LOG: For each subclass new LOG variable is automatically created unless explicitly set.
    """
    LOG: logging.Logger = LOG.getChild('Runnable')

    def __init_subclass__(cls, **kwargs):
        super().__init_subclass__(**kwargs)

        if 'LOG' not in cls.__dict__:
            cls.LOG = logging.getLogger(f'{cls.__module__}.{cls.__qualname__}')

    def __init__(self, *, name: str = None) -> None:
        self._name = name or type(self).__name__
        self._run_f: Optional[asyncio.Future] = None
        self._should_stop = False
        self._is_initialized = False
        self._is_aborted = False

    @property
    def name(self) -> str:
        return self._name

    @property
    def should_stop(self) -> bool:
        return self._should_stop

    @property
    def is_initialized(self) -> bool:
        return self._is_initialized

    @property
    def is_aborted(self) -> bool:
        return self._is_aborted

    @property
    def is_started(self) -> bool:
        return self._run_f is not None

    @property
    def is_alive(self) -> bool:
        return bool(self._run_f) and not self._run_f.done()

    @property
    def is_done(self) -> bool:
        return bool(self._run_f) and self._run_f.done()

    async def initialize(self) -> None:
        """
        Called only once before `main`. Overrides must call super() or abort().
        """
        self.LOG.debug("\"%s\" initialized.", self.name)
        self._is_initialized = True

    @abc.abstractmethod
    async def main(self):
        pass

    async def cleanup(self, exc_type=None, exc_val=None, exc_tb=None) -> None:
        """
        Called only once after `main` exits.
        """
        pass

    def start(self: Self, *, loop: asyncio.AbstractEventLoop = None) -> Self:
        """
        Schedule execution.

        @raise RuntimeError: If started more than once.
        """
        if self._run_f:
            raise RuntimeError(f"\"{self.name}\" can only be started once")

        self.LOG.debug("\"%s\" started.", self.name)
        self._run_f = asyncio.ensure_future(self.run(), loop=loop)
        self._run_f.add_done_callback(self.on_run_done)

        if self.should_stop:
            self._run_f.cancel()

        return self

    async def run(self):
        await self.initialize()

        if not self.is_initialized and not self.should_stop:
            raise NotImplementedError("either super or abort()/stop() must be called in overridden initialize()")
        elif self.should_stop:
            raise asyncio.CancelledError()

        try:
            result = await self.main()
        except BaseException:
            await self.cleanup(*sys.exc_info())
            raise
        else:
            await self.cleanup()

        return result

    def stop(self) -> None:
        """
        Stop by cancelling the wrapped task.
        """
        self.LOG.debug("\"%s\" stopped.", self.name)

        if not self._should_stop:
            self._should_stop = True

            if self._run_f:
                self._run_f.cancel()

    def abort(self) -> None:
        """
        Same as stop, but sets the abort flag.
        """
        self.LOG.debug("\"%s\" aborted.", self.name)
        self._is_aborted = True
        self.stop()

    def on_run_done(self, f: asyncio.Future) -> None:
        if f.cancelled():
            if not self._should_stop:
                self.LOG.info("\"%s\" task was manually cancelled.", self.name)
        elif f.exception() is not None:
            self.LOG.debug("\"%s\" task failed with %r.", self.name, f.exception())
            self._is_aborted = True
        else:
            self.LOG.debug("\"%s\" task finished.", self.name)

        self._should_stop = True

    async def __aenter__(self):
        return self.start()

    async def __aexit__(self, exc_type, exc_val, exc_tb):
        self.stop()

        with contextlib.suppress(asyncio.CancelledError):
            await self

    def __await__(self):
        if self._run_f:
            return self._run_f.__await__()
        else:
            raise RuntimeError(f"\"{self.name}\" is not running")

    def __repr__(self):
        return f'<{type(self).__name__}(name={self.name})>'


AppType = TypeVar('AppType', bound='App')
ConfigType = TypeVar('ConfigType', bound=Config)


class App(Runnable, Generic[ConfigType]):
    """
    Root runnable: owns the event loop of exec() and the worker pool used by services.

    The pool size comes from the config's threads option, 0 meaning one worker per CPU.
    App handles SIGINT and SIGTERM by stopping itself.

    >>> App(SweepService(jobs), config=config).exec()
    """
    _current_apps: Dict[weakref.ReferenceType, 'App'] = weakref.WeakValueDictionary()

    @classmethod
    def current_app(cls: Type[AppType], loop: asyncio.AbstractEventLoop = None) -> Optional[AppType]:
        """
        Return the App of the given or the running event loop.
        """
        try:
            loop = loop or asyncio.get_running_loop()
        except RuntimeError:
            cls.LOG.debug("There is no running asyncio event loop.")
            return None

        return cls._current_apps.get(weakref.ref(loop))

    def __init__(self, target: Union[Callable[[], Awaitable], Awaitable, Runnable] = None, *,
                 config: ConfigType = None, name: str = None) -> None:
        """
        @param target: Coroutine function, awaitable or Runnable that will be awaited. If None, main must be overridden.
        """
        super().__init__(name=name)
        self._target = target
        self._config = config
        self._loop_ref = None
        self._executor: Optional[concurrent.futures.ThreadPoolExecutor] = None

    @property
    def config(self) -> Optional[ConfigType]:
        return self._config

    @property
    def max_workers(self) -> int:
        threads = getattr(self._config, 'threads', 0) if self._config is not None else 0
        return threads or os.cpu_count() or 1

    @property
    def executor(self) -> concurrent.futures.ThreadPoolExecutor:
        if self._executor is None:
            raise RuntimeError(f"\"{self.name}\" is not initialized")

        return self._executor

    def exec(self, *, loop: asyncio.AbstractEventLoop = None):
        """
        Start and await completion on a dedicated event loop (or the given one).

        CancelledError is an expected way to complete execution and yields None.
        """
        owns_loop = loop is None
        loop = loop or asyncio.new_event_loop()

        try:
            return loop.run_until_complete(self.start(loop=loop))
        except asyncio.CancelledError:
            self.LOG.info("\"%s\" is cancelled.", self.name)
        finally:
            if owns_loop:
                loop.close()

    #{ Runnable

    def start(self, *, loop=None):
        loop = loop or asyncio.get_running_loop()
        self._loop_ref = weakref.ref(loop)

        if self._loop_ref in self.__class__._current_apps:
            raise RuntimeError("only one app can be active in an event loop")

        self.__class__._current_apps[self._loop_ref] = self
        return super().start(loop=loop)

    def on_run_done(self, f):
        super().on_run_done(f)
        self.__class__._current_apps.pop(self._loop_ref, None)

    async def initialize(self):
        self._executor = concurrent.futures.ThreadPoolExecutor(max_workers=self.max_workers,
                                                               thread_name_prefix=self.name)
        self.LOG.debug("\"%s\" runs %s workers.", self.name, self.max_workers)
        loop = asyncio.get_running_loop()

        try:
            loop.add_signal_handler(signal.SIGINT, self.stop)
            loop.add_signal_handler(signal.SIGTERM, self.stop)
        except (NotImplementedError, RuntimeError, ValueError):
            self.LOG.debug("%s does not implement add_signal_handler", loop)

        await super().initialize()

    async def main(self):
        if self._target:
            if isinstance(self._target, Runnable) and not self._target.is_started:
                return await self._target.start()
            elif inspect.isawaitable(self._target):
                return await self._target
            else:
                return await self._target()

    async def cleanup(self, exc_type=None, exc_val=None, exc_tb=None):
        loop = asyncio.get_running_loop()

        with contextlib.suppress(NotImplementedError, RuntimeError, ValueError):
            loop.remove_signal_handler(signal.SIGINT)
            loop.remove_signal_handler(signal.SIGTERM)

        if self._executor is not None:
            self._executor.shutdown(wait=True, cancel_futures=True)

    #}


class Service(Runnable, Generic[AppType, ConfigType]):
    """
    Asynchronous task of the current App.
    """
    def __init__(self, *, app: AppType = None, config: ConfigType = None, name: str = None) -> None:
        """
        @param app: App that owns the service. If None, will be resolved at the beginning of the service's execution.
        @param config: Custom config.
        """
        super().__init__(name=name)
        self._app = app
        self._config = config

    @property
    def app(self) -> Optional[AppType]:
        return self._app

    @property
    def config(self) -> Optional[ConfigType]:
        return self._config or self.app.config

    #{ Runnable

    async def run(self, *args, **kwargs):
        current_app = App.current_app()

        if current_app is None:
            raise RuntimeError(f"{self.name} must run inside an app")
        elif self._app is None:
            self._app = current_app
        elif self._app is not current_app:
            raise RuntimeError(f"{self.name} should run in {self._app.name} but runs in {current_app.name} instead")

        return await super().run(*args, **kwargs)

    #}


class SweepService(Service):
    """
    Run independent jobs in the app's worker pool.

    The result is a list in job order; a job that raised contributes its exception.
    """
    def __init__(self, jobs: Sequence[Callable[[], Any]], **kwargs) -> None:
        super().__init__(**kwargs)
        self._jobs = list(jobs)

    async def main(self) -> List[Any]:
        loop = asyncio.get_running_loop()

        async with TaskGroup() as tasks:
            for job in self._jobs:
                tasks.add_task(loop.run_in_executor(self.app.executor, job))

            results = await tasks.gather()

        failed = sum(isinstance(r, BaseException) for r in results)
        self.LOG.debug("\"%s\" ran %s jobs, %s failed.", self.name, len(results), failed)
        return results


def run_sweep(jobs: Sequence[Callable[[], Any]], *, config: Optional[Config] = None) -> List[Any]:
    """
    Run jobs concurrently in a fresh App and return their results (or exceptions) in job order.
    """
    return App(SweepService(jobs, name='sweep'), config=config, name='mqrk').exec()
