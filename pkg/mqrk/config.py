"""
Typed configuration of the command line front end.

Config is a dict-like class whose options are descriptors with defaults, docs and optional type
checking (enabled when typeguard is installed). Options convert the strings given on the command
line in resolve_value, so a config accepts both flag strings and the values of a JSON file.
"""
from collections import ChainMap, OrderedDict, UserDict
import inspect
import json
import logging
import os
import pathlib
from typing import (Any, Callable, ClassVar, Dict, Generic, List, Optional, Sequence, Tuple, Type, TypeVar, Union,
                    get_type_hints)

from .errors import UsageError

try:
    import typeguard
except ImportError:
    _HAS_TYPEGUARD = False
else:
    _HAS_TYPEGUARD = True


LOG = logging.getLogger(__name__)

if not _HAS_TYPEGUARD:
    LOG.warning("typeguard is not installed. Type checking is disabled.")


Self = TypeVar('Self')
OptionType = TypeVar('OptionType')

#: Environment variable capping the worker pool, 0 meaning one worker per CPU.
THREADS_ENV = 'MQRK_THREADS'


def _qualified_name(obj) -> str:
    """
    Return the qualified name (e.g. package.module.Type) for the given object.

    Builtins and typing constructs are named without their module.
    """
    if not inspect.isclass(obj) and getattr(obj, '__module__', None) == 'typing':
        return str(obj).replace('typing.', '')

    type_ = obj if inspect.isclass(obj) else type(obj)
    module = type_.__module__
    qualname = type_.__qualname__
    return qualname if module in ('typing', 'builtins') else f'{module}.{qualname}'


class Option(Generic[OptionType]):
    """
    Named attribute of a Config with an optional default value that can be type checked.

    >>> class C(Config):
    >>>     method: str = Option(default='mq-rk2')
    >>>     steps: List[int] = StepsOption(default=list, doc="Step counts")
    """
    def __init__(self, name: str = None, *, default: Union[Callable[[], OptionType], OptionType] = None,
                 doc: str = None) -> None:
        """
        @param name: Optional name. If omitted, will be set to the name of the attribute.
        @param default: Optional default value or callable that returns default.
            It's resolved on the first access and its type is verified.
        @param doc: Optional docstring for the option.
        """
        super().__init__()

        if doc is not None:
            self.__doc__ = doc

        self._name: str = name
        self._doc: Optional[str] = doc
        self._default: Union[Callable, OptionType] = default

        self._attr_name: str = None

        self._is_default_valid = None

    @property
    def name(self) -> str:
        return self._name

    @property
    def doc(self) -> Optional[str]:
        return self._doc

    def __get__(self: Self, instance: Optional['Config'], owner: Type['Config']) -> Union[Self, OptionType]:
        if instance is not None:
            if self.name in instance.data:
                return instance.data[self.name]
            else:
                d = self.resolve_value(instance, self.resolve_default(instance, self._default))
                instance.data[self.name] = d
                return d
        else:
            return self

    def __set__(self, instance: 'Config', value: OptionType) -> None:
        value = self.resolve_value(instance, value)
        instance.check_type(self.name, value, attr_name=self._attr_name)
        instance.data[self.name] = value

    def __set_name__(self, owner: Type['Config'], name: str) -> None:
        self._attr_name = name
        self._name = self._name if self._name is not None else name

    def resolve_default(self, instance: 'Config', default: OptionType) -> OptionType:
        """
        Called before default is set.

        A callable default is a factory unless it passes the type check itself.
        """
        if self._is_default_valid is None:
            if callable(default) and not _HAS_TYPEGUARD:
                self._is_default_valid = False
            else:
                try:
                    instance.check_type(f'{self.name}[default]', default, attr_name=self._attr_name)
                except TypeError:
                    self._is_default_valid = False
                else:
                    self._is_default_valid = True

        if self._is_default_valid:
            return default
        elif callable(default):
            d = default()
            instance.check_type(f'{self.name}[default]', d, attr_name=self._attr_name)
            return d
        else:
            raise TypeError(f"{default} is not allowed default for {self.name}")

    def resolve_value(self, instance: 'Config', value: OptionType):
        """
        Called before value is set. Subclasses override this to parse strings.
        """
        return value


class Config(UserDict):
    """
    UserDict that allows type-checked access to its options.

    >>> class MyConfig(Config):
    >>>     method: str = Option(default='mq-rk2')
    >>>
    >>> MyConfig().method, MyConfig().method == MyConfig()['method']
    'mq-rk2', True
    >>> c = MyConfig()
    >>> c.method = 42
    TypeError

    Every option can be accessed via the dict interface, by the corresponding attribute, or
    indirectly via UserDict.data. Only the indirect access bypasses type checks and conversions.
    """
    data: Dict
    _option_types: ClassVar[Dict[str, type]]  # attr name -> expected attr type
    _option_attrs: ClassVar[Dict[str, Option]]  # attr name -> attr
    _option_names: ClassVar[Dict[str, str]]  # option name -> attr name

    @classmethod
    def check_type(cls, name: str, value: OptionType, *, attr_name: str = None) -> None:
        """
        If name is an option, ensure that value matches its type.

        @param name: Name of the option to check.
        @param value: Value of the option to check.
        @param attr_name: If given, it will be used instead of look up.

        @raise TypeError: If value mismatches type for a given name.

        @note: If name does not point to an existing option, typing.Any is implied.
        """
        if not _HAS_TYPEGUARD:
            return

        if attr_name is None:
            attr_name = cls._option_names.get(name)

            if attr_name is None:
                return

        expected_type = cls._option_types.get(attr_name, Any)

        try:
            typeguard.check_type(value, expected_type)
        except typeguard.TypeCheckError:
            raise TypeError(f'type of {name} must be {_qualified_name(expected_type)}; '
                            f'got {_qualified_name(value)} instead') from None

    def __init_subclass__(cls, **kwargs):
        super().__init_subclass__(**kwargs)

        option_types = OrderedDict()
        option_attrs = OrderedDict()
        option_names = OrderedDict()

        try:
            option_types.update(cls._option_types)
            option_attrs.update(cls._option_attrs)
            option_names.update(cls._option_names)
        except AttributeError:
            pass

        type_hints = get_type_hints(cls)

        for attr_name, attr in cls.__dict__.items():
            if not isinstance(attr, Option):
                continue

            attr_type = type_hints.get(attr_name, Any)

            if attr._doc is None:
                attr.__doc__ = attr_type.__doc__

            option_types[attr_name] = attr_type
            option_attrs[attr_name] = attr
            option_names[attr.name] = attr_name

        cls._option_types = option_types
        cls._option_attrs = option_attrs
        cls._option_names = option_names

    #{ UserDict

    def __getitem__(self, key):
        option = self.__class__._option_attrs.get(key)

        if option is not None:
            return option.__get__(self, type(self))
        else:
            return super().__getitem__(key)

    def __setitem__(self, key, value):
        option = self.__class__._option_attrs.get(key)

        if option is not None:
            option.__set__(self, value)
        else:
            super().__setitem__(key, value)

    #}


#{ Options parsing command line strings

def _split(value: str) -> List[str]:
    return [item.strip() for item in value.split(',') if item.strip()]


class StepsOption(Option[List[int]]):
    """
    Step counts: "20,40,80" or a list of integers.
    """
    def resolve_value(self, instance, value):
        if isinstance(value, str):
            try:
                value = [int(item) for item in _split(value)]
            except ValueError:
                raise UsageError(f"--{self.name}: expected comma-separated integers, got {value!r}") from None
        elif isinstance(value, int) and not isinstance(value, bool):
            value = [value]

        if value is not None and any(n < 1 for n in value):
            raise UsageError(f"--{self.name}: step counts must be positive, got {value}")

        return super().resolve_value(instance, value)


class FloatListOption(Option[List[float]]):
    """
    Real numbers: "0.5,0.25", a doubling range "2^-6..2^-12", or a list.
    """
    def resolve_value(self, instance, value):
        if isinstance(value, str):
            value = self.parse(value)
        elif isinstance(value, (int, float)) and not isinstance(value, bool):
            value = [float(value)]
        elif isinstance(value, Sequence):
            value = [float(item) for item in value]

        return super().resolve_value(instance, value)

    def parse(self, value: str) -> List[float]:
        try:
            if '..' in value:
                first, last = (self._exponent(part) for part in value.split('..'))
                step = -1 if last < first else 1
                return [2.0 ** e for e in range(first, last + step, step)]

            return [float(item) for item in _split(value)]
        except ValueError:
            raise UsageError(f"--{self.name}: expected comma-separated numbers or 2^a..2^b, got {value!r}") from None

    @staticmethod
    def _exponent(part: str) -> int:
        base, sep, exponent = part.strip().partition('^')

        if base != '2' or not sep:
            raise ValueError(part)

        return int(exponent)


class WindowOption(Option[Tuple[float, float, float, float]]):
    """
    Rectangle "reMin:reMax:imMin:imMax" of the complex plane.
    """
    def resolve_value(self, instance, value):
        if isinstance(value, str):
            try:
                value = tuple(float(item) for item in value.split(':'))
            except ValueError:
                raise UsageError(f"--{self.name}: expected reMin:reMax:imMin:imMax, got {value!r}") from None

        if value is not None:
            value = tuple(float(item) for item in value)

            if len(value) != 4:
                raise UsageError(f"--{self.name}: expected 4 numbers, got {len(value)}")

            if value[0] >= value[1] or value[2] >= value[3]:
                raise UsageError(f"--{self.name}: empty window {value}")

        return super().resolve_value(instance, value)


class PathOption(Option[Optional[pathlib.Path]]):
    """
    Output path; "-" means standard output and resolves to None.
    """
    def resolve_value(self, instance, value):
        if isinstance(value, str):
            value = None if value == '-' else pathlib.Path(value)

        return super().resolve_value(instance, value)


class ChoiceOption(Option[str]):
    """
    One of a fixed set of strings.
    """
    def __init__(self, choices: Sequence[str], *args, **kwargs) -> None:
        super().__init__(*args, **kwargs)
        self._choices = tuple(choices)

    @property
    def choices(self) -> Tuple[str, ...]:
        return self._choices

    def resolve_value(self, instance, value):
        if value is not None and value not in self._choices:
            raise UsageError(f"--{self.name}: expected one of {', '.join(self._choices)}, got {value!r}")

        return super().resolve_value(instance, value)


def threads_from_env() -> int:
    """
    Worker count from MQRK_THREADS; 0 (auto) when unset.
    """
    value = os.environ.get(THREADS_ENV, '').strip()

    if not value:
        return 0

    try:
        threads = int(value)
    except ValueError:
        raise UsageError(f"{THREADS_ENV} must be an integer, got {value!r}") from None

    if threads < 0:
        raise UsageError(f"{THREADS_ENV} must not be negative, got {threads}")

    return threads

#}


COMMANDS = ('list-methods', 'solve', 'converge', 'compare', 'stability', 'shape', 'local-order', 'energy')
FORMATS = ('csv', 'markdown', 'json')


class CliConfig(Config):
    """
    Settings of one mqrk invocation.
    """
    command: Optional[str] = ChoiceOption(COMMANDS, doc="Command to run")
    method: Optional[str] = Option(doc="Method id")
    methods: Optional[List[str]] = Option(doc="Method ids for compare")
    problem: Optional[str] = Option(doc="Problem id")
    steps: Optional[List[int]] = StepsOption(doc="Step counts")
    t: Optional[float] = Option(doc="Time of the shape and local-order evaluation")
    u: Optional[List[float]] = FloatListOption(doc="State of the shape and local-order evaluation")
    hs: Optional[List[float]] = FloatListOption(doc="Step sizes of the local-order probe")
    h: Optional[float] = Option(doc="Step size, converted to the nearest step count")
    window: Tuple[float, float, float, float] = WindowOption(default=(-6.0, 2.0, -4.5, 4.5),
                                                             doc="Stability window reMin:reMax:imMin:imMax")
    step: float = Option(default=0.01, doc="Stability grid step")
    out: Optional[pathlib.Path] = PathOption(doc="Output file, - for stdout")
    format: str = ChoiceOption(FORMATS, default='csv', doc="Output format")
    threads: int = Option(default=threads_from_env, doc="Worker threads, 0 for one per CPU")
    verbose: int = Option(default=0, doc="Verbosity")

    @classmethod
    def from_file(cls, path: Union[str, pathlib.Path]) -> 'CliConfig':
        """
        Load a config from a JSON object whose keys are option names.

        @raise UsageError: If the file cannot be read or holds unknown keys.
        """
        try:
            with open(path, encoding='utf-8') as f:
                payload = json.load(f)
        except (OSError, ValueError) as e:
            raise UsageError(f"--config: cannot load {path}: {e}") from None

        if not isinstance(payload, dict):
            raise UsageError(f"--config: {path} must hold a JSON object")

        unknown = set(payload) - set(cls._option_names)

        if unknown:
            raise UsageError(f"--config: unknown keys in {path}: {', '.join(sorted(unknown))}")

        try:
            return cls(payload)
        except TypeError as e:
            raise UsageError(f"--config: {e}") from None


class ChainConfig(ChainMap):
    """
    Traverse maps and return the first non-default value for the attribute.
    If no value is found, the first allowed default is returned.

    >>> flags, file = CliConfig(method='mq-rk2'), CliConfig(method='rk2', problem='eg1')
    >>> c = ChainConfig(flags, file)
    >>> c.method, c.problem
    ('mq-rk2', 'eg1')
    """
    def __getattr__(self, item):
        error = f"type object '{type(self)}' has no attribute '{item}'"

        for i, mapping in enumerate(self.maps):
            try:
                option = mapping.__class__._option_attrs[item]
                break
            except (AttributeError, KeyError):
                continue
        else:
            raise AttributeError(error)

        for mapping in self.maps[i:]:
            try:
                return mapping.data[option.name]
            except KeyError:
                continue

        for mapping in self.maps[i:]:
            try:
                return getattr(mapping, item)
            except (TypeError, AttributeError):
                continue
        else:
            raise AttributeError(error)

    def flatten(self) -> Config:
        """
        Materialize the chain into a new config of the first map's type.
        """
        config_type = type(self.maps[0])
        result = config_type()

        for attr_name, option in config_type._option_attrs.items():
            result.data[option.name] = getattr(self, attr_name)

        return result
