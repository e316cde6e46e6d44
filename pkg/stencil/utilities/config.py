import dataclasses
import typing as t

from ..exceptions import ConfigError


D = t.TypeVar('D')


def from_section(cls: t.Type[D], obj: t.Any, section: str) -> D:
    """Build a dataclass from a JSON object, rejecting unknown keys.

    Lists are turned into tuples so frozen configs stay hashable.

    :raises ConfigError: If obj is not an object, has unknown keys, or the
        dataclass rejects the values.
    """
    if obj is None:
        return cls()
    if not isinstance(obj, dict):
        raise ConfigError(f'Section "{section}" must be an object.')
    known = {field.name for field in dataclasses.fields(cls)}
    unknown = sorted(set(obj) - known)
    if unknown:
        raise ConfigError(f'Unknown keys in "{section}": {", ".join(unknown)}.', details={'unknown': unknown})
    values = {key: tuple(value) if isinstance(value, list) else value for key, value in obj.items()}
    try:
        return cls(**values)
    except (TypeError, ValueError) as ex:
        raise ConfigError(f'Invalid "{section}": {ex}') from ex


def to_section(instance: t.Any) -> t.Dict[str, t.Any]:
    return {
        key: list(value) if isinstance(value, tuple) else value
        for key, value in dataclasses.asdict(instance).items()
    }
