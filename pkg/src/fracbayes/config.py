"""JSON configs mapped onto the package's dataclasses."""
from __future__ import annotations

import dataclasses
import json
import typing
from pathlib import Path


class ConfigError(ValueError):
    """Invalid configuration; ``field`` is the dotted path of the offender."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field


def _unwrap_optional(tp):
    if typing.get_origin(tp) is typing.Union:
        args = [a for a in typing.get_args(tp) if a is not type(None)]
        if len(args) == 1:
            return args[0]
    return tp


def build(cls, data, where: str = ""):
    """Instantiate dataclass ``cls`` from a (possibly nested) dict.

    Unknown keys and failed validation raise :class:`ConfigError` naming the field.
    """
    if isinstance(data, cls):
        return data
    if not isinstance(data, dict):
        raise ConfigError(where, f"expected an object for {cls.__name__}")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls) if f.init}
    kwargs = {}
    for key, value in data.items():
        path = f"{where}.{key}" if where else key
        if key not in names:
            raise ConfigError(path, "unknown field")
        tp = _unwrap_optional(hints[key])
        if dataclasses.is_dataclass(tp) and value is not None:
            value = build(tp, value, path)
        elif typing.get_origin(tp) in (list, tuple) and value is not None:
            if not isinstance(value, list):
                raise ConfigError(path, "expected a list")
            value = tuple(value) if typing.get_origin(tp) is tuple else list(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(where or cls.__name__, str(e)) from None


def to_dict(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: to_dict(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, (list, tuple)):
        return [to_dict(v) for v in obj]
    return obj


def load_json(path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError("", f"cannot read config {path}: {e.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError("", f"{path}: invalid JSON ({e})") from None
    if not isinstance(data, dict):
        raise ConfigError("", f"{path}: top level must be an object")
    return data
