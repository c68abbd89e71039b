"""Config documents (YAML or JSON) with field and line diagnostics."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Mapping

import yaml

from germlab.offspring import DistributionError, OffspringDist, parse_dist
from germlab.statespace import Kernel, NonStochasticRow, SpaceTimeSet, kernel_from_spec, set_from_spec

_MISSING = object()


class ConfigError(ValueError):
    """Unusable config; ``field`` is a dotted path, ``line`` 1-based when known."""

    def __init__(self, message: str, field: str | None = None, line: int | None = None,
                 source: str | None = None):
        self.field, self.line, self.source = field, line, source
        where = ":".join(str(x) for x in (source, line) if x is not None)
        prefix = f"{where}: " if where else ""
        tag = f"field '{field}': " if field else ""
        super().__init__(f"{prefix}{tag}{message}")


def _join(path: tuple) -> str:
    out = ""
    for p in path:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out


def _build(node, loader, path: tuple, lines: dict):
    lines[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        out = {}
        for k_node, v_node in node.value:
            key = loader.construct_object(k_node, deep=True)
            out[key] = _build(v_node, loader, path + (key,), lines)
        return out
    if isinstance(node, yaml.SequenceNode):
        return [_build(v, loader, path + (i,), lines) for i, v in enumerate(node.value)]
    return loader.construct_object(node, deep=True)


def _line_map(text: str) -> tuple[Any, dict]:
    loader = yaml.SafeLoader(text)
    try:
        node = loader.get_single_node()
        if node is None:
            return None, {}
        lines: dict = {}
        return _build(node, loader, (), lines), lines
    finally:
        loader.dispose()


def parse_text(text: str, source: str | None = None, fmt: str | None = None) -> "Section":
    """Parse a config document; ``fmt`` is ``json``, ``yaml`` or guessed."""
    if fmt is None:
        fmt = "json" if text.lstrip().startswith("{") and source and source.endswith(".json") else "yaml"
    if fmt == "json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(exc.msg, line=exc.lineno, source=source) from None
        try:
            _, lines = _line_map(text)
        except yaml.YAMLError:
            lines = {}
    else:
        try:
            data, lines = _line_map(text)
        except yaml.MarkedYAMLError as exc:
            mark = exc.problem_mark
            raise ConfigError(str(exc.problem), line=mark.line + 1 if mark else None, source=source) from None
        except yaml.YAMLError as exc:
            raise ConfigError(str(exc), source=source) from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping", line=1, source=source)
    return Section(data, (), lines, source)


def load_config(path: str | Path) -> "Section":
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", source=str(path)) from None
    return parse_text(text, str(path), "json" if path.suffix == ".json" else "yaml")


def _dist_literal(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, Mapping):
        # YAML reads an unquoted {0:1/4,2:3/4} as keys "0:1/4" with null values
        parts = [str(k) if v is None else f"{k}:{v}" for k, v in value.items()]
        return "{" + ",".join(parts) + "}"
    raise DistributionError(f"expected a distribution literal, got {value!r}")


def to_fraction(value) -> Fraction:
    if isinstance(value, bool):
        raise ValueError("expected a number")
    if isinstance(value, float):
        return Fraction(repr(value))
    return Fraction(str(value).strip()) if isinstance(value, str) else Fraction(value)


@dataclass
class Section:
    """A mapping inside a config plus its location, for typed lookups."""

    data: dict
    path: tuple = ()
    lines: dict = field(default_factory=dict, repr=False)
    source: str | None = None

    def error(self, message: str, key=None) -> ConfigError:
        path = self.path + ((key,) if key is not None else ())
        line = None
        for n in range(len(path), -1, -1):
            if path[:n] in self.lines:
                line = self.lines[path[:n]]
                break
        return ConfigError(message, _join(path) or None, line, self.source)

    def __contains__(self, key) -> bool:
        return key in self.data

    def raw(self, key, default=_MISSING):
        if key in self.data:
            return self.data[key]
        if default is _MISSING:
            raise self.error("required field is missing", key)
        return default

    def get(self, key, convert: Callable[[Any], Any] = lambda x: x, default=_MISSING):
        value = self.raw(key, default)
        if value is default and default is not _MISSING:
            return default
        try:
            return convert(value)
        except ConfigError:
            raise
        except (ValueError, TypeError, KeyError, ZeroDivisionError, ArithmeticError) as exc:
            raise self.error(str(exc) or type(exc).__name__, key) from None

    def int(self, key, default=_MISSING, minimum: int | None = None) -> int:
        def conv(v):
            try:
                ok = not isinstance(v, bool) and isinstance(v, (int, str)) and int(v) == float(v)
            except ValueError:
                ok = False
            if not ok:
                raise ValueError(f"expected an integer, got {v!r}")
            return int(v)

        value = self.get(key, conv, default)
        if minimum is not None and value is not None and value < minimum:
            raise self.error(f"must be at least {minimum}, got {value}", key)
        return value

    def number(self, key, default=_MISSING) -> float:
        def conv(v):
            if isinstance(v, bool):
                raise ValueError("expected a number")
            return float(to_fraction(v))

        return self.get(key, conv, default)

    def fraction(self, key, default=_MISSING) -> Fraction:
        return self.get(key, to_fraction, default)

    def string(self, key, default=_MISSING, choices=None) -> str:
        value = self.get(key, str, default)
        if choices is not None and value not in choices:
            raise self.error(f"expected one of {sorted(choices)}, got {value!r}", key)
        return value

    def boolean(self, key, default=_MISSING) -> bool:
        def conv(v):
            if not isinstance(v, bool):
                raise ValueError(f"expected true or false, got {v!r}")
            return v

        return self.get(key, conv, default)

    def dist(self, key, default=_MISSING) -> OffspringDist:
        return self.get(key, lambda v: parse_dist(_dist_literal(v)), default)

    def section(self, key, default=_MISSING) -> "Section":
        value = self.raw(key, default)
        if value is None or (value is default and default is not _MISSING):
            return Section({}, self.path + (key,), self.lines, self.source)
        if not isinstance(value, dict):
            raise self.error("expected a mapping", key)
        return Section(value, self.path + (key,), self.lines, self.source)

    def sections(self, key) -> list["Section"]:
        value = self.raw(key, [])
        if value is None:
            return []
        if isinstance(value, dict):
            value = [value]
        if not isinstance(value, list):
            raise self.error("expected a list of mappings", key)
        out = []
        for i, item in enumerate(value):
            here = Section(item if isinstance(item, dict) else {}, self.path + (key, i), self.lines, self.source)
            if not isinstance(item, dict):
                raise here.error("expected a mapping")
            out.append(here)
        return out

    def kernel(self, key="kernel") -> Kernel:
        spec = self.section(key)
        if not spec.data:
            raise self.error("required field is missing", key)
        kind = spec.string("kind", choices={"lattice", "tree", "explicit"})
        if kind != "explicit":
            spec.int("R", minimum=1)
            spec.int("d" if kind == "lattice" else "b", 1 if kind == "lattice" else 2, minimum=1)
            spec.string("boundary", "kill", choices={"kill", "reflect"})
        try:
            return kernel_from_spec(spec.data)
        except NonStochasticRow as exc:
            raise spec.error(str(exc), "rows") from None
        except KeyError as exc:
            raise spec.error("required field is missing", exc.args[0]) from None
        except (ValueError, TypeError) as exc:
            raise self.error(str(exc), key) from None

    def space_set(self, key, kernel: Kernel, default=_MISSING) -> SpaceTimeSet:
        if key not in self.data and default is not _MISSING:
            return default
        spec = self.section(key)
        try:
            return set_from_spec(spec.data or None, kernel)
        except KeyError as exc:
            raise spec.error("required field is missing", exc.args[0]) from None
        except (ValueError, TypeError) as exc:
            raise self.error(str(exc), key) from None

    def state(self, key, kernel: Kernel, default=_MISSING):
        value = self.raw(key, default)
        if value is default and default is not _MISSING:
            return kernel.origin if value is None else value
        label = tuple(value) if isinstance(value, list) else value
        if label not in kernel.index:
            raise self.error(f"state {value!r} is not in the window of {kernel.name}", key)
        return label

    def unknown(self, allowed) -> None:
        extra = sorted(set(self.data) - set(allowed), key=str)
        if extra:
            raise self.error(f"unknown field (allowed: {', '.join(sorted(allowed))})", extra[0])

    def echo(self) -> dict:
        return self.data
