"""Flat ``key=value`` configuration files.

Blank lines and ``#`` comments are ignored. Keys are the :class:`Params`
field names plus two paths, ``stoplist`` and ``codebook_cache``. Missing
keys take their defaults, so an empty file yields the default parameters.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from folkweave.model import FolkweaveError, Params

PATH_KEYS = ("stoplist", "codebook_cache")


class ConfigError(FolkweaveError):
    pass


class ParseError(ConfigError):
    def __init__(self, path, lineno: int, message: str):
        super().__init__(f"{path}:{lineno}: {message}")
        self.lineno = lineno


class RangeError(ConfigError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class Config:
    params: Params = field(default_factory=Params)
    stoplist: Path | None = None
    codebook_cache: Path | None = None


def _param_types() -> dict[str, type]:
    return {f.name: type(f.default) for f in dataclasses.fields(Params)}


def parse_config(text: str, source: str | Path = "<config>") -> Config:
    types = _param_types()
    values: dict[str, object] = {}
    paths: dict[str, Path] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        key, raw = key.strip(), raw.strip()
        if not sep or not key:
            raise ParseError(source, lineno, f"expected key=value, got {line!r}")
        if key in values or key in paths:
            raise ParseError(source, lineno, f"duplicate key {key!r}")
        if key in PATH_KEYS:
            if not raw:
                raise ParseError(source, lineno, f"{key} needs a path")
            paths[key] = Path(raw)
        elif key in types:
            values[key] = _convert(source, lineno, key, raw, types[key])
        else:
            raise ParseError(source, lineno, f"unknown key {key!r}")
    try:
        params = Params(**values)
    except ValueError as exc:
        bad = next((k for k in values if k in str(exc)), "config")
        raise RangeError(bad, str(exc)) from None
    return Config(params, paths.get("stoplist"), paths.get("codebook_cache"))


def _convert(source, lineno: int, key: str, raw: str, kind: type):
    try:
        if kind is int:
            return int(raw)
        return float(raw)
    except ValueError:
        raise ParseError(source, lineno, f"{key} expects {kind.__name__}, got {raw!r}") from None


def load_full_config(path: str | Path | None) -> Config:
    if path is None:
        return Config()
    path = Path(path)
    cfg = parse_config(path.read_text(encoding="utf-8"), path)
    # relative paths inside a config file are relative to that file
    fix = {k: path.parent / v for k in PATH_KEYS if (v := getattr(cfg, k)) is not None and not v.is_absolute()}
    return dataclasses.replace(cfg, **fix) if fix else cfg


def load_config(path: str | Path | None) -> Params:
    return load_full_config(path).params


def dump_config(p: Params) -> str:
    return "".join(f"{f.name}={getattr(p, f.name)}\n" for f in dataclasses.fields(Params))
