"""Scenario files: YAML with units spelled out in every field name.

A scenario looks like::

    noise_var_w: 1.0e-12
    max_offload: 3
    alpha_lower: 0.95
    alpha_upper: 0.95
    upper: {bandwidth_hz: 1.0e7, ...}
    lower_defaults: {bandwidth_hz: 1.0e7, ...}   # optional, merged into each entry
    lower:
      - {data_len_bits: 40000, task_cycles: 40000}
      - ...

Validation errors carry the file name and line of the offending field.
"""

from __future__ import annotations

import dataclasses
from importlib import resources
from pathlib import Path

import yaml

from drmec.errors import DomainError
from drmec.model import LowerUavParams, ScenarioConfig, UpperUavParams

BUNDLED = ("paper_defaults",)

_TOP_FIELDS = ("noise_var_w", "max_offload", "alpha_lower", "alpha_upper")
_LOWER_FIELDS = tuple(f.name for f in dataclasses.fields(LowerUavParams))
_UPPER_FIELDS = tuple(f.name for f in dataclasses.fields(UpperUavParams))


class ScenarioError(DomainError):
    def __init__(self, source: str, line: int | None, message: str):
        where = f"{source}:{line}" if line else source
        super().__init__(f"{where}: {message}")
        self.source = source
        self.line = line


def _line_map(node, path=(), out=None) -> dict:
    """Map key paths to 1-based source lines."""
    out = {} if out is None else out
    out[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        for key, value in node.value:
            sub = path + (key.value,)
            out[sub] = key.start_mark.line + 1
            _line_map(value, sub, out)
            out[sub] = key.start_mark.line + 1
    elif isinstance(node, yaml.SequenceNode):
        for i, item in enumerate(node.value):
            _line_map(item, path + (i,), out)
    return out


class _Reader:
    def __init__(self, source: str, lines: dict):
        self.source = source
        self.lines = lines

    def fail(self, path: tuple, message: str):
        line = None
        for cut in range(len(path), -1, -1):
            if path[:cut] in self.lines:
                line = self.lines[path[:cut]]
                break
        label = ".".join(str(p) for p in path)
        raise ScenarioError(self.source, line, f"{label}: {message}" if label else message)

    def number(self, data: dict, path: tuple, key: str):
        if key not in data:
            self.fail(path, f"missing required field {key!r}")
        value = data[key]
        if isinstance(value, bool):
            self.fail(path + (key,), f"expected a number, got {value!r}")
        if isinstance(value, str):
            try:
                value = float(value)
            except ValueError:
                self.fail(path + (key,), f"expected a number, got {value!r}")
        if not isinstance(value, (int, float)):
            self.fail(path + (key,), f"expected a number, got {value!r}")
        return value

    def mapping(self, data, path: tuple) -> dict:
        if not isinstance(data, dict):
            self.fail(path, "expected a mapping")
        return data

    def build(self, cls, data: dict, path: tuple, fields: tuple):
        unknown = sorted(set(data) - set(fields))
        if unknown:
            self.fail(path + (unknown[0],), f"unknown field (expected one of {', '.join(fields)})")
        kwargs = {name: self.number(data, path, name) for name in fields}
        try:
            return cls(**kwargs)
        except DomainError as exc:
            field = str(exc).split(" ", 1)[0]
            self.fail(path + ((field,) if field in fields else ()), str(exc))


def parse_scenario(text: str, source: str = "<string>") -> ScenarioConfig:
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ScenarioError(source, mark.line + 1 if mark else None, f"parse error: {exc}") from None
    if node is None:
        raise ScenarioError(source, None, "empty scenario")
    rd = _Reader(source, _line_map(node))
    data = rd.mapping(data, ())
    allowed = set(_TOP_FIELDS) | {"upper", "lower", "lower_defaults", "name", "description"}
    unknown = sorted(set(data) - allowed)
    if unknown:
        rd.fail((unknown[0],), "unknown top-level field")

    for section in ("upper", "lower"):
        if section not in data:
            rd.fail((), f"missing required section {section!r}")
    upper = rd.build(UpperUavParams, rd.mapping(data.get("upper"), ("upper",)), ("upper",), _UPPER_FIELDS)
    defaults = rd.mapping(data.get("lower_defaults", {}) or {}, ("lower_defaults",))
    entries = data.get("lower")
    if not isinstance(entries, list) or not entries:
        rd.fail(("lower",), "expected a non-empty list of lower-layer UAVs")
    lower = []
    for i, entry in enumerate(entries):
        entry = rd.mapping(entry, ("lower", i))
        lower.append(rd.build(LowerUavParams, {**defaults, **entry}, ("lower", i), _LOWER_FIELDS))

    top = {key: rd.number(data, (), key) for key in _TOP_FIELDS}
    try:
        return ScenarioConfig(lower=tuple(lower), upper=upper, **top)
    except DomainError as exc:
        field = str(exc).split(" ", 1)[0]
        rd.fail((field,) if field in _TOP_FIELDS else (), str(exc))


def load_scenario(path) -> ScenarioConfig:
    """Load a scenario file, or a bundled scenario by name (``paper_defaults``)."""
    p = Path(path)
    if not p.exists() and str(path) in BUNDLED:
        text = resources.files("drmec").joinpath("scenarios", f"{path}.yaml").read_text()
        return parse_scenario(text, source=f"{path}.yaml")
    try:
        text = p.read_text()
    except OSError as exc:
        raise ScenarioError(str(path), None, f"cannot read scenario: {exc.strerror}") from None
    return parse_scenario(text, source=str(path))


def scenario_to_dict(cfg: ScenarioConfig) -> dict:
    return {
        "noise_var_w": cfg.noise_var_w,
        "max_offload": cfg.max_offload,
        "alpha_lower": cfg.alpha_lower,
        "alpha_upper": cfg.alpha_upper,
        "upper": dataclasses.asdict(cfg.upper),
        "lower": [dataclasses.asdict(u) for u in cfg.lower],
    }


def dump_scenario(cfg: ScenarioConfig, path) -> None:
    Path(path).write_text(yaml.safe_dump(scenario_to_dict(cfg), sort_keys=False))
