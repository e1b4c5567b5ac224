"""YAML run configuration with line-precise validation.

Layout::

    seed: 7                 # common keys apply to every command
    out: results
    fixture: suspension:full2
    fixture_params: {roof: 1.0}
    estimate:               # one optional section per command
      mode: classical
      t_max: 12
      deltas: [0.25, 0.125]

Command-line flags override section keys, which override common keys.
"""

from dataclasses import dataclass

import yaml


class ConfigError(ValueError):
    """Invalid configuration; the message starts with ``file:line:`` when a line is known."""


def _number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _int(v):
    return isinstance(v, int) and not isinstance(v, bool)


def _number_list(v):
    return isinstance(v, list) and len(v) > 0 and all(_number(x) for x in v)


TYPES = {
    "int": (_int, "an integer"),
    "number": (_number, "a number"),
    "str": (lambda v: isinstance(v, str), "a string"),
    "bool": (lambda v: isinstance(v, bool), "true or false"),
    "numbers": (_number_list, "a nonempty list of numbers"),
    "map": (lambda v: isinstance(v, dict), "a mapping"),
    "delta": (lambda v: _number(v) or isinstance(v, str), "a number or a scale name"),
}

COMMON = {"seed": "int", "jobs": "int", "out": "str", "fixture": "str", "fixture_params": "map"}
SECTIONS = {
    "fixtures": {},
    "estimate": {"mode": "str", "t_max": "number", "t_grid": "numbers", "dt": "number", "deltas": "numbers",
                 "depth": "int", "tolerance": "number"},
    "separate": {"t": "number", "dt": "number", "delta": "delta", "depth": "int", "exact_threshold": "int"},
    "falsify": {"notion": "str", "eps": "number", "delta": "delta", "pairs": "int", "iterations": "int",
                "knots": "int", "window": "number", "dt": "number", "margin": "number", "expect": "str"},
    "census": {"t_max": "number"},
    "verify": {"a": "number", "t_max": "number", "slack": "number", "tolerance": "number",
               "instances": "int", "presets": "str"},
}


@dataclass
class LoadedConfig:
    values: dict
    path: str = "<none>"


def _lines(node):
    """{key: (line, child_node)} for a mapping node."""
    out = {}
    for key_node, value_node in node.value:
        out[key_node.value] = (key_node.start_mark.line + 1, value_node)
    return out


def _check(path, line, key, kind, value):
    ok, what = TYPES[kind]
    if not ok(value):
        raise ConfigError(f"{path}:{line}: key '{key}' expects {what}, got {value!r}")


def load_config(path, command):
    """Read ``path`` and return the merged common + ``command`` values."""
    try:
        text = open(path, encoding="utf-8").read()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from exc
    return parse_config(text, command, str(path))


def parse_config(text, command, path="<config>"):
    if command not in SECTIONS:
        raise ConfigError(f"unknown command {command!r}")
    loader = yaml.SafeLoader(text)
    try:
        node = loader.get_single_node()
        data = loader.construct_document(node) if node is not None else {}
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        line = mark.line + 1 if mark else "?"
        raise ConfigError(f"{path}:{line}: YAML syntax error: {exc.problem}") from exc
    finally:
        loader.dispose()
    if node is None:
        return LoadedConfig({}, path)
    if not isinstance(node, yaml.MappingNode):
        raise ConfigError(f"{path}:{node.start_mark.line + 1}: top level must be a mapping")
    merged = {}
    lines = _lines(node)
    for key, (line, child) in lines.items():
        value = data[key]
        if key in COMMON:
            _check(path, line, key, COMMON[key], value)
            merged[key] = value
        elif key in SECTIONS:
            if not isinstance(child, yaml.MappingNode):
                raise ConfigError(f"{path}:{line}: section '{key}' must be a mapping")
        else:
            raise ConfigError(f"{path}:{line}: unknown key '{key}'")
    if command in lines:
        schema = SECTIONS[command]
        for key, (line, _) in _lines(lines[command][1]).items():
            value = data[command][key]
            if key in schema:
                _check(path, line, key, schema[key], value)
            elif key in COMMON:
                _check(path, line, key, COMMON[key], value)
            else:
                raise ConfigError(f"{path}:{line}: unknown key '{key}' in section '{command}'")
            merged[key] = value
    return LoadedConfig(merged, path)


def resolve(args, loaded, key, default=None):
    """Flag value if given, else config value, else default."""
    flag = getattr(args, key, None)
    if flag is not None:
        return flag
    return loaded.values.get(key, default)
