import json
import logging
import numbers
from dataclasses import dataclass, field
from pathlib import Path

import core
from core import FunctionSpec, ModMap, SampleGrid
from errors import ConfigError, ParameterError

logger = logging.getLogger(__name__)

DEFAULT_CLASSES = ("gs-exponential", "s-convex", "sub-b-s-convex", "exponential-kind")
DEFAULT_DIFF_A_VALUES = (0.1, 0.25, 0.5, 0.75, 1.0)

KNOWN_KEYS = {
    "functions", "modmaps", "function", "modmap", "s_values", "a_grid", "points_per_axis", "refine",
    "seed", "tolerance", "classes", "pairs", "diff_a_values", "candidate", "certificate_a",
    "bound_ii_factor", "interval", "scan_points", "g_bound", "deltas", "family", "minimize", "replay",
}


@dataclass(frozen=True)
class FunctionDef:
    name: str
    expression: str
    box: tuple


@dataclass(frozen=True)
class ModMapDef:
    name: str
    expression: str
    dimension: int


@dataclass(frozen=True)
class MinimizeSettings:
    starts: int = 4
    max_iters: int = 500
    tolerance: float = 1e-10
    method: str = "pgd"


@dataclass(frozen=True)
class RunConfig:
    """Validated run configuration; `source` keeps the JSON as loaded for the report echo."""
    functions: dict
    modmaps: dict
    function: str
    modmap: str = None
    s_values: tuple = (1.0,)
    a_values: tuple = core.a_grid(core.DEFAULT_A_STEPS)
    points_per_axis: int = core.DEFAULT_POINTS_PER_AXIS
    refine: int = 0
    seed: int = 0
    tolerance: float = core.DEFAULT_TOLERANCE
    classes: tuple = DEFAULT_CLASSES
    pairs: tuple = ()
    diff_a_values: tuple = DEFAULT_DIFF_A_VALUES
    candidate: tuple = None
    certificate_a: float = 0.99
    bound_ii_factor: str = "s-power"
    interval: tuple = None
    scan_points: int = 101
    g_bound: float = None
    deltas: tuple = (0.0, 0.1, 1.0)
    family: tuple = ()
    minimize: MinimizeSettings = MinimizeSettings()
    replay: str = None
    source: dict = field(default_factory=dict, compare=False, repr=False)


def _require(condition, message):
    if not condition:
        raise ConfigError(message)


def _number(value, key):
    _require(isinstance(value, numbers.Real) and not isinstance(value, bool), f"'{key}' must be a number, got {value!r}")
    return float(value)


def _integer(value, key, minimum=0):
    _require(isinstance(value, int) and not isinstance(value, bool) and value >= minimum,
             f"'{key}' must be an integer >= {minimum}, got {value!r}")
    return value


def _numbers(value, key):
    _require(isinstance(value, list) and value, f"'{key}' must be a non-empty list of numbers")
    return tuple(_number(v, key) for v in value)


def _validated(check, value, key):
    try:
        return check(value)
    except ParameterError as e:
        raise ConfigError(f"'{key}': {e}") from e


def _functions(raw):
    _require(isinstance(raw, list) and raw, "'functions' must be a non-empty list")
    functions = {}
    for entry in raw:
        _require(isinstance(entry, dict) and {"name", "expression", "box"} <= entry.keys(),
                 f"function entries need name, expression and box: {entry!r}")
        _require(entry["name"] not in functions, f"duplicate function name '{entry['name']}'")
        box = entry["box"]
        _require(isinstance(box, list) and box and all(isinstance(b, list) and len(b) == 2 for b in box),
                 f"box of '{entry['name']}' must be a list of [lo, hi] pairs")
        functions[entry["name"]] = FunctionDef(entry["name"], str(entry["expression"]),
                                               tuple((_number(lo, "box"), _number(hi, "box")) for lo, hi in box))
    return functions


def _modmaps(raw):
    _require(isinstance(raw, list), "'modmaps' must be a list")
    modmaps = {}
    for entry in raw:
        _require(isinstance(entry, dict) and {"name", "expression", "dimension"} <= entry.keys(),
                 f"modulating map entries need name, expression and dimension: {entry!r}")
        _require(entry["name"] not in modmaps, f"duplicate modulating map name '{entry['name']}'")
        modmaps[entry["name"]] = ModMapDef(entry["name"], str(entry["expression"]),
                                           _integer(entry["dimension"], "dimension", 1))
    return modmaps


def _a_values(raw):
    _require(isinstance(raw, dict) and len(raw) == 1 and raw.keys() <= {"steps", "values"},
             "'a_grid' must be {\"steps\": k} or {\"values\": [...]}")
    if "steps" in raw:
        return _validated(core.a_grid, _integer(raw["steps"], "a_grid.steps", 2), "a_grid")
    return tuple(_validated(core.check_a, a, "a_grid") for a in _numbers(raw["values"], "a_grid.values"))


def _minimize(raw):
    _require(isinstance(raw, dict) and raw.keys() <= {"starts", "max_iters", "tolerance", "method"},
             "'minimize' accepts starts, max_iters, tolerance and method")
    defaults = MinimizeSettings()
    method = raw.get("method", defaults.method)
    _require(method in ("pgd", "lbfgsb"), f"'minimize.method' must be 'pgd' or 'lbfgsb', got {method!r}")
    return MinimizeSettings(
        starts=_integer(raw.get("starts", defaults.starts), "minimize.starts", 1),
        max_iters=_integer(raw.get("max_iters", defaults.max_iters), "minimize.max_iters", 1),
        tolerance=_validated(core.check_tolerance, _number(raw.get("tolerance", defaults.tolerance), "minimize.tolerance"),
                             "minimize.tolerance"),
        method=method,
    )


def parse_config(data, base_dir="."):
    """
    Validate a configuration mapping

    Args:
        data: Parsed JSON object
        base_dir: Directory relative paths (replay) are resolved against

    Returns:
        RunConfig: The validated configuration

    Raises:
        ConfigError: Unknown keys, bad values or unresolved names
    """
    _require(isinstance(data, dict), "the configuration must be a JSON object")
    unknown = sorted(set(data) - KNOWN_KEYS)
    _require(not unknown, f"unknown configuration keys {unknown}")
    functions = _functions(data.get("functions"))
    modmaps = _modmaps(data.get("modmaps", []))

    function = data.get("function", next(iter(functions)))
    _require(function in functions, f"function '{function}' is not defined")
    modmap = data.get("modmap")
    _require(modmap is None or modmap in modmaps, f"modulating map '{modmap}' is not defined")
    dimension = len(functions[function].box)
    if modmap is not None:
        _require(modmaps[modmap].dimension == dimension,
                 f"modulating map '{modmap}' has dimension {modmaps[modmap].dimension}, function has {dimension}")

    values = {"functions": functions, "modmaps": modmaps, "function": function, "modmap": modmap, "source": data}
    if "s_values" in data:
        values["s_values"] = tuple(_validated(core.check_s, s, "s_values") for s in _numbers(data["s_values"], "s_values"))
    if "a_grid" in data:
        values["a_values"] = _a_values(data["a_grid"])
    if "points_per_axis" in data:
        values["points_per_axis"] = _integer(data["points_per_axis"], "points_per_axis", 1)
    if "refine" in data:
        values["refine"] = _integer(data["refine"], "refine")
    if "seed" in data:
        values["seed"] = _integer(data["seed"], "seed")
    if "tolerance" in data:
        values["tolerance"] = _validated(core.check_tolerance, _number(data["tolerance"], "tolerance"), "tolerance")
    if "classes" in data:
        classes = data["classes"]
        _require(isinstance(classes, list) and classes and set(classes) <= set(DEFAULT_CLASSES),
                 f"'classes' must be a non-empty subset of {list(DEFAULT_CLASSES)}")
        values["classes"] = tuple(classes)
    if "pairs" in data:
        pairs = data["pairs"]
        _require(isinstance(pairs, list), "'pairs' must be a list of {\"m1\": [...], \"m2\": [...]}")
        parsed = []
        for pair in pairs:
            _require(isinstance(pair, dict) and pair.keys() == {"m1", "m2"}, f"bad pair {pair!r}")
            m1, m2 = _numbers(pair["m1"], "pairs.m1"), _numbers(pair["m2"], "pairs.m2")
            _require(len(m1) == len(m2) == dimension, f"pair {pair!r} does not have dimension {dimension}")
            parsed.append((m1, m2))
        values["pairs"] = tuple(parsed)
    if "diff_a_values" in data:
        values["diff_a_values"] = tuple(_validated(core.check_a, a, "diff_a_values")
                                        for a in _numbers(data["diff_a_values"], "diff_a_values"))
    if "candidate" in data:
        candidate = _numbers(data["candidate"], "candidate")
        _require(len(candidate) == dimension, f"'candidate' must have dimension {dimension}")
        values["candidate"] = candidate
    if "certificate_a" in data:
        a = _validated(core.check_a, _number(data["certificate_a"], "certificate_a"), "certificate_a")
        _require(0 < a < 1, "'certificate_a' must lie strictly inside (0, 1)")
        values["certificate_a"] = a
    if "bound_ii_factor" in data:
        _require(data["bound_ii_factor"] in ("s-power", "a-power"), "'bound_ii_factor' must be 's-power' or 'a-power'")
        values["bound_ii_factor"] = data["bound_ii_factor"]
    if "interval" in data:
        interval = _numbers(data["interval"], "interval")
        _require(len(interval) == 2 and interval[0] <= interval[1], "'interval' must be [lo, hi]")
        values["interval"] = interval
    if "scan_points" in data:
        values["scan_points"] = _integer(data["scan_points"], "scan_points", 2)
    if "g_bound" in data:
        values["g_bound"] = _number(data["g_bound"], "g_bound")
    if "deltas" in data:
        deltas = _numbers(data["deltas"], "deltas")
        _require(all(d >= 0 for d in deltas), "'deltas' must be non-negative")
        values["deltas"] = deltas
    if "family" in data:
        family = data["family"]
        _require(isinstance(family, list) and family and all(name in functions for name in family),
                 "'family' must list defined function names")
        values["family"] = tuple(family)
    if "minimize" in data:
        values["minimize"] = _minimize(data["minimize"])
    if "replay" in data:
        _require(isinstance(data["replay"], str), "'replay' must be a path")
        values["replay"] = str(Path(base_dir) / data["replay"])
    return RunConfig(**values)


def load_config(path):
    """
    Load and validate a JSON run configuration

    Args:
        path: Path of the JSON file

    Returns:
        RunConfig: The validated configuration
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigError(f"cannot read configuration {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"configuration {path} is not valid JSON: {e}") from e
    config = parse_config(data, base_dir=path.parent)
    logger.info("Loaded configuration %s (function %s)", path, config.function)
    return config


def build_function(config, name=None):
    definition = config.functions[name or config.function]
    return FunctionSpec.from_text(definition.name, definition.expression, [list(b) for b in definition.box])


def build_modmap(config, name=None):
    """Selected modulating map; G = 0 when the configuration names none."""
    name = name or config.modmap
    if name is None:
        return ModMap.zero(len(config.functions[config.function].box))
    definition = config.modmaps[name]
    return ModMap.from_text(definition.name, definition.expression, definition.dimension)


def build_grid(config, seed=None):
    return SampleGrid(points_per_axis=config.points_per_axis, a_values=config.a_values,
                      s_values=config.s_values, seed=config.seed if seed is None else seed,
                      refine=config.refine)
