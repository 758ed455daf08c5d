"""File formats: CSV datasets, run configuration, and JSON reports.

Everything here is deliberately strict and deterministic. Readers
reject rather than repair, naming the file, row, and column of the
first problem. Writers always produce byte-identical output for the
same inputs: fixed column order, fixed float formatting (17
significant digits, enough to round-trip a double), sorted nothing
that carries meaning. Files land via write-to-temp-then-rename so a
crash never leaves a half-written report behind.
"""

import configparser
import csv
import hashlib
import io as _io
import json
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cma import OptimizerConfig
from .difficulty import EpisodeLog
from .population import AblationFlags, PopulationParams, SimParams
from .series import LevelSeries
from .synthetic import MOVES_BUDGET

EPISODES_COLUMNS = ("level_id", "episode_id", "cleared_goals_frac", "moves_used",
                    "moves_budget_human", "passed_with_human_budget",
                    "moves_left_on_pass")
LEVELS_COLUMNS = ("level_id", "human_pass_rate", "human_churn_rate")
DIFFICULTIES_COLUMNS = ("level_id", "difficulty")

FLOAT_FORMAT = ".17g"


class SchemaError(ValueError):
    """A dataset file violates its schema; knows where."""

    def __init__(self, path, row, message):
        self.path = str(path)
        self.row = row
        location = f"{self.path}:{row}" if row is not None else self.path
        super().__init__(f"{location}: {message}")


class ConfigError(ValueError):
    """A configuration value is unknown, malformed, or out of range."""


# ---------------------------------------------------------------------------
# low-level helpers

def atomic_write_text(path, text: str):
    """Write a whole file, appearing atomically at its final name."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def format_float(value: float) -> str:
    return format(float(value), FLOAT_FORMAT)


def _read_rows(path, columns):
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise SchemaError(path, 1, f"empty file, expected header {','.join(columns)}")
        if header != list(columns):
            raise SchemaError(path, 1, f"header must be {','.join(columns)}, "
                                       f"got {','.join(header)}")
        rows = []
        for row_number, row in enumerate(reader, start=2):
            if len(row) != len(columns):
                raise SchemaError(path, row_number,
                                  f"expected {len(columns)} fields, got {len(row)}")
            rows.append((row_number, row))
    return rows


def _parse_int(text, path, row, column, minimum=None):
    try:
        value = int(text)
    except ValueError:
        raise SchemaError(path, row, f"{column} must be an integer, got {text!r}") from None
    if minimum is not None and value < minimum:
        raise SchemaError(path, row, f"{column} must be >= {minimum}, got {value}")
    return value


def _parse_float(text, path, row, column):
    try:
        value = float(text)
    except ValueError:
        raise SchemaError(path, row, f"{column} must be a number, got {text!r}") from None
    if not math.isfinite(value):
        raise SchemaError(path, row, f"{column} must be finite, got {text!r}")
    return value


def _parse_rate(text, path, row, column):
    value = _parse_float(text, path, row, column)
    if not 0.0 <= value <= 1.0:
        raise SchemaError(path, row, f"{column} {value:g} outside [0, 1]")
    return value


def _parse_flag(text, path, row, column):
    if text not in ("0", "1"):
        raise SchemaError(path, row, f"{column} must be 0 or 1, got {text!r}")
    return text == "1"


def _write_csv(path, columns, rows):
    buffer = _io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    writer.writerows(rows)
    atomic_write_text(path, buffer.getvalue())


# ---------------------------------------------------------------------------
# dataset files

def read_episodes_csv(path) -> list:
    """Load and validate agent episodes; returns EpisodeLog records."""
    episodes = []
    for row_number, row in _read_rows(path, EPISODES_COLUMNS):
        (level_id, episode_id, cleared, moves_used,
         budget, passed, moves_left) = row
        level_id = _parse_int(level_id, path, row_number, "level_id", minimum=1)
        _parse_int(episode_id, path, row_number, "episode_id", minimum=1)
        cleared = _parse_rate(cleared, path, row_number, "cleared_goals_frac")
        moves_used = _parse_int(moves_used, path, row_number, "moves_used", minimum=0)
        budget = _parse_int(budget, path, row_number, "moves_budget_human", minimum=1)
        passed = _parse_flag(passed, path, row_number, "passed_with_human_budget")
        if moves_used > budget:
            raise SchemaError(path, row_number,
                              f"moves_used {moves_used} exceeds budget {budget}")
        if passed:
            left = _parse_int(moves_left, path, row_number, "moves_left_on_pass",
                              minimum=0)
            if left != budget - moves_used:
                raise SchemaError(path, row_number,
                                  f"moves_left_on_pass {left} != budget {budget} "
                                  f"minus moves_used {moves_used}")
        else:
            if moves_left != "":
                raise SchemaError(path, row_number,
                                  "moves_left_on_pass must be empty when "
                                  "passed_with_human_budget is 0")
            left = None
        episodes.append(EpisodeLog(level_id=level_id, cleared_goals_frac=cleared,
                                   passed_with_human_budget=passed,
                                   moves_left_on_pass=left))
    if not episodes:
        raise SchemaError(path, None, "no episode rows")
    return episodes


def write_episodes_csv(path, episodes, moves_budget: int = MOVES_BUDGET):
    """Emit episodes in list order; episode ids count up within a level."""
    counters = {}
    rows = []
    for episode in episodes:
        counters[episode.level_id] = counters.get(episode.level_id, 0) + 1
        if episode.passed_with_human_budget:
            left = episode.moves_left_on_pass
            if left > moves_budget:
                raise ValueError(f"moves_left_on_pass {left} exceeds the "
                                 f"{moves_budget}-move budget")
            used = moves_budget - left
            left_field = str(left)
        else:
            used = moves_budget
            left_field = ""
        rows.append((episode.level_id, counters[episode.level_id],
                     format_float(episode.cleared_goals_frac), used,
                     moves_budget, int(episode.passed_with_human_budget),
                     left_field))
    _write_csv(path, EPISODES_COLUMNS, rows)


def read_levels_csv(path) -> LevelSeries:
    """Load per-level observed rates as a truth series."""
    ids, pass_rates, churn_rates = [], [], []
    previous = 0
    for row_number, row in _read_rows(path, LEVELS_COLUMNS):
        level_id = _parse_int(row[0], path, row_number, "level_id", minimum=1)
        if level_id <= previous:
            raise SchemaError(path, row_number,
                              f"level_id {level_id} not greater than {previous}")
        previous = level_id
        ids.append(level_id)
        pass_rates.append(_parse_rate(row[1], path, row_number, "human_pass_rate"))
        churn_rates.append(_parse_rate(row[2], path, row_number, "human_churn_rate"))
    if not ids:
        raise SchemaError(path, None, "no level rows")
    return LevelSeries(np.array(pass_rates), np.array(churn_rates),
                       level_ids=np.array(ids, dtype=np.int64), role="truth")


def write_levels_csv(path, series: LevelSeries):
    ids = (series.level_ids if series.level_ids is not None
           else np.arange(1, len(series) + 1))
    rows = [(int(i), format_float(p), format_float(c))
            for i, p, c in zip(ids, series.pass_rates, series.churn_rates)]
    _write_csv(path, LEVELS_COLUMNS, rows)


def read_difficulties_csv(path) -> tuple:
    """Load a per-level difficulty table; returns (level_ids, difficulties)."""
    ids, difficulties = [], []
    previous = 0
    for row_number, row in _read_rows(path, DIFFICULTIES_COLUMNS):
        level_id = _parse_int(row[0], path, row_number, "level_id", minimum=1)
        if level_id <= previous:
            raise SchemaError(path, row_number,
                              f"level_id {level_id} not greater than {previous}")
        previous = level_id
        ids.append(level_id)
        difficulties.append(_parse_rate(row[1], path, row_number, "difficulty"))
    if not ids:
        raise SchemaError(path, None, "no difficulty rows")
    return np.array(ids, dtype=np.int64), np.array(difficulties)


def write_difficulties_csv(path, level_ids, difficulties):
    rows = [(int(i), format_float(d)) for i, d in zip(level_ids, difficulties)]
    _write_csv(path, DIFFICULTIES_COLUMNS, rows)


SCATTER_COLUMNS = ("level_index", "level_id", "pass_rate", "churn_rate")


def write_scatter_csv(path, series: LevelSeries):
    """Plot data: both rates per level, keyed by progression position."""
    ids = (series.level_ids if series.level_ids is not None
           else np.arange(1, len(series) + 1))
    rows = [(index + 1, int(level_id), format_float(p), format_float(c))
            for index, (level_id, p, c)
            in enumerate(zip(ids, series.pass_rates, series.churn_rates))]
    _write_csv(path, SCATTER_COLUMNS, rows)


def load_datasets(episodes_path, levels_path) -> tuple:
    """Load the episode and truth files and check they describe the
    same set of levels. Returns (episodes, truth)."""
    episodes = read_episodes_csv(episodes_path)
    truth = read_levels_csv(levels_path)
    episode_ids = sorted({e.level_id for e in episodes})
    truth_ids = truth.level_ids.tolist()
    if episode_ids != truth_ids:
        extra = sorted(set(episode_ids) ^ set(truth_ids))
        raise SchemaError(episodes_path, None,
                          f"level sets differ from {levels_path} "
                          f"(mismatched ids {extra[:8]})")
    return episodes, truth


# ---------------------------------------------------------------------------
# run configuration

_CONFIG_SCHEMA = {
    "data": {
        "episodes": "episodes.csv",
        "levels": "levels.csv",
        "difficulties": "",
    },
    "simulation": {
        "players": "2000",
        "constant_difficulty": "",
        "n_levels": "",
        "disable_boredom": "false",
        "disable_persistence": "false",
        "disable_learning": "false",
        "disable_draw_noise": "false",
    },
    "params": {
        "mean_skill": "0.5", "std_skill": "0.1",
        "mean_persistence": "3.0", "std_persistence": "1.0",
        "mean_boredom": "0.0", "std_boredom": "0.1",
        "alpha": "0.1", "beta": "0.1", "theta": "0.1", "gamma": "0.01",
    },
    "regression": {
        "ridge": "1e-8",
    },
    "optimizer": {
        "population_size": "120",
        "no_improvement_generations": "100",
        "max_evaluations": "1000000",
        "initial_step_size": "0.3",
    },
    "cv": {
        "folds": "5",
        "repeats": "5",
        "scheme": "contiguous",
    },
    "synth": {
        "levels": "168",
        "episodes_per_level": "50",
    },
    "run": {
        "seed": "0",
        "out_dir": "out",
    },
}


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved settings for one CLI invocation."""

    episodes_path: str
    levels_path: str
    difficulties_path: str
    n_players: int
    constant_difficulty: float
    n_levels: int
    flags: AblationFlags
    params: SimParams
    ridge: float
    optimizer: OptimizerConfig
    k: int
    repeats: int
    scheme: str
    synth_levels: int
    synth_episodes_per_level: int
    seed: int
    out_dir: str
    config_sha256: str


def _cfg_int(resolved, section, key, minimum=None):
    text = resolved[section][key]
    try:
        value = int(text)
    except ValueError:
        raise ConfigError(f"{section}.{key} must be an integer, got {text!r}") from None
    if minimum is not None and value < minimum:
        raise ConfigError(f"{section}.{key} must be >= {minimum}, got {value}")
    return value


def _cfg_float(resolved, section, key):
    text = resolved[section][key]
    try:
        value = float(text)
    except ValueError:
        raise ConfigError(f"{section}.{key} must be a number, got {text!r}") from None
    if not math.isfinite(value):
        raise ConfigError(f"{section}.{key} must be finite, got {text!r}")
    return value


def _cfg_bool(resolved, section, key):
    text = resolved[section][key].lower()
    if text in ("true", "1", "yes", "on"):
        return True
    if text in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"{section}.{key} must be a boolean, got {text!r}")


def canonical_config_text(resolved) -> str:
    lines = [f"{section}.{key}={resolved[section][key]}"
             for section in sorted(resolved)
             for key in sorted(resolved[section])]
    return "\n".join(lines) + "\n"


def load_config(path=None, seed=None, out_dir=None) -> RunConfig:
    """Read an INI-style config, apply overrides, resolve all defaults.

    Unknown sections or keys are errors: a typo silently falling back
    to a default would be worse than a refusal. The resolved settings
    (overrides included) are hashed so every report can name the exact
    configuration that produced it.
    """
    parser = configparser.ConfigParser(interpolation=None)
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            try:
                parser.read_file(fh)
            except configparser.Error as exc:
                raise ConfigError(f"{path}: {exc}") from None
    resolved = {section: dict(defaults)
                for section, defaults in _CONFIG_SCHEMA.items()}
    for section in parser.sections():
        if section not in _CONFIG_SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        for key, value in parser.items(section):
            if key not in _CONFIG_SCHEMA[section]:
                raise ConfigError(f"unknown config key {section}.{key}")
            resolved[section][key] = value
    if seed is not None:
        resolved["run"]["seed"] = str(int(seed))
    if out_dir is not None:
        resolved["run"]["out_dir"] = str(out_dir)
    config_sha256 = hashlib.sha256(
        canonical_config_text(resolved).encode("utf-8")).hexdigest()

    seed_value = _cfg_int(resolved, "run", "seed")
    try:
        params = SimParams(
            PopulationParams(
                mean_skill=_cfg_float(resolved, "params", "mean_skill"),
                std_skill=_cfg_float(resolved, "params", "std_skill"),
                mean_persistence=_cfg_float(resolved, "params", "mean_persistence"),
                std_persistence=_cfg_float(resolved, "params", "std_persistence"),
                mean_boredom=_cfg_float(resolved, "params", "mean_boredom"),
                std_boredom=_cfg_float(resolved, "params", "std_boredom"),
            ),
            alpha=_cfg_float(resolved, "params", "alpha"),
            beta=_cfg_float(resolved, "params", "beta"),
            theta=_cfg_float(resolved, "params", "theta"),
            gamma=_cfg_float(resolved, "params", "gamma"),
        )
        optimizer = OptimizerConfig(
            population_size=_cfg_int(resolved, "optimizer", "population_size"),
            no_improvement_generations=_cfg_int(
                resolved, "optimizer", "no_improvement_generations"),
            max_evaluations=_cfg_int(resolved, "optimizer", "max_evaluations"),
            initial_step_size=_cfg_float(resolved, "optimizer", "initial_step_size"),
            seed=seed_value,
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None

    scheme = resolved["cv"]["scheme"]
    if scheme not in ("contiguous", "interleaved"):
        raise ConfigError(f"cv.scheme must be contiguous or interleaved, got {scheme!r}")
    ridge = _cfg_float(resolved, "regression", "ridge")
    if ridge < 0.0:
        raise ConfigError(f"regression.ridge must be >= 0, got {ridge}")

    constant_difficulty = None
    if resolved["simulation"]["constant_difficulty"] != "":
        constant_difficulty = _cfg_float(resolved, "simulation", "constant_difficulty")
        if not 0.0 <= constant_difficulty <= 1.0:
            raise ConfigError(f"simulation.constant_difficulty {constant_difficulty} "
                              f"outside [0, 1]")
    n_levels = None
    if resolved["simulation"]["n_levels"] != "":
        n_levels = _cfg_int(resolved, "simulation", "n_levels", minimum=1)

    return RunConfig(
        episodes_path=resolved["data"]["episodes"],
        levels_path=resolved["data"]["levels"],
        difficulties_path=resolved["data"]["difficulties"] or None,
        n_players=_cfg_int(resolved, "simulation", "players", minimum=1),
        constant_difficulty=constant_difficulty,
        n_levels=n_levels,
        flags=AblationFlags(
            disable_boredom=_cfg_bool(resolved, "simulation", "disable_boredom"),
            disable_persistence=_cfg_bool(resolved, "simulation", "disable_persistence"),
            disable_learning=_cfg_bool(resolved, "simulation", "disable_learning"),
            disable_draw_noise=_cfg_bool(resolved, "simulation", "disable_draw_noise"),
        ),
        params=params,
        ridge=ridge,
        optimizer=optimizer,
        k=_cfg_int(resolved, "cv", "folds", minimum=2),
        repeats=_cfg_int(resolved, "cv", "repeats", minimum=1),
        scheme=scheme,
        synth_levels=_cfg_int(resolved, "synth", "levels", minimum=1),
        synth_episodes_per_level=_cfg_int(resolved, "synth", "episodes_per_level",
                                          minimum=1),
        seed=seed_value,
        out_dir=resolved["run"]["out_dir"],
        config_sha256=config_sha256,
    )


# ---------------------------------------------------------------------------
# JSON reports

def dumps_report(value) -> str:
    """Serialize a report deterministically.

    The stdlib encoder formats floats with repr, which is shortest
    round-trip, not fixed width; this emitter pins every float to 17
    significant digits so the same run always produces the same bytes.
    Dict order is preserved: reports are built in a deterministic,
    meaningful order (ablation rows, fold lists). Non-finite floats
    become null.
    """
    parts = []
    _emit_json(value, 0, parts)
    parts.append("\n")
    return "".join(parts)


def _emit_json(value, indent, out):
    if isinstance(value, str):
        out.append(json.dumps(value))
    elif value is None:
        out.append("null")
    elif isinstance(value, (bool, np.bool_)):
        out.append("true" if value else "false")
    elif isinstance(value, (int, np.integer)):
        out.append(repr(int(value)))
    elif isinstance(value, (float, np.floating)):
        value = float(value)
        out.append(format(value, FLOAT_FORMAT) if math.isfinite(value) else "null")
    elif isinstance(value, (list, tuple, np.ndarray)):
        items = value.tolist() if isinstance(value, np.ndarray) else list(value)
        if not items:
            out.append("[]")
            return
        out.append("[\n")
        for i, item in enumerate(items):
            out.append("  " * (indent + 1))
            _emit_json(item, indent + 1, out)
            out.append(",\n" if i < len(items) - 1 else "\n")
        out.append("  " * indent + "]")
    elif isinstance(value, dict):
        if not value:
            out.append("{}")
            return
        out.append("{\n")
        items = list(value.items())
        for i, (key, item) in enumerate(items):
            if not isinstance(key, str):
                raise TypeError(f"report keys must be strings, got {type(key).__name__}")
            out.append("  " * (indent + 1) + json.dumps(key) + ": ")
            _emit_json(item, indent + 1, out)
            out.append(",\n" if i < len(items) - 1 else "\n")
        out.append("  " * indent + "}")
    else:
        raise TypeError(f"cannot serialize {type(value).__name__} in a report")


def write_json_report(path, payload):
    atomic_write_text(path, dumps_report(payload))
