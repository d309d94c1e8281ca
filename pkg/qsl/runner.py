"""
Config-driven experiment execution.

A config is a JSON object holding an `ExperimentConfig`. Parameters resolve in this order,
later sources winning: experiment defaults, the named preset, the `parameters` map, the
optional `grid` block (mapped onto `tau` and `steps`), then the run seed.
"""
import csv
import json
import logging
import math
import time
from pathlib import Path
from typing import Any, Optional, Union

import pydantic

from . import __version__
from .dynamics import TimeGrid
from .errors import InvalidInputError
from .experiments import EXPERIMENTS, BaseExperiment, ExperimentResult
from .models import PRESETS

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '.12g'

ParameterValue = Union[int, float, str, list[float]]


class ConfigError(InvalidInputError):
    """A config that cannot be run; `diagnostics` lists every problem found."""

    def __init__(self, diagnostics: list[str]):
        super().__init__("; ".join(diagnostics))
        self.diagnostics = diagnostics


class ExperimentConfig(pydantic.BaseModel):
    """
    Args:
        experiment: Experiment tag.
        preset: Optional named preset merged under the explicit parameters.
        parameters: Flat map of experiment parameters.
        grid: Optional time grid; its duration and step count override `tau` and `steps`.
        seed: Random seed handed to the experiment.
        output_path: Directory receiving the CSV and JSON files.
    """
    model_config = pydantic.ConfigDict(extra='forbid', frozen=True)

    experiment: str
    preset: Optional[str] = None
    parameters: dict[str, ParameterValue] = {}
    grid: Optional[TimeGrid] = None
    seed: int = 0
    output_path: str = "."

    @pydantic.field_validator('experiment')
    @classmethod
    def _known_experiment(cls, value):
        if value not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {value!r}; valid tags: {', '.join(EXPERIMENTS)}")
        return value

    @pydantic.field_validator('preset')
    @classmethod
    def _known_preset(cls, value):
        if value is not None and value not in PRESETS:
            raise ValueError(f"unknown preset {value!r}; valid presets: {', '.join(PRESETS)}")
        return value

    def experiment_parameters(self) -> dict[str, Any]:
        merged: dict[str, Any] = dict(PRESETS[self.preset]) if self.preset else {}
        merged.update(self.parameters)
        if self.grid is not None:
            fields = EXPERIMENTS[self.experiment].model_fields
            if 'tau' in fields:
                merged['tau'] = self.grid.duration
            if 'steps' in fields:
                merged['steps'] = self.grid.steps
        merged['seed'] = self.seed
        return merged

    def build(self) -> BaseExperiment:
        return EXPERIMENTS[self.experiment].model_validate(self.experiment_parameters())


def diagnostics(error: pydantic.ValidationError, prefix: str = "") -> list[str]:
    """One line per validation error, led by the dotted location of the offending field."""
    lines = []
    for err in error.errors():
        loc = ".".join(str(part) for part in (prefix, *err['loc']) if part != "")
        lines.append(f"{loc}: {err['msg']}" if loc else err['msg'])
    return lines


def read_config(path: Union[str, Path]) -> dict[str, Any]:
    try:
        text = Path(path).read_text(encoding='utf-8')
    except OSError as e:
        raise InvalidInputError(f"cannot read config {path}: {e.strerror}") from e
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError([f"config is not valid JSON: {e.msg} (line {e.lineno})"]) from e
    if not isinstance(raw, dict):
        raise ConfigError(["config must be a JSON object"])
    return raw


def check_config(raw: dict[str, Any]) -> tuple[Optional[ExperimentConfig], list[str]]:
    try:
        config = ExperimentConfig.model_validate(raw)
    except pydantic.ValidationError as e:
        return None, diagnostics(e)
    try:
        config.build()
    except pydantic.ValidationError as e:
        return config, diagnostics(e, prefix='parameters')
    return config, []


def validate(config_path: Union[str, Path]) -> list[str]:
    """All validation problems of a config file; an empty list means it is runnable."""
    _, problems = check_config(read_config(config_path))
    return problems


def load_config(config_path: Union[str, Path], **overrides) -> ExperimentConfig:
    """
    Read and validate a config, applying `seed`, `steps` and `output_path` overrides.

    Raises:
        ConfigError: with every diagnostic when the config is not runnable.
    """
    raw = read_config(config_path)
    steps = overrides.pop('steps', None)
    raw.update({k: v for k, v in overrides.items() if v is not None})
    if steps is not None:
        raw['parameters'] = {**raw.get('parameters', {}), 'steps': steps}
        if isinstance(raw.get('grid'), dict):
            raw['grid'] = {**raw['grid'], 'steps': steps}
    config, problems = check_config(raw)
    if problems:
        raise ConfigError(problems)
    return config


def _cell(value: Any) -> str:
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return format(value, FLOAT_FORMAT)
    if value is None:
        return ""
    return str(value)


def _json_safe(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    return value


def write_csv(result: ExperimentResult, path: Path):
    with path.open('w', encoding='utf-8', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(result.columns)
        for row in result.rows:
            writer.writerow([_cell(v) for v in row])


class RunOutcome(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(frozen=True)

    csv_path: Path
    json_path: Path
    wall_time: float
    result: ExperimentResult


class Runner:
    """Executes one experiment config and writes `<tag>.csv` and `<tag>.json` into the output directory."""

    def __init__(self, config: ExperimentConfig):
        self.config = config

    def run(self) -> RunOutcome:
        config = self.config
        experiment = config.build()
        logger.info("running %s (seed %d)", config.experiment, config.seed)
        start = time.perf_counter()
        result = experiment.run()
        wall_time = time.perf_counter() - start

        out_dir = Path(config.output_path)
        out_dir.mkdir(parents=True, exist_ok=True)
        csv_path = out_dir / f"{config.experiment}.csv"
        json_path = out_dir / f"{config.experiment}.json"
        write_csv(result, csv_path)
        metadata = {
            'tool': 'qsl',
            'version': __version__,
            'config': config.model_dump(mode='json'),
            'parameters': experiment.model_dump(mode='json', by_alias=True),
            'grid': config.grid.model_dump(mode='json') if config.grid else None,
            'wall_time': wall_time,
            'notes': result.metadata,
        }
        json_path.write_text(json.dumps(_json_safe(metadata), indent=2, sort_keys=True) + "\n", encoding='utf-8')
        logger.info("wrote %s and %s in %.3f s", csv_path, json_path, wall_time)
        return RunOutcome(csv_path=csv_path, json_path=json_path, wall_time=wall_time, result=result)
