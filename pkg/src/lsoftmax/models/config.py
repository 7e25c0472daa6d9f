"""Experiment configuration documents.

Experiments are described by an INI-style file::

    [data]
    source = blobs
    blob_classes = 4

    [optim]
    lr_drop_iterations = 600, 900

Every section model forbids unknown keys. List values are comma-separated. The reader keeps
the line number of each key so validation errors can point at the offending line.
"""

import os
import re
from enum import Enum
from pathlib import Path
from typing import Annotated, Any, Dict, List, Optional, Sequence, Tuple, Union

from pydantic import BeforeValidator, ConfigDict, Field, PrivateAttr, model_validator
from pydantic import ValidationError as PydanticValidationError

from ..exceptions import ConfigError, LSoftmaxError
from . import BaseModel
from .network import NetworkSpec
from .training import LambdaDecay, LambdaSchedule, TrainConfig

DATA_DIR_ENV = "LSOFTMAX_DATA_DIR"

_SECTION = re.compile(r"^\[(?P<name>[A-Za-z_][A-Za-z0-9_]*)\]$")
_ENTRY = re.compile(r"^(?P<key>[A-Za-z_][A-Za-z0-9_]*)\s*=\s*(?P<value>.*)$")

# TrainConfig fields that live outside [optim]
_TRAIN_KEYS = {"margin": "loss.m", "lambda_schedule": "loss"}


def _comma_list(value: Any) -> Any:
    if isinstance(value, str):
        return [part.strip() for part in value.split(",") if part.strip()]
    return value


def _blank_is_none(value: Any) -> Any:
    if isinstance(value, str) and not value.strip():
        return None
    return value


IntList = Annotated[List[int], BeforeValidator(_comma_list)]
FloatList = Annotated[List[float], BeforeValidator(_comma_list)]
OptionalPath = Annotated[Optional[str], BeforeValidator(_blank_is_none)]


class DataSource(str, Enum):
    mnist = "mnist"
    blobs = "blobs"


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class DataSection(_Section):
    """Where the samples come from and how they are split.

    :param source: ``blobs`` (synthetic Gaussian blobs) or ``mnist``.
    :param directory: MNIST directory. ``LSOFTMAX_DATA_DIR`` overrides it when set.
    :param fractions: Train/val/test fractions, summing to 1. For MNIST only the first two
        are used to divide the training file; the test split is MNIST's own test file.
    """

    source: DataSource = DataSource.blobs
    directory: OptionalPath = None
    fractions: FloatList = Field(default_factory=lambda: [0.8, 0.1, 0.1])
    train_subset: int = Field(default=0, ge=0)
    test_subset: int = Field(default=0, ge=0)
    seed: int = 0
    blob_classes: int = Field(default=4, ge=2)
    blob_dim: int = Field(default=2, ge=2)
    blob_per_class: int = Field(default=100, ge=1)
    blob_spread: float = Field(default=0.5, ge=0.0)
    blob_radius: float = Field(default=5.0, gt=0.0)

    @model_validator(mode="after")
    def _fractions_sum_to_one(self):
        if len(self.fractions) != 3 or any(f < 0 for f in self.fractions):
            raise ValueError("fractions must be three nonnegative numbers")
        if abs(sum(self.fractions) - 1.0) > 1e-9:
            raise ValueError(f"fractions must sum to 1, got {sum(self.fractions)}")
        return self


class NetworkSection(_Section):
    """:param architecture: Compact layer notation, e.g. ``conv 3x3 32 x2, pool, dense 64``.
    An empty architecture is the identity feature map.
    """

    architecture: str = ""
    feature_dim: int = Field(default=2, ge=1)


class LossSection(_Section):
    m: int = Field(default=1, ge=1)
    lambda_initial: float = Field(default=0.0, ge=0.0)
    lambda_min: float = Field(default=0.0, ge=0.0)
    lambda_kind: LambdaDecay = LambdaDecay.step
    lambda_gamma: float = Field(default=1.0, gt=0.0, le=1.0)
    lambda_window: int = Field(default=1, ge=1)
    lambda_rate: float = Field(default=0.1, ge=0.0)

    @model_validator(mode="after")
    def _initial_not_below_floor(self):
        if self.lambda_initial < self.lambda_min:
            raise ValueError(
                f"lambda_initial ({self.lambda_initial}) must be >= lambda_min ({self.lambda_min})"
            )
        return self

    def schedule(self) -> LambdaSchedule:
        return LambdaSchedule(
            lambda_initial=self.lambda_initial,
            lambda_min=self.lambda_min,
            kind=self.lambda_kind,
            gamma=self.lambda_gamma,
            window=self.lambda_window,
            inverse_rate=self.lambda_rate,
        )


class OptimSection(_Section):
    learning_rate: float = Field(default=0.1, gt=0.0)
    lr_drop_iterations: IntList = Field(default_factory=list)
    lr_drop_factor: float = Field(default=0.1, gt=0.0)
    momentum: float = Field(default=0.9, ge=0.0, lt=1.0)
    weight_decay: float = Field(default=0.0005, ge=0.0)
    batch_size: int = Field(default=256, ge=1)
    max_iterations: int = Field(default=1000, ge=0)
    seed: int = 0
    val_interval: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _drops_increasing(self):
        drops = self.lr_drop_iterations
        if any(b <= a for a, b in zip(drops, drops[1:])) or any(i < 0 for i in drops):
            raise ValueError("lr_drop_iterations must be nonnegative and strictly increasing")
        return self


class EvalSection(_Section):
    """:param pairs: Number of verification pairs sampled from the test split (`0` disables).
    :param threshold_points: Size of the cosine threshold grid over ``[-1, 1]``.
    """

    pairs: int = Field(default=0, ge=0)
    threshold_points: int = Field(default=1001, ge=2)


class OutputSection(_Section):
    """:param directory: Where artifacts are written.
    :param feature_export_max_dim: Feature CSVs are written only up to this feature width.
    """

    directory: str = "runs/experiment"
    feature_export_max_dim: int = Field(default=16, ge=0)


class ExperimentConfig(BaseModel):
    """A complete experiment: every section with its defaults filled in."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    data: DataSection = Field(default_factory=DataSection)
    network: NetworkSection = Field(default_factory=NetworkSection)
    loss: LossSection = Field(default_factory=LossSection)
    optim: OptimSection = Field(default_factory=OptimSection)
    eval: EvalSection = Field(default_factory=EvalSection)
    output: OutputSection = Field(default_factory=OutputSection)

    _lines: Dict[str, int] = PrivateAttr(default_factory=dict)
    _source: Optional[str] = PrivateAttr(default=None)

    def line_of(self, key: str) -> Optional[int]:
        """Line number of ``section.key`` (or of the section header) in the source file."""
        return self._lines.get(key) or self._lines.get(key.split(".")[0])

    def train_config(self, **overrides) -> TrainConfig:
        values = dict(
            learning_rate=self.optim.learning_rate,
            lr_drop_iterations=list(self.optim.lr_drop_iterations),
            lr_drop_factor=self.optim.lr_drop_factor,
            momentum=self.optim.momentum,
            weight_decay=self.optim.weight_decay,
            batch_size=self.optim.batch_size,
            max_iterations=self.optim.max_iterations,
            margin=self.loss.m,
            lambda_schedule=self.loss.schedule(),
            seed=self.optim.seed,
            val_interval=self.optim.val_interval,
        )
        values.update(overrides)
        try:
            return TrainConfig(**values)
        except PydanticValidationError as error:
            first = error.errors()[0]
            field = str(first["loc"][0]) if first["loc"] else ""
            key = _TRAIN_KEYS.get(field, f"optim.{field}" if field else "optim")
            raise ConfigError(first["msg"], key=key, line=self.line_of(key)) from error

    def network_spec(self, input_shape: Sequence[int]) -> NetworkSpec:
        """Expand ``[network] architecture`` for samples of ``input_shape``."""
        from ..nn.network import build_network_spec

        try:
            return build_network_spec(
                self.network.architecture, input_shape, self.network.feature_dim
            )
        except PydanticValidationError as error:
            message = "; ".join(e["msg"] for e in error.errors())
            raise ConfigError(
                message, key="network.feature_dim", line=self.line_of("network.feature_dim")
            ) from error
        except LSoftmaxError as error:
            raise ConfigError(
                str(error), key="network.architecture", line=self.line_of("network.architecture")
            ) from error


# READING AND WRITING


def parse_ini(text: str) -> Tuple[Dict[str, Dict[str, str]], Dict[str, int]]:
    """Split INI text into ``{section: {key: raw value}}`` plus the 1-based line of every
    section header and ``section.key``.
    """
    sections: Dict[str, Dict[str, str]] = {}
    lines: Dict[str, int] = {}
    current = None
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        if header := _SECTION.match(line):
            current = header["name"]
            if current in sections:
                raise ConfigError("Duplicate section", key=current, line=number)
            sections[current] = {}
            lines[current] = number
            continue
        entry = _ENTRY.match(line)
        if entry is None:
            raise ConfigError(f"Cannot parse '{line}'", line=number)
        if current is None:
            raise ConfigError("Key outside of any section", key=entry["key"], line=number)
        key = f"{current}.{entry['key']}"
        if entry["key"] in sections[current]:
            raise ConfigError("Duplicate key", key=key, line=number)
        value = re.split(r"\s[#;]", entry["value"], maxsplit=1)[0].strip()
        sections[current][entry["key"]] = value
        lines[key] = number
    return sections, lines


def _config_error(error: PydanticValidationError, lines: Dict[str, int]) -> ConfigError:
    first = error.errors()[0]
    location = [str(part) for part in first["loc"]]
    key = ".".join(location[:2])
    if first["type"] == "extra_forbidden":
        message = "Unknown section" if len(location) == 1 else "Unknown key"
    else:
        message = first["msg"]
    return ConfigError(message, key=key, line=lines.get(key) or lines.get(location[0]))


def loads_config(text: str, environ: Optional[Dict[str, str]] = None) -> ExperimentConfig:
    """Parse and validate INI text. ``environ`` defaults to ``os.environ``.

    :raises ConfigError: Unknown section or key, malformed line, or invalid value.
    """
    sections, lines = parse_ini(text)
    try:
        config = ExperimentConfig.model_validate(sections)
    except PydanticValidationError as error:
        raise _config_error(error, lines) from error

    environ = os.environ if environ is None else environ
    if environ.get(DATA_DIR_ENV):
        data = config.data.model_copy(update={"directory": environ[DATA_DIR_ENV]})
        config = config.model_copy(update={"data": data})
    config._lines = lines
    return config


def load_config(
    path: Union[str, Path], environ: Optional[Dict[str, str]] = None
) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as error:
        raise ConfigError(f"Cannot read config file {path}: {error}") from error
    config = loads_config(text, environ)
    config._source = str(path)
    return config


def _format_value(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, (list, tuple)):
        return ", ".join(_format_value(v) for v in value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dumps_config(config: ExperimentConfig) -> str:
    """Every effective value, defaults included, in the format :func:`loads_config` reads."""
    blocks = []
    for section_name in ExperimentConfig.model_fields:
        section = getattr(config, section_name)
        body = [f"[{section_name}]"]
        for key in type(section).model_fields:
            body.append(f"{key} = {_format_value(getattr(section, key))}")
        blocks.append("\n".join(body))
    return "\n\n".join(blocks) + "\n"


def write_config(config: ExperimentConfig, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_config(config))
    return path
