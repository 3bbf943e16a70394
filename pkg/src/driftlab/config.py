"""
Experiment configuration files.

A configuration file selects one experiment and may override its
parameters. TOML is the primary format; JSON is accepted too. For example:

.. code-block:: toml

    experiment = "train"
    seed = 3
    output_dir = "runs/checkerboard"

    [train]
    target = "checkerboard"
    loss_mode = "stop-gradient"
    steps = 5000
    kernel = { family = "laplacian", bandwidth = 0.05 }

Every table is parsed into a frozen dataclass that validates itself. Unknown
keys are rejected, as are tables for other experiments.

"""

from __future__ import annotations

import dataclasses
import enum
import json
import math
import pathlib
import re
import sys
from collections.abc import Mapping
from typing import Any, Callable, Union

from .drift import MIN_SCORE_SAMPLES
from .exceptions import (
    ConfigParseError,
    InvalidConfigField,
    InvalidParameter,
    UsageError,
)
from .kernels import BandwidthSchedule, Family, KernelSpec, ScheduleKind
from .targets import get_target
from .training import KERNEL, SINKHORN, DriftBackend, LossMode, TrainConfig


if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib


__all__ = [
    "ExperimentKind",
    "VerifyScoreSection",
    "SpectralSection",
    "ScheduleAblationSection",
    "TrainSection",
    "LandscapeSection",
    "ParticleFlowSection",
    "ExperimentConfig",
    "parse_config",
    "load_config",
]


class ExperimentKind(enum.Enum):
    """Experiments runnable from a configuration file."""

    VERIFY_SCORE = "verify-score"
    SPECTRAL = "spectral"
    SCHEDULE_ABLATION = "schedule-ablation"
    TRAIN = "train"
    LANDSCAPE = "landscape"
    SINKHORN_TRAIN = "sinkhorn-train"
    PARTICLE_FLOW = "particle-flow"

    @property
    def section(self) -> str:
        """Name of the table holding the parameters of the experiment."""
        return self.value.replace("-", "_")


def _positive(owner: object, *names: str) -> None:
    for name in names:
        value = getattr(owner, name)
        if not (value > 0 and math.isfinite(value)):
            raise InvalidParameter(name, value, "must be positive")


def _at_least(owner: object, minimum: int, *names: str) -> None:
    for name in names:
        value = getattr(owner, name)
        if value < minimum:
            raise InvalidParameter(name, value, f"must be at least {minimum}")


# Field parsers receive the raw value and the dotted path of the field.

Parser = Callable[[Any, str], Any]


def _parse_float(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InvalidConfigField(path, f"expected a number, got {value!r}")
    return float(value)


def _parse_int(value: Any, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise InvalidConfigField(path, f"expected an integer, got {value!r}")
    return value


def _parse_str(value: Any, path: str) -> str:
    if not isinstance(value, str):
        raise InvalidConfigField(path, f"expected a string, got {value!r}")
    return value


def _parse_list(value: Any, path: str) -> list[Any]:
    if not isinstance(value, list):
        raise InvalidConfigField(path, f"expected an array, got {value!r}")
    return value


def _parse_floats(value: Any, path: str) -> tuple[float, ...]:
    return tuple(
        _parse_float(item, f"{path}[{index}]")
        for index, item in enumerate(_parse_list(value, path))
    )


def _parse_strs(value: Any, path: str) -> tuple[str, ...]:
    return tuple(
        _parse_str(item, f"{path}[{index}]")
        for index, item in enumerate(_parse_list(value, path))
    )


def _parse_table(value: Any, path: str) -> Mapping[str, Any]:
    if not isinstance(value, Mapping):
        raise InvalidConfigField(path, f"expected a table, got {value!r}")
    return value


def _check_keys(table: Mapping[str, Any], allowed: set[str], path: str) -> None:
    for key in table:
        if key not in allowed:
            raise InvalidConfigField(f"{path}.{key}", "unknown field")


def _parse_kernel(value: Any, path: str) -> KernelSpec:
    table = _parse_table(value, path)
    _check_keys(table, {"family", "bandwidth", "dim"}, path)
    if "family" not in table or "bandwidth" not in table:
        raise InvalidConfigField(path, "requires family and bandwidth")
    family = _parse_str(table["family"], f"{path}.family")
    try:
        kind = Family(family)
    except ValueError:
        choices = ", ".join(f.value for f in Family)
        raise InvalidConfigField(
            f"{path}.family", f"must be one of {choices}, got {family!r}"
        ) from None
    bandwidth = _parse_float(table["bandwidth"], f"{path}.bandwidth")
    dim = _parse_int(table.get("dim", 2), f"{path}.dim")
    try:
        return KernelSpec(kind, bandwidth, dim)
    except InvalidParameter as exc:
        raise InvalidConfigField(f"{path}.{exc.name}", str(exc)) from None


def _parse_kernels(value: Any, path: str) -> tuple[KernelSpec, ...]:
    return tuple(
        _parse_kernel(item, f"{path}[{index}]")
        for index, item in enumerate(_parse_list(value, path))
    )


SCHEDULE_KEYS = {"kind", "sigma0", "sigma_min", "rate", "sweep_time", "horizon"}


def _parse_schedule(value: Any, path: str) -> BandwidthSchedule:
    table = _parse_table(value, path)
    _check_keys(table, SCHEDULE_KEYS, path)
    if "kind" not in table or "sigma0" not in table:
        raise InvalidConfigField(path, "requires kind and sigma0")
    name = _parse_str(table["kind"], f"{path}.kind")
    try:
        kind = ScheduleKind(name)
    except ValueError:
        choices = ", ".join(k.value for k in ScheduleKind)
        raise InvalidConfigField(
            f"{path}.kind", f"must be one of {choices}, got {name!r}"
        ) from None
    numbers = {
        key: _parse_float(table[key], f"{path}.{key}")
        for key in SCHEDULE_KEYS - {"kind"}
        if key in table
    }
    sigma0 = numbers["sigma0"]
    sigma_min = numbers.get("sigma_min")
    try:
        if kind is ScheduleKind.EXPONENTIAL:
            if sigma_min is None:
                raise InvalidParameter("sigma_min", None, "is required")
            return BandwidthSchedule.exponential(
                sigma0,
                sigma_min,
                numbers.get("rate"),
                sweep_time=numbers.get("sweep_time", 400.0),
            )
        elif kind is ScheduleKind.CONSTANT:
            return BandwidthSchedule.constant(sigma0)
        else:
            return BandwidthSchedule(
                kind, sigma0, sigma_min, horizon=numbers.get("horizon", 1500.0)
            )
    except InvalidParameter as exc:
        raise InvalidConfigField(f"{path}.{exc.name}", str(exc)) from None


def _parser(default: Any) -> Parser:
    if isinstance(default, int):
        return _parse_int
    elif isinstance(default, float):
        return _parse_float
    elif isinstance(default, str):
        return _parse_str
    elif isinstance(default, KernelSpec):
        return _parse_kernel
    else:
        raise AssertionError(f"no parser for {default!r}")


def _build(cls: Any, value: Any, path: str, base: Any = None) -> Any:
    """
    Instantiate the dataclass ``cls`` from a table.

    Fields declare a parser in their metadata, or get one from the type of
    their default value. Fields missing from the table take their value from
    ``base`` when given, else their default.

    """
    table = _parse_table(value, path)
    fields = {field.name: field for field in dataclasses.fields(cls)}
    _check_keys(table, set(fields), path)
    kwargs: dict[str, Any] = {}
    for name, raw in table.items():
        field = fields[name]
        parse = field.metadata.get("parse")
        if parse is None:
            parse = _parser(field.default)
        kwargs[name] = parse(raw, f"{path}.{name}")
    try:
        if base is not None:
            return dataclasses.replace(base, **kwargs)
        return cls(**kwargs)
    except InvalidParameter as exc:
        raise InvalidConfigField(f"{path}.{exc.name}", str(exc)) from None


def _field(default: Any, parse: Parser) -> Any:
    return dataclasses.field(default=default, metadata={"parse": parse})


@dataclasses.dataclass(frozen=True)
class VerifyScoreSection:
    """
    Parameters of the score identity check.

    The data distribution is the four-mode Gaussian mixture and the
    generated distribution a centered isotropic Gaussian.

    """

    sigmas: tuple[float, ...] = _field((0.3,), _parse_floats)
    n_samples: int = 50_000
    n_probes: int = 200
    q_std: float = 1.0
    component_std: float = 0.15
    grid_n: int = 21

    def __post_init__(self) -> None:
        if len(self.sigmas) == 0:
            raise InvalidParameter("sigmas", [], "must not be empty")
        if not all(sigma > 0 for sigma in self.sigmas):
            raise InvalidParameter("sigmas", list(self.sigmas), "must be positive")
        _at_least(self, MIN_SCORE_SAMPLES, "n_samples")
        _at_least(self, 1, "n_probes")
        _at_least(self, 2, "grid_n")
        _positive(self, "q_std", "component_std")


@dataclasses.dataclass(frozen=True)
class SpectralSection:
    """Parameters of the fixed-bandwidth mode decay experiment."""

    sigma: float = 0.3
    tau: float = 0.3
    k_max: int = 20
    amplitude: float = 1e-6
    eps: float = 1e-3
    t_max: float = 1e4
    curve_step: float = 1.0
    curve_horizon: float = 200.0

    def __post_init__(self) -> None:
        _positive(self, "sigma", "tau", "amplitude", "t_max", "curve_step")
        _at_least(self, 1, "k_max")
        if not 0 < self.eps < 1:
            raise InvalidParameter("eps", self.eps, "must be in (0, 1)")
        if self.curve_horizon < 0:
            raise InvalidParameter(
                "curve_horizon", self.curve_horizon, "must be nonnegative"
            )


@dataclasses.dataclass(frozen=True)
class ScheduleAblationSection:
    """Parameters of the comparison of bandwidth schedules."""

    sigma0: float = 1.5
    sigma_min: float = 0.03
    sweep_time: float = 400.0
    horizon: float = 1500.0
    k_max: int = 20
    amplitude: float = 1e-6
    eps: float = 1e-3
    t_max: float = 1e4
    curve_step: float = 1.0
    curve_horizon: float = 0.0

    def __post_init__(self) -> None:
        _positive(self, "amplitude", "t_max", "curve_step")
        _at_least(self, 1, "k_max")
        if not 0 < self.eps < 1:
            raise InvalidParameter("eps", self.eps, "must be in (0, 1)")
        self.schedules()

    def schedules(self) -> dict[str, BandwidthSchedule]:
        """Exponential, linear, and cosine schedules with shared endpoints."""
        return {
            "exponential": BandwidthSchedule.exponential(
                self.sigma0, self.sigma_min, sweep_time=self.sweep_time
            ),
            "linear": BandwidthSchedule.linear(
                self.sigma0, self.sigma_min, self.horizon
            ),
            "cosine": BandwidthSchedule.cosine(
                self.sigma0, self.sigma_min, self.horizon
            ),
        }


def _parse_loss_mode(name: str) -> LossMode:
    for mode in LossMode:
        if str(mode) == name:
            return mode
    raise InvalidParameter("loss_mode", name, "must be stop-gradient or coupled")


@dataclasses.dataclass(frozen=True)
class TrainSection:
    """
    Parameters of a generator training run.

    ``batch_size`` defaults to 2048 with kernel drifts and to 512 with the
    Sinkhorn drift.

    """

    target: str = "checkerboard"
    loss_mode: str = "stop-gradient"
    kernel: KernelSpec = KernelSpec.laplacian(0.05)
    extra_kernels: tuple[KernelSpec, ...] = _field((), _parse_kernels)
    schedule: BandwidthSchedule | None = _field(None, _parse_schedule)
    eta: float = 1.0
    epsilon: float = 0.01
    sinkhorn_max_iter: int = 500
    batch_size: int | None = _field(None, _parse_int)
    steps: int = 50_000
    lr: float = 1e-3
    hidden: int = 256
    noise_dim: int = 2
    metric_every: int = 500
    sw_samples: int = 5000
    sw_projections: int = 200
    gradient_snapshot_every: int = 0
    checkpoint_every: int = 0
    snapshot_every: int = 0

    def __post_init__(self) -> None:
        get_target(self.target)
        _parse_loss_mode(self.loss_mode)
        _at_least(self, 0, "snapshot_every")
        self.train_config(KERNEL)

    def train_config(self, backend: DriftBackend) -> TrainConfig:
        batch_size = self.batch_size
        if batch_size is None:
            batch_size = 512 if backend is SINKHORN else 2048
        return TrainConfig(
            loss_mode=_parse_loss_mode(self.loss_mode),
            backend=backend,
            kernel=self.kernel,
            extra_kernels=self.extra_kernels,
            schedule=self.schedule,
            eta=self.eta,
            epsilon=self.epsilon,
            sinkhorn_max_iter=self.sinkhorn_max_iter,
            batch_size=batch_size,
            steps=self.steps,
            lr=self.lr,
            hidden=self.hidden,
            noise_dim=self.noise_dim,
            metric_every=self.metric_every,
            sw_samples=self.sw_samples,
            sw_projections=self.sw_projections,
            gradient_snapshot_every=self.gradient_snapshot_every,
            checkpoint_every=self.checkpoint_every,
        )


LANDSCAPE_TRAIN = TrainSection(steps=5000, gradient_snapshot_every=50)


def _parse_landscape_train(value: Any, path: str) -> TrainSection:
    section: TrainSection = _build(TrainSection, value, path, LANDSCAPE_TRAIN)
    return section


@dataclasses.dataclass(frozen=True)
class LandscapeSection:
    """
    Parameters of the loss landscape scans.

    One generator is trained per loss mode in ``loss_modes``, recording
    gradients, then scanned on the plane of its two principal gradient
    directions.

    """

    train: TrainSection = _field(LANDSCAPE_TRAIN, _parse_landscape_train)
    loss_modes: tuple[str, ...] = _field(("stop-gradient", "coupled"), _parse_strs)
    grid_n: int = 31
    grid_half_width: float = 1.0
    n_eval: int = 2048
    n_proj: int = 200

    def __post_init__(self) -> None:
        if len(self.loss_modes) == 0:
            raise InvalidParameter("loss_modes", [], "must not be empty")
        for name in self.loss_modes:
            _parse_loss_mode(name)
        if self.train.gradient_snapshot_every < 1:
            raise InvalidParameter(
                "train.gradient_snapshot_every",
                self.train.gradient_snapshot_every,
                "must be at least 1",
            )
        _at_least(self, 2, "grid_n")
        _at_least(self, 1, "n_eval", "n_proj")
        _positive(self, "grid_half_width")


@dataclasses.dataclass(frozen=True)
class ParticleFlowSection:
    """Parameters of the training-free particle flow."""

    target: str = "checkerboard"
    n_particles: int = 2000
    initial_std: float = 1.0
    kernel: KernelSpec = KernelSpec.laplacian(0.1)
    extra_kernels: tuple[KernelSpec, ...] = _field((), _parse_kernels)
    schedule: BandwidthSchedule | None = _field(None, _parse_schedule)
    step: float = 0.2
    n_steps: int = 500
    record_every: int = 10
    n_proj: int = 200
    snapshot_every: int = 100

    def __post_init__(self) -> None:
        get_target(self.target)
        _positive(self, "initial_std", "step")
        _at_least(self, 1, "n_particles", "n_steps", "record_every", "n_proj")
        _at_least(self, 0, "snapshot_every")


Section = Union[
    VerifyScoreSection,
    SpectralSection,
    ScheduleAblationSection,
    TrainSection,
    LandscapeSection,
    ParticleFlowSection,
]


SECTIONS: dict[ExperimentKind, type[Any]] = {
    ExperimentKind.VERIFY_SCORE: VerifyScoreSection,
    ExperimentKind.SPECTRAL: SpectralSection,
    ExperimentKind.SCHEDULE_ABLATION: ScheduleAblationSection,
    ExperimentKind.TRAIN: TrainSection,
    ExperimentKind.LANDSCAPE: LandscapeSection,
    ExperimentKind.SINKHORN_TRAIN: TrainSection,
    ExperimentKind.PARTICLE_FLOW: ParticleFlowSection,
}


def _jsonable(value: Any) -> Any:
    if isinstance(value, enum.Enum):
        return value.value if isinstance(value.value, str) else str(value)
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return {
            field.name: _jsonable(getattr(value, field.name))
            for field in dataclasses.fields(value)
        }
    if isinstance(value, (list, tuple)):
        return [_jsonable(item) for item in value]
    return value


@dataclasses.dataclass(frozen=True)
class ExperimentConfig:
    """
    A validated experiment configuration.

    Attributes:
        experiment: Experiment to run.
        section: Parameters of that experiment.
        seed: Master seed.
        output_dir: Output directory; defaults to ``runs/<experiment>``.

    """

    experiment: ExperimentKind
    section: Section
    seed: int = 0
    output_dir: str | None = None

    def __post_init__(self) -> None:
        expected = SECTIONS[self.experiment]
        if not isinstance(self.section, expected):
            raise InvalidParameter(
                self.experiment.section, self.section, f"must be a {expected.__name__}"
            )
        if self.seed < 0:
            raise InvalidParameter("seed", self.seed, "must be nonnegative")
        if self.experiment is ExperimentKind.SINKHORN_TRAIN:
            assert isinstance(self.section, TrainSection)
            self.section.train_config(SINKHORN)

    @classmethod
    def default(cls, experiment: ExperimentKind) -> ExperimentConfig:
        return cls(experiment, SECTIONS[experiment]())

    @property
    def out(self) -> pathlib.Path:
        if self.output_dir is None:
            return pathlib.Path("runs") / self.experiment.value
        return pathlib.Path(self.output_dir)

    def with_overrides(
        self,
        *,
        seed: int | None = None,
        output_dir: str | pathlib.Path | None = None,
    ) -> ExperimentConfig:
        """Return a copy with command line overrides applied."""
        config = self
        if seed is not None:
            config = dataclasses.replace(config, seed=seed)
        if output_dir is not None:
            config = dataclasses.replace(config, output_dir=str(output_dir))
        return config

    def to_json(self) -> dict[str, Any]:
        return {
            "experiment": self.experiment.value,
            "seed": self.seed,
            "output_dir": str(self.out),
            self.experiment.section: _jsonable(self.section),
        }


TOP_LEVEL_KEYS = {"experiment", "seed", "output_dir"}


def parse_config(data: Mapping[str, Any]) -> ExperimentConfig:
    """
    Build a configuration from parsed TOML or JSON.

    Raises:
        InvalidConfigField: If a field is missing, unknown, or invalid.

    """
    table = _parse_table(data, "config")
    if "experiment" not in table:
        raise InvalidConfigField("experiment", "is required")
    name = _parse_str(table["experiment"], "experiment")
    try:
        experiment = ExperimentKind(name)
    except ValueError:
        choices = ", ".join(kind.value for kind in ExperimentKind)
        raise InvalidConfigField(
            "experiment", f"must be one of {choices}, got {name!r}"
        ) from None
    for key in table:
        if key not in TOP_LEVEL_KEYS | {experiment.section}:
            raise InvalidConfigField(key, f"unknown field for {experiment.value}")

    name = experiment.section
    section = _build(SECTIONS[experiment], table.get(name, {}), name)
    seed = _parse_int(table.get("seed", 0), "seed")
    output_dir = table.get("output_dir")
    if output_dir is not None:
        output_dir = _parse_str(output_dir, "output_dir")
    try:
        return ExperimentConfig(experiment, section, seed, output_dir)
    except InvalidParameter as exc:
        raise InvalidConfigField(exc.name, str(exc)) from None
    except UsageError as exc:
        raise InvalidConfigField(f"{name}.loss_mode", str(exc)) from None


TOML_POSITION = re.compile(r"\s*\(at line (\d+), column (\d+)\)")


def _toml_error(path: str, exc: Exception) -> ConfigParseError:
    message = str(exc)
    match = TOML_POSITION.search(message)
    if match is None:
        return ConfigParseError(path, message)
    line, column = int(match.group(1)), int(match.group(2))
    return ConfigParseError(path, TOML_POSITION.sub("", message), line, column)


def load_config(path: str | pathlib.Path) -> ExperimentConfig:
    """
    Read and validate a configuration file.

    The format is selected by the suffix: ``.toml`` or ``.json``.

    Raises:
        ConfigParseError: If the file can't be read or parsed.
        InvalidConfigField: If a field is missing, unknown, or invalid.

    """
    path = pathlib.Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigParseError(str(path), exc.strerror or str(exc)) from None
    if path.suffix == ".toml":
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise _toml_error(str(path), exc) from None
    elif path.suffix == ".json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigParseError(str(path), exc.msg, exc.lineno, exc.colno) from None
    else:
        raise ConfigParseError(str(path), "expected a .toml or .json file")
    return parse_config(data)
