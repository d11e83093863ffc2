import ast
import logging
import logging.handlers
import os
import re
import sys
import warnings
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Tuple, Type, TypeVar, Union

import ruamel.yaml

from terranp.core.exceptions import ConfigurationError, ConflictingConfigurationWarning

T = TypeVar("T")

CONFIG_FILE_NAME = "config.conf"
_COMMENT = re.compile(r"\s+#.*$")


def parse_value(raw: str) -> Any:
    """Parses a value of the flat format, falling back to the raw string."""
    raw = raw.strip()
    if raw in ("true", "True", "yes"):
        return True
    if raw in ("false", "False", "no"):
        return False
    try:
        return ast.literal_eval(raw)
    except (ValueError, SyntaxError):
        return raw


class Parameter:
    def __init__(
        self,
        envvar: str,
        typ: Optional[Type[T]] = None,
        help: str = "",
        default: Optional[T] = None,
    ) -> None:
        if typ is not None:
            self.type: Type[Any] = typ
        elif default is not None:
            self.type = default.__class__
        else:
            raise TypeError("either typ or default needs to be specified")
        self.envvar = envvar
        self.help = help
        self.default = default if default is not None else self.type()

    def resolve(self, value: Optional[T]) -> Any:
        v: Optional[Any] = value
        if value is None:
            t = os.environ.get(self.envvar)
            if self.type is bool and t:
                v = t in ["true", "True", "1", "yes"]
            elif self.type is str and t:
                v = t
            elif t:
                v = ast.literal_eval(t)

        if v is None:
            v = self.default
        return self._coerce(v)

    def _coerce(self, v: Any) -> Any:
        if self.type is float and isinstance(v, int) and not isinstance(v, bool):
            return float(v)
        if self.type is list and isinstance(v, tuple):
            return list(v)
        if self.type is bool and not isinstance(v, bool):
            raise ConfigurationError(f"{self.envvar}: expected a boolean, got {v!r}")
        if self.type in (int, float) and not isinstance(v, (int, float)):
            raise ConfigurationError(f"{self.envvar}: expected a number, got {v!r}")
        return v


class Section(object):
    """
    Base class of every configuration section. Subclasses declare their keys in
    ``__slots__`` and one :obj:`Parameter` per key in the nested ``Parameters``
    class.
    """

    __slots__: Tuple[str, ...] = ()
    name = ""

    class Parameters:
        pass

    def __init__(self, **kwargs: Any) -> None:
        unknown = sorted(set(kwargs) - set(self.__slots__))
        if unknown:
            raise ConfigurationError(
                f"unknown key(s) in section {self.name!r}: {', '.join(unknown)}"
            )
        for key in self.__slots__:
            param: Parameter = getattr(self.Parameters, key)
            setattr(self, key, param.resolve(kwargs.get(key)))
        self.validate()

    def validate(self) -> None:
        pass

    def _require(self, condition: bool, message: str) -> None:
        if not condition:
            raise ConfigurationError(f"{self.name}: {message}")

    def dict(self) -> Dict[str, Any]:
        return {key: getattr(self, key) for key in self.__slots__}


class GridConfig(Section):
    __slots__ = ("origin_x", "origin_y", "resolution", "height", "width")
    name = "grid"

    class Parameters:
        origin_x = Parameter(default=-51.2, envvar="TERRANP_GRID_ORIGIN_X")
        origin_y = Parameter(default=-51.2, envvar="TERRANP_GRID_ORIGIN_Y")
        resolution = Parameter(default=0.4, envvar="TERRANP_GRID_RESOLUTION")
        height = Parameter(default=256, envvar="TERRANP_GRID_HEIGHT")
        width = Parameter(default=256, envvar="TERRANP_GRID_WIDTH")

    def validate(self) -> None:
        self._require(self.resolution > 0, "resolution must be positive")
        self._require(self.height > 0 and self.width > 0, "height and width must be positive")


class SensorConfig(Section):
    __slots__ = (
        "mount_height",
        "azimuth_count",
        "elevation_min_deg",
        "elevation_max_deg",
        "beams",
        "max_range",
        "z_noise",
        "march_step",
    )
    name = "sensor"

    class Parameters:
        mount_height = Parameter(default=1.8, envvar="TERRANP_SENSOR_MOUNT_HEIGHT")
        azimuth_count = Parameter(default=720, envvar="TERRANP_SENSOR_AZIMUTH_COUNT")
        elevation_min_deg = Parameter(
            default=-25.0, envvar="TERRANP_SENSOR_ELEVATION_MIN_DEG"
        )
        elevation_max_deg = Parameter(
            default=5.0, envvar="TERRANP_SENSOR_ELEVATION_MAX_DEG"
        )
        beams = Parameter(default=32, envvar="TERRANP_SENSOR_BEAMS")
        max_range = Parameter(default=80.0, envvar="TERRANP_SENSOR_MAX_RANGE")
        z_noise = Parameter(typ=float, default=0.02, envvar="TERRANP_SENSOR_Z_NOISE")
        march_step = Parameter(default=0.05, envvar="TERRANP_SENSOR_MARCH_STEP")

    def validate(self) -> None:
        self._require(self.max_range > 0, "max_range must be positive")
        self._require(self.z_noise >= 0, "z_noise must be non-negative")
        self._require(self.beams >= 1 and self.azimuth_count >= 1, "need at least one ray")
        self._require(
            self.elevation_min_deg <= self.elevation_max_deg,
            "elevation angles must be sorted",
        )
        self._require(self.march_step > 0, "march_step must be positive")


class SemanticsConfig(Section):
    __slots__ = ("feature_dim", "noise", "fov_deg", "camera_range")
    name = "semantics"

    class Parameters:
        feature_dim = Parameter(default=8, envvar="TERRANP_SEMANTICS_FEATURE_DIM")
        noise = Parameter(typ=float, default=0.05, envvar="TERRANP_SEMANTICS_NOISE")
        fov_deg = Parameter(default=120.0, envvar="TERRANP_SEMANTICS_FOV_DEG")
        camera_range = Parameter(default=40.0, envvar="TERRANP_SEMANTICS_CAMERA_RANGE")

    def validate(self) -> None:
        self._require(self.feature_dim >= 1, "feature_dim must be positive")
        self._require(self.noise >= 0, "noise must be non-negative")
        self._require(self.camera_range > 0, "camera_range must be positive")


class WorldConfig(Section):
    __slots__ = (
        "scenes",
        "frames",
        "base_components",
        "base_amplitude",
        "wavelength_min",
        "wavelength_max",
        "features_per_scene",
        "ditch_depth",
        "ditch_width",
        "speed_min",
        "speed_max",
        "rate_hz",
        "gt_window",
        "gt_mode",
        "workers",
    )
    name = "world"

    class Parameters:
        scenes = Parameter(default=2, envvar="TERRANP_WORLD_SCENES")
        frames = Parameter(default=50, envvar="TERRANP_WORLD_FRAMES")
        base_components = Parameter(default=6, envvar="TERRANP_WORLD_BASE_COMPONENTS")
        base_amplitude = Parameter(default=3.0, envvar="TERRANP_WORLD_BASE_AMPLITUDE")
        wavelength_min = Parameter(default=20.0, envvar="TERRANP_WORLD_WAVELENGTH_MIN")
        wavelength_max = Parameter(default=120.0, envvar="TERRANP_WORLD_WAVELENGTH_MAX")
        features_per_scene = Parameter(
            default=4, envvar="TERRANP_WORLD_FEATURES_PER_SCENE"
        )
        ditch_depth = Parameter(default=2.0, envvar="TERRANP_WORLD_DITCH_DEPTH")
        ditch_width = Parameter(default=2.0, envvar="TERRANP_WORLD_DITCH_WIDTH")
        speed_min = Parameter(default=2.0, envvar="TERRANP_WORLD_SPEED_MIN")
        speed_max = Parameter(default=10.0, envvar="TERRANP_WORLD_SPEED_MAX")
        rate_hz = Parameter(default=10.0, envvar="TERRANP_WORLD_RATE_HZ")
        gt_window = Parameter(default=300, envvar="TERRANP_WORLD_GT_WINDOW")
        gt_mode = Parameter(default="scans", envvar="TERRANP_WORLD_GT_MODE")
        workers = Parameter(default=1, envvar="TERRANP_WORLD_WORKERS")

    def validate(self) -> None:
        self._require(self.scenes >= 0 and self.frames >= 0, "counts must be non-negative")
        self._require(0 < self.wavelength_min <= self.wavelength_max, "bad wavelength range")
        self._require(self.ditch_depth > 0 and self.ditch_width > 0, "ditch size must be positive")
        self._require(0 < self.speed_min <= self.speed_max, "bad speed range")
        self._require(self.gt_window >= 1, "gt_window must be positive")
        self._require(self.gt_mode in ("scans", "analytic"), "gt_mode is scans or analytic")
        self._require(self.workers >= 1, "workers must be positive")


class ModelConfig(Section):
    __slots__ = (
        "hidden",
        "heads",
        "epsilon",
        "k_max",
        "z_dim",
        "sigma_min",
        "max_context",
        "min_context",
        "max_targets",
        "fused_dim",
        "coord_scale",
        "attention",
        "null_context",
    )
    name = "model"

    class Parameters:
        hidden = Parameter(default=64, envvar="TERRANP_MODEL_HIDDEN")
        heads = Parameter(default=4, envvar="TERRANP_MODEL_HEADS")
        epsilon = Parameter(default=2.0, envvar="TERRANP_MODEL_EPSILON")
        k_max = Parameter(default=32, envvar="TERRANP_MODEL_K_MAX")
        z_dim = Parameter(default=64, envvar="TERRANP_MODEL_Z_DIM")
        sigma_min = Parameter(default=1e-3, envvar="TERRANP_MODEL_SIGMA_MIN")
        max_context = Parameter(default=7000, envvar="TERRANP_MODEL_MAX_CONTEXT")
        min_context = Parameter(default=256, envvar="TERRANP_MODEL_MIN_CONTEXT")
        max_targets = Parameter(default=4096, envvar="TERRANP_MODEL_MAX_TARGETS")
        fused_dim = Parameter(default=16, envvar="TERRANP_MODEL_FUSED_DIM")
        coord_scale = Parameter(default=10.0, envvar="TERRANP_MODEL_COORD_SCALE")
        attention = Parameter(default="ball", envvar="TERRANP_MODEL_ATTENTION")
        null_context = Parameter(default="learned", envvar="TERRANP_MODEL_NULL_CONTEXT")

    def validate(self) -> None:
        for key in ("hidden", "heads", "epsilon", "k_max", "z_dim", "sigma_min"):
            self._require(getattr(self, key) > 0, f"{key} must be positive")
        self._require(self.hidden % self.heads == 0, "hidden must be divisible by heads")
        self._require(self.max_context >= 1 and self.max_targets >= 1, "caps must be positive")
        self._require(self.min_context <= self.max_context, "min_context > max_context")
        self._require(self.fused_dim >= 1, "fused_dim must be positive")
        self._require(self.coord_scale > 0, "coord_scale must be positive")
        self._require(self.attention in ("ball", "global"), "attention is ball or global")
        self._require(self.null_context in ("learned", "zero"), "null_context is learned or zero")


class TrainConfig(Section):
    __slots__ = (
        "epochs",
        "lr",
        "beta1",
        "beta2",
        "eps",
        "seed",
        "holdout",
        "no_semantics",
        "no_temporal",
        "lidar_horizon",
    )
    name = "train"

    class Parameters:
        epochs = Parameter(default=20, envvar="TERRANP_TRAIN_EPOCHS")
        lr = Parameter(default=1e-3, envvar="TERRANP_TRAIN_LR")
        beta1 = Parameter(default=0.9, envvar="TERRANP_TRAIN_BETA1")
        beta2 = Parameter(default=0.999, envvar="TERRANP_TRAIN_BETA2")
        eps = Parameter(default=1e-8, envvar="TERRANP_TRAIN_EPS")
        seed = Parameter(default=7, envvar="TERRANP_TRAIN_SEED")
        holdout = Parameter(typ=int, default=0, envvar="TERRANP_TRAIN_HOLDOUT")
        no_semantics = Parameter(typ=bool, default=False, envvar="TERRANP_TRAIN_NO_SEMANTICS")
        no_temporal = Parameter(typ=bool, default=False, envvar="TERRANP_TRAIN_NO_TEMPORAL")
        lidar_horizon = Parameter(default=50, envvar="TERRANP_TRAIN_LIDAR_HORIZON")

    def validate(self) -> None:
        self._require(self.epochs >= 1, "epochs must be positive")
        self._require(self.lr > 0, "lr must be positive")
        self._require(0 <= self.beta1 < 1 and 0 <= self.beta2 < 1, "betas must lie in [0, 1)")
        self._require(self.holdout >= 0, "holdout must be non-negative")
        self._require(self.lidar_horizon >= 1, "lidar_horizon must be positive")


class EvalConfig(Section):
    __slots__ = ("samples", "baseline", "workers", "n_bins", "holdout", "gp_max_context")
    name = "eval"

    class Parameters:
        samples = Parameter(default=1, envvar="TERRANP_EVAL_SAMPLES")
        baseline = Parameter(typ=str, default="", envvar="TERRANP_EVAL_BASELINE")
        workers = Parameter(default=1, envvar="TERRANP_EVAL_WORKERS")
        n_bins = Parameter(default=10, envvar="TERRANP_EVAL_N_BINS")
        holdout = Parameter(typ=int, default=0, envvar="TERRANP_EVAL_HOLDOUT")
        gp_max_context = Parameter(default=4000, envvar="TERRANP_EVAL_GP_MAX_CONTEXT")

    def validate(self) -> None:
        self._require(self.samples >= 1, "samples must be positive")
        self._require(self.workers >= 1, "workers must be positive")
        self._require(self.n_bins >= 1, "n_bins must be positive")
        self._require(self.holdout >= 0, "holdout must be non-negative")


class BenchConfig(Section):
    __slots__ = ("m", "n", "radius", "k_max", "hidden", "heads", "repeats", "memory_budget_mb")
    name = "bench"

    class Parameters:
        m = Parameter(default=4096, envvar="TERRANP_BENCH_M")
        n = Parameter(default=4096, envvar="TERRANP_BENCH_N")
        radius = Parameter(default=2.0, envvar="TERRANP_BENCH_RADIUS")
        k_max = Parameter(default=32, envvar="TERRANP_BENCH_K_MAX")
        hidden = Parameter(default=64, envvar="TERRANP_BENCH_HIDDEN")
        heads = Parameter(default=4, envvar="TERRANP_BENCH_HEADS")
        repeats = Parameter(default=5, envvar="TERRANP_BENCH_REPEATS")
        memory_budget_mb = Parameter(default=2048.0, envvar="TERRANP_BENCH_MEMORY_BUDGET_MB")

    def validate(self) -> None:
        for key in ("m", "n", "radius", "k_max", "hidden", "heads", "repeats"):
            self._require(getattr(self, key) > 0, f"{key} must be positive")
        self._require(self.hidden % self.heads == 0, "hidden must be divisible by heads")


class LoggingConfig(Section):
    __slots__ = ("enabled", "level", "log_file", "format", "to_console", "loggers")
    name = "logging"

    class Parameters:
        enabled = Parameter(default=True, envvar="TERRANP_LOGGING_ENABLED")
        level = Parameter(default="INFO", envvar="TERRANP_LOGGING_LEVEL")
        log_file = Parameter(typ=str, default="terranp.log", envvar="TERRANP_LOGGING_LOG_FILE")
        format = Parameter(
            default="%(asctime)s - %(name)12s - %(levelname)8s - %(funcName)10s() - %(message)s",
            envvar="TERRANP_LOGGING_FORMAT",
        )
        to_console = Parameter(default=False, envvar="TERRANP_LOGGING_TO_CONSOLE")
        loggers = Parameter(default=["terranp"], envvar="TERRANP_LOGGING_LOGGERS")

    def configure(self) -> None:
        if not self.enabled:
            return

        root_logger = logging.getLogger()
        if root_logger.hasHandlers() or root_logger.level != logging.WARNING:
            msg = (
                "Native Python logging configuration has been detected, but terranp "
                "logging is enabled too. "
                "This can lead to unexpected logging results. "
                "Please set logging.enabled config to False "
                "to disable automatic terranp logging configuration."
            )
            warnings.warn(msg, ConflictingConfigurationWarning)

        formatter = logging.Formatter(self.format)
        # log INFO and DEBUG to stdout
        stdout_handler = logging.StreamHandler(sys.stdout)
        stdout_handler.setFormatter(formatter)
        stdout_handler.setLevel(logging.DEBUG)
        stdout_handler.addFilter(lambda record: record.levelno <= logging.INFO)
        # log WARNING, ERROR and CRITICAL to stderr
        stderr_handler = logging.StreamHandler(sys.stderr)
        stderr_handler.setFormatter(formatter)
        stderr_handler.setLevel(logging.WARNING)

        for logger_name in self.loggers:
            logger_ = logging.getLogger(logger_name)
            logger_.propagate = False
            logger_.setLevel(self.level)
            if logger_.hasHandlers():
                # somebody configured this logger already, i.e. a second
                # InitTerraNP or logging.config.dictConfig
                continue
            if self.log_file:
                handler = logging.handlers.RotatingFileHandler(
                    str(Path(self.log_file)), maxBytes=1024 * 1024 * 10, backupCount=20
                )
                handler.setFormatter(formatter)
                logger_.addHandler(handler)

            if self.to_console:
                logger_.addHandler(stdout_handler)
                logger_.addHandler(stderr_handler)


class RunnerConfig(Section):
    __slots__ = ("plugin", "options")
    name = "runner"

    class Parameters:
        plugin = Parameter(default="serial", envvar="TERRANP_RUNNER_PLUGIN")
        options = Parameter(default={}, envvar="TERRANP_RUNNER_OPTIONS")


SECTIONS: Dict[str, Type[Section]] = {
    s.name: s
    for s in (
        GridConfig,
        SensorConfig,
        SemanticsConfig,
        WorldConfig,
        ModelConfig,
        TrainConfig,
        EvalConfig,
        BenchConfig,
        RunnerConfig,
        LoggingConfig,
    )
}

SectionData = Dict[str, Dict[str, Any]]


def parse_flat(text: str, source: str = "<string>") -> SectionData:
    """
    Parses ``section.key = value`` lines into nested dictionaries. ``#`` starts
    a comment when it begins a line or follows whitespace.
    """
    data: SectionData = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        stripped = _COMMENT.sub("", stripped)
        if "=" not in stripped:
            raise ConfigurationError(f"{source}:{lineno}: expected 'section.key = value'")
        key, raw = stripped.split("=", 1)
        section, _, name = key.strip().partition(".")
        if not section or not name:
            raise ConfigurationError(f"{source}:{lineno}: key {key.strip()!r} has no section")
        data.setdefault(section, {})[name] = parse_value(raw)
    return data


def parse_overrides(items: Iterable[str]) -> SectionData:
    return parse_flat("\n".join(items), source="--set")


def load_file(config_file: Union[str, Path]) -> SectionData:
    path = Path(config_file)
    try:
        with open(path, "r", encoding="utf-8") as f:
            if path.suffix in (".yaml", ".yml"):
                yml = ruamel.yaml.YAML(typ="safe")
                data = yml.load(f) or {}
            else:
                data = parse_flat(f.read(), source=str(path))
    except OSError as e:
        raise ConfigurationError(f"can't read configuration file {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path}: top level must be a mapping of sections")
    return data


def merge(*layers: Optional[SectionData]) -> SectionData:
    """Merges section dictionaries, later layers win key by key."""
    result: SectionData = {}
    for layer in layers:
        for section, values in (layer or {}).items():
            result.setdefault(section, {}).update(values or {})
    return result


class Config(object):
    __slots__ = tuple(SECTIONS)

    grid: GridConfig
    sensor: SensorConfig
    semantics: SemanticsConfig
    world: WorldConfig
    model: ModelConfig
    train: TrainConfig
    eval: EvalConfig
    bench: BenchConfig
    runner: RunnerConfig
    logging: LoggingConfig

    def __init__(self, **sections: Section) -> None:
        unknown = sorted(set(sections) - set(SECTIONS))
        if unknown:
            raise ConfigurationError(f"unknown section(s): {', '.join(unknown)}")
        for name, typ in SECTIONS.items():
            setattr(self, name, sections.get(name) or typ())

    @classmethod
    def from_dict(cls, **sections: Optional[Dict[str, Any]]) -> "Config":
        unknown = sorted(set(sections) - set(SECTIONS))
        if unknown:
            raise ConfigurationError(f"unknown section(s): {', '.join(unknown)}")
        return cls(
            **{name: SECTIONS[name](**(values or {})) for name, values in sections.items()}
        )

    @classmethod
    def from_file(
        cls, config_file: Union[str, Path], **overrides: Optional[Dict[str, Any]]
    ) -> "Config":
        return cls.from_dict(**merge(load_file(config_file), overrides))  # type: ignore

    def dict(self) -> Dict[str, Any]:
        return {name: getattr(self, name).dict() for name in SECTIONS}

    def dumps(self) -> str:
        lines: List[str] = ["# fully resolved terranp configuration"]
        for name in SECTIONS:
            for key, value in getattr(self, name).dict().items():
                lines.append(f"{name}.{key} = {value!r}")
        return "\n".join(lines) + "\n"

    def save(self, directory: Union[str, Path]) -> Path:
        path = Path(directory) / CONFIG_FILE_NAME
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.dumps(), encoding="utf-8")
        return path
