import logging
import os
import warnings

import pytest

from terranp.core.configuration import (
    Config,
    LoggingConfig,
    load_file,
    merge,
    parse_flat,
    parse_overrides,
)
from terranp.core.exceptions import ConfigurationError, ConflictingConfigurationWarning

dir_path = os.path.join(os.path.dirname(os.path.realpath(__file__)), "test_configuration")


DEFAULT_LOG_FORMAT = "%(asctime)s - %(name)12s - %(levelname)8s - %(funcName)10s() - %(message)s"


class Test(object):
    def test_config_defaults(self, monkeypatch):
        monkeypatch.delenv("TERRANP_LOGGING_ENABLED")
        c = Config()
        assert c.grid.dict() == {
            "origin_x": -51.2,
            "origin_y": -51.2,
            "resolution": 0.4,
            "height": 256,
            "width": 256,
        }
        assert c.runner.dict() == {"plugin": "serial", "options": {}}
        assert c.logging.dict() == {
            "enabled": True,
            "level": "INFO",
            "log_file": "terranp.log",
            "format": DEFAULT_LOG_FORMAT,
            "to_console": False,
            "loggers": ["terranp"],
        }
        assert c.model.epsilon == 2.0
        assert c.model.k_max == 32
        assert c.model.max_context == 7000

    def test_config_from_dict_defaults(self):
        assert Config.from_dict().dict() == Config().dict()

    def test_config_basic(self):
        c = Config.from_dict(
            model={"hidden": 16, "heads": 2},
            runner={"plugin": "threaded", "options": {"num_workers": 3}},
            logging={"log_file": ""},
        )
        assert c.model.hidden == 16
        assert c.model.heads == 2
        assert c.runner.dict() == {"plugin": "threaded", "options": {"num_workers": 3}}
        assert c.logging.log_file == ""

    def test_ints_are_accepted_as_floats(self):
        c = Config.from_dict(grid={"resolution": 1})
        assert isinstance(c.grid.resolution, float)

    def test_from_file(self):
        c = Config.from_file(os.path.join(dir_path, "config.conf"))
        assert c.grid.height == 64
        assert c.grid.resolution == 0.5
        assert c.model.attention == "global"
        assert c.runner.options == {"num_workers": 2}
        assert not c.logging.enabled

    def test_flat_and_yaml_agree(self):
        flat = Config.from_file(os.path.join(dir_path, "config.conf"))
        yml = Config.from_file(os.path.join(dir_path, "config.yaml"))
        assert flat.dict() == yml.dict()

    def test_overrides_win_over_the_file(self):
        c = Config.from_file(os.path.join(dir_path, "config.conf"), model={"hidden": 8})
        assert c.model.hidden == 8
        assert c.model.attention == "global"

    def test_broken_file(self):
        with pytest.raises(ConfigurationError) as e:
            load_file(os.path.join(dir_path, "broken.conf"))
        assert "broken.conf:2" in str(e.value)

    def test_unknown_key(self):
        with pytest.raises(ConfigurationError) as e:
            Config.from_file(os.path.join(dir_path, "unknown_key.conf"))
        assert "hiddn" in str(e.value)

    def test_unknown_section(self):
        with pytest.raises(ConfigurationError):
            Config.from_dict(modle={"hidden": 8})

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError):
            load_file(tmp_path / "nope.conf")

    @pytest.mark.parametrize(
        "sections",
        [
            {"model": {"hidden": 10, "heads": 4}},
            {"model": {"attention": "dense"}},
            {"model": {"min_context": 10, "max_context": 5}},
            {"grid": {"height": "tall"}},
            {"train": {"no_semantics": "sure"}},
            {"world": {"gt_mode": "lidar"}},
        ],
    )
    def test_invalid_values(self, sections):
        with pytest.raises(ConfigurationError):
            Config.from_dict(**sections)

    def test_dumps_roundtrip(self, tmp_path):
        c = Config.from_dict(model={"hidden": 16, "heads": 2}, eval={"baseline": "gp"})
        assert Config.from_dict(**parse_flat(c.dumps())).dict() == c.dict()
        path = c.save(tmp_path / "run")
        assert path.name == "config.conf"
        assert Config.from_file(path).dict() == c.dict()


class TestEnvironment(object):
    def test_env_var(self, monkeypatch):
        monkeypatch.setenv("TERRANP_MODEL_HIDDEN", "16")
        monkeypatch.setenv("TERRANP_MODEL_HEADS", "2")
        monkeypatch.setenv("TERRANP_MODEL_ATTENTION", "global")
        c = Config()
        assert c.model.hidden == 16
        assert c.model.attention == "global"

    def test_explicit_value_beats_env_var(self, monkeypatch):
        monkeypatch.setenv("TERRANP_GRID_HEIGHT", "10")
        assert Config.from_dict(grid={"height": 20}).grid.height == 20

    @pytest.mark.parametrize("raw,expected", [("1", True), ("true", True), ("no", False)])
    def test_boolean_env_var(self, monkeypatch, raw, expected):
        monkeypatch.setenv("TERRANP_TRAIN_NO_TEMPORAL", raw)
        assert Config().train.no_temporal is expected


class TestFlatFormat(object):
    def test_parse(self):
        data = parse_flat(
            "\n".join(
                [
                    "# comment",
                    "",
                    "model.hidden = 32  # trailing comment",
                    "train.no_semantics = true",
                    "logging.loggers = ['terranp', 'app']",
                    "eval.baseline = gp",
                ]
            )
        )
        assert data == {
            "model": {"hidden": 32},
            "train": {"no_semantics": True},
            "logging": {"loggers": ["terranp", "app"]},
            "eval": {"baseline": "gp"},
        }

    def test_key_without_section(self):
        with pytest.raises(ConfigurationError):
            parse_flat("hidden = 3")

    def test_overrides(self):
        assert parse_overrides(["model.heads=2", "model.k_max = 8"]) == {
            "model": {"heads": 2, "k_max": 8}
        }

    def test_merge(self):
        merged = merge(
            {"model": {"hidden": 8, "heads": 2}}, None, {"model": {"hidden": 16}, "train": {}}
        )
        assert merged == {"model": {"hidden": 16, "heads": 2}, "train": {}}


class TestLogging(object):
    LOGGER = "terranp_configuration_test"

    def teardown_method(self):
        logger = logging.getLogger(self.LOGGER)
        for handler in list(logger.handlers):
            handler.close()
            logger.removeHandler(handler)

    def _configure(self, **kwargs):
        config = LoggingConfig(enabled=True, loggers=[self.LOGGER], **kwargs)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConflictingConfigurationWarning)
            config.configure()
        return logging.getLogger(self.LOGGER)

    def test_disabled(self):
        LoggingConfig(enabled=False, loggers=[self.LOGGER]).configure()
        assert not logging.getLogger(self.LOGGER).handlers

    def test_file(self, tmp_path):
        logger = self._configure(log_file=str(tmp_path / "terranp.log"), level="DEBUG")
        assert len(logger.handlers) == 1
        assert logger.level == logging.DEBUG
        assert not logger.propagate

    def test_console(self):
        logger = self._configure(log_file="", to_console=True)
        assert len(logger.handlers) == 2

    def test_configured_loggers_are_left_alone(self, tmp_path):
        self._configure(log_file=str(tmp_path / "a.log"))
        logger = self._configure(log_file=str(tmp_path / "b.log"))
        assert len(logger.handlers) == 1
