# Copyright Amazon.com, Inc. or its affiliates. All Rights Reserved.

import os
from pathlib import Path
from unittest.mock import patch

import numpy as np
import pytest

import lagflow
from lagflow.config import OUTPUT_DIR_ENV_VAR, load_config, parse_config
from lagflow.errors import ConfigError
from lagflow.models import PerturbedGenerator, QuadraticGenerator

from .conftest import CONFIGS_DIR

INTERVAL_TEXT = """\
# steady state u = x^2 + x
omega.kind = interval
omega.interval = 0, 1
generator.A = 2
generator.b = 1
resolution = 20
"""

DISC_TEXT = """\
omega.kind = disc
omega.radius = 1
omega_tilde.kind = disc
omega_tilde.radius = 1
generator.kind = perturbed
generator.A = 1, 0; 0, 1
generator.epsilon = 0.01
resolution = 8, 16
"""


class TestParseConfig:
    def test_interval_defaults(self) -> None:
        # WHEN
        config = parse_config(INTERVAL_TEXT)

        # THEN
        assert config.mode == "flow"
        assert config.omega.interval == (0.0, 1.0)
        assert config.omega_tilde is None
        assert isinstance(config.generator, QuadraticGenerator)
        np.testing.assert_allclose(config.generator.A, [[2.0]])
        np.testing.assert_allclose(config.generator.b, [1.0])
        assert config.resolution == (20,)
        assert config.control.cfl == 0.5
        assert config.steady.tol_s == 1e-10
        assert config.svg
        assert config.dump_every == 0

    def test_overrides_win(self) -> None:
        # WHEN
        config = parse_config(
            INTERVAL_TEXT,
            ["control.cfl=0.25", "resolution = 40", "mode=steady", "output.svg=false"],
        )

        # THEN
        assert config.control.cfl == 0.25
        assert config.resolution == (40,)
        assert config.mode == "steady"
        assert not config.svg

    def test_disc_with_random_bump(self) -> None:
        # WHEN
        first = parse_config(DISC_TEXT, ["seed=11"])
        second = parse_config(DISC_TEXT, ["seed=11"])

        # THEN
        assert isinstance(first.generator, PerturbedGenerator)
        assert isinstance(second.generator, PerturbedGenerator)
        np.testing.assert_array_equal(first.generator.bump_center, second.generator.bump_center)
        assert np.linalg.norm(first.generator.bump_center) < 1 - first.generator.bump_width
        assert first.omega_tilde is not None and first.omega_tilde.kind == "disc"

    def test_explicit_bump_center(self) -> None:
        # WHEN
        config = parse_config(DISC_TEXT, ["generator.bump_center=0.1, -0.2"])

        # THEN
        assert isinstance(config.generator, PerturbedGenerator)
        np.testing.assert_allclose(config.generator.bump_center, [0.1, -0.2])

    @pytest.mark.parametrize(
        "text, line, key",
        [
            (INTERVAL_TEXT + "control.cfl = 1.5\n", 7, "control.cfl"),
            (INTERVAL_TEXT + "colour = blue\n", 7, "colour"),
            (INTERVAL_TEXT + "control.max_steps = many\n", 7, "control.max_steps"),
            (INTERVAL_TEXT.replace("resolution = 20", "resolution = 4"), 6, "resolution"),
            (INTERVAL_TEXT.replace("= 0, 1", "= 1, 0"), 2, "omega.kind"),
            (INTERVAL_TEXT + "mode = sideways\n", 7, "mode"),
            (INTERVAL_TEXT + "output.svg = maybe\n", 7, "output.svg"),
        ],
    )
    def test_rejections_name_the_line(self, text: str, line: int, key: str) -> None:
        # WHEN
        with pytest.raises(ConfigError) as raised:
            parse_config(text)

        # THEN
        assert raised.value.line == line
        assert raised.value.key == key
        assert str(raised.value).startswith(f"[line {line}, key '{key}']")

    def test_line_without_equals(self) -> None:
        # WHEN
        with pytest.raises(ConfigError) as raised:
            parse_config(INTERVAL_TEXT + "resolution 20\n")

        # THEN
        assert raised.value.line == 7

    def test_missing_resolution(self) -> None:
        with pytest.raises(ConfigError, match="resolution"):
            parse_config(INTERVAL_TEXT.replace("resolution = 20\n", ""))

    def test_bad_override(self) -> None:
        with pytest.raises(ConfigError, match="key=value"):
            parse_config(INTERVAL_TEXT, ["control.cfl"])

    def test_monitor_replay_needs_a_file(self, tmp_path: Path) -> None:
        # GIVEN
        text = INTERVAL_TEXT + "mode = monitor-replay\n"

        # WHEN
        with pytest.raises(ConfigError, match="replay.monitors"):
            parse_config(text, base_dir=tmp_path)

        # THEN
        (tmp_path / "monitors.csv").write_text("step\n")
        config = parse_config(text + "replay.monitors = monitors.csv\n", base_dir=tmp_path)
        assert config.replay_monitors == tmp_path / "monitors.csv"

    def test_warm_start_must_exist(self, tmp_path: Path) -> None:
        with pytest.raises(ConfigError, match="does not exist"):
            parse_config(INTERVAL_TEXT + "steady.warm_start = nope.txt\n", base_dir=tmp_path)


class TestResolveOutputDir:
    def test_command_line_first(self) -> None:
        config = parse_config(INTERVAL_TEXT + "output.dir = from_config\n")
        assert config.resolve_output_dir("from_cli") == Path("from_cli")

    def test_config_second(self) -> None:
        # GIVEN
        config = parse_config(INTERVAL_TEXT + "output.dir = from_config\n")

        # WHEN
        with patch.dict(os.environ, {OUTPUT_DIR_ENV_VAR: "from_env"}):
            out = config.resolve_output_dir()

        # THEN
        assert out == Path("from_config")

    def test_environment_third(self) -> None:
        # GIVEN
        config = parse_config(INTERVAL_TEXT)

        # WHEN
        with patch.dict(os.environ, {OUTPUT_DIR_ENV_VAR: "from_env"}):
            out = config.resolve_output_dir()

        # THEN
        assert out == Path("from_env")

    def test_nothing_configured(self, monkeypatch: pytest.MonkeyPatch) -> None:
        # GIVEN
        monkeypatch.delenv(OUTPUT_DIR_ENV_VAR, raising=False)
        config = parse_config(INTERVAL_TEXT)

        # THEN
        with pytest.raises(ConfigError, match=OUTPUT_DIR_ENV_VAR):
            config.resolve_output_dir()


class TestLoadConfig:
    def test_missing_file(self, tmp_path: Path) -> None:
        with pytest.raises(ConfigError, match="Cannot read"):
            load_config(tmp_path / "absent.conf")

    def test_example_config_documents_every_key(self) -> None:
        # GIVEN
        example = Path(lagflow.__file__).parent / "example_config.conf"

        # WHEN
        config = load_config(example)

        # THEN
        assert config.omega.kind == "ellipse"
        assert isinstance(config.generator, PerturbedGenerator)
        assert config.omega.contains(config.generator.bump_center)

    @pytest.mark.parametrize(
        "name", ["interval_flow.conf", "ellipse_fixed_point.conf", "disc_steady.conf"]
    )
    def test_shipped_configs_parse(self, name: str) -> None:
        # WHEN
        config = load_config(CONFIGS_DIR / name)

        # THEN
        assert config.mode in ("flow", "steady")
