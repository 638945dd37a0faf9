# Copyright Amazon.com, Inc. or its affiliates. All Rights Reserved.
"""
Line-based ``key = value`` run configuration.

``#`` starts a comment, blank lines are ignored and keys are dotted. Vectors are comma
separated and matrix rows are separated by ``;``. See ``example_config.conf`` for every key.
"""
from __future__ import annotations

import logging
import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

import numpy as np

from .discretization import build_grid
from .errors import ConfigError, InvalidInputError
from .geometry import ConvexDomain, make_domain
from .models import (
    Generator,
    PerturbedGenerator,
    QuadraticGenerator,
    SteadyControl,
    StepControl,
)

LOG = logging.getLogger(__name__)

MODES = ("flow", "steady", "legendre-check", "monitor-replay")

OUTPUT_DIR_ENV_VAR = "LAGFLOW_OUTPUT_DIR"

_DOMAIN_KEYS = ("kind", "center", "radius", "matrix", "interval")

KNOWN_KEYS = frozenset(
    ["mode", "resolution", "seed", "omega_tilde"]
    + [f"omega.{k}" for k in _DOMAIN_KEYS]
    + [f"omega_tilde.{k}" for k in _DOMAIN_KEYS]
    + [f"generator.{k}" for k in ("kind", "A", "b", "x_c", "epsilon", "bump_center", "bump_width")]
    + [f"control.{f.name}" for f in fields(StepControl)]
    + ["steady.tol", "steady.max_iter", "steady.max_line_search", "steady.warm_start"]
    + ["legendre.tol", "output.dir", "output.dump_every", "output.svg", "replay.monitors"]
)

_INT_CONTROLS = {"newton_max_iter", "max_steps", "max_halvings", "report_every", "snapshot_every"}


@dataclass(frozen=True, eq=False)
class RunConfig:
    mode: str
    omega: ConvexDomain
    omega_tilde: Optional[ConvexDomain]
    """None means the pushforward of omega by the quadratic part of the generator"""
    generator: Generator
    resolution: tuple[int, ...]
    control: StepControl
    steady: SteadyControl
    seed: int = 0
    steady_warm_start: Optional[Path] = None
    legendre_tol: float = 0.05
    output_dir: Optional[Path] = None
    dump_every: int = 0
    svg: bool = True
    replay_monitors: Optional[Path] = None

    def resolve_output_dir(self, override: Optional[str] = None) -> Path:
        if override:
            return Path(override)
        if self.output_dir is not None:
            return self.output_dir
        if OUTPUT_DIR_ENV_VAR in os.environ:
            return Path(os.environ[OUTPUT_DIR_ENV_VAR])
        raise ConfigError(f"No output directory: pass --out, set output.dir or {OUTPUT_DIR_ENV_VAR}")


class _Entries:
    """Raw values with the line they came from (None for command-line overrides)"""

    def __init__(self) -> None:
        self.values: dict[str, tuple[str, Optional[int]]] = {}

    def set(self, key: str, value: str, line: Optional[int]) -> None:
        if key not in KNOWN_KEYS:
            raise ConfigError(f"Unknown key '{key}'", line=line, key=key)
        self.values[key] = (value, line)

    def __contains__(self, key: str) -> bool:
        return key in self.values

    def line(self, key: str) -> Optional[int]:
        return self.values[key][1] if key in self.values else None

    def get(self, key: str, convert: Callable[[str], Any], default: Any = None) -> Any:
        if key not in self.values:
            return default
        raw, line = self.values[key]
        try:
            return convert(raw)
        except (ValueError, InvalidInputError) as e:
            raise ConfigError(f"Invalid value '{raw}': {e}", line=line, key=key) from e

    def require(self, key: str, convert: Callable[[str], Any]) -> Any:
        if key not in self.values:
            raise ConfigError(f"Missing required key '{key}'", key=key)
        return self.get(key, convert)


def _vector(raw: str) -> list[float]:
    return [float(v) for v in raw.split(",")]


def _matrix(raw: str) -> list[list[float]]:
    return [_vector(row) for row in raw.split(";")]


def _bool(raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ValueError("expected true or false")


def _ints(raw: str) -> tuple[int, ...]:
    return tuple(int(v) for v in raw.split(","))


def parse_lines(text: str, overrides: Sequence[str] = ()) -> _Entries:
    entries = _Entries()
    for number, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"Expected 'key = value', got '{raw_line.strip()}'", line=number)
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or not value:
            raise ConfigError(f"Empty key or value in '{raw_line.strip()}'", line=number)
        entries.set(key, value, number)

    for override in overrides:
        if "=" not in override:
            raise ConfigError(f"Override '{override}' is not of the form key=value")
        key, value = (part.strip() for part in override.split("=", 1))
        entries.set(key, value, None)
    return entries


def _domain(entries: _Entries, prefix: str) -> ConvexDomain:
    kind = entries.require(f"{prefix}.kind", str)
    interval = entries.get(f"{prefix}.interval", _vector)
    try:
        return make_domain(
            kind,
            center=entries.get(f"{prefix}.center", _vector),
            radius=entries.get(f"{prefix}.radius", float),
            matrix=entries.get(f"{prefix}.matrix", _matrix),
            interval=tuple(interval) if interval is not None else None,
        )
    except InvalidInputError as e:
        raise ConfigError(str(e), line=entries.line(f"{prefix}.kind"), key=f"{prefix}.kind") from e


def _random_bump_center(omega: ConvexDomain, width: float, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    low = omega.center - np.abs(omega.unit_map).sum(axis=1)
    high = omega.center + np.abs(omega.unit_map).sum(axis=1)
    if omega.n == 1:
        directions = np.array([[-1.0], [1.0]])
    else:
        angles = np.linspace(0, 2 * np.pi, 64, endpoint=False)
        directions = np.stack([np.cos(angles), np.sin(angles)], axis=-1)
    for _ in range(10_000):
        candidate = rng.uniform(low, high)
        if np.all(omega.contains(candidate + 1.05 * width * directions)):
            return candidate
    raise ConfigError(f"No bump of width {width} fits inside {omega.describe()}")


def _generator(entries: _Entries, omega: ConvexDomain, seed: int) -> Generator:
    kind = entries.get("generator.kind", str, "quadratic")
    try:
        quadratic = QuadraticGenerator.create(
            omega.n,
            entries.require("generator.A", _matrix),
            entries.get("generator.b", _vector),
            entries.get("generator.x_c", _vector),
        )
    except InvalidInputError as e:
        raise ConfigError(str(e), line=entries.line("generator.A"), key="generator.A") from e

    if kind == "quadratic":
        return quadratic
    if kind != "perturbed":
        raise ConfigError(
            f"Unknown generator kind '{kind}'",
            line=entries.line("generator.kind"),
            key="generator.kind",
        )

    width = entries.get("generator.bump_width", float, 0.25)
    center = entries.get("generator.bump_center", _vector)
    try:
        return PerturbedGenerator(
            quadratic=quadratic,
            epsilon=entries.require("generator.epsilon", float),
            bump_center=(
                _random_bump_center(omega, width, seed) if center is None else np.array(center)
            ),
            bump_width=width,
        )
    except InvalidInputError as e:
        raise ConfigError(str(e), line=entries.line("generator.kind"), key="generator") from e


def _step_control(entries: _Entries) -> StepControl:
    kwargs: dict[str, Any] = {}
    for f in fields(StepControl):
        key = f"control.{f.name}"
        if key not in entries:
            continue
        kwargs[f.name] = entries.get(key, int if f.name in _INT_CONTROLS else float)
        try:
            StepControl(**{f.name: kwargs[f.name]})
        except InvalidInputError as e:
            raise ConfigError(str(e), line=entries.line(key), key=key) from e
    return StepControl(**kwargs)


def _existing_path(entries: _Entries, key: str, base_dir: Path) -> Optional[Path]:
    raw = entries.get(key, str)
    if raw is None:
        return None
    path = Path(raw) if Path(raw).is_absolute() else base_dir / raw
    if not path.exists():
        raise ConfigError(f"File {path} does not exist", line=entries.line(key), key=key)
    return path


def parse_config(
    text: str, overrides: Sequence[str] = (), *, base_dir: Optional[Path] = None
) -> RunConfig:
    entries = parse_lines(text, overrides)
    base = Path.cwd() if base_dir is None else base_dir

    mode = entries.get("mode", str, "flow")
    if mode not in MODES:
        raise ConfigError(f"Unknown mode '{mode}'", line=entries.line("mode"), key="mode")
    seed = entries.get("seed", int, 0)

    omega = _domain(entries, "omega")
    omega_tilde = None
    if any(f"omega_tilde.{k}" in entries for k in _DOMAIN_KEYS):
        omega_tilde = _domain(entries, "omega_tilde")
    elif entries.get("omega_tilde", str, "pushforward") != "pushforward":
        raise ConfigError(
            "omega_tilde must be 'pushforward' or given by omega_tilde.* keys",
            line=entries.line("omega_tilde"),
            key="omega_tilde",
        )

    resolution = entries.require("resolution", _ints)
    try:
        build_grid(omega, resolution)
    except InvalidInputError as e:
        raise ConfigError(str(e), line=entries.line("resolution"), key="resolution") from e

    try:
        steady = SteadyControl(
            tol_s=entries.get("steady.tol", float, SteadyControl.tol_s),
            max_iter=entries.get("steady.max_iter", int, SteadyControl.max_iter),
            max_line_search=entries.get(
                "steady.max_line_search", int, SteadyControl.max_line_search
            ),
        )
    except InvalidInputError as e:
        raise ConfigError(str(e), key="steady") from e

    legendre_tol = entries.get("legendre.tol", float, 0.05)
    dump_every = entries.get("output.dump_every", int, 0)
    if legendre_tol <= 0 or dump_every < 0:
        raise ConfigError("legendre.tol must be positive and output.dump_every non-negative")

    replay = _existing_path(entries, "replay.monitors", base)
    if mode == "monitor-replay" and replay is None:
        raise ConfigError("monitor-replay mode needs replay.monitors", key="replay.monitors")

    output_dir = entries.get("output.dir", str)
    config = RunConfig(
        mode=mode,
        omega=omega,
        omega_tilde=omega_tilde,
        generator=_generator(entries, omega, seed),
        resolution=resolution,
        control=_step_control(entries),
        steady=steady,
        seed=seed,
        steady_warm_start=_existing_path(entries, "steady.warm_start", base),
        legendre_tol=legendre_tol,
        output_dir=Path(output_dir) if output_dir else None,
        dump_every=dump_every,
        svg=entries.get("output.svg", _bool, True),
        replay_monitors=replay,
    )
    LOG.info(f"Loaded {mode} configuration on {omega.describe()} with resolution {resolution}")
    return config


def load_config(path: str | Path, overrides: Sequence[str] = ()) -> RunConfig:
    config_path = Path(path)
    try:
        text = config_path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"Cannot read configuration file {config_path}: {e.strerror}") from e
    return parse_config(text, overrides, base_dir=config_path.parent)
