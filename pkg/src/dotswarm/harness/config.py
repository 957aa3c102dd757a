"""Experiment configuration, loaded from JSON.

Top-level keys (all optional)::

    {
      "robots": 5, "carriers": 5, "timeout_s": 600,
      "seeds": [0, 1, 2] | "0-9",
      "rates_hz": {"physics": 100, "sensors": 50, "bt": 10},
      "arena": {"width": 5.0, "height": 5.0, "search_x": 0.0, "drop_x": 1.25},
      "world": {"robot_poses": [[x, y, theta], ...] | "random",
                "carrier_poses": ... , "carrier_wall_margin": 0.75, "carrier_separation": 0.9},
      "physics": {<PhysicsParams fields>},
      "noise": {"irtof": {<IrtofNoiseModel fields>}, "camera": {<CameraParams fields>},
                "odometry": {"trans_frac": 0.02, "rot_frac": 0.01}, "compass_sigma_deg": 2.0},
      "behaviour": {<TaskParams fields>, "explore": {<ExploreParams fields>}},
      "output_dir": "runs/latest"
    }
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from ..behaviour.explore import ExploreParams
from ..behaviour.task import TaskParams
from ..hardware import SensorConfig
from ..sensing import CameraParams, IrtofNoiseModel, OdometryNoise
from ..world import Arena, PhysicsParams, SpawnConfig

OUT_ENV = "DOTSIM_OUT"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Rates:
    physics: int = 100
    sensors: int = 50
    bt: int = 10

    def validate(self) -> None:
        if min(self.physics, self.sensors, self.bt) <= 0:
            raise ConfigError("rates must be positive")
        if self.physics % self.sensors or self.physics % self.bt:
            raise ConfigError("sensor and BT rates must divide the physics rate")


@dataclass(frozen=True)
class ExperimentConfig:
    robots: int = 5
    carriers: int = 5
    timeout_s: float = 600.0
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    rates: Rates = field(default_factory=Rates)
    arena: Arena = field(default_factory=Arena)
    spawn: SpawnConfig = field(default_factory=SpawnConfig)
    physics: PhysicsParams = field(default_factory=PhysicsParams)
    sensors: SensorConfig = field(default_factory=SensorConfig)
    task: TaskParams = field(default_factory=TaskParams)
    output_dir: str | None = None

    def validate(self) -> ExperimentConfig:
        if not self.timeout_s > 0:
            raise ConfigError("timeout_s must be positive")
        if self.robots < 1 or self.carriers < 0:
            raise ConfigError("need at least one robot and a non-negative carrier count")
        self.rates.validate()
        if abs(1.0 / self.rates.physics - self.physics.dt) > 1e-12:
            raise ConfigError("physics.dt must equal 1 / rates.physics")
        return self

    def with_seeds(self, seeds) -> ExperimentConfig:
        return dataclasses.replace(self, seeds=tuple(int(s) for s in seeds))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def parse_seeds(value: Any) -> tuple[int, ...]:
    """Accepts a list, ``"3"``, ``"0-9"`` or ``"1,4,7"`` (ranges inclusive)."""
    try:
        out = _parse_seeds(value)
    except ValueError as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(f"bad seed list {value!r}") from e
    if any(s < 0 for s in out):
        raise ConfigError(f"seeds must be non-negative: {value!r}")
    return out


def _parse_seeds(value: Any) -> tuple[int, ...]:
    if isinstance(value, int):
        return (value,)
    if isinstance(value, (list, tuple)):
        return tuple(int(s) for s in value)
    out: list[int] = []
    for part in str(value).split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part[1:]:
            a, b = part.split("-", 1) if not part.startswith("-") else (part, "")
            lo, hi = int(a), int(b)
            if hi < lo:
                raise ConfigError(f"empty seed range {part!r}")
            out.extend(range(lo, hi + 1))
        else:
            out.append(int(part))
    if not out:
        raise ConfigError(f"no seeds in {value!r}")
    return tuple(out)


def _build(cls, data: dict | None, where: str):
    data = dict(data or {})
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{where}: {e}") from e


def from_dict(d: dict) -> ExperimentConfig:
    d = dict(d)
    known = {"robots", "carriers", "timeout_s", "seeds", "rates_hz", "arena", "world", "physics",
             "noise", "behaviour", "output_dir"}
    extra = set(d) - known
    if extra:
        raise ConfigError(f"unknown top-level keys: {sorted(extra)}")
    try:
        robots = int(d.get("robots", 5))
        carriers = int(d.get("carriers", 5))
        timeout = float(d.get("timeout_s", 600.0))
    except (TypeError, ValueError) as e:
        raise ConfigError(f"robots, carriers and timeout_s must be numbers: {e}") from e
    world = dict(d.get("world", {}))
    for k in ("robot_poses", "carrier_poses"):
        if world.get(k) == "random":
            world[k] = None
    spawn = _build(SpawnConfig, {"robots": robots, "carriers": carriers, **world}, "world")
    if spawn.robot_poses is not None and len(spawn.robot_poses) != robots:
        raise ConfigError("robot_poses length must match robots")
    if spawn.carrier_poses is not None and len(spawn.carrier_poses) != carriers:
        raise ConfigError("carrier_poses length must match carriers")
    noise = dict(d.get("noise", {}))
    try:
        compass_deg = float(noise.pop("compass_sigma_deg", 2.0))
    except (TypeError, ValueError) as e:
        raise ConfigError(f"noise.compass_sigma_deg: {e}") from e
    sensors = SensorConfig(
        irtof=_build(IrtofNoiseModel, noise.pop("irtof", None), "noise.irtof"),
        camera=_build(CameraParams, noise.pop("camera", None), "noise.camera"),
        odometry=_build(OdometryNoise, noise.pop("odometry", None), "noise.odometry"),
        compass_sigma=math.radians(compass_deg),
    )
    if noise:
        raise ConfigError(f"unknown keys in noise: {sorted(noise)}")
    beh = dict(d.get("behaviour", {}))
    explore = _build(ExploreParams, beh.pop("explore", None), "behaviour.explore")
    task = _build(TaskParams, {**beh, "explore": explore}, "behaviour")
    rates = _build(Rates, d.get("rates_hz"), "rates_hz")
    physics = _build(PhysicsParams, {"dt": 1.0 / rates.physics, **d.get("physics", {})}, "physics")
    cfg = ExperimentConfig(
        robots=robots, carriers=carriers, timeout_s=timeout,
        seeds=parse_seeds(d.get("seeds", [0, 1, 2, 3, 4])), rates=rates,
        arena=_build(Arena, d.get("arena"), "arena"), spawn=spawn, physics=physics,
        sensors=sensors, task=task, output_dir=d.get("output_dir"),
    )
    return cfg.validate()


def load_config(path: str | os.PathLike | None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig().validate()
    p = Path(path)
    try:
        data = json.loads(p.read_text())
    except OSError as e:
        raise ConfigError(f"cannot read config {p}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"{p}: invalid JSON ({e})") from e
    if not isinstance(data, dict):
        raise ConfigError(f"{p}: top level must be an object")
    return from_dict(data)


def default_output_dir(cfg: ExperimentConfig | None = None) -> Path:
    if cfg is not None and cfg.output_dir:
        return Path(cfg.output_dir)
    return Path(os.environ.get(OUT_ENV, "dotsim_runs"))
