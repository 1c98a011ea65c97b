"""Scenario construction: room/transmitter/receiver layouts, the reference
simulation parameters, user placement and config (de)serialization.

Config files are TOML or JSON with explicit units in the field names; the
canonical serialized form is JSON.  All randomness flows through
numpy's seeded PCG64 generators: realization i of a campaign draws from
default_rng([seed, i]).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .geometry import LedSource, Photodetector, Reflector, Room, discretize_room, unit_vector
from .network import LinkBudget

try:  # tomllib on 3.11+, the tomli backport otherwise
    import tomllib as _toml
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as _toml


class ConfigError(ValueError):
    """Invalid or unreadable scenario configuration."""


@dataclass(frozen=True)
class RoomConfig:
    dimensions_m: tuple[float, float, float] = (12.0, 12.0, 4.0)
    wall_coefficient: float = 0.8
    floor_coefficient: float = 0.3
    ceiling_coefficient: float = 0.3
    patch_resolution_m: float = 0.5


@dataclass(frozen=True)
class ScenarioConfig:
    """Full description of a simulation scenario.

    Transmitters sit on the ceiling facing down; each carries one central LED
    plus a ring of `tx_ring_count` LEDs tilted by `tx_divergence_deg`.
    Receivers are placed at `receiver_height_m` facing up; multi-PD receivers
    mirror the transmitter layout (one PD up, a tilted ring).
    """

    room: RoomConfig = field(default_factory=RoomConfig)
    transmitter_positions_m: tuple[tuple[float, float, float], ...] = (
        (3.0, 3.0, 4.0),
        (3.0, 9.0, 4.0),
        (9.0, 3.0, 4.0),
        (9.0, 9.0, 4.0),
    )
    tx_ring_count: int = 6
    tx_divergence_deg: float = 45.0
    lambertian_order: float = 7.0459
    receiver_height_m: float = 0.85
    pd_count: int = 1
    pd_area_m2: float = 40e-6
    pd_fov_deg: float = 90.0
    pd_divergence_deg: float = 45.0
    responsivity_a_per_w: float = 0.5
    noise_psd_a2_per_hz: float = 2.5e-20
    bandwidth_hz: float = 20e6
    p_max_w: float = 1.0
    reflection_order: int = 4
    user_count: int = 4
    seed: int = 1

    def __post_init__(self):
        object.__setattr__(self, "room", _coerce_room(self.room))
        positions = tuple(tuple(float(x) for x in pos) for pos in self.transmitter_positions_m)
        object.__setattr__(self, "transmitter_positions_m", positions)
        lx, ly, lz = self.room.dimensions_m
        for pos in positions:
            if not (0 <= pos[0] <= lx and 0 <= pos[1] <= ly and 0 <= pos[2] <= lz):
                raise ConfigError(f"transmitter {pos} lies outside the room")
        if not 0 < self.receiver_height_m < lz:
            raise ConfigError("receiver height must lie inside the room")
        if self.user_count < 1:
            raise ConfigError("user_count must be at least 1")
        if self.pd_count < 1:
            raise ConfigError("pd_count must be at least 1")

    def geometry_key(self) -> tuple:
        """Hashable key of everything the multipath kernel depends on."""
        return (
            self.room,
            self.transmitter_positions_m,
            self.tx_ring_count,
            self.tx_divergence_deg,
            self.lambertian_order,
            self.reflection_order,
        )

    @property
    def leds_per_transmitter(self) -> int:
        return 1 + self.tx_ring_count

    @property
    def led_count(self) -> int:
        return len(self.transmitter_positions_m) * self.leds_per_transmitter


def _coerce_room(room) -> RoomConfig:
    if isinstance(room, RoomConfig):
        coerced = replace(room, dimensions_m=tuple(float(x) for x in room.dimensions_m))
        return coerced
    if isinstance(room, dict):
        return RoomConfig(**{k: tuple(v) if k == "dimensions_m" else v for k, v in room.items()})
    raise ConfigError("room must be a RoomConfig or a mapping")


def build_reference_scenario(overrides: dict | None = None, *, small_room: bool = False) -> ScenarioConfig:
    """Reference scenario: 12 x 12 x 4 m room, four 7-LED ceiling transmitters.

    `small_room=True` selects the half-size variant (12 x 6 m, two
    transmitters).  `overrides` is a flat mapping of ScenarioConfig field
    names (the room accepts a nested mapping of RoomConfig fields).
    """
    config = ScenarioConfig()
    if small_room:
        config = replace(
            config,
            room=replace(config.room, dimensions_m=(12.0, 6.0, 4.0)),
            transmitter_positions_m=((3.0, 3.0, 4.0), (9.0, 3.0, 4.0)),
        )
    if overrides:
        config = apply_overrides(config, overrides)
    return config


def apply_overrides(config: ScenarioConfig, overrides: dict) -> ScenarioConfig:
    fields = {}
    for key, value in overrides.items():
        if key == "room":
            room_kwargs = asdict(config.room)
            room_kwargs.update(value)
            fields["room"] = RoomConfig(**room_kwargs)
        elif key == "transmitter_positions_m":
            fields[key] = tuple(tuple(float(x) for x in pos) for pos in value)
        elif hasattr(config, key):
            fields[key] = value
        else:
            raise ConfigError(f"unknown scenario field: {key}")
    try:
        return replace(config, **fields)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


# ---------------------------------------------------------------------------
# derived geometry
# ---------------------------------------------------------------------------

def _ring_axes(count: int, divergence_deg: float, pole: float) -> list[np.ndarray]:
    """Unit axes tilted from (0, 0, pole) by the divergence angle, spread evenly."""
    tilt = math.radians(divergence_deg)
    axes = []
    for j in range(count):
        azimuth = 2.0 * math.pi * j / count
        axes.append(
            unit_vector(
                (
                    math.sin(tilt) * math.cos(azimuth),
                    math.sin(tilt) * math.sin(azimuth),
                    pole * math.cos(tilt),
                )
            )
        )
    return axes


def led_sources(config: ScenarioConfig) -> list[LedSource]:
    """All LEDs of the scenario: per transmitter, one down plus the tilted ring."""
    sources = []
    for pos in config.transmitter_positions_m:
        position = np.asarray(pos, dtype=float)
        axes = [np.array([0.0, 0.0, -1.0])]
        axes.extend(_ring_axes(config.tx_ring_count, config.tx_divergence_deg, pole=-1.0))
        for axis in axes:
            sources.append(
                LedSource(
                    position=position,
                    orientation=axis,
                    lambertian_order=config.lambertian_order,
                    power_coefficient=config.p_max_w,
                )
            )
    return sources


def receiver_pds(config: ScenarioConfig, position) -> list[Photodetector]:
    """The PDs of one receiver at `position`: one up, plus a tilted ring."""
    position = np.asarray(position, dtype=float)
    axes = [np.array([0.0, 0.0, 1.0])]
    if config.pd_count > 1:
        axes.extend(_ring_axes(config.pd_count - 1, config.pd_divergence_deg, pole=1.0))
    fov = math.radians(config.pd_fov_deg)
    return [
        Photodetector(
            position=position,
            orientation=axis,
            area=config.pd_area_m2,
            fov=fov,
            responsivity=config.responsivity_a_per_w,
        )
        for axis in axes
    ]


def room_reflectors(config: ScenarioConfig) -> list[Reflector]:
    room = Room(
        dimensions=np.asarray(config.room.dimensions_m, dtype=float),
        wall_coefficient=config.room.wall_coefficient,
        floor_coefficient=config.room.floor_coefficient,
        ceiling_coefficient=config.room.ceiling_coefficient,
        patch_resolution=config.room.patch_resolution_m,
    )
    return discretize_room(room)


def budget(config: ScenarioConfig) -> LinkBudget:
    return LinkBudget(
        noise_psd=config.noise_psd_a2_per_hz,
        bandwidth=config.bandwidth_hz,
        p_max=config.p_max_w,
        responsivity=config.responsivity_a_per_w,
    )


def place_users(config: ScenarioConfig, realization) -> np.ndarray:
    """User positions for one realization: uniform over the floor at receiver height.

    Stream splitting: realization i draws from default_rng([seed, i]); a tuple
    key (i, j, ...) draws from default_rng([seed, i, j, ...]) so nested sweeps
    stay reproducible.
    """
    key = realization if isinstance(realization, (tuple, list)) else (realization,)
    rng = np.random.default_rng([config.seed, *key])
    lx, ly, _ = config.room.dimensions_m
    xy = rng.uniform(low=(0.0, 0.0), high=(lx, ly), size=(config.user_count, 2))
    positions = np.column_stack([xy, np.full(config.user_count, config.receiver_height_m)])
    return positions


# ---------------------------------------------------------------------------
# config (de)serialization
# ---------------------------------------------------------------------------

def scenario_to_dict(config: ScenarioConfig) -> dict:
    data = asdict(config)
    data["room"]["dimensions_m"] = list(data["room"]["dimensions_m"])
    data["transmitter_positions_m"] = [list(pos) for pos in data["transmitter_positions_m"]]
    return data


def scenario_from_dict(data: dict) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ConfigError("scenario config must be a mapping")
    return apply_overrides(ScenarioConfig(), data)


def save_scenario(config: ScenarioConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scenario_to_dict(config), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_scenario(path) -> ScenarioConfig:
    text_path = str(path)
    try:
        if text_path.endswith(".toml"):
            with open(path, "rb") as fh:
                data = _toml.load(fh)
        else:
            with open(path, "r", encoding="utf-8") as fh:
                data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {text_path}: {exc}") from exc
    except (json.JSONDecodeError, _toml.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse config {text_path}: {exc}") from exc
    return scenario_from_dict(data)
