"""Geometric primitives: LED sources, photodetectors, rooms and surface patches.

Positions are in meters, orientations are unit vectors, areas in m^2 and
field-of-view half-angles in radians.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SPEED_OF_LIGHT = 299792458.0  # m/s

_UNIT_TOL = 1e-12


def as_vec3(v) -> np.ndarray:
    """Coerce to a float (3,) array."""
    arr = np.asarray(v, dtype=float)
    if arr.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {arr.shape}")
    return arr


def unit_vector(v) -> np.ndarray:
    """Normalize v to unit Euclidean norm."""
    arr = as_vec3(v)
    norm = float(np.linalg.norm(arr))
    if norm == 0.0:
        raise ValueError("cannot normalize the zero vector")
    return arr / norm


def _check_unit(v, name: str) -> np.ndarray:
    arr = as_vec3(v)
    if abs(float(np.linalg.norm(arr)) - 1.0) > _UNIT_TOL:
        raise ValueError(f"{name} must have unit norm (within {_UNIT_TOL:g})")
    return arr


@dataclass
class LedSource:
    """A directional LED: position, beam axis, Lambertian order and power coefficient.

    The power coefficient is the standard deviation of the zero-mean
    communication signal riding on the illumination DC level.
    """

    position: np.ndarray
    orientation: np.ndarray
    lambertian_order: float = 1.0
    power_coefficient: float = 1.0

    def __post_init__(self):
        self.position = as_vec3(self.position)
        self.orientation = _check_unit(self.orientation, "LED orientation")
        if self.lambertian_order <= 0:
            raise ValueError("lambertian_order must be positive")
        if self.power_coefficient < 0:
            raise ValueError("power_coefficient must be nonnegative")


@dataclass
class Photodetector:
    """A photodetector: position, facing direction, area, FOV half-angle, responsivity."""

    position: np.ndarray
    orientation: np.ndarray
    area: float
    fov: float = math.pi / 2
    responsivity: float = 0.5

    def __post_init__(self):
        self.position = as_vec3(self.position)
        self.orientation = _check_unit(self.orientation, "PD orientation")
        if self.area <= 0:
            raise ValueError("PD area must be positive")
        if not 0 < self.fov <= math.pi / 2:
            raise ValueError("FOV half-angle must lie in (0, pi/2]")
        if self.responsivity <= 0:
            raise ValueError("responsivity must be positive")


@dataclass
class Reflector:
    """A diffuse surface patch acting as Lambertian re-emitter of mode 1.

    As a receiver the patch has area `area` and FOV pi/2; `coefficient` is
    the diffuse reflection coefficient in [0, 1).
    """

    position: np.ndarray
    orientation: np.ndarray
    area: float
    coefficient: float

    def __post_init__(self):
        self.position = as_vec3(self.position)
        self.orientation = _check_unit(self.orientation, "patch orientation")
        if self.area <= 0:
            raise ValueError("patch area must be positive")
        if not 0 <= self.coefficient < 1:
            raise ValueError("reflection coefficient must lie in [0, 1)")


@dataclass
class Room:
    """A rectangular room with per-surface diffuse reflection coefficients.

    The room spans [0, Lx] x [0, Ly] x [0, Lz]; the floor is z = 0.
    `patch_resolution` is the target edge length of the square-ish patches
    the surfaces are tiled with.
    """

    dimensions: np.ndarray
    wall_coefficient: float = 0.8
    floor_coefficient: float = 0.3
    ceiling_coefficient: float = 0.3
    patch_resolution: float = 0.5

    def __post_init__(self):
        self.dimensions = as_vec3(self.dimensions)
        if np.any(self.dimensions <= 0):
            raise ValueError("room dimensions must be strictly positive")
        for name in ("wall_coefficient", "floor_coefficient", "ceiling_coefficient"):
            value = getattr(self, name)
            if not 0 <= value < 1:
                raise ValueError(f"{name} must lie in [0, 1)")
        if self.patch_resolution <= 0:
            raise ValueError("patch_resolution must be positive")


def discretize_room(room: Room) -> list[Reflector]:
    """Tile all six room surfaces with patches of edge ~ room.patch_resolution.

    Patch orientations are the inward surface normals; per-surface reflection
    coefficients are applied.  Patches are listed floor, ceiling, then the
    four walls (x=0, x=Lx, y=0, y=Ly), row-major within each surface.
    """
    res = room.patch_resolution
    lx, ly, lz = (float(d) for d in room.dimensions)
    if res > min(lx, ly, lz):
        raise ValueError(
            "patch_resolution exceeds the smallest room dimension "
            f"({res:g} > {min(lx, ly, lz):g})"
        )

    def centers(length: float) -> tuple[np.ndarray, float]:
        n = math.ceil(length / res)
        edge = length / n
        return (np.arange(n) + 0.5) * edge, edge

    xs, dx = centers(lx)
    ys, dy = centers(ly)
    zs, dz = centers(lz)

    patches: list[Reflector] = []

    def add_surface(us, vs, du, dv, placer, normal, coefficient):
        for u in us:
            for v in vs:
                patches.append(
                    Reflector(
                        position=placer(u, v),
                        orientation=np.asarray(normal, dtype=float),
                        area=du * dv,
                        coefficient=coefficient,
                    )
                )

    # floor z=0 and ceiling z=Lz
    add_surface(xs, ys, dx, dy, lambda u, v: (u, v, 0.0), (0, 0, 1), room.floor_coefficient)
    add_surface(xs, ys, dx, dy, lambda u, v: (u, v, lz), (0, 0, -1), room.ceiling_coefficient)
    # walls x=0, x=Lx
    add_surface(ys, zs, dy, dz, lambda u, v: (0.0, u, v), (1, 0, 0), room.wall_coefficient)
    add_surface(ys, zs, dy, dz, lambda u, v: (lx, u, v), (-1, 0, 0), room.wall_coefficient)
    # walls y=0, y=Ly
    add_surface(xs, zs, dx, dz, lambda u, v: (u, 0.0, v), (0, 1, 0), room.wall_coefficient)
    add_surface(xs, zs, dx, dz, lambda u, v: (u, ly, v), (0, -1, 0), room.wall_coefficient)
    return patches
