import math

import numpy as np
import pytest

from vlcsim.geometry import LedSource, Photodetector, Room, discretize_room
from vlcsim.network import Assignment, LinkBudget


@pytest.fixture
def table_budget() -> LinkBudget:
    """The reference link budget (Table-1 style constants)."""
    return LinkBudget(noise_psd=2.5e-20, bandwidth=20e6, p_max=1.0, responsivity=0.5)


@pytest.fixture
def nadir_pair():
    """LED on the ceiling looking straight down at an upward PD 3 m below."""
    led = LedSource(position=(0.0, 0.0, 3.0), orientation=(0.0, 0.0, -1.0), lambertian_order=1.0)
    pd = Photodetector(position=(0.0, 0.0, 0.0), orientation=(0.0, 0.0, 1.0), area=4e-5, fov=math.pi / 2)
    return led, pd


def random_small_scene(rng, max_divisions=3):
    """A random box room with a live LED/PD pair for oracle comparisons.

    The LED sits in the upper half pointing mostly down, the PD in the lower
    half pointing mostly up, so the direct and reflected paths are exercised.
    """
    dims = rng.uniform(2.0, 5.0, size=3)
    divisions = int(rng.integers(1, max_divisions + 1))
    coefficients = rng.uniform(0.1, 0.85, size=3)
    while True:
        res = float(np.max(dims)) / divisions
        res = min(res, float(np.min(dims)))
        room = Room(
            dimensions=dims,
            wall_coefficient=float(coefficients[0]),
            floor_coefficient=float(coefficients[1]),
            ceiling_coefficient=float(coefficients[2]),
            patch_resolution=res,
        )
        patches = discretize_room(room)
        if len(patches) <= 50 or divisions == 1:
            break
        divisions -= 1

    def tilted(main, spread):
        v = np.asarray(main, dtype=float) + rng.uniform(-spread, spread, size=3)
        return v / np.linalg.norm(v)

    led = LedSource(
        position=rng.uniform(0.55, 0.9, size=3) * dims,
        orientation=tilted((0, 0, -1), 0.4),
        lambertian_order=float(rng.uniform(0.5, 8.0)),
    )
    pd = Photodetector(
        position=rng.uniform(0.1, 0.45, size=3) * dims,
        orientation=tilted((0, 0, 1), 0.4),
        area=1e-4,
        fov=float(rng.uniform(0.7, math.pi / 2)),
    )
    return room, patches, led, pd


def random_instance(rng, max_users=4, max_leds=10, scale=1e-6):
    """Random gains plus a full assignment that serves every user."""
    users = int(rng.integers(2, max_users + 1))
    leds = int(rng.integers(users, max_leds + 1))
    h = rng.uniform(0.05, 1.0, size=(users, leds)) * scale
    owners = np.concatenate([np.arange(users), rng.integers(0, users, size=leds - users)])
    rng.shuffle(owners)
    return h, Assignment.from_owner(owners, users=users)
