import numpy as np
import pytest

from tilewave.scene import Material, Scene, Surface, build_corridor_floorplan, vec


@pytest.fixture(scope="session")
def floorplan() -> Scene:
    return build_corridor_floorplan()


def single_wall_scene(extent: float = 30.0) -> Scene:
    """One square tiled wall in the x=0 plane, normal +x, centered on the origin."""
    half = extent / 2.0
    wall = Surface("wall", vec(0.0, -half, -half), vec(0.0, extent, 0.0),
                   vec(0.0, 0.0, extent), Material.TILED_WALL, vec(1.0, 0.0, 0.0))
    return Scene([wall])


@pytest.fixture(scope="session")
def mirror_wall() -> Scene:
    return single_wall_scene()
