import math
from collections import Counter

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from tilewave.scene import (
    InvalidAngleError,
    Material,
    Scene,
    Surface,
    build_corridor_floorplan,
    tile_axes,
    vec,
    virtual_normal,
)


def test_floorplan_tile_count(floorplan):
    assert floorplan.tile_count == 222


def test_tiles_are_one_meter(floorplan):
    assert all(t.side == 1.0 for t in floorplan.tiles)


def test_perimeter_and_middle_wall_split(floorplan):
    # the only face assignment consistent with the floorplan dimensions:
    # 150 perimeter tiles plus 72 on the two middle-wall faces
    by_surface = Counter(t.parent_surface for t in floorplan.tiles)
    perimeter = sum(by_surface[s] for s in ("wall-y0", "wall-x10", "wall-y15", "wall-x0"))
    middle = by_surface["mid-x4.5"] + by_surface["mid-x5.5"]
    assert perimeter == 150
    assert middle == 72
    assert by_surface["wall-x0"] == 45 and by_surface["wall-y0"] == 30


def test_floorplan_concrete_faces_untiled(floorplan):
    tiled = {t.parent_surface for t in floorplan.tiles}
    assert "floor" not in tiled and "ceiling" not in tiled and "mid-cap-y3" not in tiled


def test_tiles_lie_inside_parent(floorplan):
    for t in floorplan.tiles:
        s = floorplan.surface(t.parent_surface)
        u, v = s.local_uv(t.center)
        assert -1e-9 <= u <= s.len_u + 1e-9
        assert -1e-9 <= v <= s.len_v + 1e-9
        # center offset from the surface plane is zero
        assert abs(np.dot(t.center - s.origin, s.true_normal)) < 1e-9


def test_ray_intersect_axis_aligned(floorplan):
    hit = floorplan.ray_intersect(vec(2.0, 7.0, 1.5), vec(-1.0, 0.0, 0.0))
    assert hit is not None
    assert hit.surface == "wall-x0"
    assert hit.distance == pytest.approx(2.0, abs=1e-9)
    assert hit.tile is not None


def test_ray_intersect_epsilon_skips_originating_surface(floorplan):
    # origin on the west wall, direction in the wall plane
    hit = floorplan.ray_intersect(vec(0.0, 7.0, 1.5), vec(0.0, 1.0, 0.0))
    assert hit is None or hit.surface != "wall-x0"


def test_ray_through_opening_reaches_far_wall(floorplan):
    # from corridor 2 through the y in [0,3] opening: the middle wall must
    # not block the ray, the far perimeter wall does
    origin = vec(7.0, 1.5, 1.5)
    hit = floorplan.ray_intersect(origin, vec(-1.0, 0.0, 0.0))
    assert hit is not None
    assert hit.surface == "wall-x0"
    assert hit.distance == pytest.approx(7.0, abs=1e-9)


def test_ray_blocked_by_middle_wall(floorplan):
    hit = floorplan.ray_intersect(vec(7.0, 8.0, 1.5), vec(-1.0, 0.0, 0.0))
    assert hit is not None
    assert hit.surface == "mid-x5.5"
    assert hit.distance == pytest.approx(1.5, abs=1e-9)


def test_virtual_normal_identity(floorplan):
    t = floorplan.tiles[0]
    np.testing.assert_allclose(virtual_normal(t, 0.0, 0.0), t.true_normal, atol=1e-12)


def test_virtual_normal_pure_azimuth(floorplan):
    t = next(t for t in floorplan.tiles if t.parent_surface == "wall-x0")
    n = virtual_normal(t, 30.0, 0.0)
    assert np.linalg.norm(n) == pytest.approx(1.0, abs=1e-9)
    angle = math.degrees(math.acos(np.clip(np.dot(n, t.true_normal), -1, 1)))
    assert angle == pytest.approx(30.0, abs=1e-9)


def test_virtual_normal_composition_matches_rotation_oracle(floorplan):
    # independent oracle: compose the two rotation matrices numerically
    t = floorplan.tiles[60]
    for az, el in ((15.0, 15.0), (-30.0, 15.0), (30.0, -30.0)):
        r_az = Rotation.from_rotvec(math.radians(az) * t.axis_v)
        r_el = Rotation.from_rotvec(math.radians(el) * t.axis_h)
        expected = r_el.apply(r_az.apply(t.true_normal))
        np.testing.assert_allclose(virtual_normal(t, az, el), expected, atol=1e-12)
    # the (15, 15) composition tilts the normal by acos(cos15*cos15) ~ 21.09 deg
    n = virtual_normal(t, 15.0, 15.0)
    angle = math.acos(np.clip(np.dot(n, t.true_normal), -1, 1))
    assert angle == pytest.approx(math.acos(math.cos(math.radians(15.0)) ** 2), abs=1e-9)


def test_virtual_normal_rejects_off_catalog_angles(floorplan):
    with pytest.raises(InvalidAngleError):
        virtual_normal(floorplan.tiles[0], 10.0, 0.0)
    with pytest.raises(InvalidAngleError):
        virtual_normal(floorplan.tiles[0], 0.0, 45.0)


def test_tile_partition_property(floorplan):
    # every point on a tiled surface maps to exactly one tile whose square
    # contains it (10^4 random surface points)
    rng = np.random.default_rng(7)
    tiled = [s for s in floorplan.surfaces if s.material is Material.TILED_WALL]
    for _ in range(10_000 // len(tiled)):
        for s in tiled:
            u = rng.uniform(0.0, s.len_u)
            v = rng.uniform(0.0, s.len_v)
            p = s.origin + u * s.u_hat + v * s.v_hat
            tid = floorplan.tile_at(s.id, p)
            t = floorplan.tiles[tid]
            assert t.id == tid and t.parent_surface == s.id
            tu, tv = s.local_uv(t.center)
            assert abs(tu - u) <= 0.5 + 1e-9
            assert abs(tv - v) <= 0.5 + 1e-9


def test_ray_intersect_reversible(floorplan):
    # the forward segment is surface-free, so the reverse ray from the hit
    # point must travel at least as far before its own first hit (epsilon
    # handling excludes the originating surface)
    rng = np.random.default_rng(3)
    checked = 0
    for _ in range(50):
        o = np.array([rng.uniform(0.5, 9.5), rng.uniform(0.5, 14.5), rng.uniform(0.5, 2.5)])
        if 4.4 <= o[0] <= 5.6 and o[1] >= 3.0:
            continue  # inside the middle wall
        d = rng.normal(size=3)
        d /= np.linalg.norm(d)
        hit = floorplan.ray_intersect(o, d)
        if hit is None:
            continue
        back = floorplan.ray_intersect(hit.point, -d)
        assert back is not None
        assert back.distance >= hit.distance - 1e-6
        np.testing.assert_allclose(o + hit.distance * d, hit.point, atol=1e-9)
        checked += 1
    assert checked > 20


def test_ray_intersect_wall_to_wall_symmetric(floorplan):
    # origin on a wall: the reverse ray hits it back at the same distance
    o = vec(0.0, 8.0, 1.5)
    hit = floorplan.ray_intersect(o, vec(1.0, 0.0, 0.0))
    assert hit.surface == "mid-x4.5" and hit.distance == pytest.approx(4.5, abs=1e-9)
    back = floorplan.ray_intersect(hit.point, vec(-1.0, 0.0, 0.0))
    assert back.surface == "wall-x0"
    assert back.distance == pytest.approx(hit.distance, abs=1e-9)


def test_floorplan_build_deterministic():
    a, b = build_corridor_floorplan(), build_corridor_floorplan()
    assert a.tile_count == b.tile_count
    for ta, tb in zip(a.tiles, b.tiles):
        assert ta.id == tb.id and ta.parent_surface == tb.parent_surface
        np.testing.assert_array_equal(ta.center, tb.center)
        np.testing.assert_array_equal(ta.true_normal, tb.true_normal)


def test_scene_json_roundtrip(tmp_path, floorplan):
    path = tmp_path / "scene.json"
    floorplan.save(path)
    loaded = Scene.load(path)
    assert loaded.tile_count == floorplan.tile_count
    for ta, tb in zip(loaded.tiles, floorplan.tiles):
        np.testing.assert_allclose(ta.center, tb.center)
        np.testing.assert_allclose(ta.true_normal, tb.true_normal)


def test_surface_validation():
    with pytest.raises(ValueError):
        Surface("bad", vec(0, 0, 0), vec(1, 0, 0), vec(1, 1, 0),
                Material.CONCRETE, vec(0, 0, 1))  # edges not orthogonal
    with pytest.raises(ValueError):
        Surface("bad2", vec(0, 0, 0), vec(1, 0, 0), vec(0, 1, 0),
                Material.CONCRETE, vec(1, 0, 0))  # normal not perpendicular


def test_tile_axes_form_right_handed_frame(floorplan):
    for t in floorplan.tiles[::37]:
        h, v = t.axis_h, t.axis_v
        np.testing.assert_allclose(np.cross(h, v), t.true_normal, atol=1e-12)
        assert abs(np.dot(h, v)) < 1e-12
        # wall tiles rotate azimuth about the world vertical
        np.testing.assert_allclose(v, [0.0, 0.0, 1.0], atol=1e-12)


def test_tile_axes_horizontal_facet_fallback():
    h, v = tile_axes(vec(0, 0, 1))
    assert abs(np.dot(h, vec(0, 0, 1))) < 1e-12
    assert abs(np.dot(v, vec(0, 0, 1))) < 1e-12
