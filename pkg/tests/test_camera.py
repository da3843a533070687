"""Camera ray generation, framing and the wire format."""

import numpy as np
import pytest

from gaussvol.camera import Camera, MalformedCameraError, frame_scene, parse_wire


def test_rays_are_unit_and_row_major():
    cam = Camera((0, 0, 10), (0, 0, 0), vfov_deg=60)
    origins, dirs = cam.rays(4, 3)
    assert origins.shape == (12, 3) and dirs.shape == (12, 3)
    assert np.allclose(np.linalg.norm(dirs, axis=1), 1.0, atol=1e-12)
    assert np.allclose(origins, [0, 0, 10])
    # top row points up, first column points left (right-handed basis)
    assert dirs[0][1] > 0 and dirs[-1][1] < 0


def test_center_pixel_points_at_look_at():
    cam = Camera((1, 2, 10), (1, 2, -5))
    _, dirs = cam.rays(9, 9)
    center = dirs[4 * 9 + 4]
    assert np.allclose(center, [0, 0, -1], atol=1e-12)


def test_wire_round_trip():
    cam = Camera((1.5, -2.25, 3.0), (0, 0.125, 0), (0, 1, 0), 37.5)
    back = parse_wire(cam.to_wire())
    assert np.array_equal(back.position, cam.position)
    assert np.array_equal(back.look_at, cam.look_at)
    assert np.array_equal(back.up, cam.up)
    assert back.vfov_deg == cam.vfov_deg


def test_parse_wire_rejects_malformed():
    with pytest.raises(MalformedCameraError):
        parse_wire("1,2,3")
    with pytest.raises(MalformedCameraError):
        parse_wire("a,b,c,d,e,f,g,h,i,j")


def test_camera_validation():
    with pytest.raises(MalformedCameraError):
        Camera((0, 0, 0), (0, 0, 0))
    with pytest.raises(MalformedCameraError):
        Camera((0, 0, 1), (0, 0, 0), vfov_deg=0.0)
    with pytest.raises(MalformedCameraError):
        Camera((0, 0, 1), (0, 0, 0), up=(0, 0, 1)).basis()


def test_frame_scene_contains_whole_box():
    box = np.array([-3.0, -1.0, 2.0, 5.0, 7.0, 4.0])
    cam = frame_scene(box, vfov_deg=45)
    lo, hi = box[:3], box[3:]
    corners = np.array([[x, y, z] for x in (lo[0], hi[0])
                        for y in (lo[1], hi[1]) for z in (lo[2], hi[2])])
    forward, right, true_up = cam.basis()
    tan_half = np.tan(np.deg2rad(cam.vfov_deg) / 2)
    rel = corners - cam.position
    depth = rel @ forward
    assert np.all(depth > 0)
    assert np.all(np.abs(rel @ true_up) <= depth * tan_half)
    assert np.all(np.abs(rel @ right) <= depth * tan_half)  # aspect >= 1 covers x


def test_jitter_stays_inside_pixel_and_is_seeded():
    cam = Camera((0, 0, 10), (0, 0, 0))
    a = cam.rays(8, 8, np.random.default_rng(5))
    b = cam.rays(8, 8, np.random.default_rng(5))
    c = cam.rays(8, 8)
    assert np.array_equal(a[1], b[1])
    assert not np.array_equal(a[1], c[1])
    assert np.allclose(a[1], c[1], atol=0.2)  # sub-pixel deflection only
