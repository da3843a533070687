"""Pinhole camera: pixel-center primary rays, default scene framing and
the comma-separated wire format shared by the CLI and the render service."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class MalformedCameraError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Camera:
    position: np.ndarray
    look_at: np.ndarray
    up: np.ndarray
    vfov_deg: float

    def __init__(self, position, look_at, up=(0.0, 1.0, 0.0), vfov_deg: float = 45.0):
        object.__setattr__(self, "position", np.asarray(position, np.float64).reshape(3))
        object.__setattr__(self, "look_at", np.asarray(look_at, np.float64).reshape(3))
        object.__setattr__(self, "up", np.asarray(up, np.float64).reshape(3))
        object.__setattr__(self, "vfov_deg", float(vfov_deg))
        if not 0.0 < self.vfov_deg < 180.0:
            raise MalformedCameraError(f"vfov_deg out of range: {vfov_deg}")
        if np.allclose(self.position, self.look_at):
            raise MalformedCameraError("camera position equals look_at")

    def basis(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        forward = self.look_at - self.position
        forward = forward / np.linalg.norm(forward)
        right = np.cross(forward, self.up)
        norm = np.linalg.norm(right)
        if norm < 1e-12:
            raise MalformedCameraError("up vector is parallel to the view direction")
        right = right / norm
        true_up = np.cross(right, forward)
        return forward, right, true_up

    def rays(self, width: int, height: int, jitter_rng=None
             ) -> tuple[np.ndarray, np.ndarray]:
        """Primary rays through pixel centers, row-major, top row first.

        Returns (origins, unit directions), each (width*height, 3).
        """
        forward, right, true_up = self.basis()
        tan_half = np.tan(np.deg2rad(self.vfov_deg) / 2.0)
        aspect = width / height
        cols = np.arange(width, dtype=np.float64) + 0.5
        rows = np.arange(height, dtype=np.float64) + 0.5
        if jitter_rng is not None:
            cols = cols[None, :] + (jitter_rng.random((height, width)) - 0.5)
            rows = rows[:, None] + (jitter_rng.random((height, width)) - 0.5)
        else:
            cols = np.broadcast_to(cols[None, :], (height, width))
            rows = np.broadcast_to(rows[:, None], (height, width))
        ndc_x = cols / width * 2.0 - 1.0
        ndc_y = 1.0 - rows / height * 2.0
        dirs = (forward[None, None, :]
                + (ndc_x * tan_half * aspect)[..., None] * right
                + (ndc_y * tan_half)[..., None] * true_up)
        dirs = dirs / np.linalg.norm(dirs, axis=-1, keepdims=True)
        origins = np.broadcast_to(self.position, dirs.shape)
        return origins.reshape(-1, 3).copy(), dirs.reshape(-1, 3)

    def to_wire(self) -> str:
        vals = list(self.position) + list(self.look_at) + list(self.up) + [self.vfov_deg]
        return ",".join(repr(float(v)) for v in vals)


def parse_wire(text: str) -> Camera:
    """Parse 'px,py,pz,lx,ly,lz,ux,uy,uz,fov_deg'."""
    parts = text.split(",")
    if len(parts) != 10:
        raise MalformedCameraError(f"expected 10 comma-separated values, got {len(parts)}")
    try:
        vals = [float(p) for p in parts]
    except ValueError:
        raise MalformedCameraError(f"non-numeric camera field in {text!r}") from None
    return Camera(vals[0:3], vals[3:6], vals[6:9], vals[9])


def frame_scene(scene_aabb, vfov_deg: float = 45.0, margin: float = 0.30,
                view_dir=(0.0, 0.0, 1.0), up=(0.0, 1.0, 0.0)) -> Camera:
    """Default framing: place the camera along view_dir so the scene's
    bounding sphere fits the frustum with the given margin."""
    scene_aabb = np.asarray(scene_aabb, np.float64)
    lo, hi = scene_aabb[:3], scene_aabb[3:]
    center = (lo + hi) / 2.0
    radius = float(np.linalg.norm(hi - lo)) / 2.0
    if radius <= 0:
        radius = 1.0
    tan_half = np.tan(np.deg2rad(vfov_deg) / 2.0)
    dist = radius * (1.0 + margin) / tan_half + radius
    d = np.asarray(view_dir, np.float64)
    d = d / np.linalg.norm(d)
    return Camera(center + dist * d, center, up, vfov_deg)
