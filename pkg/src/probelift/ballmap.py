"""Mirror-ball <-> direction geometry.

A unit disk (u, v), u^2 + v^2 <= 1, images an orthographically viewed unit
sphere.  The surface normal at (u, v) is (u, v, w) with w = sqrt(1 - u^2 - v^2),
and a view ray along -z reflects to

    d = 2 (r . n) n - r,  r = (0, 0, 1)  =>  d = (2uw, 2vw, 2w^2 - 1).

This is the Lambert azimuthal equal-area map of the full direction sphere:
equal disk area subtends equal solid angle, so a regular pixel grid over the
disk gives uniform per-pixel solid angle 4 * (2/res)^2.

Disk coordinates use v pointing *down* so that array row index increases with
v; the disk center (0, 0) maps to +z (toward the camera) and the rim maps to
-z.  The rim is degenerate (every rim point maps to (0,0,-1)); the inverse
returns (1, 0) there by convention.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DomainError

__all__ = [
    "BallGrid",
    "build_grid",
    "pixel_to_direction",
    "direction_to_pixel",
    "grid_coords",
    "grid_directions",
    "grid_normals",
]

_RIM_TOL = 1e-12


def pixel_to_direction(uv):
    """Map disk coordinates to unit reflection directions.

    Parameters
    ----------
    uv : array-like (..., 2)
        Disk coordinates with u^2 + v^2 <= 1.

    Returns
    -------
    (..., 3) float64 array of unit vectors.
    """
    uv = np.asarray(uv, dtype=np.float64)
    if uv.shape[-1] != 2:
        raise DomainError(f"expected (..., 2) disk coords, got shape {uv.shape}")
    u, v = uv[..., 0], uv[..., 1]
    r2 = u * u + v * v
    if np.any(r2 > 1.0 + _RIM_TOL):
        raise DomainError("disk coordinates outside the unit disk")
    w2 = np.clip(1.0 - r2, 0.0, None)
    w = np.sqrt(w2)
    return np.stack([2.0 * u * w, 2.0 * v * w, 2.0 * w2 - 1.0], axis=-1)


def direction_to_pixel(d):
    """Inverse of :func:`pixel_to_direction`.

    Accepts (..., 3) unit vectors; (0, 0, -1) maps to (1, 0) by convention
    (the whole disk rim collapses to that direction).
    """
    d = np.asarray(d, dtype=np.float64)
    if d.shape[-1] != 3:
        raise DomainError(f"expected (..., 3) directions, got shape {d.shape}")
    x, y, z = d[..., 0], d[..., 1], d[..., 2]
    w2 = np.clip((z + 1.0) * 0.5, 0.0, None)
    w = np.sqrt(w2)
    back = w <= _RIM_TOL
    safe = np.where(back, 1.0, 2.0 * w)
    u = np.where(back, 1.0, x / safe)
    v = np.where(back, 0.0, y / safe)
    return np.stack([u, v], axis=-1)


@dataclass(frozen=True)
class BallGrid:
    """A res x res raster over the unit disk.

    mask marks pixels whose *centers* fall strictly inside the disk; only
    those participate in any integral or solve.  solid_angle is the constant
    per-pixel solid angle (equal-area map), stored per masked pixel for
    convenience of quadrature code.
    """

    resolution: int
    u: np.ndarray          # (res, res) pixel-center u
    v: np.ndarray          # (res, res) pixel-center v
    mask: np.ndarray       # (res, res) bool
    pixel_solid_angle: float

    @property
    def n_masked(self):
        return int(self.mask.sum())

    @property
    def mask_flat(self):
        return self.mask.reshape(-1)

    def directions(self):
        return grid_directions(self)

    def normals(self):
        return grid_normals(self)


@lru_cache(maxsize=32)
def build_grid(resolution):
    """Build (and cache) the raster geometry for a given resolution."""
    if not isinstance(resolution, (int, np.integer)) or resolution < 2:
        raise DomainError(f"resolution must be an int >= 2, got {resolution!r}")
    resolution = int(resolution)
    c = (np.arange(resolution) + 0.5) / resolution * 2.0 - 1.0
    u = np.broadcast_to(c[None, :], (resolution, resolution)).copy()
    v = np.broadcast_to(c[:, None], (resolution, resolution)).copy()
    mask = u * u + v * v < 1.0
    cell = 2.0 / resolution
    omega = 4.0 * cell * cell
    u.setflags(write=False)
    v.setflags(write=False)
    mask.setflags(write=False)
    return BallGrid(resolution, u, v, mask, omega)


def grid_coords(grid):
    """(u, v) pixel-center arrays, each (res, res)."""
    return grid.u, grid.v


@lru_cache(maxsize=32)
def _grid_directions_cached(resolution):
    grid = build_grid(resolution)
    uv = np.stack([grid.u, grid.v], axis=-1)
    # Outside the mask r may exceed 1 (corner pixels); compute with a clipped
    # radius there, the values are never used.
    u, v = uv[..., 0], uv[..., 1]
    r2 = np.minimum(u * u + v * v, 1.0)
    w2 = 1.0 - r2
    w = np.sqrt(w2)
    d = np.stack([2.0 * u * w, 2.0 * v * w, 2.0 * w2 - 1.0], axis=-1)
    d.setflags(write=False)
    return d


def grid_directions(grid):
    """(res, res, 3) reflection directions at pixel centers."""
    return _grid_directions_cached(grid.resolution)


@lru_cache(maxsize=32)
def _grid_normals_cached(resolution):
    grid = build_grid(resolution)
    r2 = np.minimum(grid.u**2 + grid.v**2, 1.0)
    n = np.stack([grid.u, grid.v, np.sqrt(1.0 - r2)], axis=-1)
    n.setflags(write=False)
    return n


def grid_normals(grid):
    """(res, res, 3) sphere surface normals at pixel centers."""
    return _grid_normals_cached(grid.resolution)
