"""Analytic linear reflectance fields for the three probe spheres.

A field is a linear operator mapping a discretized light environment (one
radiance value per masked basis cell, per channel) to the linear image of a
sphere rendered under it.  It is stored dense as weights[c][p, b]: the
response of sphere pixel p (flat row-major index) to unit radiance in basis
cell b, for channel c.

Conventions shared by all constructors:

* rows for pixels outside the sphere mask are zero, columns for basis cells
  outside the basis mask are zero;
* weights are non-negative;
* weight values are rounded to float32 precision (stored as float64) so that
  the on-disk field container, which stores float32, round-trips losslessly.

The matte-silver sphere is a two-lobe model: a Phong-style specular lobe
around the mirror direction plus a small Lambertian floor.  The specular lobe
is normalized *discretely* -- each pixel's lobe weights are divided by their
quadrature sum so they sum to exactly the specular weight.  With the analytic
(e+1)/2pi normalization alone, the discrete quadrature overshoots badly for
narrow lobes (the lobe falls between cell centers), which would violate both
the flat-field response and the high-exponent mirror limit.
"""

import enum
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import ballmap
from .errors import DomainError

__all__ = [
    "Brdf",
    "BrdfParams",
    "ReflectanceField",
    "mirror_field",
    "diffuse_field",
    "silver_field",
    "resample_external",
    "standard_fields",
]


class Brdf(enum.Enum):
    MIRROR = "mirror"
    DIFFUSE = "diffuse"
    MATTE_SILVER = "matte_silver"
    EXTERNAL = "external"


@dataclass(frozen=True)
class BrdfParams:
    """Material constants for the analytic fields.

    mirror_reflectivity is the measured first-surface reflectance of the
    mirror ball; silver_* describe the matte-silver two-lobe mix.
    """

    mirror_reflectivity: float = 0.827
    diffuse_albedo: tuple = (0.5, 0.5, 0.5)
    silver_specular_weight: float = 0.6
    silver_diffuse_weight: float = 0.2
    silver_phong_exponent: float = 32.0

    def validate(self):
        if not 0.0 < self.mirror_reflectivity <= 1.0:
            raise DomainError("mirror_reflectivity must be in (0, 1]")
        if len(self.diffuse_albedo) != 3 or any(
            not 0.0 <= a <= 1.0 for a in self.diffuse_albedo
        ):
            raise DomainError("diffuse_albedo must be three values in [0, 1]")
        if self.silver_specular_weight < 0.0 or self.silver_diffuse_weight < 0.0:
            raise DomainError("silver lobe weights must be non-negative")
        if self.silver_specular_weight + self.silver_diffuse_weight > 1.0:
            raise DomainError("silver lobe weights must sum to at most 1")
        if self.silver_phong_exponent < 1.0:
            raise DomainError("silver_phong_exponent must be >= 1")
        return self


@dataclass(frozen=True)
class ReflectanceField:
    brdf: Brdf
    sphere_resolution: int
    basis_resolution: int
    weights: np.ndarray  # (3, P, B) float64, float32-valued, non-negative
    channel_coupled: bool

    def __post_init__(self):
        p = self.sphere_resolution**2
        b = self.basis_resolution**2
        if self.weights.shape != (3, p, b):
            raise DomainError(
                f"weights shape {self.weights.shape} does not match "
                f"resolutions ({self.sphere_resolution}, {self.basis_resolution})"
            )


def _roundtrip32(w):
    # Round to float32 grid; the on-disk container stores float32 and file
    # round trips must not perturb render output.
    return w.astype(np.float32).astype(np.float64)


def _finalize(brdf, grid, basis_grid, per_channel):
    w = _roundtrip32(np.ascontiguousarray(per_channel))
    if np.any(w < 0.0):
        raise DomainError("reflectance weights must be non-negative")
    coupled = not (
        np.array_equal(w[0], w[1]) and np.array_equal(w[1], w[2])
    )
    w.setflags(write=False)
    return ReflectanceField(
        brdf=brdf,
        sphere_resolution=grid.resolution,
        basis_resolution=basis_grid.resolution,
        weights=w,
        channel_coupled=coupled,
    )


def _basis_grid_for(grid, basis_resolution):
    if basis_resolution is None:
        return grid
    return ballmap.build_grid(basis_resolution)


def _nearest_masked_cell(basis_grid, u, v):
    """Flat index of the basis cell containing (u, v), snapped to the mask.

    Points near the disk rim can fall in a corner cell whose *center* lies
    outside the disk; those are snapped to the nearest masked cell center so
    the mirror row always lands on a usable basis cell.
    """
    res = basis_grid.resolution
    col = np.clip(((u + 1.0) * 0.5 * res).astype(np.int64), 0, res - 1)
    row = np.clip(((v + 1.0) * 0.5 * res).astype(np.int64), 0, res - 1)
    flat = row * res + col
    bad = ~basis_grid.mask_flat[flat]
    if np.any(bad):
        mu = basis_grid.u[basis_grid.mask]
        mv = basis_grid.v[basis_grid.mask]
        midx = np.flatnonzero(basis_grid.mask_flat)
        d2 = (u[bad, None] - mu[None, :]) ** 2 + (v[bad, None] - mv[None, :]) ** 2
        flat[bad] = midx[np.argmin(d2, axis=1)]
    return flat


def mirror_field(grid, params=None, basis_resolution=None):
    """Perfect mirror: each pixel sees exactly one light direction."""
    params = (params or BrdfParams()).validate()
    basis_grid = _basis_grid_for(grid, basis_resolution)
    p = grid.resolution**2
    b = basis_grid.resolution**2
    w = np.zeros((p, b))
    rows = np.flatnonzero(grid.mask_flat)
    d = ballmap.grid_directions(grid).reshape(-1, 3)[rows]
    uv = ballmap.direction_to_pixel(d)
    cols = _nearest_masked_cell(basis_grid, uv[:, 0], uv[:, 1])
    w[rows, cols] = params.mirror_reflectivity
    return _finalize(Brdf.MIRROR, grid, basis_grid, np.broadcast_to(w, (3, p, b)))


def diffuse_field(grid, params=None, basis_resolution=None):
    """Lambertian sphere: cosine-weighted integral over the light hemisphere."""
    params = (params or BrdfParams()).validate()
    basis_grid = _basis_grid_for(grid, basis_resolution)
    rows = np.flatnonzero(grid.mask_flat)
    cols = np.flatnonzero(basis_grid.mask_flat)
    n = ballmap.grid_normals(grid).reshape(-1, 3)[rows]
    d = ballmap.grid_directions(basis_grid).reshape(-1, 3)[cols]
    cosine = np.clip(n @ d.T, 0.0, None)
    kernel = cosine * (basis_grid.pixel_solid_angle / np.pi)
    p = grid.resolution**2
    b = basis_grid.resolution**2
    w = np.zeros((3, p, b))
    for c, albedo in enumerate(params.diffuse_albedo):
        w[c][np.ix_(rows, cols)] = albedo * kernel
    return _finalize(Brdf.DIFFUSE, grid, basis_grid, w)


def silver_field(grid, params=None, basis_resolution=None):
    """Matte silver: renormalized Phong lobe plus a Lambertian floor."""
    params = (params or BrdfParams()).validate()
    basis_grid = _basis_grid_for(grid, basis_resolution)
    rows = np.flatnonzero(grid.mask_flat)
    cols = np.flatnonzero(basis_grid.mask_flat)
    refl = ballmap.grid_directions(grid).reshape(-1, 3)[rows]
    n = ballmap.grid_normals(grid).reshape(-1, 3)[rows]
    d = ballmap.grid_directions(basis_grid).reshape(-1, 3)[cols]

    lobe = np.clip(refl @ d.T, 0.0, None) ** params.silver_phong_exponent
    lobe_sum = lobe.sum(axis=1, keepdims=True)
    np.divide(lobe, lobe_sum, out=lobe, where=lobe_sum > 0.0)
    spec = params.silver_specular_weight * lobe

    cosine = np.clip(n @ d.T, 0.0, None)
    diff = params.silver_diffuse_weight * cosine * (
        basis_grid.pixel_solid_angle / np.pi
    )

    p = grid.resolution**2
    b = basis_grid.resolution**2
    w = np.zeros((p, b))
    w[np.ix_(rows, cols)] = spec + diff
    return _finalize(
        Brdf.MATTE_SILVER, grid, basis_grid, np.broadcast_to(w, (3, p, b))
    )


@lru_cache(maxsize=16)
def standard_fields(resolution, params=None, basis_resolution=None):
    """All three analytic fields for one raster, cached by resolution/params."""
    grid = ballmap.build_grid(resolution)
    return {
        Brdf.MIRROR: mirror_field(grid, params, basis_resolution),
        Brdf.DIFFUSE: diffuse_field(grid, params, basis_resolution),
        Brdf.MATTE_SILVER: silver_field(grid, params, basis_resolution),
    }


def resample_external(basis_images, directions, grid, basis_resolution=None):
    """Build a field from measured single-source response images.

    Parameters
    ----------
    basis_images : sequence of linear sphere images (res, res, 3) or objects
        with a ``pixels`` attribute; each is the sphere's response to a
        unit-radiance source from the matching direction.
    directions : (N, 3) unit vectors, one per image.
    grid : sphere raster the images were taken on.
    basis_resolution : target light basis resolution (defaults to grid's).

    Responses whose directions fall in the same basis cell accumulate by
    summation: a cell's weight is the total response to all light binned
    into it.
    """
    basis_grid = _basis_grid_for(grid, basis_resolution)
    directions = np.asarray(directions, dtype=np.float64)
    if directions.ndim != 2 or directions.shape[1] != 3:
        raise DomainError("directions must be (N, 3)")
    if len(basis_images) != directions.shape[0]:
        raise DomainError("one direction per basis image required")
    nrm = np.linalg.norm(directions, axis=1)
    if np.any(np.abs(nrm - 1.0) > 1e-6):
        raise DomainError("directions must be unit length")

    uv = ballmap.direction_to_pixel(directions)
    cols = _nearest_masked_cell(basis_grid, uv[:, 0], uv[:, 1])

    p = grid.resolution**2
    b = basis_grid.resolution**2
    w = np.zeros((3, p, b))
    for img, col in zip(basis_images, cols):
        pix = np.asarray(getattr(img, "pixels", img), dtype=np.float64)
        if pix.shape != (grid.resolution, grid.resolution, 3):
            raise DomainError(
                f"basis image shape {pix.shape} does not match grid "
                f"resolution {grid.resolution}"
            )
        if np.any(pix < 0.0):
            raise DomainError("basis images must be non-negative linear images")
        flat = pix.reshape(-1, 3) * grid.mask_flat[:, None]
        for c in range(3):
            w[c, :, col] += flat[:, c]
    return _finalize(Brdf.EXTERNAL, grid, basis_grid, w)
