"""Order-2 real spherical harmonics: the 9-coefficient Lambertian baseline.

Orthonormal real SH over the full sphere, band order
(l, m) = (0,0), (1,-1), (1,0), (1,1), (2,-2), (2,-1), (2,0), (2,1), (2,2),
i.e. the polynomial directions 1, y, z, x, xy, yz, 3z^2-1, xz, x^2-y^2.

Projection is plain quadrature on the equal-area raster: the per-pixel solid
angle is uniform, so c_i = sum L(d) Y_i(d) dOmega with no extra weights.
Reconstruction may go negative (SH is not a positive basis); the raw values
are kept for analysis and a clamped LightEnv variant is provided for
feeding renderers.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import ballmap
from .errors import DomainError
from .relight import LightEnv

__all__ = [
    "N_COEFFS",
    "ShCoeffs",
    "sh_basis",
    "project_sh",
    "reconstruct_sh",
    "reconstruct_sh_env",
]

N_COEFFS = 9

_C00 = 0.28209479177387814   # 1/2 sqrt(1/pi)
_C1 = 0.4886025119029199     # sqrt(3/(4 pi))
_C2A = 1.0925484305920792    # sqrt(15/(4 pi)),   xy / yz / xz
_C2Z = 0.31539156525252005   # 1/4 sqrt(5/pi),    3z^2 - 1
_C2D = 0.5462742152960396    # 1/4 sqrt(15/pi),   x^2 - y^2


@dataclass(frozen=True)
class ShCoeffs:
    """coeffs[i, c]: 9 basis coefficients for each of 3 color channels."""

    coeffs: np.ndarray  # (9, 3) float64

    def __post_init__(self):
        if self.coeffs.shape != (N_COEFFS, 3):
            raise DomainError(f"SH coeffs must be (9, 3), got {self.coeffs.shape}")
        if not np.all(np.isfinite(self.coeffs)):
            raise DomainError("SH coeffs must be finite")


def sh_basis(d):
    """Evaluate the 9 basis functions at unit directions (..., 3) -> (..., 9)."""
    d = np.asarray(d, dtype=np.float64)
    if d.shape[-1] != 3:
        raise DomainError(f"expected (..., 3) directions, got {d.shape}")
    x, y, z = d[..., 0], d[..., 1], d[..., 2]
    return np.stack(
        [
            np.full(x.shape, _C00),
            _C1 * y,
            _C1 * z,
            _C1 * x,
            _C2A * x * y,
            _C2A * y * z,
            _C2Z * (3.0 * z * z - 1.0),
            _C2A * x * z,
            _C2D * (x * x - y * y),
        ],
        axis=-1,
    )


@lru_cache(maxsize=32)
def _masked_basis(resolution):
    """(9, n_masked) basis values at masked cells, plus the masked flat index."""
    grid = ballmap.build_grid(resolution)
    idx = np.flatnonzero(grid.mask_flat)
    d = ballmap.grid_directions(grid).reshape(-1, 3)[idx]
    y = np.ascontiguousarray(sh_basis(d).T)
    y.setflags(write=False)
    idx.setflags(write=False)
    return y, idx


def project_sh(env):
    """Quadrature projection of an environment onto the 9 basis functions."""
    y, idx = _masked_basis(env.resolution)
    flat = env.radiance.reshape(-1, 3)[idx]
    coeffs = (y @ flat) * env.grid.pixel_solid_angle
    return ShCoeffs(coeffs)


def reconstruct_sh(coeffs, grid):
    """Raw band-limited reconstruction (res, res, 3); may be negative.

    Values outside the disk mask are zero.
    """
    y, idx = _masked_basis(grid.resolution)
    vals = np.zeros((grid.resolution**2, 3))
    vals[idx] = y.T @ coeffs.coeffs
    return vals.reshape(grid.resolution, grid.resolution, 3)


def reconstruct_sh_env(coeffs, grid):
    """Clamped reconstruction as a renderable LightEnv (negatives -> 0)."""
    return LightEnv.from_values(reconstruct_sh(coeffs, grid), grid)
