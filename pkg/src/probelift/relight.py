"""Light environments, sphere images, and forward rendering.

Rendering is a plain matrix product per channel: image = weights @ radiance,
restricted to masked cells.  The log-domain variant parameterizes radiance as
exp(q) so optimization code can work in an unconstrained space; a q of -inf
encodes exact zero radiance.

Multi-scale rendering pairs a box-filtered (masked-average) downsampling of
the environment with reflectance fields built analytically at the coarse
basis resolution.
"""

import enum
from dataclasses import dataclass

import numpy as np

from . import ballmap
from .errors import DomainError

__all__ = [
    "Encoding",
    "SphereImage",
    "LightEnv",
    "LogLightEnv",
    "render",
    "render_log",
    "env_to_log",
    "log_to_env",
    "downsample_env",
    "block_mask_counts",
    "render_pyramid",
]

_VAL_TOL = 1e-9


class Encoding(enum.Enum):
    LINEAR_HDR = "linear"
    GAMMA_LDR = "gamma"


def _check_pixels(pixels, resolution):
    if pixels.shape != (resolution, resolution, 3):
        raise DomainError(
            f"pixel array shape {pixels.shape} does not match resolution {resolution}"
        )


@dataclass(frozen=True)
class SphereImage:
    """One rendered or photographed sphere.

    GAMMA_LDR images hold display-referred values in [0, 1]; LINEAR_HDR holds
    non-negative scene-referred radiance responses.
    """

    pixels: np.ndarray  # (res, res, 3) float64
    encoding: Encoding
    grid: ballmap.BallGrid

    def __post_init__(self):
        _check_pixels(self.pixels, self.grid.resolution)
        if not np.all(np.isfinite(self.pixels)):
            raise DomainError("sphere image has non-finite pixels")
        if self.encoding is Encoding.GAMMA_LDR:
            if self.pixels.min() < -_VAL_TOL or self.pixels.max() > 1.0 + _VAL_TOL:
                raise DomainError("gamma-encoded image values must lie in [0, 1]")
        elif self.pixels.min() < -_VAL_TOL:
            raise DomainError("linear image values must be non-negative")

    @property
    def resolution(self):
        return self.grid.resolution


@dataclass(frozen=True)
class LightEnv:
    """Discretized omnidirectional radiance: non-negative, zero off the mask."""

    radiance: np.ndarray  # (res, res, 3) float64
    grid: ballmap.BallGrid

    def __post_init__(self):
        _check_pixels(self.radiance, self.grid.resolution)
        if not np.all(np.isfinite(self.radiance)):
            raise DomainError("environment radiance must be finite")
        if self.radiance.min() < -_VAL_TOL:
            raise DomainError("environment radiance must be non-negative")
        if np.any(self.radiance[~self.grid.mask] != 0.0):
            raise DomainError("environment radiance must be zero outside the mask")

    @property
    def resolution(self):
        return self.grid.resolution

    @classmethod
    def from_values(cls, values, grid):
        """Clamp tiny negatives to 0 and zero everything outside the mask."""
        v = np.array(values, dtype=np.float64)
        _check_pixels(v, grid.resolution)
        np.clip(v, 0.0, None, out=v)
        v[~grid.mask] = 0.0
        return cls(v, grid)

    @classmethod
    def zeros(cls, grid):
        return cls(np.zeros((grid.resolution, grid.resolution, 3)), grid)


@dataclass(frozen=True)
class LogLightEnv:
    """Log-radiance field q; exp(q) is the environment.  -inf means zero."""

    q: np.ndarray  # (res, res, 3) float64, may contain -inf
    grid: ballmap.BallGrid

    def __post_init__(self):
        _check_pixels(self.q, self.grid.resolution)
        if np.any(np.isnan(self.q)) or np.any(self.q == np.inf):
            raise DomainError("log radiance must be < +inf and not NaN")

    @property
    def resolution(self):
        return self.grid.resolution


def env_to_log(env):
    with np.errstate(divide="ignore"):
        q = np.log(env.radiance)
    q[~env.grid.mask] = -np.inf
    return LogLightEnv(q, env.grid)


def log_to_env(logenv):
    r = np.exp(logenv.q)
    r[~logenv.grid.mask] = 0.0
    return LightEnv(r, logenv.grid)


def render(field, env):
    """Linear render of a sphere under an environment.

    The environment resolution must match the field's basis resolution; the
    output image lives on the field's sphere raster.
    """
    if env.resolution != field.basis_resolution:
        raise DomainError(
            f"environment resolution {env.resolution} does not match field "
            f"basis resolution {field.basis_resolution}"
        )
    grid = ballmap.build_grid(field.sphere_resolution)
    flat = env.radiance.reshape(-1, 3)
    out = np.empty((field.sphere_resolution**2, 3))
    for c in range(3):
        out[:, c] = field.weights[c] @ flat[:, c]
    pixels = out.reshape(field.sphere_resolution, field.sphere_resolution, 3)
    return SphereImage(pixels, Encoding.LINEAR_HDR, grid)


def render_log(field, logenv):
    """Render from log radiance; identical to render(field, exp(q))."""
    return render(field, log_to_env(logenv))


def block_mask_counts(grid, factor):
    """Masked-fine-cell count per factor x factor block, (res/factor)^2 array."""
    res = grid.resolution
    if res % factor != 0:
        raise DomainError(f"factor {factor} does not divide resolution {res}")
    coarse_res = res // factor
    return grid.mask.reshape(coarse_res, factor, coarse_res, factor).sum(axis=(1, 3))


def downsample_env(env, factor):
    """Box-filter an environment to resolution res/factor.

    Each coarse cell averages the *masked* fine cells inside it; coarse cells
    outside the coarse mask are zeroed (their energy is dropped, which only
    affects a thin rim ring).
    """
    if not isinstance(factor, (int, np.integer)) or factor < 1:
        raise DomainError(f"downsample factor must be a positive int, got {factor!r}")
    res = env.resolution
    if res % factor != 0:
        raise DomainError(f"factor {factor} does not divide resolution {res}")
    if factor == 1:
        return env
    coarse_res = res // factor
    coarse = ballmap.build_grid(coarse_res)
    blocks = env.radiance.reshape(coarse_res, factor, coarse_res, factor, 3)
    msk = env.grid.mask.reshape(coarse_res, factor, coarse_res, factor)
    total = (blocks * msk[..., None]).sum(axis=(1, 3))
    count = msk.sum(axis=(1, 3))
    out = np.zeros((coarse_res, coarse_res, 3))
    np.divide(total, count[..., None], out=out, where=count[..., None] > 0)
    out[~coarse.mask] = 0.0
    return LightEnv(out, coarse)


def render_pyramid(fields, env):
    """Render one sphere at several scales.

    fields: sequence of ReflectanceField for the same BRDF at increasing
    basis resolutions (typically sphere resolution == basis resolution == the
    scale, e.g. 4, 8, 16, 32).  Each basis must divide the environment
    resolution; the environment is box-filtered down to each basis before
    rendering.  Returns images in the order the fields were given.
    """
    out = []
    for field in fields:
        if env.resolution % field.basis_resolution != 0:
            raise DomainError(
                f"field basis {field.basis_resolution} does not divide "
                f"environment resolution {env.resolution}"
            )
        factor = env.resolution // field.basis_resolution
        out.append(render(field, downsample_env(env, factor)))
    return out
