"""Synthetic ground-truth scenes: HDR environments plus LDR probe triplets.

An environment is smooth order-2 SH "ambient" (clamped non-negative, scaled
to a target peak) plus a few single-cell impulse sources bright enough to
clip the mirror ball.  Sources sit exactly on basis cells, which keeps the
forward model and the solver's unknowns aligned; intensities default to
2..50x the mirror clip point, and per-channel chroma jitter keeps them
near-neutral unless a fixed strongly-hued chroma is requested.

make_probes is the forward imaging model: render each sphere linearly, clip
hard at 1.0, gamma-encode, optionally quantize to 8 bits.  Clip masks record
where the pre-clip linear value reached 1.0 (plus anything that lands at or
above the matching detection threshold after encoding, so the masks agree
with detect_clipped on the emitted files).
"""

from dataclasses import dataclass, replace

import numpy as np

from . import ballmap, reflectance, relight
from .errors import DomainError
from .promote import (
    CLIP_THRESHOLD_8BIT,
    CLIP_THRESHOLD_FLOAT,
    ProbeTriplet,
    SolverConfig,
    gamma_encode,
)
from .reflectance import Brdf
from .relight import Encoding, LightEnv, SphereImage
from .shlight import ShCoeffs, reconstruct_sh

__all__ = ["SceneSpec", "stress_spec", "random_env", "make_probes"]


@dataclass(frozen=True)
class SceneSpec:
    """Deterministic recipe for one synthetic scene.

    The ambient base shares one random SH luminance pattern across channels,
    with per-channel gains jittered by ambient_chroma_jitter.  Keeping the
    whole scene near-neutral matters: the cross-channel ratio rows tie the
    recovered clipped sources to the diffuse ball's color balance, so a
    strongly colored ambient would bias per-channel totals by design.
    """

    seed: int = 0
    resolution: int = 32
    n_sources: int = 3
    source_intensity_range: tuple = (2.0, 50.0)
    source_chroma_jitter: float = 0.05
    source_chroma: tuple = ()  # fixed (r, g, b) multipliers; empty = jittered
    ambient_strength: float = 0.3
    ambient_chroma_jitter: float = 0.05
    quantize_8bit: bool = False

    def validate(self):
        if self.resolution < 2:
            raise DomainError("resolution must be >= 2")
        if self.n_sources < 0:
            raise DomainError("n_sources must be >= 0")
        lo, hi = self.source_intensity_range
        if not 0.0 <= lo <= hi:
            raise DomainError("bad source_intensity_range")
        if not 0.0 <= self.source_chroma_jitter < 1.0:
            raise DomainError("source_chroma_jitter must be in [0, 1)")
        if not 0.0 <= self.ambient_chroma_jitter < 1.0:
            raise DomainError("ambient_chroma_jitter must be in [0, 1)")
        if self.source_chroma and (
            len(self.source_chroma) != 3 or min(self.source_chroma) <= 0.0
        ):
            raise DomainError("source_chroma must be three positive values")
        if self.ambient_strength < 0.0:
            raise DomainError("ambient_strength must be >= 0")
        return self


def stress_spec(seed=0, **overrides):
    """Strongly-hued single-source preset for regularization experiments."""
    spec = SceneSpec(
        seed=seed,
        n_sources=1,
        source_intensity_range=(8.0, 12.0),
        source_chroma=(1.8, 1.0, 0.55),
        ambient_strength=0.25,
    )
    return replace(spec, **overrides) if overrides else spec


def random_env(spec):
    """Deterministic random environment for a scene spec."""
    spec.validate()
    grid = ballmap.build_grid(spec.resolution)
    rng = np.random.default_rng(spec.seed)

    pattern = rng.normal(0.0, 0.35, size=9)
    pattern[0] = abs(pattern[0]) + 0.8  # keep the DC band dominant
    j = spec.ambient_chroma_jitter
    gains = 1.0 + rng.uniform(-j, j, size=3)
    coeffs = pattern[:, None] * gains[None, :]
    ambient = np.clip(reconstruct_sh(ShCoeffs(coeffs), grid), 0.0, None)
    peak = ambient.max()
    if spec.ambient_strength == 0.0 or peak == 0.0:
        ambient[:] = 0.0
    else:
        ambient *= spec.ambient_strength / peak

    masked = np.flatnonzero(grid.mask_flat)
    if spec.n_sources > masked.size:
        raise DomainError(
            f"{spec.n_sources} sources requested but only {masked.size} masked cells"
        )
    radiance = ambient.reshape(-1, 3)
    if spec.n_sources:
        cells = rng.choice(masked, size=spec.n_sources, replace=False)
        lo, hi = spec.source_intensity_range
        intensities = rng.uniform(lo, hi, size=spec.n_sources)
        if spec.source_chroma:
            chroma = np.tile(np.asarray(spec.source_chroma), (spec.n_sources, 1))
        else:
            j = spec.source_chroma_jitter
            chroma = 1.0 + rng.uniform(-j, j, size=(spec.n_sources, 3))
        radiance[cells] += intensities[:, None] * chroma
    return LightEnv(radiance.reshape(spec.resolution, spec.resolution, 3), grid)


def make_probes(env, fields=None, config=None, quantize=False):
    """Forward imaging model: env -> clipped, gamma-encoded probe triplet."""
    config = (config or SolverConfig()).validate()
    if fields is None:
        fields = reflectance.standard_fields(env.resolution)
    detect_threshold = CLIP_THRESHOLD_8BIT if quantize else CLIP_THRESHOLD_FLOAT

    images = {}
    masks = {}
    for brdf in (Brdf.DIFFUSE, Brdf.MATTE_SILVER, Brdf.MIRROR):
        linear = relight.render(fields[brdf], env)
        ldr = gamma_encode(linear, config.gamma)
        if quantize:
            q = np.floor(ldr.pixels * 255.0 + 0.5) / 255.0
            ldr = SphereImage(q, Encoding.GAMMA_LDR, ldr.grid)
        clipped = (linear.pixels >= 1.0) | (ldr.pixels >= detect_threshold)
        clipped &= linear.grid.mask[:, :, None]
        images[brdf] = ldr
        masks[brdf] = clipped
    return ProbeTriplet(
        diffuse=images[Brdf.DIFFUSE],
        silver=images[Brdf.MATTE_SILVER],
        mirror=images[Brdf.MIRROR],
        clip_diffuse=masks[Brdf.DIFFUSE],
        clip_silver=masks[Brdf.MATTE_SILVER],
        clip_mirror=masks[Brdf.MIRROR],
    )
