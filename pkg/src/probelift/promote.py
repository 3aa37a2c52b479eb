"""HDR promotion of clipped LDR probe triplets.

Pipeline: linearize the three gamma-encoded sphere images; read base lighting
L off the mirror ball (pixel / reflectivity, with clipped pixels pinned to
1.0 first, so L = 1/0.827 there); then solve for a non-negative residual U
supported only on (direction, channel) pairs whose mirror pixel clipped.

The system stacks two kinds of rows:

* data rows -- one per *unclipped* diffuse / matte-silver sphere pixel and
  channel: sum_b W[p, b] U[b] = linear_pixel - sum_b W[p, b] L[b].  Clipped
  data pixels carry no information about magnitude and are excluded; mirror
  rows are omitted entirely (unclipped ones are satisfied by L exactly,
  clipped ones are excluded by the same rule).
* regularization rows -- per direction with any clipped channel, two
  cross-channel ratio constraints tying the recovered totals to the average
  color balance (R_avg, G_avg, B_avg) measured on the diffuse ball:
  G_avg (L_R + U_R) = R_avg (L_G + U_G) and likewise for blue, rearranged
  with unknowns on the left.  Rows are scaled by lambda_reg / max(balance)
  so the weight is exposure independent.

The least-squares solve is non-negative (Lawson-Hanson), so light can only
be added on top of L, never removed.
"""

from dataclasses import dataclass

import numpy as np

from . import nnls, reflectance
from .errors import DegenerateInputError, DomainError
from .reflectance import Brdf
from .relight import Encoding, LightEnv, SphereImage

__all__ = [
    "CLIP_THRESHOLD_8BIT",
    "CLIP_THRESHOLD_FLOAT",
    "SolverConfig",
    "ProbeTriplet",
    "ColorBalance",
    "ResidualLight",
    "AssembledSystem",
    "PromotionReport",
    "linearize",
    "gamma_encode",
    "detect_clipped",
    "base_lighting",
    "avg_color_balance",
    "assemble_system",
    "solve_residual",
    "promote",
    "promote_with_report",
]

CLIP_THRESHOLD_8BIT = 254.0 / 255.0
CLIP_THRESHOLD_FLOAT = 1.0 - 1e-6


@dataclass(frozen=True)
class SolverConfig:
    gamma: float = 2.2
    mirror_reflectivity: float = 0.827
    lambda_reg: float = 0.5
    clip_threshold: float = CLIP_THRESHOLD_8BIT
    nnls_tolerance: float = 1e-10
    max_iterations: int = 0  # 0 = automatic (10 n + 100)
    backend: str = ""        # "" = automatic

    def validate(self):
        if self.gamma <= 0.0:
            raise DomainError("gamma must be positive")
        if not 0.0 < self.mirror_reflectivity <= 1.0:
            raise DomainError("mirror_reflectivity must be in (0, 1]")
        if self.lambda_reg < 0.0:
            raise DomainError("lambda_reg must be non-negative")
        if not 0.0 < self.clip_threshold <= 1.0:
            raise DomainError("clip_threshold must be in (0, 1]")
        if self.nnls_tolerance <= 0.0:
            raise DomainError("nnls_tolerance must be positive")
        return self


def _check_mask(mask, resolution, name):
    mask = np.asarray(mask)
    if mask.shape != (resolution, resolution, 3) or mask.dtype != np.bool_:
        raise DomainError(f"{name} clip mask must be ({resolution}, {resolution}, 3) bool")
    return mask


@dataclass(frozen=True)
class ProbeTriplet:
    """The three gamma-encoded sphere photos plus per-channel clip masks."""

    diffuse: SphereImage
    silver: SphereImage
    mirror: SphereImage
    clip_diffuse: np.ndarray
    clip_silver: np.ndarray
    clip_mirror: np.ndarray

    def __post_init__(self):
        res = self.diffuse.resolution
        for name in ("diffuse", "silver", "mirror"):
            img = getattr(self, name)
            if img.encoding is not Encoding.GAMMA_LDR:
                raise DomainError(f"{name} probe must be gamma-encoded LDR")
            if img.resolution != res:
                raise DomainError("probe images must share one resolution")
            _check_mask(getattr(self, "clip_" + name), res, name)

    @property
    def grid(self):
        return self.diffuse.grid

    @property
    def resolution(self):
        return self.diffuse.resolution

    def items(self):
        yield Brdf.DIFFUSE, self.diffuse, self.clip_diffuse
        yield Brdf.MATTE_SILVER, self.silver, self.clip_silver
        yield Brdf.MIRROR, self.mirror, self.clip_mirror


@dataclass(frozen=True)
class ColorBalance:
    r_avg: float
    g_avg: float
    b_avg: float

    def as_array(self):
        return np.array([self.r_avg, self.g_avg, self.b_avg])


@dataclass(frozen=True)
class ResidualLight:
    """Non-negative residual U on the clipped (direction, channel) set."""

    u: np.ndarray  # (res, res, 3), zero off the unknown set
    unknown_index: dict  # (flat cell, channel) -> solver column


@dataclass(frozen=True)
class AssembledSystem:
    a: np.ndarray
    b: np.ndarray
    unknown_cells: np.ndarray     # (n,) flat basis-cell index per column
    unknown_channels: np.ndarray  # (n,) channel per column
    n_data_rows: int
    n_reg_rows: int
    balance: ColorBalance
    resolution: int

    @property
    def n_unknowns(self):
        return self.a.shape[1]

    @property
    def underdetermined(self):
        return self.a.shape[0] < self.a.shape[1]

    @property
    def unknown_index(self):
        return {
            (int(c), int(ch)): j
            for j, (c, ch) in enumerate(zip(self.unknown_cells, self.unknown_channels))
        }


@dataclass(frozen=True)
class PromotionReport:
    n_unknowns: int = 0
    n_data_rows: int = 0
    n_reg_rows: int = 0
    iterations: int = 0
    residual_norm: float = 0.0
    kkt_min_gradient: float = 0.0
    kkt_complementarity: float = 0.0
    backend: str = "none"
    underdetermined: bool = False
    balance: ColorBalance | None = None


def linearize(img, gamma=2.2):
    """Invert the gamma encoding: pixel -> pixel**gamma."""
    if img.encoding is not Encoding.GAMMA_LDR:
        raise DomainError("linearize expects a gamma-encoded image")
    pixels = np.clip(img.pixels, 0.0, 1.0) ** gamma
    return SphereImage(pixels, Encoding.LINEAR_HDR, img.grid)


def gamma_encode(img, gamma=2.2):
    """Hard-clip linear radiance at 1 and gamma-encode to display space."""
    if img.encoding is not Encoding.LINEAR_HDR:
        raise DomainError("gamma_encode expects a linear image")
    pixels = np.clip(img.pixels, 0.0, 1.0) ** (1.0 / gamma)
    return SphereImage(pixels, Encoding.GAMMA_LDR, img.grid)


def detect_clipped(img, threshold=CLIP_THRESHOLD_8BIT):
    """Per-channel mask of pixels at/above the clip threshold (off-disk = False)."""
    if img.encoding is not Encoding.GAMMA_LDR:
        raise DomainError("detect_clipped expects a gamma-encoded image")
    return (img.pixels >= threshold) & img.grid.mask[:, :, None]


def base_lighting(mirror_linear, clip_mask, config=None):
    """Base lighting L: mirror pixel / reflectivity, clipped pixels as 1.0."""
    config = (config or SolverConfig()).validate()
    if mirror_linear.encoding is not Encoding.LINEAR_HDR:
        raise DomainError("base_lighting expects a linearized mirror image")
    clip_mask = _check_mask(clip_mask, mirror_linear.resolution, "mirror")
    vals = np.where(clip_mask, 1.0, mirror_linear.pixels) / config.mirror_reflectivity
    vals = vals * mirror_linear.grid.mask[:, :, None]
    return LightEnv(vals, mirror_linear.grid)


def avg_color_balance(diffuse_linear, clip_mask=None):
    """Per-channel mean of the diffuse ball over masked, unclipped pixels."""
    if diffuse_linear.encoding is not Encoding.LINEAR_HDR:
        raise DomainError("avg_color_balance expects a linearized diffuse image")
    res = diffuse_linear.resolution
    usable = np.broadcast_to(
        diffuse_linear.grid.mask[:, :, None], (res, res, 3)
    ).copy()
    if clip_mask is not None:
        usable &= ~_check_mask(clip_mask, res, "diffuse")
    means = np.zeros(3)
    for c in range(3):
        sel = usable[:, :, c]
        if not sel.any():
            raise DegenerateInputError(
                f"channel {c}: no unclipped diffuse pixels to average"
            )
        means[c] = diffuse_linear.pixels[:, :, c][sel].mean()
    return ColorBalance(*means)


def assemble_system(probes, fields, base, balance, config=None):
    """Build the NNLS system (data rows + ratio regularization rows).

    fields must map Brdf.DIFFUSE and Brdf.MATTE_SILVER to ReflectanceFields
    whose sphere and basis resolutions both equal the probe resolution.
    """
    config = (config or SolverConfig()).validate()
    res = probes.resolution
    for brdf in (Brdf.DIFFUSE, Brdf.MATTE_SILVER):
        if brdf not in fields:
            raise DomainError(f"missing reflectance field for {brdf.value}")
        f = fields[brdf]
        if f.sphere_resolution != res or f.basis_resolution != res:
            raise DomainError("field resolutions must match the probe resolution")
    if base.resolution != res:
        raise DomainError("base lighting resolution must match the probes")

    grid = probes.grid
    p_count = res * res
    gmask = grid.mask_flat

    clip_m = probes.clip_mirror.reshape(p_count, 3) & gmask[:, None]
    unknown = np.argwhere(clip_m)  # sorted by (cell, channel), C order
    cells = unknown[:, 0]
    chans = unknown[:, 1]
    n = len(cells)
    col_of = np.full((p_count, 3), -1, dtype=np.int64)
    col_of[cells, chans] = np.arange(n)

    l_flat = base.radiance.reshape(p_count, 3)

    a_blocks, b_blocks = [], []
    n_data = 0
    for brdf, img, clip in probes.items():
        if brdf is Brdf.MIRROR:
            continue
        lin = linearize(img, config.gamma).pixels.reshape(p_count, 3)
        clip_flat = clip.reshape(p_count, 3)
        w = fields[brdf].weights
        for c in range(3):
            rows = np.flatnonzero(gmask & ~clip_flat[:, c])
            if rows.size == 0:
                continue
            cols_c = np.flatnonzero(chans == c)
            block = np.zeros((rows.size, n))
            if cols_c.size:
                block[:, cols_c] = w[c][np.ix_(rows, cells[cols_c])]
            a_blocks.append(block)
            b_blocks.append(lin[rows, c] - w[c][rows] @ l_flat[:, c])
            n_data += rows.size

    n_reg = 0
    if n and config.lambda_reg > 0.0:
        bal = balance.as_array()
        if bal.max() <= 0.0:
            raise DegenerateInputError("color balance is zero; cannot regularize")
        scale = config.lambda_reg / bal.max()
        dirs = np.unique(cells)
        reg_a = np.zeros((2 * dirs.size, n))
        reg_b = np.zeros(2 * dirs.size)
        for i, d in enumerate(dirs):
            j_r = col_of[d, 0]
            for k, c in enumerate((1, 2)):  # (R,G) then (R,B)
                row = 2 * i + k
                j_c = col_of[d, c]
                if j_r < 0 and j_c < 0:
                    continue  # vacuous: no unknowns referenced, keep zero row
                if j_r >= 0:
                    reg_a[row, j_r] = scale * bal[c]
                if j_c >= 0:
                    reg_a[row, j_c] = -scale * bal[0]
                reg_b[row] = scale * (bal[0] * l_flat[d, c] - bal[c] * l_flat[d, 0])
        a_blocks.append(reg_a)
        b_blocks.append(reg_b)
        n_reg = 2 * dirs.size

    if a_blocks:
        a = np.vstack(a_blocks)
        b = np.concatenate(b_blocks)
    else:
        a = np.zeros((0, n))
        b = np.zeros(0)
    return AssembledSystem(a, b, cells, chans, n_data, n_reg, balance, res)


def solve_residual(system, config=None):
    """Run NNLS on an assembled system; returns (ResidualLight, NnlsResult)."""
    config = (config or SolverConfig()).validate()
    result = nnls.nnls_solve(
        system.a,
        system.b,
        tol=config.nnls_tolerance,
        max_iter=config.max_iterations or None,
        backend=config.backend or None,
    )
    residual = ResidualLight(
        u=_residual_image(system, result.x), unknown_index=system.unknown_index
    )
    return residual, result


def _residual_image(system, x):
    res = system.resolution
    u = np.zeros((res * res, 3))
    u[system.unknown_cells, system.unknown_channels] = x
    return u.reshape(res, res, 3)


def promote(probes, fields=None, config=None):
    env, _ = promote_with_report(probes, fields, config)
    return env


def promote_with_report(probes, fields=None, config=None):
    """Full promotion pipeline; returns (LightEnv, PromotionReport)."""
    config = (config or SolverConfig()).validate()
    res = probes.resolution
    if fields is None:
        fields = reflectance.standard_fields(res)

    mirror_lin = linearize(probes.mirror, config.gamma)
    base = base_lighting(mirror_lin, probes.clip_mirror, config)

    n_unknowns = int(
        (probes.clip_mirror & probes.grid.mask[:, :, None]).sum()
    )
    if n_unknowns == 0:
        return base, PromotionReport()

    diffuse_lin = linearize(probes.diffuse, config.gamma)
    balance = avg_color_balance(diffuse_lin, probes.clip_diffuse)
    system = assemble_system(probes, fields, base, balance, config)
    residual, result = solve_residual(system, config)
    env = LightEnv(base.radiance + residual.u, probes.grid)
    report = PromotionReport(
        n_unknowns=system.n_unknowns,
        n_data_rows=system.n_data_rows,
        n_reg_rows=system.n_reg_rows,
        iterations=result.iterations,
        residual_norm=result.residual_norm,
        kkt_min_gradient=result.kkt_min_gradient,
        kkt_complementarity=result.kkt_complementarity,
        backend=result.backend,
        underdetermined=system.underdetermined,
        balance=balance,
    )
    return env, report
