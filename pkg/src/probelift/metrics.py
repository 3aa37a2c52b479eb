"""Evaluation losses and radiance metrics.

The reconstruction loss compares a linear HDR render against a gamma-encoded
LDR reference through a differentiable soft clip:

    loss = sum_k lambda_k * mean_masked | Lam(render_k)^(1/gamma) - Lam(ref_k) |

Lam is identity below a knee (default 0.9) and bends smoothly toward an
asymptote at 1 above it, so the loss stays differentiable where hard clipping
would kink.  Lam is applied to the reference too, exactly as the loss is
written; below the knee that is a no-op.  The multi-scale variant sums the
same loss over a render pyramid with per-scale weights.

The analytic gradient differentiates the multi-scale loss with respect to
log-radiance q (env = e^q): through exp, the masked box-filter downsampling,
the linear render, the soft clip, the 1/gamma encoding, and the masked L1
(subgradient 0 at exact ties).  fd_loss_gradient is the matching
central-difference oracle; it exploits linearity of the render (perturbing
one env cell shifts one rendered column) so it stays usable at full
resolution, and is algebraically identical to differencing msrec_loss.
"""

from dataclasses import dataclass

import numpy as np

from . import ballmap, relight
from .errors import DegenerateInputError, DomainError
from .reflectance import Brdf
from .relight import Encoding

__all__ = [
    "SoftClipConfig",
    "LossWeights",
    "soft_clip",
    "rec_loss",
    "rec_loss_terms",
    "msrec_loss",
    "loss_gradient",
    "fd_loss_gradient",
    "relative_radiance_diff",
]


@dataclass(frozen=True)
class SoftClipConfig:
    """knee: fraction of the LDR range where the soft clip starts bending."""

    knee: float = 0.9

    def validate(self):
        if not 0.0 < self.knee < 1.0:
            raise DomainError("knee must be in (0, 1)")
        return self


def soft_clip(x, config=None):
    """Soft clipping Lam and its exact derivative.

    Identity below the knee k; above it a cubic Hermite in the compactified
    coordinate t = (x-k)/((x-k)+(1-k)):

        Lam(x) = k + (1-k) (t + t^2 - t^3),   Lam'(x) = (1+3t)(1-t)^3

    which is monotone, C^2 at the knee (value k, slope 1, curvature 0) and
    approaches 1 as x -> inf with derivative in [0, 1].
    Returns (value, derivative), elementwise for arrays.
    """
    config = (config or SoftClipConfig()).validate()
    k = config.knee
    x = np.asarray(x, dtype=np.float64)
    if np.any(x < -1e-12):
        raise DomainError("soft_clip expects non-negative input")
    s = np.clip(x - k, 0.0, None)
    t = s / (s + (1.0 - k))
    one_t = 1.0 - t
    value = np.where(x <= k, x, k + (1.0 - k) * (t + t * t - t**3))
    deriv = np.where(x <= k, 1.0, (1.0 + 3.0 * t) * one_t**3)
    if value.ndim == 0:
        return float(value), float(deriv)
    return value, deriv


@dataclass(frozen=True)
class LossWeights:
    """Per-BRDF and per-scale loss weights plus encoding constants."""

    lambda_mirror: float = 0.2
    lambda_diffuse: float = 0.6
    lambda_silver: float = 0.2
    scale_weights: tuple = ()  # (scale, weight) pairs; empty = every scale 1.0
    gamma: float = 2.2
    softclip: SoftClipConfig = SoftClipConfig()

    def validate(self):
        if min(self.lambda_mirror, self.lambda_diffuse, self.lambda_silver) < 0:
            raise DomainError("BRDF weights must be non-negative")
        if any(w < 0 for _, w in self.scale_weights):
            raise DomainError("scale weights must be non-negative")
        if self.gamma <= 0:
            raise DomainError("gamma must be positive")
        self.softclip.validate()
        return self

    def brdf_weight(self, brdf):
        return {
            Brdf.MIRROR: self.lambda_mirror,
            Brdf.DIFFUSE: self.lambda_diffuse,
            Brdf.MATTE_SILVER: self.lambda_silver,
        }[brdf]

    def scale_weight(self, scale):
        for s, w in self.scale_weights:
            if s == scale:
                return w
        return 1.0


def _encode_pair(rendered, reference, weights, mask):
    if rendered.encoding is not Encoding.LINEAR_HDR:
        raise DomainError("rendered images must be linear HDR")
    if reference.encoding is not Encoding.GAMMA_LDR:
        raise DomainError("reference images must be gamma-encoded LDR")
    if rendered.resolution != reference.resolution:
        raise DomainError(
            f"resolution mismatch: rendered {rendered.resolution} "
            f"vs reference {reference.resolution}"
        )
    if mask.shape != (rendered.resolution, rendered.resolution):
        raise DomainError("mask shape must match the image resolution")
    pred = soft_clip(rendered.pixels, weights.softclip)[0] ** (1.0 / weights.gamma)
    ref = soft_clip(reference.pixels, weights.softclip)[0]
    return pred, ref


def rec_loss_terms(rendered, reference, weights=None, mask=None):
    """Unweighted per-BRDF mean L1 terms, {Brdf: scalar}.

    rendered: {Brdf: linear SphereImage}; reference: {Brdf: LDR SphereImage}.
    The mean runs over masked pixels and channels; mask defaults to the
    sphere disk.
    """
    weights = (weights or LossWeights()).validate()
    if set(rendered) != set(reference):
        raise DomainError("rendered and reference BRDF sets differ")
    out = {}
    for brdf in rendered:
        img = rendered[brdf]
        msk = img.grid.mask if mask is None else np.asarray(mask, dtype=bool)
        pred, ref = _encode_pair(img, reference[brdf], weights, msk)
        n = int(msk.sum())
        if n == 0:
            raise DegenerateInputError("loss mask selects no pixels")
        out[brdf] = float(np.abs(pred - ref)[msk].sum() / (3 * n))
    return out


def rec_loss(rendered, reference, weights=None, mask=None):
    """BRDF-weighted LDR reconstruction loss (scalar)."""
    weights = (weights or LossWeights()).validate()
    terms = rec_loss_terms(rendered, reference, weights, mask)
    return float(sum(weights.brdf_weight(b) * t for b, t in terms.items()))


def msrec_loss(rendered, reference, weights=None):
    """Multi-scale reconstruction loss.

    rendered / reference: {scale: {Brdf: SphereImage}} with matching scale
    sets; each scale contributes scale_weight(s) * rec_loss at that scale.
    """
    weights = (weights or LossWeights()).validate()
    if set(rendered) != set(reference):
        raise DomainError(
            f"scale sets differ: {sorted(rendered)} vs {sorted(reference)}"
        )
    total = 0.0
    for scale in sorted(rendered):
        total += weights.scale_weight(scale) * rec_loss(
            rendered[scale], reference[scale], weights
        )
    return float(total)


def _check_pyramid(fields, reference, resolution):
    if set(fields) != set(reference):
        raise DomainError(
            f"scale sets differ: {sorted(fields)} vs {sorted(reference)}"
        )
    for scale in fields:
        if resolution % scale != 0:
            raise DomainError(f"scale {scale} does not divide resolution {resolution}")
        for brdf, field in fields[scale].items():
            if brdf not in reference[scale]:
                raise DomainError(f"missing reference for {brdf.value} at scale {scale}")
            if field.basis_resolution != scale or field.sphere_resolution != scale:
                raise DomainError(
                    f"field at scale {scale} must have sphere and basis "
                    f"resolution {scale}"
                )
            if reference[scale][brdf].resolution != scale:
                raise DomainError(f"reference at scale {scale} has wrong resolution")


def loss_gradient(logenv, fields, reference, weights=None):
    """Analytic gradient of msrec_loss with respect to q (env = e^q).

    fields / reference: {scale: {Brdf: ...}} as in msrec_loss, with fields
    supplying the per-scale renderers.  Returns a (res, res, 3) array; cells
    outside the disk mask (or with zero radiance) get gradient 0.
    """
    weights = (weights or LossWeights()).validate()
    res = logenv.resolution
    _check_pyramid(fields, reference, res)
    env = relight.log_to_env(logenv)
    grad = np.zeros((res * res, 3))
    inv_g = 1.0 / weights.gamma

    for scale in sorted(fields):
        factor = res // scale
        env_s = relight.downsample_env(env, factor)
        flat_s = env_s.radiance.reshape(-1, 3)
        g_cells = np.zeros_like(flat_s)
        for brdf, field in fields[scale].items():
            ref_img = reference[scale][brdf]
            msk = ref_img.grid.mask
            coeff = (
                weights.scale_weight(scale)
                * weights.brdf_weight(brdf)
                / (3.0 * msk.sum())
            )
            if coeff == 0.0:
                continue
            ref = soft_clip(ref_img.pixels, weights.softclip)[0].reshape(-1, 3)
            mflat = msk.reshape(-1)
            for c in range(3):
                w = field.weights[c]
                pred = w @ flat_s[:, c]
                lam, dlam = soft_clip(pred, weights.softclip)
                enc = lam**inv_g
                sgn = np.sign(enc - ref[:, c]) * mflat
                # d enc / d pred; the render is 0 only where every
                # contributing env cell is 0, so the q-gradient there is 0.
                lam_safe = np.where(lam > 0.0, lam, 1.0)
                denc = np.where(lam > 0.0, inv_g * lam_safe ** (inv_g - 1.0), 0.0) * dlam
                g_cells[:, c] += coeff * (w.T @ (sgn * denc))
        # adjoint of the masked box-filter average
        counts = relight.block_mask_counts(env.grid, factor).astype(np.float64)
        per_fine = np.zeros_like(g_cells)
        np.divide(
            g_cells,
            counts.reshape(-1)[:, None],
            out=per_fine,
            where=counts.reshape(-1)[:, None] > 0,
        )
        up = per_fine.reshape(scale, scale, 3)
        up = np.repeat(np.repeat(up, factor, axis=0), factor, axis=1)
        grad += (up * env.grid.mask[:, :, None]).reshape(-1, 3)

    return (grad.reshape(res, res, 3)) * env.radiance


def fd_loss_gradient(logenv, fields, reference, weights=None, h=1e-4):
    """Central finite differences of msrec_loss in q, exploiting linearity.

    Perturbing q at one cell shifts each scale's render along a single
    weight-matrix column, so the loss under e^(q +/- h) is evaluated without
    re-rendering; the result equals naive msrec_loss differencing exactly.
    """
    weights = (weights or LossWeights()).validate()
    res = logenv.resolution
    _check_pyramid(fields, reference, res)
    env = relight.log_to_env(logenv)
    flat_env = env.radiance.reshape(-1, 3)
    fine_idx = np.flatnonzero(env.grid.mask_flat)
    loss_delta = np.zeros((res * res, 3))  # loss(+h) - loss(-h)

    for scale in sorted(fields):
        factor = res // scale
        env_s = relight.downsample_env(env, factor)
        flat_s = env_s.radiance.reshape(-1, 3)
        counts = relight.block_mask_counts(env.grid, factor).reshape(-1)
        coarse_grid = ballmap.build_grid(scale)
        # coarse cell of each masked fine cell
        rows, cols = np.divmod(fine_idx, res)
        coarse_flat = (rows // factor) * scale + (cols // factor)
        live = coarse_grid.mask_flat[coarse_flat]  # rim blocks are zeroed
        for brdf, field in fields[scale].items():
            ref_img = reference[scale][brdf]
            msk = ref_img.grid.mask.reshape(-1).astype(np.float64)
            coeff = (
                weights.scale_weight(scale)
                * weights.brdf_weight(brdf)
                / (3.0 * msk.sum())
            )
            if coeff == 0.0:
                continue
            ref = soft_clip(ref_img.pixels, weights.softclip)[0].reshape(-1, 3)
            for c in range(3):
                w = field.weights[c]
                pred = w @ flat_s[:, c]
                cols_w = np.ascontiguousarray(w[:, coarse_flat].T)  # (nj, P_s)
                for sign in (1.0, -1.0):
                    delta = flat_env[fine_idx, c] * (np.exp(sign * h) - 1.0)
                    delta = np.where(live, delta / counts[coarse_flat], 0.0)
                    pert = pred[None, :] + delta[:, None] * cols_w
                    lam = soft_clip(pert, weights.softclip)[0]
                    err = np.abs(lam ** (1.0 / weights.gamma) - ref[None, :, c])
                    term = coeff * (err @ msk)
                    loss_delta[fine_idx, c] += sign * term

    return loss_delta.reshape(res, res, 3) / (2.0 * h)


def relative_radiance_diff(gt, pred):
    """(sum GT - sum Pred) / sum GT per channel, over masked cells."""
    if gt.resolution != pred.resolution:
        raise DomainError("environment resolutions differ")
    m = gt.grid.mask
    s_gt = gt.radiance[m].sum(axis=0)
    s_pred = pred.radiance[m].sum(axis=0)
    if np.any(s_gt <= 0.0):
        raise DegenerateInputError("ground-truth radiance sums to zero in a channel")
    return (s_gt - s_pred) / s_gt
