"""Analytic reflectance fields: flat-field responses, limits, resampling."""

import numpy as np
import pytest

from probelift import ballmap, reflectance, relight
from probelift.errors import DomainError
from probelift.reflectance import Brdf, BrdfParams

from conftest import impulse_env


def flat_env(grid, value=1.0):
    vals = np.full((grid.resolution, grid.resolution, 3), float(value))
    vals[~grid.mask] = 0.0
    return relight.LightEnv(vals, grid)


# ---------------------------------------------------------------- structure


def test_field_shapes_and_flags(fields32):
    for brdf, field in fields32.items():
        assert field.brdf is brdf
        assert field.weights.shape == (3, 32 * 32, 32 * 32)
        assert field.weights.min() >= 0.0
    assert not fields32[Brdf.MIRROR].channel_coupled
    assert not fields32[Brdf.MATTE_SILVER].channel_coupled
    assert not fields32[Brdf.DIFFUSE].channel_coupled  # default grey albedo


def test_weights_are_float32_valued(fields32):
    for field in fields32.values():
        w = field.weights
        np.testing.assert_array_equal(w, w.astype(np.float32).astype(np.float64))


def test_unmasked_rows_and_columns_are_zero(fields32, grid32):
    out = ~grid32.mask_flat
    for field in fields32.values():
        assert not field.weights[:, out, :].any()
        assert not field.weights[:, :, out].any()


def test_colored_albedo_couples_channels(grid32):
    params = BrdfParams(diffuse_albedo=(0.7, 0.5, 0.3))
    field = reflectance.diffuse_field(grid32, params)
    assert field.channel_coupled


def test_bad_params_rejected():
    with pytest.raises(DomainError):
        BrdfParams(mirror_reflectivity=0.0).validate()
    with pytest.raises(DomainError):
        BrdfParams(diffuse_albedo=(0.5, 0.5)).validate()
    with pytest.raises(DomainError):
        BrdfParams(silver_specular_weight=0.8, silver_diffuse_weight=0.3).validate()
    with pytest.raises(DomainError):
        BrdfParams(silver_phong_exponent=0.5).validate()


# ---------------------------------------------------------------- mirror


def test_mirror_rows_have_single_entry(fields32, grid32):
    w = fields32[Brdf.MIRROR].weights[0]
    rows = np.flatnonzero(grid32.mask_flat)
    counts = (w[rows] > 0).sum(axis=1)
    np.testing.assert_array_equal(counts, 1)
    vals = w[rows].max(axis=1)
    np.testing.assert_allclose(vals, np.float32(0.827), atol=0.0)


def test_mirror_center_sees_forward_direction(grid32):
    """The center pixels look straight back at +z, i.e. the disk center cell."""
    field = reflectance.mirror_field(grid32)
    res = grid32.resolution
    pix = (res // 2) * res + res // 2  # center-adjacent pixel
    col = np.flatnonzero(field.weights[0][pix])[0]
    # its basis cell center must be close to the disk center
    bu = grid32.u.reshape(-1)[col]
    bv = grid32.v.reshape(-1)[col]
    assert bu**2 + bv**2 < (4.0 / res) ** 2


def test_mirror_impulse_render_is_sparse(fields32, grid32):
    cell = np.flatnonzero(grid32.mask_flat)[100]
    img = relight.render(fields32[Brdf.MIRROR], impulse_env(grid32, cell, 2.0))
    lit = img.pixels[:, :, 0] > 0
    assert 1 <= lit.sum() <= 4  # a handful of pixels reflect one cell
    assert img.pixels.max() == pytest.approx(2.0 * 0.827, rel=1e-6)


# ---------------------------------------------------------------- diffuse


def test_diffuse_flat_field_response(fields32, grid32):
    """A uniform unit environment must light every normal direction equally.

    Integral of max(0, n.d) over the sphere is pi, so the exact response is
    albedo = 0.5; the discrete quadrature lands within ~1.5% of it.
    """
    img = relight.render(fields32[Brdf.DIFFUSE], flat_env(grid32))
    vals = img.pixels[grid32.mask]
    assert vals.mean() == pytest.approx(0.5, rel=0.015)
    assert vals.std() < 0.01


def test_diffuse_back_light_is_dark(fields32, grid32):
    """A source behind the sphere (-z) cannot light the camera-facing center."""
    back = np.flatnonzero(
        grid32.u.reshape(-1) ** 2 + grid32.v.reshape(-1) ** 2 > 0.98
    )
    back = back[grid32.mask_flat[back]][0]
    img = relight.render(fields32[Brdf.DIFFUSE], impulse_env(grid32, back, 10.0))
    res = grid32.resolution
    center = img.pixels[res // 2, res // 2]
    assert np.all(center < 1e-8)


def test_diffuse_albedo_scales_linearly(grid32):
    f1 = reflectance.diffuse_field(grid32, BrdfParams(diffuse_albedo=(0.5,) * 3))
    f2 = reflectance.diffuse_field(grid32, BrdfParams(diffuse_albedo=(0.25,) * 3))
    np.testing.assert_allclose(f1.weights, 2.0 * f2.weights, rtol=1e-6)


# ---------------------------------------------------------------- silver


def test_silver_flat_field_response(fields32, grid32):
    """Flat unit light: lobe sums to 0.6 exactly (renormalized), floor to ~0.2."""
    img = relight.render(fields32[Brdf.MATTE_SILVER], flat_env(grid32))
    vals = img.pixels[grid32.mask]
    assert abs(vals.mean() - 0.8) < 0.05
    assert vals.min() > 0.6


def test_silver_high_exponent_approaches_mirror(grid32):
    """As the lobe sharpens, the specular part concentrates like the mirror."""
    params = BrdfParams(
        silver_phong_exponent=4096.0,
        silver_specular_weight=0.827,
        silver_diffuse_weight=0.0,
    )
    sharp = reflectance.silver_field(grid32, params)
    mirror = reflectance.mirror_field(grid32)
    cell = np.flatnonzero(grid32.mask_flat)[300]
    env = impulse_env(grid32, cell, 1.0)
    a = relight.render(sharp, env).pixels.sum()
    b = relight.render(mirror, env).pixels.sum()
    assert a == pytest.approx(b, rel=0.25)
    # and the response concentrates on the same pixels
    pa = relight.render(sharp, env).pixels[:, :, 0]
    pb = relight.render(mirror, env).pixels[:, :, 0]
    ia = np.unravel_index(np.argmax(pa), pa.shape)
    ib = np.unravel_index(np.argmax(pb), pb.shape)
    assert abs(ia[0] - ib[0]) <= 1 and abs(ia[1] - ib[1]) <= 1


def test_silver_between_diffuse_and_mirror_sharpness(fields32, grid32):
    """Impulse response peakedness orders mirror > silver > diffuse."""
    cell = np.flatnonzero(grid32.mask_flat)[250]
    env = impulse_env(grid32, cell, 1.0)

    def peakedness(brdf):
        px = relight.render(fields32[brdf], env).pixels[:, :, 0]
        return px.max() / px.sum()

    assert peakedness(Brdf.MIRROR) > peakedness(Brdf.MATTE_SILVER)
    assert peakedness(Brdf.MATTE_SILVER) > peakedness(Brdf.DIFFUSE)


# ---------------------------------------------------------------- standard set


def test_standard_fields_cached():
    a = reflectance.standard_fields(16)
    b = reflectance.standard_fields(16)
    assert a is b
    assert set(a) == {Brdf.MIRROR, Brdf.DIFFUSE, Brdf.MATTE_SILVER}


def test_mixed_basis_resolution(grid32):
    field = reflectance.diffuse_field(grid32, basis_resolution=16)
    assert field.sphere_resolution == 32
    assert field.basis_resolution == 16
    assert field.weights.shape == (3, 1024, 256)


# ---------------------------------------------------------------- resampling


def test_resample_external_reproduces_analytic(grid16):
    """Sampling a field one impulse at a time and rebinning must reproduce it."""
    src = reflectance.diffuse_field(grid16)
    cells = np.flatnonzero(grid16.mask_flat)
    dirs = ballmap.grid_directions(grid16).reshape(-1, 3)[cells]
    images = [relight.render(src, impulse_env(grid16, c, 1.0)) for c in cells]
    rebuilt = reflectance.resample_external(images, dirs, grid16)
    assert rebuilt.brdf is Brdf.EXTERNAL
    np.testing.assert_allclose(rebuilt.weights, src.weights, atol=1e-6)


def test_resample_external_accumulates_shared_cells(grid16):
    """Two responses binned into one cell sum,*not* average."""
    cell = np.flatnonzero(grid16.mask_flat)[40]
    d = ballmap.grid_directions(grid16).reshape(-1, 3)[cell]
    img = np.zeros((16, 16, 3))
    img[8, 8] = 1.0
    field = reflectance.resample_external([img, img], np.stack([d, d]), grid16)
    col = np.flatnonzero(field.weights[0][8 * 16 + 8])
    assert field.weights[0][8 * 16 + 8, col[0]] == pytest.approx(2.0)


def test_resample_external_validates(grid16):
    with pytest.raises(DomainError):
        reflectance.resample_external([], np.zeros((1, 3)), grid16)
    with pytest.raises(DomainError):
        reflectance.resample_external(
            [np.zeros((16, 16, 3))], np.array([[0.0, 0.0, 0.5]]), grid16
        )
    with pytest.raises(DomainError):
        reflectance.resample_external(
            [np.zeros((8, 8, 3))], np.array([[0.0, 0.0, 1.0]]), grid16
        )
    with pytest.raises(DomainError):
        reflectance.resample_external(
            [np.full((16, 16, 3), -1.0)], np.array([[0.0, 0.0, 1.0]]), grid16
        )
