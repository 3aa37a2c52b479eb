"""File formats: PFM environments, PNG probes, binary reflectance fields.

PFM (portable float map), used for light environments and HDR sphere images:

    PF\\n
    {width} {height}\\n
    -1.0\\n
    <rows of little-endian float32 RGB, bottom row first>

The scale line is pinned to exactly ``-1.0`` (little-endian) so that
write(read(f)) reproduces f byte for byte; any other scale is rejected.

Probe images are ordinary 8-bit RGB PNGs.  Linear-to-LDR conversion happens
elsewhere (see promote.gamma_encode); here a gamma-encoded image in [0, 1] is
quantized q = floor(255 x + 0.5) on write and mapped back as q/255 on read,
so quantization error is at most 1/510 per value.

Reflectance fields use a little-endian binary container:

    offset  size  field
    0       4     magic "PLRF"
    4       1     version (1)
    5       1     brdf tag (0 mirror, 1 diffuse, 2 matte silver, 3 external)
    6       1     channel_coupled flag (0/1)
    7       1     reserved (0)
    8       4     sphere_resolution (uint32)
    12      4     basis_resolution (uint32)
    16      ...   weights, float32, C order, shape (3, sphere^2, basis^2)

Field weights are float32-valued in memory by construction, so the container
round-trips both bytes and render output exactly.
"""

import struct

import numpy as np
from PIL import Image

from . import ballmap
from .errors import DomainError, FormatError
from .reflectance import Brdf, ReflectanceField
from .relight import Encoding, LightEnv, SphereImage

__all__ = [
    "read_env",
    "write_env",
    "read_probe",
    "write_probe",
    "read_field",
    "write_field",
    "write_image_pfm",
    "read_image_pfm",
]

_FIELD_MAGIC = b"PLRF"
_FIELD_VERSION = 1
_BRDF_TAGS = {
    Brdf.MIRROR: 0,
    Brdf.DIFFUSE: 1,
    Brdf.MATTE_SILVER: 2,
    Brdf.EXTERNAL: 3,
}
_TAG_BRDFS = {v: k for k, v in _BRDF_TAGS.items()}


# ---------------------------------------------------------------- PFM

def _write_pfm(path, pixels):
    h, w, _ = pixels.shape
    header = f"PF\n{w} {h}\n-1.0\n".encode("ascii")
    data = np.flipud(pixels).astype("<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(data)


def _read_pfm(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    parts = blob.split(b"\n", 3)
    if len(parts) != 4:
        raise FormatError(f"{path}: truncated PFM header")
    magic, dims, scale, payload = parts
    if magic != b"PF":
        raise FormatError(f"{path}: not a color PFM (magic {magic!r})")
    try:
        w, h = (int(tok) for tok in dims.split())
    except ValueError:
        raise FormatError(f"{path}: bad PFM dimensions line {dims!r}") from None
    if w <= 0 or h <= 0:
        raise FormatError(f"{path}: non-positive PFM dimensions {w}x{h}")
    if scale != b"-1.0":
        raise FormatError(
            f"{path}: unsupported PFM scale {scale!r} (only '-1.0' is written/read)"
        )
    expected = w * h * 3 * 4
    if len(payload) != expected:
        raise FormatError(
            f"{path}: PFM payload is {len(payload)} bytes, expected {expected}"
        )
    rows = np.frombuffer(payload, dtype="<f4").reshape(h, w, 3)
    return np.flipud(rows).astype(np.float64)


def write_image_pfm(path, image):
    """Write any sphere image (usually LinearHDR) as PFM."""
    _write_pfm(path, image.pixels)


def read_image_pfm(path, encoding=Encoding.LINEAR_HDR):
    """Read a square PFM back as a SphereImage."""
    pixels = _read_pfm(path)
    if pixels.shape[0] != pixels.shape[1]:
        raise FormatError(f"{path}: sphere images must be square, got {pixels.shape}")
    if not np.all(np.isfinite(pixels)):
        raise FormatError(f"{path}: non-finite pixel values")
    grid = ballmap.build_grid(pixels.shape[0])
    return SphereImage(pixels, encoding, grid)


def write_env(path, env):
    """Write a light environment as PFM."""
    _write_pfm(path, env.radiance)


def read_env(path):
    """Read a PFM light environment, validating the LightEnv invariants."""
    vals = _read_pfm(path)
    if vals.shape[0] != vals.shape[1]:
        raise FormatError(f"{path}: environments must be square, got {vals.shape}")
    if not np.all(np.isfinite(vals)):
        raise FormatError(f"{path}: non-finite radiance values")
    if vals.min() < 0.0:
        raise FormatError(f"{path}: negative radiance values")
    grid = ballmap.build_grid(vals.shape[0])
    if np.any(vals[~grid.mask] != 0.0):
        raise FormatError(f"{path}: nonzero radiance outside the disk mask")
    return LightEnv(vals, grid)


# ---------------------------------------------------------------- PNG probes

def write_probe(path, image):
    """Quantize a gamma-encoded sphere image to 8 bits and save as PNG."""
    if image.encoding is not Encoding.GAMMA_LDR:
        raise DomainError("write_probe expects a gamma-encoded image")
    q = np.floor(np.clip(image.pixels, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    Image.fromarray(q, mode="RGB").save(path, format="PNG")


def read_probe(path):
    """Read an 8-bit RGB PNG probe as a gamma-encoded SphereImage."""
    try:
        with Image.open(path) as im:
            im.load()
            mode = im.mode
            arr = np.asarray(im)
    except (OSError, SyntaxError) as exc:
        raise FormatError(f"{path}: not a readable image ({exc})") from exc
    if mode != "RGB":
        raise FormatError(f"{path}: probe PNGs must be 8-bit RGB, got mode {mode}")
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.dtype != np.uint8:
        raise FormatError(f"{path}: unexpected probe array {arr.shape} {arr.dtype}")
    if arr.shape[0] != arr.shape[1]:
        raise FormatError(f"{path}: probes must be square, got {arr.shape[:2]}")
    grid = ballmap.build_grid(arr.shape[0])
    return SphereImage(arr.astype(np.float64) / 255.0, Encoding.GAMMA_LDR, grid)


# ---------------------------------------------------------------- fields

def write_field(path, field):
    """Write a reflectance field in the PLRF binary container."""
    header = _FIELD_MAGIC + struct.pack(
        "<BBBBII",
        _FIELD_VERSION,
        _BRDF_TAGS[field.brdf],
        1 if field.channel_coupled else 0,
        0,
        field.sphere_resolution,
        field.basis_resolution,
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(field.weights.astype("<f4").tobytes())


def read_field(path):
    """Read a PLRF reflectance field."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 16:
        raise FormatError(f"{path}: truncated field header")
    if blob[:4] != _FIELD_MAGIC:
        raise FormatError(f"{path}: bad field magic {blob[:4]!r}")
    version, tag, coupled, _pad, sphere_res, basis_res = struct.unpack(
        "<BBBBII", blob[4:16]
    )
    if version != _FIELD_VERSION:
        raise FormatError(f"{path}: unsupported field version {version}")
    if tag not in _TAG_BRDFS:
        raise FormatError(f"{path}: unknown BRDF tag {tag}")
    if sphere_res < 2 or basis_res < 2:
        raise FormatError(f"{path}: bad resolutions {sphere_res}/{basis_res}")
    expected = 3 * sphere_res**2 * basis_res**2 * 4
    if len(blob) - 16 != expected:
        raise FormatError(
            f"{path}: field payload is {len(blob) - 16} bytes, expected {expected}"
        )
    w = (
        np.frombuffer(blob[16:], dtype="<f4")
        .reshape(3, sphere_res**2, basis_res**2)
        .astype(np.float64)
    )
    if np.any(w < 0.0) or not np.all(np.isfinite(w)):
        raise FormatError(f"{path}: field weights must be finite and non-negative")
    w.setflags(write=False)
    return ReflectanceField(
        brdf=_TAG_BRDFS[tag],
        sphere_resolution=int(sphere_res),
        basis_resolution=int(basis_res),
        weights=w,
        channel_coupled=bool(coupled),
    )
