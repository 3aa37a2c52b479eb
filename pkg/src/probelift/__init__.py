"""probelift: HDR light-probe recovery from clipped LDR sphere triplets.

A photographed triplet of spheres (diffuse grey, matte silver, mirror) pins
down an omnidirectional lighting environment; clipping in the LDR capture
destroys the bright parts.  This package reads base lighting off the mirror
ball, solves a regularized non-negative least-squares system for the missing
(clipped) radiance using the diffuse and silver spheres as witnesses, and
ships the supporting geometry, rendering, spherical-harmonics baseline,
losses, file formats, synthetic data and a batch CLI.
"""

from .ballmap import BallGrid, build_grid, direction_to_pixel, pixel_to_direction
from .errors import (
    ConvergenceError,
    DegenerateInputError,
    DomainError,
    FormatError,
    ProbeLiftError,
)
from .metrics import (
    LossWeights,
    SoftClipConfig,
    fd_loss_gradient,
    loss_gradient,
    msrec_loss,
    rec_loss,
    rec_loss_terms,
    relative_radiance_diff,
    soft_clip,
)
from .nnls import NnlsResult, nnls_oracle, nnls_solve
from .probeio import (
    read_env,
    read_field,
    read_probe,
    write_env,
    write_field,
    write_probe,
)
from .promote import (
    CLIP_THRESHOLD_8BIT,
    CLIP_THRESHOLD_FLOAT,
    ColorBalance,
    ProbeTriplet,
    PromotionReport,
    ResidualLight,
    SolverConfig,
    assemble_system,
    avg_color_balance,
    base_lighting,
    detect_clipped,
    gamma_encode,
    linearize,
    promote,
    promote_with_report,
)
from .reflectance import (
    Brdf,
    BrdfParams,
    ReflectanceField,
    diffuse_field,
    mirror_field,
    resample_external,
    silver_field,
    standard_fields,
)
from .relight import (
    Encoding,
    LightEnv,
    LogLightEnv,
    SphereImage,
    downsample_env,
    env_to_log,
    log_to_env,
    render,
    render_log,
    render_pyramid,
)
from .shlight import ShCoeffs, project_sh, reconstruct_sh, reconstruct_sh_env, sh_basis
from .synth import SceneSpec, make_probes, random_env, stress_spec

__version__ = "0.1.0"
