"""Batch command-line frontend.

Subcommands: synth, promote, render, compare, sh, gradcheck.  All reports
are plain text with one `name value` pair per line; outputs are
deterministic for identical inputs and flags.  Exit codes: 0 success,
1 numeric-tolerance failure, 2 I/O or usage error.
"""

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import ballmap, metrics, probeio, reflectance, relight, shlight, synth
from .errors import ProbeLiftError
from .promote import (
    CLIP_THRESHOLD_8BIT,
    ProbeTriplet,
    SolverConfig,
    detect_clipped,
    gamma_encode,
    promote_with_report,
)
from .reflectance import Brdf

__all__ = ["main", "build_parser"]

_BRDF_NAMES = {
    "diffuse": Brdf.DIFFUSE,
    "silver": Brdf.MATTE_SILVER,
    "mirror": Brdf.MIRROR,
}


def _fmt(value):
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


def _report(out, pairs):
    for name, value in pairs:
        print(f"{name} {_fmt(value)}", file=out)


def _solver_config(args, clip_threshold=None):
    return SolverConfig(
        gamma=args.gamma,
        mirror_reflectivity=args.reflectivity,
        lambda_reg=args.lambda_reg,
        clip_threshold=(
            clip_threshold if clip_threshold is not None else args.clip_threshold
        ),
    )


def _scene_spec(args, seed):
    return synth.SceneSpec(
        seed=seed,
        resolution=args.basis_res,
        n_sources=args.sources,
        source_intensity_range=(args.intensity_min, args.intensity_max),
        source_chroma_jitter=args.chroma_jitter,
        ambient_strength=args.ambient,
        quantize_8bit=args.quantize,
    )


def _write_scene(spec, out_dir, config):
    out_dir.mkdir(parents=True, exist_ok=True)
    env = synth.random_env(spec)
    probes = synth.make_probes(env, config=config, quantize=spec.quantize_8bit)
    probeio.write_env(out_dir / "gt.pfm", env)
    probeio.write_probe(out_dir / "diffuse.png", probes.diffuse)
    probeio.write_probe(out_dir / "silver.png", probes.silver)
    probeio.write_probe(out_dir / "mirror.png", probes.mirror)
    lines = [
        ("seed", spec.seed),
        ("resolution", spec.resolution),
        ("sources", spec.n_sources),
        ("intensity_min", float(spec.source_intensity_range[0])),
        ("intensity_max", float(spec.source_intensity_range[1])),
        ("chroma_jitter", float(spec.source_chroma_jitter)),
        ("ambient", float(spec.ambient_strength)),
        ("quantize", int(spec.quantize_8bit)),
    ]
    manifest = "".join(f"{k} {_fmt(v)}\n" for k, v in lines)
    (out_dir / "manifest.txt").write_text(manifest, encoding="utf-8")


def cmd_synth(args):
    out_root = Path(args.out_dir)
    config = _solver_config(args)
    seeds = [args.seed + i for i in range(args.count)]
    if args.count == 1:
        dirs = [out_root]
    else:
        dirs = [out_root / f"scene_{s:05d}" for s in seeds]
    if args.threads > 1 and len(seeds) > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            futures = [
                pool.submit(_write_scene, _scene_spec(args, s), d, config)
                for s, d in zip(seeds, dirs)
            ]
            for f in futures:
                f.result()
    else:
        for s, d in zip(seeds, dirs):
            _write_scene(_scene_spec(args, s), d, config)
    _report(sys.stdout, [("scenes", len(seeds)), ("out_dir", out_root)])
    return 0


def cmd_promote(args):
    diffuse = probeio.read_probe(args.diffuse)
    silver = probeio.read_probe(args.silver)
    mirror = probeio.read_probe(args.mirror)
    config = _solver_config(args)
    probes = ProbeTriplet(
        diffuse=diffuse,
        silver=silver,
        mirror=mirror,
        clip_diffuse=detect_clipped(diffuse, config.clip_threshold),
        clip_silver=detect_clipped(silver, config.clip_threshold),
        clip_mirror=detect_clipped(mirror, config.clip_threshold),
    )
    env, report = promote_with_report(probes, config=config)
    probeio.write_env(args.out, env)
    pairs = [
        ("out", args.out),
        ("resolution", env.resolution),
        ("unknowns", report.n_unknowns),
        ("data_rows", report.n_data_rows),
        ("reg_rows", report.n_reg_rows),
        ("iterations", report.iterations),
        ("residual_norm", report.residual_norm),
        ("kkt_min_gradient", report.kkt_min_gradient),
        ("kkt_complementarity", report.kkt_complementarity),
        ("backend", report.backend),
        ("underdetermined", int(report.underdetermined)),
    ]
    if report.balance is not None:
        pairs += [
            ("balance_r", report.balance.r_avg),
            ("balance_g", report.balance.g_avg),
            ("balance_b", report.balance.b_avg),
        ]
    _report(sys.stdout, pairs)
    return 0


def cmd_render(args):
    env = probeio.read_env(args.env)
    scale = args.scale or env.resolution
    if env.resolution % scale != 0:
        raise ProbeLiftError(
            f"--scale {scale} does not divide the environment resolution "
            f"{env.resolution}"
        )
    params = reflectance.BrdfParams(mirror_reflectivity=args.reflectivity)
    fields = reflectance.standard_fields(scale, params)
    image = relight.render(
        fields[_BRDF_NAMES[args.brdf]],
        relight.downsample_env(env, env.resolution // scale),
    )
    out = Path(args.out)
    if out.suffix.lower() == ".png":
        probeio.write_probe(out, gamma_encode(image, args.gamma))
    else:
        probeio.write_image_pfm(out, image)
    _report(sys.stdout, [("out", out), ("brdf", args.brdf), ("resolution", scale)])
    return 0


_PYRAMID_SCALES = (4, 8, 16, 32)


def _reference_pyramid(env, scales, config):
    refs = {}
    for s in scales:
        fields = reflectance.standard_fields(s)
        env_s = relight.downsample_env(env, env.resolution // s)
        probes = synth.make_probes(env_s, fields=fields, config=config)
        refs[s] = {
            Brdf.DIFFUSE: probes.diffuse,
            Brdf.MATTE_SILVER: probes.silver,
            Brdf.MIRROR: probes.mirror,
        }
    return refs


def cmd_compare(args):
    gt = probeio.read_env(args.gt)
    pred = probeio.read_env(args.pred)
    config = _solver_config(args)
    weights = metrics.LossWeights(gamma=args.gamma)

    fields = reflectance.standard_fields(gt.resolution)
    rendered = {b: relight.render(fields[b], pred) for b in fields}
    ref_probes = synth.make_probes(gt, fields=fields, config=config)
    reference = {
        Brdf.DIFFUSE: ref_probes.diffuse,
        Brdf.MATTE_SILVER: ref_probes.silver,
        Brdf.MIRROR: ref_probes.mirror,
    }
    terms = metrics.rec_loss_terms(rendered, reference, weights)
    total = metrics.rec_loss(rendered, reference, weights)

    scales = [s for s in _PYRAMID_SCALES if gt.resolution % s == 0]
    if not scales:
        scales = [gt.resolution]
    ref_pyr = _reference_pyramid(gt, scales, config)
    pred_pyr = {}
    for s in scales:
        fields_s = reflectance.standard_fields(s)
        env_s = relight.downsample_env(pred, pred.resolution // s)
        pred_pyr[s] = {b: relight.render(fields_s[b], env_s) for b in fields_s}
    ms = metrics.msrec_loss(pred_pyr, ref_pyr, weights)
    rrd = metrics.relative_radiance_diff(gt, pred)

    _report(
        sys.stdout,
        [
            ("rec_diffuse", terms[Brdf.DIFFUSE]),
            ("rec_silver", terms[Brdf.MATTE_SILVER]),
            ("rec_mirror", terms[Brdf.MIRROR]),
            ("rec_loss", total),
            ("msrec_loss", ms),
            ("radiance_diff_r", float(rrd[0])),
            ("radiance_diff_g", float(rrd[1])),
            ("radiance_diff_b", float(rrd[2])),
        ],
    )
    return 0


def cmd_sh(args):
    env = probeio.read_env(args.env)
    coeffs = shlight.project_sh(env)
    for name, c in zip(("sh_r", "sh_g", "sh_b"), range(3)):
        vals = " ".join(_fmt(float(v)) for v in coeffs.coeffs[:, c])
        print(f"{name} {vals}")
    if args.reconstruct:
        grid = ballmap.build_grid(env.resolution)
        probeio.write_env(
            args.reconstruct, shlight.reconstruct_sh_env(coeffs, grid)
        )
        _report(sys.stdout, [("reconstruct", args.reconstruct)])
    return 0


def cmd_gradcheck(args):
    res = args.basis_res
    spec = synth.SceneSpec(
        seed=args.seed,
        resolution=res,
        n_sources=2,
        source_intensity_range=(1.5, 6.0),
        ambient_strength=0.4,
    )
    env = synth.random_env(spec)
    ref_env = synth.random_env(
        synth.SceneSpec(
            seed=args.seed + 1000,
            resolution=res,
            n_sources=2,
            source_intensity_range=(1.5, 6.0),
            ambient_strength=0.4,
        )
    )
    scales = args.scales or [s for s in _PYRAMID_SCALES if res % s == 0]
    for s in scales:
        if res % s != 0:
            raise ProbeLiftError(f"scale {s} does not divide --basis-res {res}")
    config = _solver_config(args)
    weights = metrics.LossWeights(gamma=args.gamma)
    fields = {s: dict(reflectance.standard_fields(s)) for s in scales}
    reference = _reference_pyramid(ref_env, scales, config)

    q = relight.env_to_log(env)
    grad = metrics.loss_gradient(q, fields, reference, weights)
    fd = metrics.fd_loss_gradient(q, fields, reference, weights, h=args.h)
    sel = np.abs(grad) > 1e-7
    if sel.any():
        denom = np.maximum(np.abs(grad[sel]), np.abs(fd[sel]))
        max_rel = float(np.max(np.abs(grad[sel] - fd[sel]) / denom))
    else:
        max_rel = 0.0
    ok = max_rel < args.tolerance
    _report(
        sys.stdout,
        [
            ("seed", args.seed),
            ("h", args.h),
            ("scales", ",".join(str(s) for s in scales)),
            ("cells_checked", int(sel.sum())),
            ("max_rel_error", max_rel),
            ("status", "PASS" if ok else "FAIL"),
        ],
    )
    return 0 if ok else 1


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--basis-res", type=int, default=32, help="light basis resolution")
    common.add_argument("--gamma", type=float, default=2.2)
    common.add_argument("--reflectivity", type=float, default=0.827)
    common.add_argument("--lambda-reg", type=float, default=0.5)
    common.add_argument(
        "--clip-threshold",
        type=float,
        default=CLIP_THRESHOLD_8BIT,
        help="LDR clip detection threshold (default 254/255)",
    )
    common.add_argument("--threads", type=int, default=1)

    parser = argparse.ArgumentParser(
        prog="probelift",
        description="HDR light-probe promotion, relighting and evaluation tools",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="generate synthetic scenes")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=1, help="number of scenes")
    p.add_argument("--sources", type=int, default=3)
    p.add_argument("--intensity-min", type=float, default=2.0)
    p.add_argument("--intensity-max", type=float, default=50.0)
    p.add_argument("--chroma-jitter", type=float, default=0.05)
    p.add_argument("--ambient", type=float, default=0.3)
    p.add_argument("--quantize", action="store_true", help="model 8-bit probes")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("promote", parents=[common], help="promote probes to HDR")
    p.add_argument("diffuse")
    p.add_argument("silver")
    p.add_argument("mirror")
    p.add_argument("--out", required=True, help="output env .pfm")
    p.set_defaults(func=cmd_promote)

    p = sub.add_parser("render", parents=[common], help="render a sphere from an env")
    p.add_argument("env")
    p.add_argument("--brdf", choices=sorted(_BRDF_NAMES), required=True)
    p.add_argument("--scale", type=int, default=0, help="render scale (default: env size)")
    p.add_argument("--out", required=True, help=".png (LDR) or .pfm (linear)")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("compare", parents=[common], help="compare two envs")
    p.add_argument("gt")
    p.add_argument("pred")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("sh", parents=[common], help="order-2 SH projection")
    p.add_argument("env")
    p.add_argument("--reconstruct", help="write clamped SH reconstruction .pfm")
    p.set_defaults(func=cmd_sh)

    p = sub.add_parser("gradcheck", parents=[common], help="verify loss gradients")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--h", type=float, default=1e-4, help="finite-difference step")
    p.add_argument("--scales", type=int, nargs="+", default=None)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ProbeLiftError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
