"""Benchmark the compiled NNLS kernel against the pure-Python fallback.

Two workloads are timed:

* synthetic dense systems over a sweep of shapes, with a known sparse
  non-negative generator plus noise, and
* real promotion systems assembled from synthetic clipped scenes
  (~4870 rows by a few dozen unknowns, which is what ``promote`` actually
  hands the solver).

For every case both backends must agree on the objective value; a
disagreement aborts the run, because a fast wrong kernel is worse than
no kernel.

Run from the repository root::

    python3 benchmarks/bench_nnls.py
    python3 benchmarks/bench_nnls.py --repeats 9 --seed 3
"""

from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from probelift.nnls import available_backends, nnls_solve
from probelift.promote import (
    SolverConfig,
    assemble_system,
    avg_color_balance,
    base_lighting,
    detect_clipped,
    linearize,
)
from probelift.reflectance import standard_fields
from probelift.synth import make_probes, random_env, stress_spec

DENSE_SHAPES = ((50, 8), (200, 16), (1000, 16), (5000, 32), (5000, 64))
PROMOTION_SOURCES = (2, 6, 12)
OBJECTIVE_ATOL = 1e-8


def dense_system(rng, m, n):
    """Random tall system whose true generator is sparse and non-negative."""
    a = rng.standard_normal((m, n))
    x_true = np.where(rng.random(n) < 0.5, rng.random(n), 0.0)
    b = a @ x_true + 0.01 * rng.standard_normal(m)
    return a, b


def promotion_system(seed, n_sources):
    """Assemble the data+regularization system for one synthetic scene."""
    spec = stress_spec(seed=seed, n_sources=n_sources, resolution=32)
    probes = make_probes(random_env(spec), quantize=True)
    clip = detect_clipped(probes.mirror)
    base = base_lighting(linearize(probes.mirror), clip)
    balance = avg_color_balance(linearize(probes.diffuse), clip)
    system = assemble_system(probes, standard_fields(32), base, balance,
                             SolverConfig())
    return system.a, system.b


def time_backend(a, b, backend, repeats):
    """Best-of-``repeats`` wall time in seconds, plus the solve result."""
    best = np.inf
    result = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        result = nnls_solve(a, b, backend=backend)
        best = min(best, time.perf_counter() - t0)
    return best, result


def objective(a, b, x):
    r = a @ x - b
    return float(r @ r)


def run_case(label, a, b, repeats, rows):
    times = {}
    objs = {}
    iters = {}
    for backend in ("compiled", "python"):
        elapsed, result = time_backend(a, b, backend, repeats)
        times[backend] = elapsed
        objs[backend] = objective(a, b, result.x)
        iters[backend] = result.iterations
    gap = abs(objs["compiled"] - objs["python"])
    scale = max(1.0, abs(objs["python"]))
    if gap > OBJECTIVE_ATOL * scale:
        raise SystemExit(
            f"backend objective mismatch on {label}: "
            f"compiled={objs['compiled']!r} python={objs['python']!r}")
    speedup = times["python"] / times["compiled"]
    rows.append((label, a.shape[0], a.shape[1], iters["compiled"],
                 times["compiled"] * 1e3, times["python"] * 1e3, speedup))


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5,
                        help="timing repeats per case; best is reported")
    parser.add_argument("--seed", type=int, default=0,
                        help="seed for the dense random systems")
    args = parser.parse_args(argv)

    if "compiled" not in available_backends():
        print("compiled backend is not built; nothing to compare",
              file=sys.stderr)
        return 1

    rng = np.random.default_rng(args.seed)
    rows = []
    for m, n in DENSE_SHAPES:
        a, b = dense_system(rng, m, n)
        run_case(f"dense {m}x{n}", a, b, args.repeats, rows)
    for n_sources in PROMOTION_SOURCES:
        a, b = promotion_system(args.seed + n_sources, n_sources)
        run_case(f"promotion {n_sources} sources", a, b, args.repeats, rows)

    header = (f"{'case':<24}{'rows':>6}{'cols':>6}{'iters':>7}"
              f"{'compiled ms':>13}{'python ms':>11}{'speedup':>9}")
    print(header)
    print("-" * len(header))
    for label, m, n, its, t_c, t_p, speedup in rows:
        print(f"{label:<24}{m:>6}{n:>6}{its:>7}"
              f"{t_c:>13.3f}{t_p:>11.3f}{speedup:>8.1f}x")
    print(f"\nobjectives agreed to {OBJECTIVE_ATOL:g} (relative) on all "
          f"{len(rows)} cases; best of {args.repeats} repeats shown")
    return 0


if __name__ == "__main__":
    sys.exit(main())
