"""Non-negative least squares: production solver plus a brute-force oracle.

Two interchangeable backends implement Lawson-Hanson active-set NNLS:

* ``compiled`` -- Cython kernel on the normal equations (fast inner loop,
  row-count independent), built at install time;
* ``python``  -- pure numpy on the original system (robust reference).

:func:`nnls_solve` picks the compiled kernel when present, verifies the KKT
conditions on the *original* system, and silently falls back to the python
backend if the kernel is unavailable, reports a singular passive block, or
the verification fails.  Set PROBELIFT_NNLS_BACKEND=python|compiled to force
a backend.

:func:`nnls_oracle` is deliberately independent of all of that: it
enumerates every support set and returns the best feasible least-squares
solution.  Exponential in the column count; meant for cross-checking the
solver on small systems, never for production use.
"""

import os
from dataclasses import dataclass

import numpy as np

from ._nnls_py import lawson_hanson as _lh_python
from .errors import ConvergenceError, DomainError

try:
    from ._nnls_cy import lawson_hanson_gram as _lh_compiled
except ImportError:  # extension not built
    _lh_compiled = None

__all__ = [
    "NnlsResult",
    "nnls_solve",
    "nnls_oracle",
    "kkt_residuals",
    "available_backends",
    "default_backend",
]

DEFAULT_TOLERANCE = 1e-10

_ENV_VAR = "PROBELIFT_NNLS_BACKEND"


@dataclass(frozen=True)
class NnlsResult:
    x: np.ndarray
    iterations: int
    backend: str
    residual_norm: float
    kkt_min_gradient: float      # min_i g_i, should be >= -tol
    kkt_complementarity: float   # max_i |x_i g_i|, should be <= tol-ish


def available_backends():
    out = ["python"]
    if _lh_compiled is not None:
        out.insert(0, "compiled")
    return out


def default_backend():
    forced = os.environ.get(_ENV_VAR)
    if forced:
        if forced not in ("python", "compiled"):
            raise DomainError(f"{_ENV_VAR} must be 'python' or 'compiled'")
        return forced
    return "compiled" if _lh_compiled is not None else "python"


def kkt_residuals(a, b, x):
    """(min_i g_i, max_i |x_i g_i|) for g = a'(a x - b)."""
    g = a.T @ (a @ x - b)
    return float(g.min()), float(np.max(np.abs(x * g)))


def _validate(a, b):
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    if a.ndim != 2:
        raise DomainError(f"matrix must be 2-D, got shape {a.shape}")
    if b.shape != (a.shape[0],):
        raise DomainError(f"rhs shape {b.shape} does not match matrix {a.shape}")
    if not np.all(np.isfinite(a)) or not np.all(np.isfinite(b)):
        raise DomainError("NNLS inputs must be finite")
    return a, b


def nnls_solve(a, b, tol=DEFAULT_TOLERANCE, max_iter=None, backend=None):
    """min ||a x - b||_2 s.t. x >= 0, via Lawson-Hanson active sets.

    tol is the KKT dual tolerance (stop when every free variable's dual is
    <= tol); max_iter bounds total inner iterations (default 10 n + 100).
    """
    a, b = _validate(a, b)
    n = a.shape[1]
    if max_iter is None:
        max_iter = 10 * n + 100
    if backend is None:
        backend = default_backend()
    if backend not in ("python", "compiled"):
        raise DomainError(f"unknown backend {backend!r}")
    if backend == "compiled" and _lh_compiled is None:
        raise DomainError("compiled NNLS backend is not available")
    if n == 0:
        return NnlsResult(np.zeros(0), 0, backend, float(np.linalg.norm(b)), 0.0, 0.0)

    if backend == "compiled":
        gram = a.T @ a
        atb = a.T @ b
        status, x, iterations = _lh_compiled(gram, atb, float(tol), int(max_iter))
        if status == 0:
            gmin, comp = kkt_residuals(a, b, x)
            scale = max(1.0, float(np.abs(atb).max()))
            if gmin >= -10.0 * tol * scale and comp <= 10.0 * tol * scale:
                return NnlsResult(
                    x, iterations, "compiled",
                    float(np.linalg.norm(a @ x - b)), gmin, comp,
                )
        elif status == 2:
            raise ConvergenceError(
                f"NNLS did not converge within {max_iter} iterations",
                iterations=iterations,
            )
        # singular passive block or failed verification: fall back

    x, iterations = _lh_python(a, b, float(tol), int(max_iter))
    gmin, comp = kkt_residuals(a, b, x)
    return NnlsResult(
        x, iterations, "python", float(np.linalg.norm(a @ x - b)), gmin, comp
    )


def nnls_oracle(a, b, max_columns=15):
    """Exhaustive-support NNLS reference.

    Solves the unconstrained least-squares problem on every subset of
    columns, keeps subsets whose solution is (numerically) non-negative, and
    returns the feasible solution with the smallest residual.  2^n subsets:
    refuses n > max_columns.
    """
    a, b = _validate(a, b)
    m, n = a.shape
    if n > max_columns:
        raise DomainError(f"oracle limited to {max_columns} columns, got {n}")

    gram = a.T @ a
    atb = a.T @ b
    btb = float(b @ b)

    best_obj = btb  # empty support: x = 0
    best_x = np.zeros(n)
    for bits in range(1, 1 << n):
        s = [j for j in range(n) if bits >> j & 1]
        try:
            z = np.linalg.solve(gram[np.ix_(s, s)], atb[s])
        except np.linalg.LinAlgError:
            z = np.linalg.lstsq(a[:, s], b, rcond=None)[0]
        if z.min() < -1e-12:
            continue
        z = np.clip(z, 0.0, None)
        r = a[:, s] @ z - b
        obj = float(r @ r)
        if obj < best_obj - 1e-300 or (
            obj < best_obj + 1e-15 * max(1.0, btb) and np.count_nonzero(z) < np.count_nonzero(best_x)
        ):
            best_obj = obj
            best_x = np.zeros(n)
            best_x[s] = z
    return best_x
