"""Pure-numpy Lawson-Hanson active-set NNLS.

Reference implementation: robust (least-squares subproblems solved with
lstsq on the original matrix, no Gram squaring) but slower than the compiled
kernel in ``_nnls_cy``.  Both backends expose the same function signature and
are interchangeable behind :func:`probelift.nnls.nnls_solve`.
"""

import numpy as np

from .errors import ConvergenceError

__all__ = ["lawson_hanson"]


def lawson_hanson(a, b, tol, max_iter):
    """min ||a x - b||_2 subject to x >= 0.

    Returns (x, iterations).  Raises ConvergenceError if the iteration bound
    is hit before the KKT stopping rule (max dual over the free set <= tol).
    """
    m, n = a.shape
    x = np.zeros(n)
    passive = np.zeros(n, dtype=bool)
    w = a.T @ b  # dual: a.T (b - a x), x = 0 initially
    iterations = 0

    while True:
        free = ~passive
        if not free.any():
            break
        j = int(np.argmax(np.where(free, w, -np.inf)))
        if w[j] <= tol:
            break
        passive[j] = True

        while True:
            iterations += 1
            if iterations > max_iter:
                raise ConvergenceError(
                    f"NNLS did not converge within {max_iter} iterations",
                    kkt_residual=float(np.max(np.where(~passive, w, -np.inf))),
                    iterations=iterations,
                )
            idx = np.flatnonzero(passive)
            z = np.linalg.lstsq(a[:, idx], b, rcond=None)[0]
            if z.min() > 0.0:
                x[:] = 0.0
                x[idx] = z
                break
            # Step toward z until the first passive variable hits zero,
            # then drop every variable that reached the boundary.
            neg = z <= 0.0
            denom = x[idx] - z
            alpha = np.min(x[idx][neg] / np.maximum(denom[neg], 1e-300))
            x[idx] += alpha * (z - x[idx])
            drop = idx[x[idx] <= 1e-13 * max(1.0, x[idx].max())]
            x[drop] = 0.0
            passive[drop] = False
            x[~passive] = 0.0
        w = a.T @ (b - a @ x)

    return x, iterations
