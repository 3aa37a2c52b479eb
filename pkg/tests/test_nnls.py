"""Lawson-Hanson NNLS against a brute-force support-enumeration oracle."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from probelift import nnls
from probelift.errors import ConvergenceError, DomainError

BACKENDS = nnls.available_backends()


def objective(a, b, x):
    r = a @ x - b
    return float(r @ r)


def random_system(rng, m, n, nonneg_prob=0.5):
    a = rng.normal(size=(m, n))
    if rng.random() < nonneg_prob:
        # ground truth with some zeros, so the active set is non-trivial
        x = rng.uniform(0.0, 2.0, size=n) * (rng.random(n) < 0.6)
        b = a @ x + 0.05 * rng.normal(size=m)
    else:
        b = rng.normal(size=m)
    return a, b


def test_compiled_backend_is_built():
    # the extension is part of the build; if it is missing something is wrong
    assert "compiled" in BACKENDS


@pytest.mark.parametrize("backend", BACKENDS)
def test_matches_oracle_small(backend):
    rng = np.random.default_rng(7)
    for _ in range(60):
        m = int(rng.integers(2, 20))
        n = int(rng.integers(1, 9))
        a, b = random_system(rng, m, n)
        res = nnls.nnls_solve(a, b, backend=backend)
        x_ref = nnls.nnls_oracle(a, b)
        assert objective(a, b, res.x) <= objective(a, b, x_ref) + 1e-10
        assert res.x.min() >= 0.0


@pytest.mark.parametrize("backend", BACKENDS)
def test_kkt_conditions_hold(backend):
    rng = np.random.default_rng(13)
    for _ in range(40):
        a, b = random_system(rng, int(rng.integers(5, 40)), int(rng.integers(1, 12)))
        res = nnls.nnls_solve(a, b, backend=backend)
        scale = max(1.0, float(np.abs(a.T @ b).max()))
        assert res.kkt_min_gradient >= -1e-8 * scale
        assert res.kkt_complementarity <= 1e-8 * scale


def test_exact_nonnegative_solution_recovered():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(30, 6))
    x_true = np.array([0.0, 1.5, 0.0, 2.0, 0.3, 0.0])
    res = nnls.nnls_solve(a, a @ x_true)
    np.testing.assert_allclose(res.x, x_true, atol=1e-10)
    assert res.residual_norm < 1e-10


def test_all_negative_correlation_gives_zero():
    """If A'b <= 0 everywhere, x = 0 is optimal."""
    a = np.eye(4)
    b = -np.ones(4)
    res = nnls.nnls_solve(a, b)
    np.testing.assert_array_equal(res.x, np.zeros(4))
    assert res.iterations == 0


def test_zero_columns_are_handled():
    a = np.zeros((5, 3))
    a[:, 1] = 1.0
    b = np.full(5, 2.0)
    res = nnls.nnls_solve(a, b)
    np.testing.assert_allclose(res.x, [0.0, 2.0, 0.0], atol=1e-12)


def test_empty_system():
    res = nnls.nnls_solve(np.zeros((3, 0)), np.ones(3))
    assert res.x.shape == (0,)
    assert res.residual_norm == pytest.approx(np.sqrt(3.0))


def test_duplicate_columns_degenerate():
    """Identical columns: any split is optimal, the objective must still match."""
    rng = np.random.default_rng(3)
    col = rng.normal(size=12)
    a = np.stack([col, col, rng.normal(size=12)], axis=1)
    b = 2.0 * col + 0.1 * rng.normal(size=12)
    for backend in BACKENDS:
        res = nnls.nnls_solve(a, b, backend=backend)
        x_ref = nnls.nnls_oracle(a, b)
        assert objective(a, b, res.x) <= objective(a, b, x_ref) + 1e-10


def test_wide_underdetermined_system():
    rng = np.random.default_rng(21)
    a = rng.normal(size=(4, 10))
    b = rng.normal(size=4)
    res = nnls.nnls_solve(a, b)
    assert res.x.min() >= 0.0
    assert np.count_nonzero(res.x) <= 4  # active set never exceeds the rank


def test_validation_errors():
    with pytest.raises(DomainError):
        nnls.nnls_solve(np.zeros(3), np.zeros(3))
    with pytest.raises(DomainError):
        nnls.nnls_solve(np.zeros((3, 2)), np.zeros(4))
    with pytest.raises(DomainError):
        nnls.nnls_solve(np.full((2, 2), np.nan), np.zeros(2))
    with pytest.raises(DomainError):
        nnls.nnls_solve(np.eye(2), np.ones(2), backend="gpu")
    with pytest.raises(DomainError):
        nnls.nnls_oracle(np.zeros((2, 20)), np.zeros(2))


def test_max_iter_raises_convergence_error():
    rng = np.random.default_rng(5)
    a = rng.normal(size=(40, 12))
    x_true = rng.uniform(0.5, 1.0, size=12)
    b = a @ x_true
    with pytest.raises(ConvergenceError) as err:
        nnls.nnls_solve(a, b, max_iter=1)
    assert err.value.iterations >= 1


def test_backend_env_var_forces_python(monkeypatch):
    monkeypatch.setenv("PROBELIFT_NNLS_BACKEND", "python")
    assert nnls.default_backend() == "python"
    res = nnls.nnls_solve(np.eye(3), np.array([1.0, -1.0, 2.0]))
    assert res.backend == "python"
    monkeypatch.setenv("PROBELIFT_NNLS_BACKEND", "fortran")
    with pytest.raises(DomainError):
        nnls.default_backend()


def test_backends_agree():
    if len(BACKENDS) < 2:
        pytest.skip("only one backend available")
    rng = np.random.default_rng(17)
    for _ in range(25):
        a, b = random_system(rng, int(rng.integers(4, 60)), int(rng.integers(1, 15)))
        xs = [nnls.nnls_solve(a, b, backend=bk).x for bk in BACKENDS]
        assert abs(objective(a, b, xs[0]) - objective(a, b, xs[1])) < 1e-9


@given(st.integers(min_value=0, max_value=2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_solution_feasible_and_stationary(seed):
    rng = np.random.default_rng(seed)
    a, b = random_system(rng, int(rng.integers(1, 25)), int(rng.integers(1, 10)))
    res = nnls.nnls_solve(a, b)
    assert res.x.min() >= 0.0
    g = a.T @ (a @ res.x - b)
    scale = max(1.0, float(np.abs(a.T @ b).max()))
    assert g.min() >= -1e-7 * scale
    assert np.max(np.abs(res.x * g)) <= 1e-7 * scale


def test_oracle_prefers_sparser_tie():
    # two identical columns: the oracle must not report a denser support than
    # needed when a single column already attains the optimum
    col = np.array([1.0, 0.0])
    a = np.stack([col, col], axis=1)
    b = np.array([3.0, 0.0])
    x = nnls.nnls_oracle(a, b)
    assert np.count_nonzero(x) == 1
    assert x.sum() == pytest.approx(3.0)
