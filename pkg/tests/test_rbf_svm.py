import numpy as np
import pytest

from sigstream.errors import DataError, FormatError
from sigstream.rbf_svm import (
    KernelModel,
    KernelRowCache,
    dual_objective,
    fit_smo,
    kkt_violations,
    rbf,
    smo_solve,
)

from .oracles import svm_dual_solve_pg


# -- kernel ---------------------------------------------------------------------


def test_rbf_self_is_one():
    x = np.array([1.0, -2.0, 0.5])
    assert rbf(x, x, 0.5) == 1.0


def test_rbf_known_value():
    assert rbf(np.array([0.0, 0.0]), np.array([1.0, 0.0]), 1.0) == pytest.approx(
        np.exp(-1.0)
    )


def test_rbf_symmetry():
    rng = np.random.default_rng(0)
    for _ in range(100):
        a, b = rng.normal(size=4), rng.normal(size=4)
        assert rbf(a, b, 0.3) == pytest.approx(rbf(b, a, 0.3), rel=1e-15)


def test_rbf_dim_mismatch():
    with pytest.raises(DataError):
        rbf(np.zeros(2), np.zeros(3), 1.0)


def test_rbf_requires_positive_gamma():
    with pytest.raises(DataError):
        rbf(np.zeros(2), np.zeros(2), 0.0)


# -- row cache ---------------------------------------------------------------------


def test_cache_rows_match_direct_kernel():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(20, 3))
    cache = KernelRowCache(X, gamma=0.7)
    row = cache.row(4)
    expected = np.array([rbf(X[4], X[j], 0.7) for j in range(20)])
    assert np.allclose(row, expected, rtol=1e-12)


def test_cache_lru_eviction_and_hits():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(10, 2))
    cache = KernelRowCache(X, gamma=1.0, budget_bytes=3 * 10 * 8)
    assert cache.capacity == 3
    for i in (0, 1, 2):
        cache.row(i)
    cache.row(0)  # refresh 0; LRU order is now 1, 2, 0
    cache.row(3)  # evicts 1
    assert len(cache) == 3
    hits_before = cache.hits
    cache.row(2)
    cache.row(0)
    cache.row(3)
    assert cache.hits == hits_before + 3
    misses_before = cache.misses
    cache.row(1)  # was evicted, must recompute
    assert cache.misses == misses_before + 1


def test_cache_always_admits_one_row():
    X = np.zeros((50, 2))
    cache = KernelRowCache(X, gamma=1.0, budget_bytes=1)
    cache.row(0)
    assert len(cache) == 1


# -- two-point symmetric problem -------------------------------------------------


def test_two_point_problem_symmetric_and_midpoint():
    X = np.array([[0.0], [2.0]])
    y = np.array([1.0, -1.0])
    sol = smo_solve(X, y, C=10.0, gamma=0.25, tol=1e-6)
    assert sol.converged
    assert sol.alphas[0] == pytest.approx(sol.alphas[1], rel=1e-9)
    model = sol.to_model()
    assert abs(model.decision(np.array([1.0]))) <= 1e-6
    # dual optimum agrees with the projected-gradient oracle
    _, oracle_obj = svm_dual_solve_pg(X, y, C=10.0, gamma=0.25, iters=20000)
    assert sol.dual_objective() == pytest.approx(oracle_obj, abs=1e-6)


def test_two_point_margins_are_unit():
    X = np.array([[0.0], [2.0]])
    y = np.array([1.0, -1.0])
    sol = smo_solve(X, y, C=10.0, gamma=0.25, tol=1e-6)
    model = sol.to_model()
    assert model.decision(X[0]) == pytest.approx(1.0, abs=1e-5)
    assert model.decision(X[1]) == pytest.approx(-1.0, abs=1e-5)


# -- XOR-style problem vs dense QP oracle -------------------------------------------


def test_xor_matches_qp_oracle():
    X = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
    y = np.array([1.0, 1.0, -1.0, -1.0])
    sol = smo_solve(X, y, C=10.0, gamma=1.0, tol=1e-5)
    _, oracle_obj = svm_dual_solve_pg(X, y, C=10.0, gamma=1.0, iters=20000)
    assert sol.dual_objective() == pytest.approx(oracle_obj, abs=1e-3)
    # XOR with an RBF kernel is separable: every point classified correctly
    model = sol.to_model()
    assert np.all(np.sign(model.decision_batch(X)) == y)


def test_duplicate_conflicting_points_saturate():
    # identical positive and negative point: irreducibly non-separable
    X = np.array([[1.0, 1.0], [1.0, 1.0], [0.0, 0.0], [3.0, 3.0]])
    y = np.array([1.0, -1.0, 1.0, -1.0])
    C = 2.0
    sol = smo_solve(X, y, C=C, gamma=0.5, tol=1e-4)
    assert sol.alphas[0] == pytest.approx(C, abs=1e-8)
    assert sol.alphas[1] == pytest.approx(C, abs=1e-8)
    model = sol.to_model()
    # the conflicting pair cancels in the expansion; score there is near b
    alphas_pg, oracle_obj = svm_dual_solve_pg(X, y, C=C, gamma=0.5, iters=20000)
    assert sol.dual_objective() == pytest.approx(oracle_obj, abs=1e-3)
    assert abs(model.decision(X[0])) < 1.0  # inside the margin band


def test_random_instances_match_qp_oracle():
    rng = np.random.default_rng(3)
    for trial in range(20):
        n = int(rng.integers(4, 9))
        dim = int(rng.integers(1, 5))
        X = rng.normal(size=(n, dim))
        y = np.concatenate([np.ones(n // 2 + 1), -np.ones(n - n // 2 - 1)])
        rng.shuffle(y)
        if np.unique(y).size < 2:
            y[0] = -y[0]
        C = float(rng.uniform(0.5, 5.0))
        gamma = float(rng.uniform(0.1, 2.0))
        # tiny problems get a pass budget beyond the 10 N default
        sol = smo_solve(X, y, C=C, gamma=gamma, tol=1e-5, seed=trial, max_passes=20000)
        _, oracle_obj = svm_dual_solve_pg(X, y, C=C, gamma=gamma, iters=20000)
        assert sol.dual_objective() == pytest.approx(oracle_obj, abs=1e-3), (
            f"trial {trial}: smo {sol.dual_objective()} vs oracle {oracle_obj}"
        )
        assert sol.kkt_violations(1e-3) == []


# -- KKT audit -----------------------------------------------------------------------


def test_kkt_audit_passes_on_trained_models():
    rng = np.random.default_rng(4)
    for trial in range(5):
        n = 40
        X = np.vstack(
            [rng.normal(0, 0.5, size=(n, 3)), rng.normal(2.5, 0.5, size=(n, 3))]
        )
        y = np.concatenate([np.ones(n), -np.ones(n)])
        sol = smo_solve(X, y, C=1.0, gamma=0.5, tol=1e-3, seed=trial)
        assert sol.kkt_violations(1e-3) == []
        assert abs(float(sol.alphas @ y)) <= 1e-8


def test_kkt_audit_flags_bad_multipliers():
    X = np.array([[0.0], [2.0]])
    y = np.array([1.0, -1.0])
    problems = kkt_violations(X, y, np.array([5.0, 0.0]), 0.0, 1.0, 10.0, 1e-3)
    assert problems  # alpha balance broken and margins wrong


def test_dual_objective_free_function():
    X = np.array([[0.0], [1.0]])
    y = np.array([1.0, -1.0])
    alphas = np.array([0.5, 0.5])
    k01 = rbf(X[0], X[1], 1.0)
    # v = alpha * y = (0.5, -0.5); W = sum(alpha) - 0.5 v'Kv
    expected = 1.0 - 0.5 * (0.25 + 0.25 - 2 * 0.25 * k01)
    assert dual_objective(alphas, y, X, 1.0) == pytest.approx(expected)


def test_objective_trace_is_non_decreasing():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(12, 2))
    y = np.concatenate([np.ones(6), -np.ones(6)])
    sol = smo_solve(X, y, C=2.0, gamma=0.8, tol=1e-5, record_objective=True)
    trace = sol.objective_trace
    assert len(trace) >= 1
    for prev, cur in zip(trace, trace[1:]):
        assert cur >= prev - 1e-9


# -- invariances ------------------------------------------------------------------------


def test_permutation_invariance():
    rng = np.random.default_rng(6)
    n = 30
    X = np.vstack([rng.normal(0, 0.6, size=(n, 2)), rng.normal(2, 0.6, size=(n, 2))])
    y = np.concatenate([np.ones(n), -np.ones(n)])
    perm = rng.permutation(2 * n)
    sol_a = smo_solve(X, y, C=1.0, gamma=0.5, tol=1e-5, seed=0, max_passes=20000)
    sol_b = smo_solve(X[perm], y[perm], C=1.0, gamma=0.5, tol=1e-5, seed=0, max_passes=20000)
    assert sol_a.dual_objective() == pytest.approx(sol_b.dual_objective(), abs=1e-6)
    grid = rng.normal(0.5, 1.5, size=(50, 2))
    da = sol_a.to_model().decision_batch(grid)
    db = sol_b.to_model().decision_batch(grid)
    assert np.max(np.abs(da - db)) <= 1e-4


def test_margin_support_vectors_satisfy_unit_margin():
    rng = np.random.default_rng(7)
    n = 25
    X = np.vstack([rng.normal(0, 0.7, size=(n, 2)), rng.normal(2.2, 0.7, size=(n, 2))])
    y = np.concatenate([np.ones(n), -np.ones(n)])
    tol = 1e-3
    sol = smo_solve(X, y, C=1.0, gamma=0.7, tol=tol)
    model = sol.to_model()
    interior = (sol.alphas > 1e-8) & (sol.alphas < 1.0 - 1e-8)
    assert interior.any()
    margins = y[interior] * model.decision_batch(X[interior])
    assert np.all(np.abs(margins - 1.0) <= tol + 1e-9)


# -- model surface ----------------------------------------------------------------------


def test_empty_support_set_returns_bias():
    model = KernelModel(np.zeros((0, 0)), np.zeros(0), 0.3, 1.0, 1.0)
    assert model.decision(np.array([1.0, 2.0])) == 0.3


def test_decision_expands_by_hand():
    X = np.array([[0.0], [2.0]])
    y = np.array([1.0, -1.0])
    sol = smo_solve(X, y, C=10.0, gamma=0.25, tol=1e-6)
    model = sol.to_model()
    x = np.array([0.5])
    expected = sum(
        ay * rbf(sv, x, 0.25) for ay, sv in zip(model.alpha_y, model.support_vectors)
    ) + model.b
    assert model.decision(x) == pytest.approx(expected, rel=1e-12)


def test_single_class_rejected():
    with pytest.raises(DataError, match="single class"):
        smo_solve(np.zeros((4, 2)), np.ones(4))


def test_nonconvergence_warns_and_flags():
    rng = np.random.default_rng(8)
    X = rng.normal(size=(30, 2))
    y = np.concatenate([np.ones(15), -np.ones(15)])
    with pytest.warns(RuntimeWarning, match="did not converge"):
        sol = smo_solve(X, y, C=10.0, gamma=1.0, tol=1e-9, max_passes=1)
    assert not sol.converged


def test_checkpoint_round_trip(tmp_path):
    rng = np.random.default_rng(9)
    X = np.vstack([rng.normal(0, 0.5, size=(15, 3)), rng.normal(2, 0.5, size=(15, 3))])
    y = np.concatenate([np.ones(15), -np.ones(15)])
    model = fit_smo(X, y, C=1.5, gamma=0.4, tol=1e-4)
    path = tmp_path / "model.shkm"
    model.save(path)
    loaded = KernelModel.load(path)
    assert loaded.gamma == model.gamma
    assert loaded.C == model.C
    assert loaded.b == model.b
    assert np.array_equal(loaded.alpha_y, model.alpha_y)
    # support vectors quantize through f32 on disk
    assert np.array_equal(loaded.support_vectors,
                          model.support_vectors.astype(np.float32).astype(np.float64))


def test_checkpoint_bad_magic(tmp_path):
    path = tmp_path / "x.shkm"
    path.write_bytes(b"WHAT" + bytes(40))
    with pytest.raises(FormatError):
        KernelModel.load(path)
