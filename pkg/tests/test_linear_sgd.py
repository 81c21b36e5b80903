import numpy as np
import pytest

from sigstream.errors import DataError, FormatError, NumericalError
from sigstream.linear_sgd import LinearSgdModel


def separable_set(n_per_class=40, dim=3, seed=0):
    """Positives hug the origin, negatives sit far out: linearly separable."""
    rng = np.random.default_rng(seed)
    pos = np.abs(rng.normal(0.0, 0.1, size=(n_per_class, dim)))
    neg = np.abs(rng.normal(3.0, 0.3, size=(n_per_class, dim)))
    X = np.vstack([pos, neg])
    y = np.concatenate([np.ones(n_per_class), -np.ones(n_per_class)])
    return X, y


# -- decision --------------------------------------------------------------------


def test_zero_model_scores_zero():
    model = LinearSgdModel(4)
    assert model.decision(np.ones(4)) == 0.0


def test_decision_arithmetic():
    model = LinearSgdModel(2)
    model.w = np.array([1.0, -1.0])
    model.b = 0.5
    assert model.decision(np.array([2.0, 1.0])) == pytest.approx(1.5)


def test_decision_linearity():
    rng = np.random.default_rng(1)
    model = LinearSgdModel(5)
    model.w = rng.normal(size=5)
    model.b = 0.0
    for _ in range(20):
        x = rng.normal(size=5)
        a = rng.normal()
        assert model.decision(a * x) == pytest.approx(a * model.decision(x))


def test_decision_dim_mismatch():
    with pytest.raises(DataError, match="shape"):
        LinearSgdModel(3).decision(np.zeros(4))


# -- objective -------------------------------------------------------------------


def test_zero_model_objective_is_one():
    X, y = separable_set()
    assert LinearSgdModel(X.shape[1]).objective(X, y) == 1.0


def test_objective_separated_with_margin_is_pure_regularizer():
    model = LinearSgdModel(2, reg=0.5)
    model.w = np.array([-2.0, 0.0])
    model.b = 3.0
    # positives at x=(0.5, 0): margin y(wx+b) = 2; negatives at (2.5, 0): margin 2
    X = np.array([[0.5, 0.0], [2.5, 0.0]])
    y = np.array([1.0, -1.0])
    assert model.objective(X, y) == pytest.approx(0.5 * 0.5 * 4.0)


def test_objective_matches_hand_computation():
    model = LinearSgdModel(2, reg=0.3)
    model.w = np.array([0.4, -0.2])
    model.b = 0.1
    X = np.array([[1.0, 2.0], [-0.5, 0.25]])
    y = np.array([1.0, -1.0])
    # margins: 1*(0.4 - 0.4 + 0.1) = 0.1 ; -1*(-0.2 - 0.05 + 0.1) = 0.15
    # hinge: 0.9, 0.85 ; mean 0.875 ; reg: 0.15*(0.16+0.04) = 0.03
    assert model.objective(X, y) == pytest.approx(0.905, abs=1e-12)


def test_objective_empty_batch_rejected():
    with pytest.raises(DataError):
        LinearSgdModel(2).objective(np.zeros((0, 2)), np.zeros(0))


# -- gradient vs central finite differences ----------------------------------------


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(7)
    checked = 0
    attempts = 0
    while checked < 50 and attempts < 500:
        attempts += 1
        dim = int(rng.integers(2, 6))
        n = int(rng.integers(3, 12))
        model = LinearSgdModel(dim, reg=float(rng.uniform(0.01, 1.0)))
        model.w = rng.normal(size=dim)
        model.b = float(rng.normal())
        X = rng.normal(size=(n, dim))
        y = rng.choice([-1.0, 1.0], size=n)
        margins = y * (X @ model.w + model.b)
        if np.min(np.abs(1.0 - margins)) < 1e-3:
            continue  # too close to a hinge kink for a clean comparison
        checked += 1
        gw, gb = model.objective_gradient(X, y)
        h = 1e-6
        # Relative criterion with a unit floor: central differences carry
        # ~1e-10 of cancellation noise, so exact-zero gradients compare
        # against 1 rather than against themselves.
        for k in range(dim):
            model.w[k] += h
            up = model.objective(X, y)
            model.w[k] -= 2 * h
            down = model.objective(X, y)
            model.w[k] += h
            numeric = (up - down) / (2 * h)
            denom = max(abs(numeric), abs(gw[k]), 1.0)
            assert abs(gw[k] - numeric) / denom <= 1e-5
        model.b += h
        up = model.objective(X, y)
        model.b -= 2 * h
        down = model.objective(X, y)
        model.b += h
        numeric = (up - down) / (2 * h)
        denom = max(abs(numeric), abs(gb), 1.0)
        assert abs(gb - numeric) / denom <= 1e-5
    assert checked == 50


# -- training --------------------------------------------------------------------


def test_fit_separable_reaches_full_accuracy():
    X, y = separable_set()
    model = LinearSgdModel(X.shape[1], reg=1e-4, lr0=1e-2)
    model.fit_batch(X, y, epochs=50, seed=3)
    scores = model.decision_batch(X)
    assert np.all(np.sign(scores) == y)


def test_zero_epochs_leaves_model_unchanged():
    X, y = separable_set()
    model = LinearSgdModel(X.shape[1])
    model.fit_batch(X, y, epochs=0, seed=0)
    assert np.all(model.w == 0.0)
    assert model.b == 0.0
    assert model.step_count == 0


def test_fit_improves_on_zero_model():
    X, y = separable_set()
    zero = LinearSgdModel(X.shape[1])
    fitted = LinearSgdModel(X.shape[1]).fit_batch(X, y, epochs=30, seed=5)
    assert fitted.objective(X, y) <= zero.objective(X, y)


def test_objective_non_increasing_over_epochs():
    # Positives essentially at the origin (near-duplicate signatures),
    # negatives far out: after the first epoch SGD sits in the
    # no-violation regime where the objective can only shrink.
    rng = np.random.default_rng(9)
    n = 40
    pos = np.abs(rng.normal(0.0, 1e-8, size=(n, 4)))
    neg = np.abs(rng.normal(100.0, 1.0, size=(n, 4)))
    X = np.vstack([pos, neg])
    y = np.concatenate([np.ones(n), -np.ones(n)])
    model = LinearSgdModel(X.shape[1])
    values = []
    for epoch in range(12):
        model.fit_batch(X, y, epochs=1, seed=epoch)
        values.append(model.objective(X, y))
    for prev, cur in zip(values[1:], values[2:]):
        assert cur <= prev + 1e-6


def test_partial_fit_equals_concatenated_fit_without_shuffle():
    X, y = separable_set(n_per_class=10, seed=4)
    X1, y1 = X[:8], y[:8]
    X2, y2 = X[8:], y[8:]
    a = LinearSgdModel(X.shape[1], lr_t0=100.0)
    a.partial_fit(X1, y1, shuffle=False)
    a.partial_fit(X2, y2, shuffle=False)
    b = LinearSgdModel(X.shape[1], lr_t0=100.0)
    b.fit_batch(X, y, epochs=1, shuffle=False)
    assert np.array_equal(a.w, b.w)
    assert a.b == b.b
    assert a.step_count == b.step_count == X.shape[0]


def test_partial_fit_empty_batch_is_identity():
    model = LinearSgdModel(3, lr_t0=10.0)
    model.partial_fit(np.zeros((0, 3)), np.zeros(0))
    assert model.step_count == 0


def test_step_count_tracks_samples():
    X, y = separable_set(n_per_class=6)
    model = LinearSgdModel(X.shape[1])
    model.fit_batch(X, y, epochs=3, seed=1)
    assert model.step_count == 3 * X.shape[0]
    model.partial_fit(X[:5], y[:5], seed=2)
    assert model.step_count == 3 * X.shape[0] + 5


def test_determinism_bit_identical():
    X, y = separable_set(seed=12)
    a = LinearSgdModel(X.shape[1]).fit_batch(X, y, epochs=7, seed=42)
    b = LinearSgdModel(X.shape[1]).fit_batch(X, y, epochs=7, seed=42)
    assert np.array_equal(a.w, b.w)
    assert a.b == b.b


def test_pure_positive_update_does_not_decrease_mean_score():
    rng = np.random.default_rng(8)
    X = np.abs(rng.normal(size=(20, 4)))
    y = np.ones(20)
    model = LinearSgdModel(4, reg=1e-6, lr0=1e-3, lr_t0=1e6)
    before = model.decision_batch(X).mean()
    model.partial_fit(X, y, shuffle=False)
    after = model.decision_batch(X).mean()
    assert after >= before


def test_nonfinite_update_aborts_with_diagnostic():
    X = np.full((4, 2), 1e160)
    y = np.array([1.0, -1.0, 1.0, -1.0])
    model = LinearSgdModel(2, lr0=1e300, lr_t0=1.0)
    with np.errstate(all="ignore"):
        with pytest.raises(NumericalError, match="non-finite"):
            model.fit_batch(X, y, epochs=50, seed=0)


def test_bad_labels_rejected():
    with pytest.raises(DataError, match="labels"):
        LinearSgdModel(2).fit_batch(np.ones((2, 2)), np.array([1.0, 0.5]), epochs=1)


# -- persistence -------------------------------------------------------------------


def test_checkpoint_round_trip(tmp_path):
    X, y = separable_set()
    model = LinearSgdModel(X.shape[1], reg=2e-4, lr0=0.05)
    model.fit_batch(X, y, epochs=5, seed=9)
    path = tmp_path / "model.shwm"
    model.save(path)
    loaded = LinearSgdModel.load(path)
    assert np.array_equal(loaded.w, model.w)
    assert loaded.b == model.b
    assert loaded.step_count == model.step_count
    assert loaded.reg == model.reg
    assert loaded.lr0 == model.lr0
    assert loaded.lr_t0 == model.lr_t0


def test_checkpoint_bad_magic(tmp_path):
    path = tmp_path / "junk.shwm"
    path.write_bytes(b"NOPE" + bytes(64))
    with pytest.raises(FormatError):
        LinearSgdModel.load(path)


def test_loaded_model_continues_schedule(tmp_path):
    X, y = separable_set(n_per_class=8)
    model = LinearSgdModel(X.shape[1]).fit_batch(X, y, epochs=2, seed=0)
    path = tmp_path / "m.shwm"
    model.save(path)
    resumed = LinearSgdModel.load(path)
    model.partial_fit(X, y, seed=77)
    resumed.partial_fit(X, y, seed=77)
    assert np.array_equal(model.w, resumed.w)
    assert model.b == resumed.b
