import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize

from emoxling.errors import DimensionMismatch, EmptyTrainingSet
from emoxling.models import (
    MultiLabelLinearModel,
    SvmConfig,
    load_model,
    predict,
    save_model,
    train_svm_ovr,
)
from emoxling.models.svm import dual_objective, train_binary


def _labels_from_first(y_first, n_labels=11):
    Y = np.zeros((len(y_first), n_labels), dtype=bool)
    Y[:, 0] = y_first
    return Y


def _qp_oracle(X, y, C):
    """Same dual solved by a generic bound-constrained optimizer."""
    Xb = np.hstack([X, np.ones((X.shape[0], 1))])
    Z = y[:, None] * Xb
    Q = Z @ Z.T
    fun = lambda a: 0.5 * a @ Q @ a - a.sum()
    jac = lambda a: Q @ a - 1.0
    res = minimize(fun, np.zeros(len(y)), jac=jac, bounds=[(0, C)] * len(y), method="L-BFGS-B",
                   options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 10000})
    return -res.fun, Z.T @ res.x


def test_two_point_toy_matches_oracle():
    X = np.array([[1.0, 0.0], [-1.0, 0.0]])
    model = train_svm_ovr(X, _labels_from_first([True, False]), SvmConfig(tolerance=1e-10))
    assert model.weights[0, 0] > 0
    assert np.array_equal(predict(model, X).decisions[:, 0], [True, False])
    # brute force over a grid of the 2-d dual box
    grid = np.linspace(0, 1, 1001)
    a1, a2 = np.meshgrid(grid, grid)
    w0, wb = a1 + a2, a1 - a2
    obj = a1 + a2 - 0.5 * (w0 ** 2 + wb ** 2)
    best = np.unravel_index(np.argmax(obj), obj.shape)
    assert model.weights[0, 0] == pytest.approx(w0[best], abs=2e-3)
    assert model.bias[0] == pytest.approx(wb[best], abs=2e-3)
    assert model.weights[0, 0] == pytest.approx(1.0, abs=1e-8)


@settings(max_examples=25)
@given(st.integers(0, 10_000), st.sampled_from([0.1, 1.0, 10.0]))
def test_dual_optimum_matches_qp(seed, C):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(8, 3))
    y = np.where(rng.random(8) < 0.5, 1.0, -1.0)
    cfg = SvmConfig(C=C, tolerance=1e-9, max_sweeps=20000)
    w, trace = train_binary(sp.csr_matrix(X), y, cfg, np.random.default_rng(0))
    ref_obj, ref_w = _qp_oracle(X, y, C)
    assert dual_objective(trace.alpha, w) == pytest.approx(ref_obj, rel=1e-6, abs=1e-8)
    assert np.allclose(w, ref_w, atol=1e-3 * max(1.0, C))


def test_all_negative_label():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(30, 4))
    Y = np.zeros((30, 11), dtype=bool)
    Y[:, 1] = X[:, 0] > 0
    model = train_svm_ovr(X, Y)
    assert not predict(model, X).decisions[:, 0].any()
    assert np.all(model.margins(X)[:, 0] < 0)


def test_tiny_C_bounds_weights():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(11, 5))
    Y = rng.random((11, 11)) < 0.5
    C = 1e-9
    model = train_svm_ovr(X, Y, SvmConfig(C=C))
    bound = 11 * C * np.linalg.norm(np.hstack([X, np.ones((11, 1))]), axis=1).max()
    full = np.hstack([model.weights, model.bias[:, None]])
    assert np.all(np.linalg.norm(full, axis=1) <= bound)


@pytest.mark.parametrize("passes", [0, 10])
def test_free_passes_reach_qp_optimum(passes):
    rng = np.random.default_rng(5)
    X = rng.normal(size=(40, 5))
    y = np.where(X @ rng.normal(size=5) > 0, 1.0, -1.0)
    cfg = SvmConfig(C=10.0, tolerance=1e-8, max_sweeps=50000, free_passes=passes)
    w, trace = train_binary(sp.csr_matrix(X), y, cfg, np.random.default_rng(0))
    assert trace.converged
    assert dual_objective(trace.alpha, w) == pytest.approx(_qp_oracle(X, y, 10.0)[0], rel=1e-6)


def _trained(seed=0, n=60, d=6, C=1.0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    W = rng.normal(size=(d, 11))
    Y = X @ W + 0.3 * rng.normal(size=(n, 11)) > 0.2
    return X, Y, train_svm_ovr(X, Y, SvmConfig(C=C, seed=seed))


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_dual_objective_non_decreasing(seed):
    _, _, model = _trained(seed)
    for trace in model.traces:
        d = np.diff(trace.dual_objective)
        assert np.all(d >= -1e-12 * max(1.0, abs(trace.dual_objective[-1])))


@pytest.mark.parametrize("seed", [0, 3])
def test_kkt_at_convergence(seed):
    X, Y, model = _trained(seed)
    tol = model.config.tolerance
    margins = model.margins(X)
    for k, trace in enumerate(model.traces):
        assert trace.converged
        y = np.where(Y[:, k], 1.0, -1.0)
        ym = y * margins[:, k]
        a = trace.alpha
        assert np.all(ym[a == 0.0] >= 1 - tol - 1e-9)
        assert np.all(ym[a == model.config.C] <= 1 + tol + 1e-9)
        free = (a > 0) & (a < model.config.C)
        assert np.all(np.abs(ym[free] - 1) <= tol + 1e-9)


def test_label_independence():
    rng = np.random.default_rng(5)
    X, Y, model = _trained(5)
    Y2 = Y.copy()
    Y2[:, 1:] = Y2[rng.permutation(len(Y)), 1:]
    model2 = train_svm_ovr(X, Y2, SvmConfig(seed=5))
    assert np.array_equal(model.weights[0], model2.weights[0])
    assert model.bias[0] == model2.bias[0]


def test_deterministic_given_seed():
    X, Y, model = _trained(7)
    again = train_svm_ovr(X, Y, SvmConfig(seed=7))
    assert np.array_equal(model.weights, again.weights) and np.array_equal(model.bias, again.bias)


def test_positive_weight_raises_box():
    X, Y, _ = _trained(8)
    model = train_svm_ovr(X, Y, SvmConfig(C=0.05, positive_weight=4.0, seed=8))
    for k, trace in enumerate(model.traces):
        pos = Y[:, k]
        assert trace.alpha[pos].max(initial=0) <= 0.2 + 1e-15
        assert trace.alpha[~pos].max(initial=0) <= 0.05 + 1e-15
    assert any(trace.alpha[Y[:, k]].max(initial=0) > 0.05 for k, trace in enumerate(model.traces))


def test_train_errors():
    with pytest.raises(EmptyTrainingSet):
        train_svm_ovr(np.zeros((0, 3)), np.zeros((0, 11), dtype=bool))
    with pytest.raises(DimensionMismatch):
        train_svm_ovr(np.zeros((4, 3)), np.zeros((3, 11), dtype=bool))
    with pytest.raises(ValueError):
        SvmConfig(C=0.0)
    with pytest.raises(ValueError):
        SvmConfig(tolerance=-1.0)


def test_predict_examples():
    zero = MultiLabelLinearModel(np.zeros((11, 3)), np.zeros(11), SvmConfig())
    m = predict(zero, np.ones((2, 3)))
    assert np.all(m.probabilities == 0.5) and not m.decisions.any()

    big = MultiLabelLinearModel(np.full((11, 3), 1e3), np.zeros(11), SvmConfig())
    m = predict(big, np.ones((1, 3)))
    assert np.all(m.probabilities == 1.0) and m.decisions.all()

    X, _, model = _trained(0)
    twice = predict(model, np.vstack([X[:1], X[:1]]))
    assert np.array_equal(twice.probabilities[0], twice.probabilities[1])

    with pytest.raises(DimensionMismatch):
        predict(model, np.ones((1, 99)))


def test_save_load_bit_identical(tmp_path):
    X, _, model = _trained(4)
    save_model(model, tmp_path / "m.npz", {"note": "x"})
    loaded, extra = load_model(tmp_path / "m.npz")
    assert extra == {"note": "x"}
    assert np.array_equal(predict(model, X).probabilities, predict(loaded, X).probabilities)
