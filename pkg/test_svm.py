import math

import numpy as np
import pytest

from core.errors import DimensionMismatch, SingleClassData
from core.svm import SvmConfig, SvmModel, predict_svm, rbf_kernel, rbf_kernel_matrix, train_svm


def test_rbf_kernel_values():
    x = np.array([0.3, -1.2, 4.0])
    y = np.array([1.0, 0.5, -2.0])

    assert rbf_kernel(x, x) == pytest.approx(1.0, abs=1e-12)
    assert rbf_kernel(x, y) == rbf_kernel(y, x)
    assert rbf_kernel([0.0, 0.0], [1.0, 1.0], sigma=1.0) == pytest.approx(math.exp(-1), abs=1e-12)


def test_rbf_kernel_matrix_matches_pairwise():
    A = np.random.default_rng(0).standard_normal((4, 3))
    K = rbf_kernel_matrix(A, A, 0.7)

    assert K[1, 2] == pytest.approx(rbf_kernel(A[1], A[2], 0.7), rel=1e-12)
    with pytest.raises(DimensionMismatch):
        rbf_kernel([1.0, 2.0], [1.0])


def test_gamma_parameterization():
    cfg = SvmConfig.from_gamma(0.125)
    assert cfg.sigma == pytest.approx(2.0)
    assert cfg.gamma == pytest.approx(0.125)


def test_xor_is_learned_exactly(xor_data):
    X, y = xor_data
    cfg = SvmConfig(C=1.0, sigma=1.0, max_iterations=20000)

    model = train_svm(X, y, cfg)

    assert model.info.converged
    assert np.mean(model.predict(X) == y) == 1.0
    alpha = np.abs(model.dual_coef)
    assert np.all(alpha >= 0) and np.all(alpha <= cfg.C + 1e-12)
    assert abs(model.dual_coef.sum()) <= 1e-6
    assert model.info.max_kkt_violation <= 1e-3
    assert model.info.n_support == model.support_vectors.shape[0]


def test_dual_objective_never_decreases():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((50, 2))
    y = np.where(X[:, 0] + 0.5 * rng.standard_normal(50) > 0, 1, -1)

    model = train_svm(X, y, SvmConfig(record_objective=True, max_iterations=5000))
    trace = np.asarray(model.info.objective_trace)

    assert trace.size > 1
    assert np.all(np.diff(trace) >= -1e-12 * max(1.0, np.abs(trace).max()))


def test_single_class_is_rejected():
    with pytest.raises(SingleClassData):
        train_svm(np.zeros((5, 2)), np.ones(5))


def test_zero_decision_goes_to_patient():
    model = SvmModel(np.empty((0, 2)), np.empty(0), 0.0, 1.0)

    assert predict_svm(model, [0.3, 0.1]) == (1, 0.0)


def test_decision_value_is_continuous(xor_data):
    X, y = xor_data
    model = train_svm(X, y, SvmConfig(max_iterations=20000))
    x = np.array([0.2, -0.4])

    d1 = predict_svm(model, x)[1]
    d2 = predict_svm(model, x + 1e-10)[1]

    assert abs(d1 - d2) <= 1e-6


def test_prediction_dimension_mismatch(xor_data):
    X, y = xor_data
    model = train_svm(X, y, SvmConfig(max_iterations=20000))
    with pytest.raises(DimensionMismatch):
        model.predict(np.zeros((1, 3)))
