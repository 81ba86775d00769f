"""
Soft-margin SVM with an RBF kernel, trained by sequential minimal
optimization on the dual:

    max  sum(a) - 1/2 a'Qa    s.t.  0 <= a_i <= C,  y'a = 0,
    Q_ij = y_i y_j K(x_i, x_j)

Working pairs are chosen with second-order information (maximal violating
pair for i, largest objective gain for j); the solver stops once the KKT
gap drops below ``kkt_tolerance``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from core.errors import DimensionMismatch, EmptyData, InvalidConfig, SingleClassData

logger = logging.getLogger(__name__)

ALPHA_EPS = 1e-8
TAU = 1e-12


@dataclass(frozen=True)
class SvmConfig:
    C: float = 1.0
    sigma: float = 1.0
    kkt_tolerance: float = 1e-3
    max_passes: int = 50
    max_iterations: int | None = None  # None -> 10 * n_samples
    record_objective: bool = False

    def __post_init__(self):
        if not self.C > 0:
            raise InvalidConfig(f"C must be positive, got {self.C}")
        if not self.sigma > 0:
            raise InvalidConfig(f"sigma must be positive, got {self.sigma}")
        if not self.kkt_tolerance > 0:
            raise InvalidConfig(f"kkt_tolerance must be positive, got {self.kkt_tolerance}")

    @property
    def gamma(self):
        return 1.0 / (2.0 * self.sigma ** 2)

    @classmethod
    def from_gamma(cls, gamma, **kwargs):
        return cls(sigma=float(np.sqrt(1.0 / (2.0 * gamma))), **kwargs)


@dataclass
class SvmTrainingInfo:
    iterations: int = 0
    converged: bool = False
    kkt_gap: float = float('inf')
    max_kkt_violation: float = float('inf')
    dual_objective: float = 0.0
    n_support: int = 0
    objective_trace: list = field(default_factory=list)


@dataclass(eq=False)
class SvmModel:
    support_vectors: np.ndarray
    dual_coef: np.ndarray  # alpha_i * y_i
    bias: float
    sigma: float
    info: SvmTrainingInfo = field(default_factory=SvmTrainingInfo)

    @property
    def n_features(self):
        return self.support_vectors.shape[1]

    def decision_function(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_features:
            raise DimensionMismatch(f"model expects {self.n_features} features, got {X.shape[1]}")
        if self.dual_coef.size == 0:
            return np.full(X.shape[0], self.bias)
        return rbf_kernel_matrix(X, self.support_vectors, self.sigma) @ self.dual_coef + self.bias

    def predict(self, X) -> np.ndarray:
        """+1 (Patient) when the decision value is >= 0"""
        return np.where(self.decision_function(X) >= 0, 1, -1)


def rbf_kernel(x, y, sigma=1.0) -> float:
    """exp(-||x - y||^2 / (2 sigma^2))"""
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise DimensionMismatch(f"kernel arguments differ in dimension: {x.size} vs {y.size}")
    if not sigma > 0:
        raise InvalidConfig(f"sigma must be positive, got {sigma}")
    diff = x - y
    return float(np.exp(-np.dot(diff, diff) / (2.0 * sigma ** 2)))


def rbf_kernel_matrix(A, B, sigma=1.0) -> np.ndarray:
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    B = np.atleast_2d(np.asarray(B, dtype=np.float64))
    if A.shape[1] != B.shape[1]:
        raise DimensionMismatch(f"kernel arguments differ in dimension: {A.shape[1]} vs {B.shape[1]}")
    return np.exp(-cdist(A, B, 'sqeuclidean') / (2.0 * sigma ** 2))


def kkt_violations(alpha, y, K, bias, C) -> np.ndarray:
    """
    Per-sample violation of the soft-margin KKT conditions given the full
    alpha vector: alpha=0 needs y f >= 1, 0<alpha<C needs y f = 1,
    alpha=C needs y f <= 1.
    """
    margins = y * (K @ (alpha * y) + bias)
    at_lower = alpha <= ALPHA_EPS
    at_upper = alpha >= C - ALPHA_EPS
    free = ~(at_lower | at_upper)
    violation = np.zeros_like(margins)
    violation[at_lower] = np.maximum(0.0, 1.0 - margins[at_lower])
    violation[at_upper] = np.maximum(0.0, margins[at_upper] - 1.0)
    violation[free] = np.abs(margins[free] - 1.0)
    return violation


def dual_objective(alpha, gradient):
    """sum(a) - 1/2 a'Qa, computed from the gradient G = Qa - 1"""
    return float(0.5 * alpha.sum() - 0.5 * alpha @ gradient)


def _select_working_pair(alpha, y, gradient, Q_diag, Q, C):
    values = -y * gradient
    up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
    low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
    if not up.any() or not low.any():
        return -1, -1, 0.0

    up_index = np.flatnonzero(up)
    i = up_index[np.argmax(values[up_index])]
    g_max = values[i]
    g_min = values[low].min()
    gap = g_max - g_min

    candidates = np.flatnonzero(low & (values < g_max))
    if candidates.size == 0:
        return i, -1, gap
    b = g_max - values[candidates]
    # K_ii + K_tt - 2 K_it expressed through Q
    a = Q_diag[i] + Q_diag[candidates] - 2.0 * y[i] * y[candidates] * Q[i, candidates]
    a = np.where(a > 0, a, TAU)
    j = candidates[np.argmin(-(b * b) / a)]
    return i, j, gap


def _update_pair(alpha, i, j, y, gradient, Q, C):
    old_i, old_j = alpha[i], alpha[j]
    if y[i] != y[j]:
        quad = Q[i, i] + Q[j, j] + 2.0 * Q[i, j]
        quad = quad if quad > 0 else TAU
        delta = (-gradient[i] - gradient[j]) / quad
        diff = old_i - old_j
        a_i, a_j = old_i + delta, old_j + delta
        if diff > 0:
            if a_j < 0:
                a_j, a_i = 0.0, diff
        elif a_i < 0:
            a_i, a_j = 0.0, -diff
        if diff > 0:
            if a_i > C:
                a_i, a_j = C, C - diff
        elif a_j > C:
            a_j, a_i = C, C + diff
    else:
        quad = Q[i, i] + Q[j, j] - 2.0 * Q[i, j]
        quad = quad if quad > 0 else TAU
        delta = (gradient[i] - gradient[j]) / quad
        total = old_i + old_j
        a_i, a_j = old_i - delta, old_j + delta
        if total > C:
            if a_i > C:
                a_i, a_j = C, total - C
        elif a_j < 0:
            a_j, a_i = 0.0, total
        if total > C:
            if a_j > C:
                a_j, a_i = C, total - C
        elif a_i < 0:
            a_i, a_j = 0.0, total

    alpha[i], alpha[j] = a_i, a_j
    gradient += Q[:, i] * (a_i - old_i) + Q[:, j] * (a_j - old_j)


def _bias(alpha, y, gradient, C):
    values = -y * gradient
    free = (alpha > ALPHA_EPS) & (alpha < C - ALPHA_EPS)
    if free.any():
        return float(values[free].mean())
    up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
    low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
    upper = values[low].min() if low.any() else values.max()
    lower = values[up].max() if up.any() else values.min()
    return float((upper + lower) / 2.0)


def solve_dual(K, y, cfg: SvmConfig):
    """Run SMO on a precomputed kernel matrix; returns (alpha, bias, info)"""
    n = y.size
    C = float(cfg.C)
    Q = (y[:, None] * y[None, :]) * K
    Q_diag = np.diag(Q).copy()
    alpha = np.zeros(n)
    gradient = -np.ones(n)
    max_iterations = cfg.max_iterations if cfg.max_iterations is not None else 10 * n

    info = SvmTrainingInfo()
    objective = dual_objective(alpha, gradient)
    if cfg.record_objective:
        info.objective_trace.append(objective)

    stalled = 0
    while info.iterations < max_iterations:
        i, j, gap = _select_working_pair(alpha, y, gradient, Q_diag, Q, C)
        info.kkt_gap = float(gap)
        if i < 0 or j < 0 or gap < cfg.kkt_tolerance:
            info.converged = True
            break
        _update_pair(alpha, i, j, y, gradient, Q, C)
        info.iterations += 1

        previous, objective = objective, dual_objective(alpha, gradient)
        if cfg.record_objective:
            info.objective_trace.append(objective)
        # max_passes consecutive updates without progress means the pair
        # selection is cycling on round-off
        stalled = stalled + 1 if objective - previous <= 1e-15 * max(1.0, abs(objective)) else 0
        if stalled >= cfg.max_passes:
            logger.warning("⚠️ SMO stalled for %d consecutive updates", stalled)
            break

    if not info.converged:
        logger.warning("⚠️ SMO stopped after %d iterations without convergence (KKT gap %.3g)",
                       info.iterations, info.kkt_gap)

    bias = _bias(alpha, y, gradient, C)
    info.dual_objective = dual_objective(alpha, gradient)
    info.max_kkt_violation = float(kkt_violations(alpha, y, K, bias, C).max())
    return alpha, bias, info


def train_svm(X, y, cfg: SvmConfig | None = None) -> SvmModel:
    """
    Train on rows X with labels y in {+1 (Patient), -1 (NonPatient)}.
    Multipliers below 1e-8 are dropped from the returned model.
    """
    cfg = cfg or SvmConfig()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyData("no training rows")
    if X.shape[0] != y.size:
        raise DimensionMismatch(f"{X.shape[0]} rows but {y.size} labels")
    if np.unique(y).size < 2:
        raise SingleClassData("SVM training needs both classes")

    K = rbf_kernel_matrix(X, X, cfg.sigma)
    alpha, bias, info = solve_dual(K, y, cfg)

    keep = alpha >= ALPHA_EPS
    info.n_support = int(keep.sum())
    logger.info("✅ SVM trained: %d support vectors of %d rows, %d iterations, KKT gap %.2e",
                info.n_support, y.size, info.iterations, info.kkt_gap)
    return SvmModel(
        support_vectors=X[keep].copy(),
        dual_coef=(alpha * y)[keep],
        bias=bias,
        sigma=cfg.sigma,
        info=info,
    )


def predict_svm(model: SvmModel, x):
    """(label sign, decision value) for one feature vector"""
    x = np.asarray(x, dtype=np.float64).ravel()
    decision = float(model.decision_function(x[None, :])[0])
    return (1 if decision >= 0 else -1), decision
