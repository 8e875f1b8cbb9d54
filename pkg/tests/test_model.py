import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from dane_sim.errors import ContractViolation, EstimationError
from dane_sim.model import (LabeledDataset, LossModel, Objective, gradient,
                            hessian_vec, link_bounds, smoothness_profile,
                            surrogate_quadratic, top_eigenvalue, value)
from dane_sim.oracles import fd_gradient


def one(x, y):
    return LabeledDataset(np.array([x], dtype=float), np.array([y], dtype=float))


class TestValue:
    def test_zero_residual(self):
        assert value(LossModel("ridge"), one([1, 0], 0), np.zeros(2)) == 0.0

    def test_zero_margin_logistic(self):
        d = one([0, 0, 0], -1)
        w = np.array([3.0, -1.0, 7.0])
        assert value(LossModel("logistic"), d, w) == pytest.approx(np.log(2), abs=1e-15)

    def test_hand_evaluation(self):
        # 1/2 (2 - 1)^2 + (2/2)(1 + 1)
        d = one([1, 0], 2)
        assert value(LossModel("ridge", reg_mu=2.0), d, np.ones(2)) == pytest.approx(2.5)

    def test_dimension_mismatch(self):
        with pytest.raises(ContractViolation):
            value(LossModel("ridge"), one([1, 0], 0), np.zeros(3))

    def test_logistic_needs_binary_labels(self):
        with pytest.raises(ContractViolation):
            value(LossModel("logistic"), one([1, 0], 0.5), np.zeros(2))

    def test_large_margins_stay_finite(self):
        d = one([1e3], 1)
        assert np.isfinite(value(LossModel("logistic"), d, np.array([-1e3])))


class TestGradient:
    def test_ridge_at_zero(self):
        g = gradient(LossModel("ridge"), one([1, 0], 1), np.zeros(2))
        np.testing.assert_array_equal(g, [-1.0, 0.0])

    def test_logistic_margin_zero(self):
        g = gradient(LossModel("logistic"), one([1, 0, 0], 1), np.zeros(3))
        np.testing.assert_allclose(g, [-0.5, 0, 0], atol=1e-15)

    @pytest.mark.parametrize("kind", ["ridge", "logistic"])
    def test_matches_finite_differences(self, kind, small_ridge, small_logistic, rng):
        model, data = small_ridge if kind == "ridge" else small_logistic
        for _ in range(5):
            w = rng.standard_normal(data.n_features)
            g = gradient(model, data, w)
            fd = fd_gradient(model, data, w, h=1e-6)
            assert np.linalg.norm(fd - g) <= 1e-5 * np.linalg.norm(g)

    def test_sparse_equals_dense(self, small_logistic, rng):
        model, data = small_logistic
        sparse = LabeledDataset(sp.csr_matrix(data.features), data.labels)
        w = rng.standard_normal(data.n_features)
        np.testing.assert_allclose(gradient(model, sparse, w),
                                   gradient(model, data, w), atol=1e-14)


class TestHessianVec:
    def test_identity_rows(self):
        p = 5
        d = LabeledDataset(np.eye(p), np.zeros(p))
        Hv = hessian_vec(LossModel("ridge"), d, np.zeros(p), np.eye(p)[0])
        np.testing.assert_allclose(Hv, np.eye(p)[0] / p, atol=1e-15)

    @pytest.mark.parametrize("kind", ["ridge", "logistic"])
    def test_zero_direction(self, kind, small_logistic):
        _, data = small_logistic
        out = hessian_vec(LossModel(kind, reg_mu=0.1), data, np.ones(8), np.zeros(8))
        np.testing.assert_array_equal(out, np.zeros(8))

    def test_saturates_to_mu(self, small_logistic, rng):
        model = LossModel("logistic", reg_mu=0.3)
        # separable data: every margin y_i x_i^T w is huge
        X = rng.standard_normal((50, 8))
        w = 1e6 * rng.standard_normal(8)
        y = np.sign(X @ w)
        data = LabeledDataset(X, y)
        assert np.all(y * (X @ w) > 40)
        v = rng.standard_normal(8)
        np.testing.assert_allclose(hessian_vec(model, data, w, v), 0.3 * v, atol=1e-8)

    @pytest.mark.parametrize("kind", ["ridge", "logistic"])
    def test_symmetric_and_bounded(self, kind, small_logistic, rng):
        _, data = small_logistic
        model = LossModel(kind, reg_mu=0.05)
        ell = link_bounds(model)[0]
        X = data.features
        for _ in range(10):
            w, u, v = rng.standard_normal((3, 8))
            assert u @ hessian_vec(model, data, w, v) == pytest.approx(
                v @ hessian_vec(model, data, w, u), abs=1e-10)
            uHu = u @ hessian_vec(model, data, w, u)
            assert uHu >= 0.05 * (u @ u) - 1e-10
            assert uHu <= ell / data.n_samples * np.sum((X @ u) ** 2) \
                + 0.05 * (u @ u) + 1e-10


class TestSmoothness:
    def test_ridge_constants(self, small_ridge):
        prof = smoothness_profile(*small_ridge)
        assert (prof.ell, prof.sigma, prof.nu) == (1.0, 1.0, 0.0)

    def test_logistic_constants(self, small_logistic):
        prof = smoothness_profile(*small_logistic)
        assert prof.ell == 0.25
        assert prof.sigma == pytest.approx(np.exp(10) / (1 + np.exp(10)) ** 2)
        assert prof.nu > 0

    def test_scaled_identity(self):
        p = 6
        d = LabeledDataset(np.sqrt(p) * np.eye(p), np.zeros(p))
        prof = smoothness_profile(LossModel("ridge"), d)
        assert abs(prof.L - 1.0) <= 1e-6

    def test_L_matches_dense(self, small_ridge):
        model, data = small_ridge
        X = data.features
        lam = np.linalg.eigvalsh(X.T @ X / data.n_samples)[-1] + model.reg_mu
        assert smoothness_profile(model, data).L == pytest.approx(lam, rel=1e-7)

    def test_power_iteration_failure_carries_best(self):
        A = np.diag(np.linspace(1.0, 0.5, 20))
        with pytest.raises(EstimationError) as exc:
            top_eigenvalue(lambda v: A @ v, 20, tol=1e-14, max_iter=3)
        assert exc.value.best is not None


class TestSurrogate:
    def test_ridge_surrogate_matches_gradient(self, small_ridge, rng):
        model, data = small_ridge
        a = rng.standard_normal(8)
        Q = surrogate_quadratic(model, data, a, 1.0)
        F = Objective(model, data)
        for _ in range(3):
            w = rng.standard_normal(8)
            np.testing.assert_allclose(Q.gradient(w), F.gradient(w), atol=1e-12)

    def test_anchor_values(self, small_logistic, rng):
        model, data = small_logistic
        a = rng.standard_normal(8)
        Q = surrogate_quadratic(model, data, a, 0.25)
        F = Objective(model, data)
        assert Q.value(a) == pytest.approx(F.value(a), abs=1e-12)
        np.testing.assert_allclose(Q.gradient(a), F.gradient(a), atol=1e-12)

    def test_constant_hessian(self, small_logistic, rng):
        model, data = small_logistic
        Q = surrogate_quadratic(model, data, rng.standard_normal(8), 0.25)
        v = rng.standard_normal(8)
        w1, w2 = rng.standard_normal((2, 8))
        np.testing.assert_allclose(Q.hessian_vec(w1, v), Q.hessian_vec(w2, v),
                                   atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 40), st.integers(1, 6), st.integers(0, 2 ** 32 - 1))
def test_directional_derivative_property(N, p, seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((N, p))
    y = np.where(rng.random(N) < 0.5, -1.0, 1.0)
    data = LabeledDataset(X, y)
    for kind in ("ridge", "logistic"):
        model = LossModel(kind, reg_mu=0.1)
        w, d = rng.standard_normal((2, p))
        h = 1e-6
        fd = (value(model, data, w + h * d) - value(model, data, w - h * d)) / (2 * h)
        exact = gradient(model, data, w) @ d
        assert abs(fd - exact) <= 1e-5 * max(1.0, abs(exact))


def test_dataset_validation():
    with pytest.raises(ContractViolation):
        LabeledDataset(np.zeros((2, 2)), np.zeros(3))
    with pytest.raises(ContractViolation):
        LabeledDataset(np.array([[np.nan]]), np.zeros(1))
    with pytest.raises(ContractViolation):
        LossModel("hinge")
