import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mefm.inference import (
    HACCovariance,
    RotationMatrix,
    SingularCovarianceWarning,
    contrast_stat,
    default_bandwidth,
    gamma_estimates,
    gamma_estimates_time_averaged,
    hac_loading,
    inv_sqrt_psd,
    loading_row_z,
    rotation_H,
    standardized_effect_stats,
)
from mefm.model import fit_mefm

from conftest import random_factor_series


def brute_hac(fit, side, j, eta):
    """Every sum written as an explicit index loop."""
    T, p, q = fit.shape
    C, E = fit.C, fit.E
    if side == "row":
        Q, D, n, m = fit.Qr, fit.Dr, p, q
    else:
        Q, D, n, m = fit.Qc, fit.Dc, q, p
    k = Q.shape[1]

    def c(t, a, b):
        return C[t, a, b] if side == "row" else C[t, b, a]

    def e(t, a, b):
        return E[t, a, b] if side == "row" else E[t, b, a]

    # W[a, b] = T^-1 D_a^-1 sum_i Q[i, a] sum_s sum_l C_s[i, l] C_s[b, l]
    W = np.zeros((k, n))
    for a in range(k):
        for b in range(n):
            acc = 0.0
            for i in range(n):
                for s in range(T):
                    for l in range(m):
                        acc += Q[i, a] * c(s, i, l) * c(s, b, l)
            W[a, b] = acc / (T * D[a])
    # s_t[a] = sum_b W[a, b] sum_l C_t[b, l] E_t[j, l]
    S = np.zeros((T, k))
    for t in range(T):
        for a in range(k):
            for b in range(n):
                inner = 0.0
                for l in range(m):
                    inner += c(t, b, l) * e(t, j, l)
                S[t, a] += W[a, b] * inner
    sigma = np.zeros((k, k))
    for a in range(k):
        for b in range(k):
            sigma[a, b] = sum(S[t, a] * S[t, b] for t in range(T))
            for v in range(1, eta + 1):
                w = 1 - v / (1 + eta)
                dv = sum(S[t, a] * S[t - v, b] for t in range(v, T))
                dvt = sum(S[t, b] * S[t - v, a] for t in range(v, T))
                sigma[a, b] += w * (dv + dvt)
    return sigma


@pytest.fixture
def small_fit(rng):
    return fit_mefm(random_factor_series(rng, T=12, p=7, q=6), 2, 2)


class TestGamma:
    def test_zero_residual(self):
        g = gamma_estimates(np.zeros((2, 3, 4)), 1)
        assert g.gamma_mu_sq == 0.0
        assert not g.gamma_alpha_sq.any() and not g.gamma_beta_sq.any()

    def test_identity_residual(self):
        g = gamma_estimates(np.eye(4)[None], 0)
        np.testing.assert_allclose(g.gamma_alpha_sq, 0.25)
        np.testing.assert_allclose(g.gamma_beta_sq, 0.25)
        assert g.gamma_mu_sq == pytest.approx(0.25)

    def test_matches_oracle(self, rng):
        E = rng.standard_normal((3, 4, 5))
        g = gamma_estimates(E, 2)
        for i in range(4):
            assert g.gamma_alpha_sq[i] == pytest.approx(sum(E[2, i, j] ** 2 for j in range(5)) / 5)
        for j in range(5):
            assert g.gamma_beta_sq[j] == pytest.approx(sum(E[2, i, j] ** 2 for i in range(4)) / 4)
        assert g.t_used == 2

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 6), st.integers(1, 6))
    def test_row_and_column_averages_agree(self, seed, p, q):
        E = np.random.default_rng(seed).standard_normal((1, p, q))
        g = gamma_estimates(E, 0)
        a, b = g.gamma_alpha_sq.mean(), g.gamma_beta_sq.mean()
        assert a == pytest.approx(b, rel=1e-12)
        assert a == pytest.approx(g.gamma_mu_sq, rel=1e-12)

    def test_out_of_range(self):
        with pytest.raises(IndexError):
            gamma_estimates(np.zeros((2, 2, 2)), 2)

    def test_time_averaged(self, rng):
        E = rng.standard_normal((4, 3, 2))
        g = gamma_estimates_time_averaged(E)
        np.testing.assert_allclose(g.gamma_alpha_sq, np.mean([gamma_estimates(E, t).gamma_alpha_sq for t in range(4)], axis=0))
        assert g.t_used is None


class TestEffectStats:
    def test_truth_equal_estimate(self, small_fit):
        s = standardized_effect_stats(small_fit, 3, small_fit.effects)
        assert s.mu == 0.0
        assert not s.alpha.any() and not s.beta.any()
        assert not s.degenerate

    def test_formula(self, small_fit, rng):
        truth = small_fit.effects.scaled(0.5)
        s = standardized_effect_stats(small_fit, 4, truth)
        g = gamma_estimates(small_fit.E, 4)
        i = 3
        expect = math.sqrt(6) * (small_fit.effects.alpha[4, i] - truth.alpha[4, i]) / math.sqrt(g.gamma_alpha_sq[i])
        assert s.alpha[i] == pytest.approx(expect, rel=1e-12)

    def test_zero_residual_is_flagged(self):
        Y = np.ones((3, 4, 4)) + np.arange(4)[None, :, None]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            fit = fit_mefm(Y, 1, 1)
        s = standardized_effect_stats(fit, 0, fit.effects)
        assert s.degenerate
        assert np.isnan(s.mu)

    def test_invariant_to_constant_shift(self, rng):
        Y = random_factor_series(rng, T=10, p=6, q=5)
        a = fit_mefm(Y, 2, 2)
        b = fit_mefm(Y + 7.25, 2, 2)
        np.testing.assert_allclose(b.effects.alpha, a.effects.alpha, atol=1e-10)
        np.testing.assert_allclose(b.E, a.E, atol=1e-10)
        truth = a.effects.scaled(0.0)
        sa = standardized_effect_stats(a, 2, truth)
        sb = standardized_effect_stats(b, 2, truth)
        np.testing.assert_allclose(sb.alpha, sa.alpha, atol=1e-10)
        np.testing.assert_allclose(sb.beta, sa.beta, atol=1e-10)

    def test_contrast_oracle(self, small_fit):
        g = np.array([1.0, -0.5, -0.5])
        theta = np.array([0.1, -0.2, 0.3])
        z = contrast_stat(small_fit, 5, g, [0, 1, 2], theta)
        gam = gamma_estimates(small_fit.E, 5).gamma_alpha_sq
        est = small_fit.effects.alpha[5, :3]
        num = sum(g[k] * (est[k] - theta[k]) for k in range(3))
        den = sum(g[k] ** 2 * gam[k] for k in range(3))
        assert z == pytest.approx(math.sqrt(6) * num / math.sqrt(den), rel=1e-12)

    def test_contrast_columns_and_shapes(self, small_fit):
        z = contrast_stat(small_fit, 0, [1.0], [2], [0.0], side="column")
        gam = gamma_estimates(small_fit.E, 0).gamma_beta_sq[2]
        assert z == pytest.approx(math.sqrt(7) * small_fit.effects.beta[0, 2] / math.sqrt(gam))
        with pytest.raises(ValueError):
            contrast_stat(small_fit, 0, [1.0, 2.0], [2], [0.0])
        with pytest.raises(ValueError):
            contrast_stat(small_fit, 0, [1.0], [2], [0.0], side="diag")


def diagonal_factor_fit(rng, T=40, p=8, q=7):
    Ur = np.linalg.qr(np.eye(p)[:, :2] - 1.0 / p)[0]
    Uc = np.linalg.qr(np.eye(q)[:, :2] - 1.0 / q)[0]
    a = 3 * rng.standard_normal(T)
    b = rng.standard_normal(T)
    F = np.zeros((T, 2, 2))
    F[:, 0, 0], F[:, 1, 1] = a, b
    return fit_mefm(Ur @ F @ Uc.T, 2, 2)


class TestRotation:
    def test_identity_case(self, rng):
        fit = diagonal_factor_fit(rng)
        Hr, Hc = rotation_H(fit, fit.Qr, fit.Qc, fit.FZ)
        np.testing.assert_allclose(Hr.matrix, np.eye(2), atol=1e-10)
        np.testing.assert_allclose(Hc.matrix, np.eye(2), atol=1e-10)
        assert (Hr.side, Hc.side) == ("row", "column")

    def test_matches_loop_oracle(self, small_fit, rng):
        T, p, q = small_fit.shape
        Qr = np.linalg.qr(rng.standard_normal((p, 2)))[0]
        Qc = np.linalg.qr(rng.standard_normal((q, 2)))[0]
        FZ = rng.standard_normal((T, 2, 2))
        Hr, Hc = rotation_H(small_fit, Qr, Qc, FZ)
        acc_r = sum(FZ[t] @ Qc.T @ Qc @ FZ[t].T for t in range(T))
        acc_c = sum(FZ[t].T @ Qr.T @ Qr @ FZ[t] for t in range(T))
        Hr_o = np.diag(1 / small_fit.Dr) @ small_fit.Qr.T @ Qr @ acc_r / T
        Hc_o = np.diag(1 / small_fit.Dc) @ small_fit.Qc.T @ Qc @ acc_c / T
        np.testing.assert_allclose(Hr.matrix, Hr_o, atol=1e-12)
        np.testing.assert_allclose(Hc.matrix, Hc_o, atol=1e-12)

    def test_dimension_mismatch(self, small_fit):
        T, p, q = small_fit.shape
        with pytest.raises(ValueError):
            rotation_H(small_fit, np.zeros((p, 3)), np.zeros((q, 2)), np.zeros((T, 3, 2)))


class TestHAC:
    def test_default_bandwidth(self):
        assert default_bandwidth(60, 60, 300) == int((60 * 60 * 300) ** 0.25 // 5)
        assert default_bandwidth(1, 1, 1) == 0

    def test_bandwidth_zero_is_outer_product_sum(self, small_fit):
        from mefm.inference import _hac_scores

        s = _hac_scores(small_fit, "row", 1)
        h = hac_loading(small_fit, "row", 1, bandwidth=0)
        np.testing.assert_allclose(h.matrix, sum(np.outer(x, x) for x in s), atol=1e-12)
        assert np.linalg.eigvalsh(h.matrix).min() >= -1e-12 * np.trace(h.matrix)

    def test_zero_residual_gives_zero(self, rng):
        fit = diagonal_factor_fit(rng)
        h = hac_loading(fit, "column", 0)
        np.testing.assert_allclose(h.matrix, 0.0, atol=1e-20)

    @pytest.mark.parametrize("side", ["row", "column"])
    @pytest.mark.parametrize("eta", [0, 1, 3])
    def test_literal_oracle(self, rng, side, eta):
        fit = fit_mefm(random_factor_series(rng, T=6, p=4, q=3, kr=1, kc=1), 1, 1)
        h = hac_loading(fit, side, 1, bandwidth=eta)
        np.testing.assert_allclose(h.matrix, brute_hac(fit, side, 1, eta), rtol=1e-12, atol=1e-12)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(0, 9), st.sampled_from(["row", "column"]))
    def test_symmetric_psd(self, seed, eta, side):
        fit = fit_mefm(random_factor_series(np.random.default_rng(seed), T=10, p=6, q=5), 2, 2)
        m = hac_loading(fit, side, 0, bandwidth=eta).matrix
        np.testing.assert_array_equal(m, m.T)
        assert np.linalg.eigvalsh(m).min() >= -1e-8 * max(np.trace(m), 1e-300)

    def test_bandwidth_errors(self, small_fit):
        with pytest.raises(ValueError):
            hac_loading(small_fit, "row", 0, bandwidth=12)
        with pytest.raises(ValueError):
            hac_loading(small_fit, "row", 0, bandwidth=-1)
        with pytest.raises(IndexError):
            hac_loading(small_fit, "row", 7)


class TestLoadingZ:
    def test_zero_when_truth_is_estimate(self, small_fit):
        h = hac_loading(small_fit, "column", 2)
        H = RotationMatrix("column", np.eye(2))
        z = loading_row_z(small_fit, "column", 2, h, H, small_fit.Qc[2])
        np.testing.assert_allclose(z, 0.0, atol=1e-14)

    def test_scalar_oracle(self, rng):
        fit = fit_mefm(random_factor_series(rng, T=15, p=6, q=5, kr=1, kc=1), 1, 1)
        h = hac_loading(fit, "row", 3)
        H = RotationMatrix("row", np.array([[0.9]]))
        q_true = np.array([0.2])
        z = loading_row_z(fit, "row", 3, h, H, q_true)
        expect = 15 * fit.Dr[0] * (fit.Qr[3, 0] - 0.9 * 0.2) / math.sqrt(h.matrix[0, 0])
        assert z[0] == pytest.approx(expect, rel=1e-12)

    def test_singular_covariance_warns(self, small_fit):
        h = HACCovariance("row", 0, 0, np.diag([1.0, 0.0]))
        with pytest.warns(SingularCovarianceWarning):
            z = loading_row_z(small_fit, "row", 0, h, RotationMatrix("row", np.eye(2)), np.zeros(2))
        assert z[1] == 0.0

    def test_dimension_mismatch(self, small_fit):
        h = hac_loading(small_fit, "row", 0)
        with pytest.raises(ValueError):
            loading_row_z(small_fit, "row", 0, h, RotationMatrix("row", np.eye(2)), np.zeros(3))

    def test_inv_sqrt(self, rng):
        A = rng.standard_normal((3, 3))
        S = A @ A.T + np.eye(3)
        R, singular = inv_sqrt_psd(S)
        assert not singular
        np.testing.assert_allclose(R @ S @ R, np.eye(3), atol=1e-10)
