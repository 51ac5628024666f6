"""Stage one: Bayesian Bootstrap dWOLS and the Q-learning comparator."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from itrnma.bbdwols import (
    BbConfig,
    BlipPosterior,
    compute_weights,
    draw_dirichlet,
    run_bbdwols,
    run_qlearning,
    weighted_wls,
)
from itrnma.core import build_design
from itrnma.errors import SingularDesignError

from conftest import make_dataset


class TestBbConfig:
    def test_invalid_values_rejected(self):
        with pytest.raises(ValueError):
            BbConfig(n_iterations=0)
        with pytest.raises(ValueError):
            BbConfig(weight_mode="ipw")
        with pytest.raises(ValueError):
            BbConfig(trim_quantile=1.5)
        with pytest.raises(ValueError):
            BbConfig(point_estimate="mode")
        with pytest.raises(ValueError):
            BbConfig(miss_convention="inverse")


class TestDirichlet:
    def test_sums_to_one_and_positive(self):
        rng = np.random.default_rng(0)
        w = draw_dirichlet(50, rng)
        assert w.shape == (50,)
        assert np.all(w > 0)
        assert abs(w.sum() - 1.0) < 1e-12

    def test_moments_match_flat_dirichlet(self):
        """Flat Dirichlet over n cells: mean 1/n, var (n-1)/(n^2 (n+1))."""
        n, reps = 20, 4000
        rng = np.random.default_rng(1)
        draws = np.array([draw_dirichlet(n, rng) for _ in range(reps)])
        np.testing.assert_allclose(draws.mean(axis=0), 1 / n, atol=4 / np.sqrt(reps) / n)
        expected_var = (n - 1) / (n**2 * (n + 1))
        np.testing.assert_allclose(
            draws.var(axis=0), expected_var, rtol=0.25
        )

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            draw_dirichlet(0, np.random.default_rng(0))


class TestComputeWeights:
    def setup_method(self):
        rng = np.random.default_rng(3)
        self.omega = draw_dirichlet(40, rng)
        self.pi_t = rng.uniform(0.2, 0.8, 40)
        self.pi_obs = rng.uniform(0.5, 0.95, 40)

    def test_unit_mode_returns_dirichlet_only(self):
        w = compute_weights(self.omega, self.pi_t, self.pi_obs, BbConfig(weight_mode="unit"))
        np.testing.assert_array_equal(w, self.omega)

    def test_treatment_mode(self):
        w = compute_weights(self.omega, self.pi_t, None, BbConfig(weight_mode="treatment"))
        np.testing.assert_allclose(w, self.omega / self.pi_t)

    def test_mar_mode_multiplies_probabilities(self):
        w = compute_weights(self.omega, self.pi_t, self.pi_obs, BbConfig())
        np.testing.assert_allclose(w, self.omega / (self.pi_t * self.pi_obs))

    def test_trimming_caps_at_quantile(self):
        cfg = BbConfig(trim_quantile=0.9)
        w = compute_weights(self.omega, self.pi_t, self.pi_obs, cfg)
        raw = self.omega / (self.pi_t * self.pi_obs)
        cap = np.quantile(raw, 0.9)
        np.testing.assert_allclose(w, np.minimum(raw, cap))
        assert w.max() <= cap + 1e-15


class TestWeightedWls:
    @pytest.mark.parametrize("seed", range(25))
    def test_matches_dense_normal_equations(self, seed):
        """Oracle: direct pinv solve of the weighted normal equations."""
        rng = np.random.default_rng(seed)
        n = int(rng.integers(12, 31))
        data = make_dataset(n=n, seed=seed + 100, missing_rate=0.15)
        design = build_design(data)
        w = rng.gamma(1.0, 1.0, n)
        beta, delta = weighted_wls(design, w)
        mask = design.m == 0
        x = design.stacked()[mask]
        y = design.y[mask]
        ww = w[mask]
        sol = np.linalg.pinv(x.T @ (x * ww[:, None])) @ (x.T @ (ww * y))
        combined = np.concatenate([beta, delta])
        np.testing.assert_allclose(
            combined, sol, rtol=1e-8, atol=1e-8 * max(1.0, np.abs(sol).max())
        )

    def test_missing_outcomes_cannot_leak(self):
        data = make_dataset(n=60, seed=5, missing_rate=0.3)
        design = build_design(data)
        w = np.ones(60)
        b1, d1 = weighted_wls(design, w)
        design.y[design.m == 1] = 1e9  # poison the masked rows
        b2, d2 = weighted_wls(design, w)
        np.testing.assert_array_equal(b1, b2)
        np.testing.assert_array_equal(d1, d2)

    def test_singular_design_raises(self):
        data = make_dataset(n=40, seed=6, missing_rate=0.0)
        data.covariates["x2"] = np.zeros(40)  # zero column in the reference block
        design = build_design(data)
        with pytest.raises(SingularDesignError):
            weighted_wls(design, np.ones(40))

    @given(scale=st.floats(min_value=0.01, max_value=100.0))
    @settings(max_examples=20, deadline=None)
    def test_weight_scaling_invariance(self, scale):
        data = make_dataset(n=50, seed=7, missing_rate=0.1)
        design = build_design(data)
        rng = np.random.default_rng(8)
        w = rng.gamma(1.0, 1.0, 50)
        b1, d1 = weighted_wls(design, w)
        b2, d2 = weighted_wls(design, w * scale)
        np.testing.assert_allclose(d1, d2, rtol=1e-7, atol=1e-9)


class TestRunBbdwols:
    def test_posterior_shape_and_labels(self, two_arm_data):
        post = run_bbdwols(two_arm_data, BbConfig(n_iterations=25, seed=1))
        assert post.draws.shape == (25, 2)
        assert post.point.shape == (2,)
        assert post.cov.shape == (2, 2)
        assert post.labels == ["delta[2 vs 1, q=0]", "delta[2 vs 1, q=1]"]
        assert post.meta["method"] == "bbdwols"

    def test_three_arm_label_order(self, three_arm_data):
        post = run_bbdwols(three_arm_data, BbConfig(n_iterations=10, seed=1))
        assert post.labels == [
            "delta[2 vs 1, q=0]",
            "delta[2 vs 1, q=1]",
            "delta[3 vs 1, q=0]",
            "delta[3 vs 1, q=1]",
        ]

    def test_point_is_mean_and_cov_is_sample_cov(self, two_arm_data):
        post = run_bbdwols(two_arm_data, BbConfig(n_iterations=40, seed=2))
        np.testing.assert_allclose(post.point, post.draws.mean(axis=0))
        np.testing.assert_allclose(
            post.cov, np.cov(post.draws, rowvar=False, ddof=1), atol=1e-12
        )

    def test_median_point_estimate(self, two_arm_data):
        post = run_bbdwols(
            two_arm_data, BbConfig(n_iterations=41, seed=2, point_estimate="median")
        )
        np.testing.assert_allclose(post.point, np.median(post.draws, axis=0))

    def test_determinism(self, two_arm_data):
        p1 = run_bbdwols(two_arm_data, BbConfig(n_iterations=15, seed=9))
        p2 = run_bbdwols(two_arm_data, BbConfig(n_iterations=15, seed=9))
        np.testing.assert_array_equal(p1.draws, p2.draws)

    def test_seed_changes_draws(self, two_arm_data):
        p1 = run_bbdwols(two_arm_data, BbConfig(n_iterations=15, seed=9))
        p2 = run_bbdwols(two_arm_data, BbConfig(n_iterations=15, seed=10))
        assert not np.array_equal(p1.draws, p2.draws)

    def test_no_confounding_matches_ols_oracle(self):
        """No confounding, no missingness: posterior mean near plain OLS."""
        data = make_dataset(n=400, seed=11, missing_rate=0.0)
        cfg = BbConfig(n_iterations=600, seed=3)
        post = run_bbdwols(data, cfg)
        design = build_design(data)
        x = design.stacked()
        sol = np.linalg.lstsq(x, design.y, rcond=None)[0]
        ols_delta = sol[design.n_ref_cols :]
        mcse = np.sqrt(np.diag(post.cov) / cfg.n_iterations)
        assert np.all(np.abs(post.point - ols_delta) < 3 * mcse + 1e-3)

    def test_miss_convention_switch_changes_weights(self, two_arm_data):
        base = run_bbdwols(two_arm_data, BbConfig(n_iterations=10, seed=4))
        alt = run_bbdwols(
            two_arm_data,
            BbConfig(n_iterations=10, seed=4, miss_convention="as_written"),
        )
        assert not np.allclose(base.draws, alt.draws)
        assert alt.meta["miss_convention"] == "as_written"

    def test_roundtrip_dict(self, two_arm_data):
        post = run_bbdwols(two_arm_data, BbConfig(n_iterations=12, seed=5))
        d = post.to_dict(include_draws=True)
        back = BlipPosterior.from_dict(d)
        np.testing.assert_allclose(back.draws, post.draws)
        np.testing.assert_allclose(back.point, post.point)
        np.testing.assert_allclose(back.cov, post.cov)
        assert back.labels == post.labels
        # without draws the point survives as a single pseudo-draw
        lean = BlipPosterior.from_dict(post.to_dict(include_draws=False))
        np.testing.assert_allclose(lean.point, post.point)


class TestQlearning:
    def test_uses_unit_weights_and_tags_method(self, two_arm_data):
        post = run_qlearning(two_arm_data, BbConfig(n_iterations=10, seed=1))
        assert post.meta["method"] == "qlearning"
        assert post.meta["weight_mode"] == "unit"

    def test_matches_bbdwols_under_unit_mode(self, two_arm_data):
        q = run_qlearning(two_arm_data, BbConfig(n_iterations=10, seed=1))
        b = run_bbdwols(two_arm_data, BbConfig(n_iterations=10, seed=1, weight_mode="unit"))
        np.testing.assert_array_equal(q.draws, b.draws)
