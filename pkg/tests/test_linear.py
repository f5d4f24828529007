import numpy as np
import pytest

from resadapt.errors import ConvergenceError, ValidationError
from resadapt.stats import build_design, lmm_fit, ols_fit, pseudo_r2


def make_xy(n=40, seed=1):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=n)
    return np.column_stack([np.ones(n), x]), x, rng


class TestOls:
    def test_exact_recovery_noiseless(self):
        X, x, _ = make_xy()
        y = 3.0 + 2.0 * x
        fit = ols_fit(X, y)
        assert fit.coef == pytest.approx([3.0, 2.0], abs=1e-10)
        assert fit.r_squared == pytest.approx(1.0, abs=1e-12)
        assert float(np.abs(y - X @ fit.coef).max()) < 1e-8

    def test_constant_response(self):
        X, _, _ = make_xy()
        fit = ols_fit(X, np.full(X.shape[0], 7.0))
        assert fit.coef[1] == pytest.approx(0.0, abs=1e-10)
        assert fit.r_squared == 0.0

    def test_residuals_orthogonal_to_design(self):
        rng = np.random.default_rng(3)
        X = np.column_stack([np.ones(50), rng.normal(size=(50, 3))])
        y = rng.normal(size=50) * 10
        fit = ols_fit(X, y)
        resid = y - X @ fit.coef
        scale = float(np.abs(y).max())
        for j in range(X.shape[1]):
            assert abs(float(resid @ X[:, j])) < 1e-8 * scale

    def test_matches_statsmodels(self):
        sm = pytest.importorskip("statsmodels.api")
        rng = np.random.default_rng(8)
        X = np.column_stack([np.ones(60), rng.normal(size=(60, 2))])
        y = X @ np.array([5.0, -2.0, 0.5]) + rng.normal(size=60)
        fit = ols_fit(X, y)
        ref = sm.OLS(y, X).fit()
        assert fit.coef == pytest.approx(ref.params, rel=1e-10)
        assert fit.se == pytest.approx(ref.bse, rel=1e-8)
        assert fit.p_values == pytest.approx(ref.pvalues, rel=1e-8)
        assert fit.r_squared == pytest.approx(ref.rsquared, rel=1e-10)
        assert fit.adj_r_squared == pytest.approx(ref.rsquared_adj, rel=1e-10)
        assert fit.residual_se**2 == pytest.approx(ref.mse_resid, rel=1e-10)

    def test_degrees_of_freedom(self):
        X, x, _ = make_xy(n=25)
        fit = ols_fit(X, x * 2 + np.sin(x))
        assert fit.df_residual == 25 - 2
        assert fit.n == 25

    def test_too_few_rows(self):
        with pytest.raises(ValidationError):
            ols_fit(np.ones((2, 2)), np.array([1.0, 2.0]))

    def test_rank_deficiency_reported(self):
        X = np.column_stack([np.ones(10), np.arange(10.0), 2 * np.arange(10.0)])
        with pytest.raises(ValidationError, match="dependent columns"):
            ols_fit(X, np.arange(10.0))


def simulate_grouped(n_groups, group_size, var_group, var_resid, seed,
                     beta=(3.0, 1.5)):
    rng = np.random.default_rng(seed)
    n = n_groups * group_size
    x = rng.normal(size=n)
    X = np.column_stack([np.ones(n), x])
    groups = np.repeat(np.arange(n_groups), group_size)
    alpha = rng.normal(scale=np.sqrt(var_group), size=n_groups) if var_group > 0 \
        else np.zeros(n_groups)
    y = X @ np.array(beta) + alpha[groups] + rng.normal(scale=np.sqrt(var_resid), size=n)
    return X, y, groups


class TestLmm:
    def test_recovers_planted_variances(self):
        X, y, groups = simulate_grouped(50, 40, var_group=4.0, var_resid=1.0, seed=42)
        fit = lmm_fit(X, y, groups)
        assert abs(fit.var_group - 4.0) / 4.0 < 0.20
        assert abs(fit.var_residual - 1.0) < 0.20
        assert fit.icc == pytest.approx(
            fit.var_group / (fit.var_group + fit.var_residual))
        assert not fit.boundary

    def test_no_group_effect_low_icc(self):
        X, y, groups = simulate_grouped(50, 40, var_group=0.0, var_resid=1.0, seed=7)
        fit = lmm_fit(X, y, groups)
        assert fit.icc < 0.02

    def test_lambda_zero_equals_ols_exactly(self):
        X, y, groups = simulate_grouped(10, 8, var_group=2.0, var_resid=1.0, seed=5)
        ols = ols_fit(X, y)
        lmm = lmm_fit(X, y, groups, fix_lambda=0.0)
        assert np.array_equal(ols.coef, lmm.coef)
        assert lmm.var_group == 0.0
        assert lmm.boundary

    def test_local_optimality_of_lambda(self):
        X, y, groups = simulate_grouped(30, 15, var_group=1.5, var_resid=1.0, seed=11)
        fit = lmm_fit(X, y, groups)
        assert fit.lam > 0
        at = lmm_fit(X, y, groups, fix_lambda=fit.lam).reml_loglik
        below = lmm_fit(X, y, groups, fix_lambda=0.5 * fit.lam).reml_loglik
        above = lmm_fit(X, y, groups, fix_lambda=2.0 * fit.lam).reml_loglik
        assert at >= below and at >= above

    def test_matches_statsmodels_mixedlm(self):
        sm = pytest.importorskip("statsmodels.api")
        X, y, groups = simulate_grouped(25, 12, var_group=2.5, var_resid=1.2, seed=13)
        fit = lmm_fit(X, y, groups)
        ref = sm.MixedLM(y, X, groups=groups).fit(reml=True)
        assert fit.coef == pytest.approx(ref.fe_params, rel=1e-5)
        assert fit.var_group == pytest.approx(float(np.asarray(ref.cov_re)[0, 0]), rel=1e-3)
        assert fit.var_residual == pytest.approx(ref.scale, rel=1e-3)
        assert fit.reml_loglik == pytest.approx(ref.llf, abs=1e-5)
        assert fit.se == pytest.approx(ref.bse_fe, rel=1e-3)

    def test_information_criteria_arithmetic(self):
        X, y, groups = simulate_grouped(12, 10, var_group=1.0, var_resid=1.0, seed=3)
        fit = lmm_fit(X, y, groups)
        p = X.shape[1] + 2
        assert fit.aic == pytest.approx(2 * p - 2 * fit.ml_loglik)
        assert fit.bic == pytest.approx(p * np.log(len(y)) - 2 * fit.ml_loglik)

    def test_boundary_is_flagged_not_fatal(self):
        # strong anti-grouping data: group means identical by construction
        rng = np.random.default_rng(19)
        n_groups, m = 20, 10
        noise = rng.normal(size=(n_groups, m))
        noise -= noise.mean(axis=1, keepdims=True)
        y = noise.ravel()
        X = np.ones((n_groups * m, 1))
        groups = np.repeat(np.arange(n_groups), m)
        fit = lmm_fit(X, y, groups)
        assert fit.boundary
        assert fit.var_group == 0.0
        assert fit.icc == 0.0

    def test_degenerate_within_group_constant_diverges(self):
        # y exactly constant within each group: residual variance wants 0
        groups = np.repeat(np.arange(10), 6)
        y = groups.astype(float) * 10
        X = np.ones((60, 1))
        with pytest.raises(ConvergenceError):
            lmm_fit(X, y, groups)

    def test_needs_two_groups(self):
        with pytest.raises(ValidationError, match="2 groups"):
            lmm_fit(np.ones((10, 1)), np.arange(10.0), np.zeros(10))

    def test_group_label_types(self):
        X, y, groups = simulate_grouped(6, 8, var_group=1.0, var_resid=1.0, seed=23)
        labels = np.array([f"g{int(g)}" for g in groups])
        fit = lmm_fit(X, y, labels)
        assert fit.n_groups == 6


class TestPseudoR2:
    def test_intercept_only_marginal_zero(self):
        X, y, groups = simulate_grouped(10, 10, var_group=1.0, var_resid=1.0, seed=29)
        fit = lmm_fit(np.ones((100, 1)), y, groups)
        assert fit.r2_marginal == 0.0
        assert fit.r2_conditional > 0.0

    def test_zero_group_variance_collapses(self):
        X, y, groups = simulate_grouped(10, 10, var_group=2.0, var_resid=1.0, seed=31)
        fit = lmm_fit(X, y, groups, fix_lambda=0.0)
        r2m, r2c = pseudo_r2(fit, X)
        assert r2m == pytest.approx(r2c)

    def test_ordering_invariant(self):
        X, y, groups = simulate_grouped(10, 10, var_group=2.0, var_resid=1.0, seed=37)
        fit = lmm_fit(X, y, groups)
        assert 0.0 <= fit.r2_marginal <= fit.r2_conditional <= 1.0

    def test_accepts_design_matrix(self):
        rows = [{"y": float(i), "x": float(i % 5), "g": f"g{i % 3}"}
                for i in range(30)]
        d = build_design(rows, "y ~ x")
        fit = lmm_fit(d, groups=[r["g"] for r in rows])
        r2m, r2c = pseudo_r2(fit, d)
        assert (r2m, r2c) == (fit.r2_marginal, fit.r2_conditional)
