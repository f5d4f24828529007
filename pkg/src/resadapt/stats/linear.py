"""Ordinary least squares and the random-intercept linear mixed model.

The mixed model is y = X beta + alpha_group + eps with a single variance
ratio lambda = var_group / var_residual. For a fixed lambda everything
else profiles out analytically, so the REML fit reduces to a 1-D search:
a bracketing grid on log-lambda followed by golden-section refinement.

The per-group whitening trick keeps the inner loop a plain QR least
squares: with S_g = I - c_g J and c_g = (1 - (1 + lambda n_g)^-1/2) / n_g,
S_g' S_g equals the inverse of I + lambda J, so transforming X and y per
group and solving ordinary least squares yields the GLS estimate. At
lambda = 0 the transform is skipped entirely, which makes the fit agree
with plain OLS bit for bit.
"""

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ConvergenceError, ValidationError
from .design import DesignMatrix, dependent_columns
from .special import t_sf

_LOG_LAMBDA_TOL = 1e-8
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass
class OlsFit:
    names: list
    coef: np.ndarray
    se: np.ndarray
    t_values: np.ndarray
    p_values: list
    r_squared: float
    adj_r_squared: float
    residual_se: float
    n: int
    df_residual: int

    def to_dict(self):
        return {
            "coefficients": {
                name: {"estimate": float(b), "se": float(s), "t": float(t), "p": p}
                for name, b, s, t, p in zip(self.names, self.coef, self.se,
                                            self.t_values, self.p_values)
            },
            "r_squared": self.r_squared,
            "adj_r_squared": self.adj_r_squared,
            "residual_se": self.residual_se,
            "n": self.n,
            "df_residual": self.df_residual,
        }


@dataclass
class LmmFit:
    names: list
    coef: np.ndarray
    se: np.ndarray
    p_values: list
    var_group: float
    var_residual: float
    lam: float
    boundary: bool
    reml_loglik: float
    ml_loglik: float
    aic: float
    bic: float
    icc: float
    r2_marginal: float
    r2_conditional: float
    n: int
    n_groups: int

    def to_dict(self):
        return {
            "fixed_effects": {
                name: {"estimate": float(b), "se": float(s), "p": p}
                for name, b, s, p in zip(self.names, self.coef, self.se, self.p_values)
            },
            "var_group": self.var_group,
            "var_residual": self.var_residual,
            "icc": self.icc,
            "boundary": self.boundary,
            "reml_loglik": self.reml_loglik,
            "ml_loglik": self.ml_loglik,
            "aic": self.aic,
            "bic": self.bic,
            "r2_marginal": self.r2_marginal,
            "r2_conditional": self.r2_conditional,
            "n": self.n,
            "n_groups": self.n_groups,
        }


def _as_xy(design, y):
    if isinstance(design, DesignMatrix):
        X = design.matrix
        names = list(design.columns)
        if y is None:
            y = design.response
    else:
        X = np.asarray(design, dtype=np.float64)
        names = [f"x{j}" for j in range(X.shape[1])]
    if y is None:
        raise ValidationError("no response supplied")
    return X, np.asarray(y, dtype=np.float64), names


def _qr_solve(X, y, names):
    q, r = np.linalg.qr(X)
    diag = np.abs(np.diag(r))
    if np.any(diag < max(X.shape) * np.finfo(float).eps * (diag.max() if diag.size else 1.0)):
        offenders = dependent_columns(X, names)
        raise ValidationError(f"rank-deficient design; dependent columns: {offenders}")
    beta = np.linalg.solve(r, q.T @ y)
    return beta, r


def ols_fit(design, y=None) -> OlsFit:
    """Least squares via QR, with classical t-based inference."""
    X, y, names = _as_xy(design, y)
    n, p = X.shape
    if n <= p:
        raise ValidationError(f"need more rows than coefficients (n={n}, p={p})")
    beta, r = _qr_solve(X, y, names)
    resid = y - X @ beta
    rss = float(resid @ resid)
    df = n - p

    has_intercept = any(np.all(X[:, j] == X[0, j]) and X[0, j] != 0 for j in range(p))
    tss = float(np.sum((y - y.mean()) ** 2)) if has_intercept else float(y @ y)
    r2 = 1.0 - rss / tss if tss > 0 else 0.0
    adj = 1.0 - (1.0 - r2) * (n - 1) / df if has_intercept else 1.0 - (1.0 - r2) * n / df

    sigma2 = rss / df
    rinv = np.linalg.solve(r, np.eye(p))
    cov = sigma2 * rinv @ rinv.T
    se = np.sqrt(np.diag(cov))
    with np.errstate(divide="ignore", invalid="ignore"):
        t_values = np.where(se > 0, beta / se, np.inf * np.sign(beta))
    p_values = [2.0 * t_sf(abs(float(t)), df) for t in t_values]

    return OlsFit(
        names=names, coef=beta, se=se, t_values=t_values, p_values=p_values,
        r_squared=r2, adj_r_squared=adj, residual_se=math.sqrt(sigma2),
        n=n, df_residual=df,
    )


class _RandomInterceptProfile:
    """Profiled REML pieces for one candidate variance ratio."""

    def __init__(self, X, y, names, group_index):
        self.X, self.y, self.names = X, y, names
        self.groups = group_index          # list of index arrays
        self.sizes = np.array([len(idx) for idx in group_index], dtype=np.float64)
        self.n, self.p = X.shape

    def whiten(self, lam):
        if lam == 0.0:
            return self.X, self.y
        Xt = self.X.copy()
        yt = self.y.copy()
        for idx, ng in zip(self.groups, self.sizes):
            c = (1.0 - 1.0 / math.sqrt(1.0 + lam * ng)) / ng
            Xt[idx] -= c * self.X[idx].sum(axis=0)
            yt[idx] -= c * self.y[idx].sum()
        return Xt, yt

    def evaluate(self, lam):
        """Return (-2 REML loglik, beta, R, rss, log|H|) at this lambda."""
        Xt, yt = self.whiten(lam)
        beta, r = _qr_solve(Xt, yt, self.names)
        resid = yt - Xt @ beta
        rss = float(resid @ resid)
        ld_h = float(np.sum(np.log1p(lam * self.sizes)))
        ld_a = 2.0 * float(np.sum(np.log(np.abs(np.diag(r)))))
        df = self.n - self.p
        sigma2 = rss / df
        m2 = df * (math.log(2.0 * math.pi) + 1.0) + df * math.log(sigma2) + ld_h + ld_a
        return m2, beta, r, rss, ld_h

    def objective(self, lam):
        return self.evaluate(lam)[0]


def lmm_fit(design, y=None, groups=None, fix_lambda=None) -> LmmFit:
    """REML fit of a random-intercept model grouped by *groups*.

    *groups* is a label per row. The variance ratio is found on a log-scale
    grid and refined by golden section (1e-8 tolerance on log-lambda); a
    boundary solution var_group = 0 is returned as valid with the
    ``boundary`` flag set. ``fix_lambda`` skips the search (used by tests
    and the lambda = 0 equivalence check).
    """
    X, y, names = _as_xy(design, y)
    if groups is None:
        raise ValidationError("group labels are required")
    labels = np.asarray(groups)
    if labels.shape[0] != X.shape[0]:
        raise ValidationError("one group label per row is required")
    unique = sorted(set(labels.tolist()))
    if len(unique) < 2:
        raise ValidationError(f"need at least 2 groups, got {len(unique)}")
    n, p = X.shape
    if n <= p:
        raise ValidationError(f"need more rows than fixed columns (n={n}, p={p})")

    profile = _RandomInterceptProfile(
        X, y, names, [np.flatnonzero(labels == g) for g in unique]
    )

    if fix_lambda is not None:
        if fix_lambda < 0:
            raise ValidationError("lambda must be non-negative")
        lam = float(fix_lambda)
        boundary = lam == 0.0
    else:
        lam, boundary = _search_lambda(profile)

    m2, beta, r, rss, ld_h = profile.evaluate(lam)
    df = n - p
    var_residual = rss / df
    var_group = lam * var_residual

    reml_loglik = -0.5 * m2
    sigma2_ml = rss / n
    ml_loglik = -0.5 * (n * math.log(2.0 * math.pi) + n * math.log(sigma2_ml) + ld_h + n)
    n_par = p + 2
    aic = 2.0 * n_par - 2.0 * ml_loglik
    bic = n_par * math.log(n) - 2.0 * ml_loglik

    rinv = np.linalg.solve(r, np.eye(p))
    cov = var_residual * rinv @ rinv.T
    se = np.sqrt(np.diag(cov))
    df_t = n - p - len(unique)
    p_values = []
    for b, s in zip(beta, se):
        if df_t < 1 or s == 0:
            p_values.append(None)
        else:
            p_values.append(2.0 * t_sf(abs(float(b / s)), df_t))

    fit = LmmFit(
        names=names, coef=beta, se=se, p_values=p_values,
        var_group=var_group, var_residual=var_residual, lam=lam,
        boundary=boundary, reml_loglik=reml_loglik, ml_loglik=ml_loglik,
        aic=aic, bic=bic, icc=var_group / (var_group + var_residual),
        r2_marginal=0.0, r2_conditional=0.0, n=n, n_groups=len(unique),
    )
    fit.r2_marginal, fit.r2_conditional = pseudo_r2(fit, X)
    return fit


def _search_lambda(profile):
    """Grid bracket on log10-lambda, then golden-section; returns (lambda, boundary)."""
    grid = [0.0] + list(10.0 ** np.arange(-8.0, 8.25, 0.25))
    values = [profile.objective(lam) for lam in grid]
    imin = int(np.argmin(values))

    if imin == 0:
        return 0.0, True
    if imin == len(grid) - 1:
        raise ConvergenceError(
            "REML objective still decreasing at the top of the lambda grid",
            {"grid_max": grid[-1], "objective_tail": values[-3:]},
        )

    step = 0.25 * math.log(10.0)
    mid = math.log(grid[imin])
    lo = math.log(grid[imin - 1]) if imin > 1 else mid - step
    hi = math.log(grid[imin + 1])

    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc = profile.objective(math.exp(c))
    fd = profile.objective(math.exp(d))
    while (b - a) > _LOG_LAMBDA_TOL:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = profile.objective(math.exp(c))
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = profile.objective(math.exp(d))
    lam = math.exp(0.5 * (a + b))

    # a minimum this close to the grid floor is a boundary solution in disguise
    if profile.objective(0.0) <= profile.objective(lam):
        return 0.0, True
    return lam, False


def pseudo_r2(fit: LmmFit, design) -> tuple:
    """Marginal and conditional pseudo R-squared of a mixed-model fit.

    The fixed-effect variance is the population variance of X beta over the
    sample; marginal R2 relates it to the total of fixed, group, and
    residual variance, conditional R2 adds the group component on top.
    """
    X = design.matrix if isinstance(design, DesignMatrix) else np.asarray(design)
    eta = X @ fit.coef
    # a constant predictor (intercept-only model) explains exactly nothing
    var_fixed = 0.0 if np.all(eta == eta[0]) else float(np.var(eta))
    total = var_fixed + fit.var_group + fit.var_residual
    return (var_fixed / total, (var_fixed + fit.var_group) / total)
