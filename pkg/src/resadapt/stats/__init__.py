"""Inferential statistics: rank tests, OLS, random-intercept mixed models."""

from .design import DesignMatrix, build_design, dependent_columns, parse_formula
from .linear import LmmFit, OlsFit, lmm_fit, ols_fit, pseudo_r2
from .presets import PRESETS, run_preset
from .rank import KwResult, eta_squared, kruskal_wallis, pearson
from .special import chi2_sf, reg_beta, reg_gamma_p, reg_gamma_q, t_sf

__all__ = [
    "DesignMatrix", "build_design", "dependent_columns", "parse_formula",
    "LmmFit", "OlsFit", "lmm_fit", "ols_fit", "pseudo_r2",
    "PRESETS", "run_preset",
    "KwResult", "eta_squared", "kruskal_wallis", "pearson",
    "chi2_sf", "reg_beta", "reg_gamma_p", "reg_gamma_q", "t_sf",
]
