"""Prediction surfaces, team-difference surfaces, and probability of agreement."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy.special import expit
from scipy.stats import norm

from ..exceptions import ValidationError
from .glm import BINOMIAL
from .terms import as_frame

BUCKETS = ("<0.01", "[0.01,0.05)", "[0.05,0.1)", "none")


def make_grid(x_factor, x_values, y_factor, y_values, fixed=None):
    """Cartesian grid over two displayed factors, other factors held at ``fixed``."""
    xs, ys = np.meshgrid(np.asarray(x_values, float), np.asarray(y_values, float), indexing="xy")
    grid = pd.DataFrame({x_factor: xs.ravel(), y_factor: ys.ravel()})
    for name, value in (fixed or {}).items():
        grid[name] = value
    return grid


def default_grid(factor_space, x_factor, y_factor, fixed=None, n=50):
    fx, fy = factor_space[x_factor], factor_space[y_factor]
    return make_grid(
        x_factor, np.linspace(fx.lo, fx.hi, n), y_factor, np.linspace(fy.lo, fy.hi, n), fixed
    )


@dataclass(frozen=True)
class Surface:
    grid: pd.DataFrame
    estimate: np.ndarray
    se_link: np.ndarray
    se: np.ndarray  # on the response scale
    lower: np.ndarray
    upper: np.ndarray
    level: float = 0.95


def _link_and_se(fit, grid):
    Xg = fit.design_matrix(grid)
    eta = Xg @ fit.coef
    var = np.einsum("ij,jk,ik->i", Xg, fit.cov, Xg)
    return eta, np.sqrt(np.clip(var, 0.0, None))


def predict_surface(fit, grid, level=0.95):
    """Fitted mean and pointwise confidence band over ``grid``.

    Binomial bands are built on the logit scale and mapped back, so they stay
    inside (0, 1); Gaussian bands are symmetric on the response scale.
    """
    if not 0 < level < 1:
        raise ValidationError("level must lie in (0, 1)")
    grid = as_frame(grid)
    eta, se_eta = _link_and_se(fit, grid)
    z = norm.ppf(0.5 + level / 2.0)
    if fit.family == BINOMIAL:
        p = expit(eta)
        return Surface(grid, p, se_eta, p * (1.0 - p) * se_eta,
                       expit(eta - z * se_eta), expit(eta + z * se_eta), level)
    return Surface(grid, eta, se_eta, se_eta, eta - z * se_eta, eta + z * se_eta, level)


def bonferroni(raw_p, m):
    return np.minimum(1.0, m * np.asarray(raw_p, dtype=float))


def significance_bucket(adjusted_p):
    p = np.asarray(adjusted_p, dtype=float)
    out = np.full(p.shape, "none", dtype=object)
    out[p < 0.1] = BUCKETS[2]
    out[p < 0.05] = BUCKETS[1]
    out[p < 0.01] = BUCKETS[0]
    out[np.isnan(p)] = "none"
    return out


@dataclass(frozen=True)
class DifferenceSurface:
    grid: pd.DataFrame
    delta: np.ndarray
    se: np.ndarray
    raw_p: np.ndarray
    adj_p: np.ndarray
    bucket: np.ndarray
    degenerate: np.ndarray
    scale: str = "probability"


def _diff_parts(fit_a, fit_b, grid, scale):
    for f in (fit_a, fit_b):
        if f.family != BINOMIAL:
            raise ValidationError("difference surfaces need binomial fits")
    grid = as_frame(grid)
    eta_a, se_a = _link_and_se(fit_a, grid)
    eta_b, se_b = _link_and_se(fit_b, grid)
    p_a, p_b = expit(eta_a), expit(eta_b)
    delta = p_a - p_b
    if scale == "probability":
        sa = p_a * (1.0 - p_a) * se_a
        sb = p_b * (1.0 - p_b) * se_b
        stat_num = delta
    elif scale == "logit":
        sa, sb = se_a, se_b
        stat_num = eta_a - eta_b
    else:
        raise ValidationError(f"unknown scale {scale!r}")
    return grid, delta, stat_num, np.sqrt(sa * sa + sb * sb)


def difference_surface(fit_a, fit_b, grid, scale="probability"):
    """Pointwise two-sided tests of ``p_a - p_b`` with Bonferroni adjustment over the grid.

    Variances of the two fits are added as if independent. On the probability
    scale each fit's standard error comes from the delta method,
    ``p (1 - p) se(eta)``. Points where both fits are deterministic get NaN p-values.
    """
    grid, delta, num, s = _diff_parts(fit_a, fit_b, grid, scale)
    degenerate = s == 0
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(degenerate, np.nan, num / np.where(degenerate, 1.0, s))
    raw = 2.0 * norm.sf(np.abs(z))
    raw = np.where(degenerate, np.nan, raw)
    adj = bonferroni(raw, len(grid))
    return DifferenceSurface(grid, delta, s, raw, adj, significance_bucket(adj), degenerate, scale)


def probability_of_agreement(fit_a, fit_b, grid, delta=0.05):
    """Normal-approximation probability that the true surfaces differ by at most ``delta``."""
    if not delta > 0:
        raise ValidationError("delta must be positive")
    _, d, _, s = _diff_parts(fit_a, fit_b, grid, "probability")
    return agreement_from_moments(d, s, delta)


def agreement_from_moments(diff, s, delta):
    diff = np.asarray(diff, dtype=float)
    s = np.asarray(s, dtype=float)
    safe = np.where(s > 0, s, 1.0)
    pa = norm.cdf((delta - diff) / safe) - norm.cdf((-delta - diff) / safe)
    limit = (np.abs(diff) <= delta).astype(float)
    return np.clip(np.where(s > 0, pa, limit), 0.0, 1.0)
