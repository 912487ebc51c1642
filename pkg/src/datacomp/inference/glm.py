"""Logistic (IRLS) and Gaussian response-surface models."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.optimize import linprog
from scipy.special import expit, xlogy
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ..exceptions import ConvergenceError, SeparationError, SingularDesignError, ValidationError
from .terms import DesignMatrix, TermSpec, as_frame

BINOMIAL = "binomial-logit"
GAUSSIAN = "gaussian-identity"


@dataclass(frozen=True)
class GlmFit:
    """A fitted response surface: coefficients, covariance, and how it got there."""

    terms: TermSpec
    family: str
    coef: np.ndarray
    cov: np.ndarray
    deviance: float
    n: int
    design: DesignMatrix
    n_iter: int = 0
    trace: tuple = ()
    sigma2: float | None = None
    response_digest: str = ""
    converged: bool = True
    extra: dict = field(default_factory=dict)

    @property
    def column_names(self):
        return tuple(self.design.feature_names_out_)

    @property
    def se(self):
        return np.sqrt(np.clip(np.diag(self.cov), 0.0, None))

    def design_matrix(self, X):
        return self.design.transform(as_frame(X))

    def linear_predictor(self, X):
        return self.design_matrix(X) @ self.coef

    def predict(self, X):
        eta = self.linear_predictor(X)
        return expit(eta) if self.family == BINOMIAL else eta

    def to_dict(self):
        return {
            "family": self.family,
            "terms": self.terms.names,
            "columns": list(self.column_names),
            "coefficients": dict(zip(self.column_names, map(float, self.coef))),
            "std_errors": dict(zip(self.column_names, map(float, self.se))),
            "deviance": float(self.deviance),
            "n": self.n,
            "sigma2": None if self.sigma2 is None else float(self.sigma2),
            "converged": self.converged,
            "n_iter": self.n_iter,
            "trace": [dict(t) for t in self.trace],
        }


def _digest(y):
    return hashlib.sha1(np.ascontiguousarray(y, dtype=float).tobytes()).hexdigest()


def check_full_rank(X, names):
    """Raise :class:`SingularDesignError` naming the columns a pivoted QR finds dependent."""
    n, k = X.shape
    if n < k:
        raise SingularDesignError(f"fewer observations ({n}) than columns ({k})", names)
    _, r, piv = scipy.linalg.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    tol = max(n, k) * np.finfo(float).eps * (diag[0] if diag.size else 0.0) * 1e3
    rank = int(np.sum(diag > tol))
    if rank < k:
        bad = [names[i] for i in sorted(piv[rank:])]
        raise SingularDesignError(f"design is rank deficient; collinear column(s): {bad}", bad)


def binomial_deviance(y, mu):
    return float(-2.0 * np.sum(xlogy(y, mu) + xlogy(1.0 - y, 1.0 - mu)))


def is_separated(X, y):
    """Linear-programming test for complete or quasi-complete separation.

    Looks for a nonzero direction ``b`` with ``(2y-1) * x'b >= 0`` for every
    row; if one exists the likelihood keeps rising along it and the MLE is infinite.
    """
    s = 2.0 * np.asarray(y, dtype=float) - 1.0
    A = s[:, None] * X
    res = linprog(
        c=-A.sum(axis=0),
        A_ub=-A,
        b_ub=np.zeros(len(y)),
        bounds=[(-1.0, 1.0)] * X.shape[1],
        method="highs",
    )
    if res.status != 0:
        return False
    return -res.fun > 1e-7 * max(1.0, np.abs(A).sum() / len(y))


def irls_logistic(X, y, *, max_iter=50, tol=1e-8, score_tol=1e-6, divergence_threshold=1e4, names=None):
    """Maximise the Bernoulli likelihood by IRLS with step-halving.

    Starts from ``beta = 0``. Stops once the deviance changes by less than
    ``tol`` and the score equations ``X'(y - p)`` are within ``score_tol``.
    Returns ``(beta, cov, deviance, n_iter, trace)``.
    """
    n, k = X.shape
    names = list(names) if names is not None else [f"x{i}" for i in range(k)]
    check_full_rank(X, names)
    beta = np.zeros(k)
    mu = np.full(n, 0.5)
    dev = binomial_deviance(y, mu)
    trace = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        w = mu * (1.0 - mu)
        if np.any(w <= 0):
            break
        eta = X @ beta
        z = eta + (y - mu) / w
        sw = np.sqrt(w)
        new_beta = np.linalg.lstsq(X * sw[:, None], z * sw, rcond=None)[0]
        new_mu = expit(X @ new_beta)
        new_dev = binomial_deviance(y, new_mu)
        halvings = 0
        while new_dev > dev + 1e-12 * (1.0 + abs(dev)) and halvings < 30:
            new_beta = 0.5 * (beta + new_beta)
            new_mu = expit(X @ new_beta)
            new_dev = binomial_deviance(y, new_mu)
            halvings += 1
        change = dev - new_dev
        beta, mu, dev = new_beta, new_mu, new_dev
        score = float(np.max(np.abs(X.T @ (y - mu))))
        trace.append({"iteration": it, "deviance": dev, "change": change, "halvings": halvings, "max_score": score})
        if not np.all(np.isfinite(beta)):
            break
        if abs(change) < tol and score < score_tol:
            converged = True
            break
        if np.max(np.abs(beta)) > divergence_threshold:
            break

    edge = np.minimum(mu, 1.0 - mu)
    if np.all(edge < 1e-10) or not np.all(np.isfinite(beta)) or np.max(np.abs(beta)) > divergence_threshold:
        raise SeparationError("fitted probabilities collapse to 0/1: the data are separable")
    if np.any(edge < 1e-8) or not converged:
        if is_separated(X, y):
            raise SeparationError("complete or quasi-complete separation detected")
    if not converged:
        raise ConvergenceError(f"IRLS did not converge in {max_iter} iterations", trace)

    w = mu * (1.0 - mu)
    info = X.T @ (X * w[:, None])
    cov = np.linalg.inv(info)
    cov = 0.5 * (cov + cov.T)
    return beta, cov, dev, it, trace


def _check_xy(X, y, design):
    X = as_frame(X)
    y = np.asarray(y, dtype=float).ravel()
    if len(X) != len(y):
        raise ValidationError(f"X has {len(X)} rows but y has {len(y)}")
    if not np.all(np.isfinite(y)):
        raise ValidationError("responses must be finite")
    design.fit(X)
    return design.transform(X), y


class LogisticGLM(ClassifierMixin, BaseEstimator):
    """Binomial-logit response surface fitted by IRLS.

    ``terms`` is a :class:`TermSpec` or list of term strings such as
    ``["snr", "shield", "snr:shield", "snr^2"]``; the intercept is implicit.
    """

    def __init__(self, terms=None, categorical=(), levels=None, max_iter=50, tol=1e-8,
                 divergence_threshold=1e4):
        self.terms = terms
        self.categorical = categorical
        self.levels = levels
        self.max_iter = max_iter
        self.tol = tol
        self.divergence_threshold = divergence_threshold

    def fit(self, X, y):
        design = DesignMatrix(self.terms, self.categorical, self.levels)
        Xm, y = _check_xy(X, y, design)
        if not np.all((y == 0) | (y == 1)):
            raise ValidationError("logistic responses must be 0/1")
        names = list(design.feature_names_out_)
        beta, cov, dev, n_iter, trace = irls_logistic(
            Xm, y, max_iter=self.max_iter, tol=self.tol,
            divergence_threshold=self.divergence_threshold, names=names,
        )
        self.fit_ = GlmFit(
            terms=design.term_spec_, family=BINOMIAL, coef=beta, cov=cov, deviance=dev,
            n=len(y), design=design, n_iter=n_iter, trace=tuple(trace),
            response_digest=_digest(y),
        )
        self.coef_ = beta
        self.cov_ = cov
        self.deviance_ = dev
        self.n_iter_ = n_iter
        self.classes_ = np.array([0, 1])
        return self

    def decision_function(self, X):
        check_is_fitted(self, "fit_")
        return self.fit_.linear_predictor(X)

    def predict_proba(self, X):
        p = expit(self.decision_function(X))
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        return (self.decision_function(X) > 0).astype(int)


class GaussianGLM(RegressorMixin, BaseEstimator):
    """Ordinary least squares response surface with ``sigma2 = RSS / (n - k)``."""

    def __init__(self, terms=None, categorical=(), levels=None, nonnegative=True):
        self.terms = terms
        self.categorical = categorical
        self.levels = levels
        self.nonnegative = nonnegative

    def fit(self, X, y):
        design = DesignMatrix(self.terms, self.categorical, self.levels)
        Xm, y = _check_xy(X, y, design)
        if self.nonnegative and np.any(y < 0):
            raise ValidationError("absolute misses must be nonnegative")
        names = list(design.feature_names_out_)
        n, k = Xm.shape
        if n <= k:
            raise SingularDesignError(f"need more observations ({n}) than columns ({k})", names)
        check_full_rank(Xm, names)
        beta = np.linalg.lstsq(Xm, y, rcond=None)[0]
        resid = y - Xm @ beta
        rss = float(resid @ resid)
        sigma2 = rss / (n - k)
        cov = sigma2 * np.linalg.inv(Xm.T @ Xm)
        cov = 0.5 * (cov + cov.T)
        self.fit_ = GlmFit(
            terms=design.term_spec_, family=GAUSSIAN, coef=beta, cov=cov, deviance=rss,
            n=n, design=design, n_iter=1, sigma2=sigma2, response_digest=_digest(y),
        )
        self.coef_ = beta
        self.cov_ = cov
        self.sigma2_ = sigma2
        self.deviance_ = rss
        return self

    def predict(self, X):
        check_is_fitted(self, "fit_")
        return self.fit_.linear_predictor(X)


def fit_logistic(X, y, terms, **kwargs):
    return LogisticGLM(terms, **kwargs).fit(X, y).fit_


def fit_linear(X, y, terms, **kwargs):
    return GaussianGLM(terms, **kwargs).fit(X, y).fit_


def refit(fit, X, y, terms):
    """Fit ``terms`` on the same data with the same family and categorical coding."""
    d = fit.design
    kwargs = {"categorical": tuple(d.levels_), "levels": dict(d.levels_)}
    if fit.family == BINOMIAL:
        return fit_logistic(X, y, terms, **kwargs)
    return fit_linear(X, y, terms, **kwargs)
