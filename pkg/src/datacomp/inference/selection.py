"""Likelihood-ratio tests and hierarchical backward elimination."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
from scipy.stats import chi2

from ..exceptions import ValidationError
from .glm import BINOMIAL, GAUSSIAN, fit_linear, fit_logistic, refit
from .terms import TermSpec

# Deviance orderings violated by less than this are treated as convergence noise.
_NOISE = 1e-6


class LRTResult(NamedTuple):
    statistic: float
    df: int
    p: float


def likelihood_ratio_test(full, reduced):
    """Compare nested fits on the same data; ``p`` is the chi-square upper tail."""
    if full.family != reduced.family:
        raise ValidationError("models come from different families")
    if full.n != reduced.n or full.response_digest != reduced.response_digest:
        raise ValidationError("models were fitted to different data")
    if not reduced.terms.issubset(full.terms):
        extra = sorted(set(reduced.terms.names) - set(full.terms.names))
        raise ValidationError(f"models are not nested; reduced has extra term(s) {extra}")
    if not set(reduced.column_names) <= set(full.column_names):
        raise ValidationError("models are not nested at the column level")
    df = len(full.coef) - len(reduced.coef)
    if full.family == GAUSSIAN:
        # Gaussian likelihood ratio with the variance profiled out
        if full.deviance <= 0:
            stat = 0.0 if reduced.deviance <= 0 else np.inf
        else:
            stat = full.n * np.log(reduced.deviance / full.deviance)
    else:
        stat = reduced.deviance - full.deviance
    if stat < 0:
        if stat < -_NOISE * max(1.0, abs(full.deviance)):
            raise ValidationError(f"reduced model fits better than the full one (statistic {stat:.3g})")
        stat = 0.0
    p = 1.0 if df == 0 or stat == 0 else float(chi2.sf(stat, df))
    return LRTResult(float(stat), int(df), p)


class SelectionResult(NamedTuple):
    fit: object
    lack_of_fit_p: float
    full_fit: object
    dropped: list
    steps: list


def default_pool(continuous=(), categorical=(), interactions=2):
    return TermSpec.full(continuous, categorical, quadratic=True, interactions=interactions)


def select_model(X, y, pool, alpha=0.05, family=BINOMIAL, categorical=(), levels=None):
    """Backward elimination over higher-order terms.

    Each round drops the droppable higher-order term (not contained in another
    remaining term) with the largest likelihood-ratio p-value above ``alpha``.
    Main effects are always kept. The result must pass a lack-of-fit test
    against the full pool; otherwise the last drops are undone until it does.
    """
    if not 0 < alpha < 1:
        raise ValidationError("alpha must lie in (0, 1)")
    pool = pool if isinstance(pool, TermSpec) else TermSpec(pool)
    fitter = fit_logistic if family == BINOMIAL else fit_linear
    full = fitter(X, y, pool, categorical=categorical, levels=levels)
    current, current_terms = full, pool
    history = [current_terms]
    dropped, steps = [], []
    while True:
        candidates = current_terms.droppable()
        if not candidates:
            break
        tests = []
        for term in candidates:
            smaller = refit(full, X, y, current_terms.without(term))
            tests.append((likelihood_ratio_test(current, smaller).p, term.name, term, smaller))
        p, _, term, smaller = max(tests, key=lambda t: (t[0], t[1]))
        steps.append({"candidates": {t[1]: t[0] for t in tests}})
        if p <= alpha:
            break
        dropped.append(term.name)
        steps[-1]["dropped"] = term.name
        current, current_terms = smaller, current_terms.without(term)
        history.append(current_terms)

    lof = likelihood_ratio_test(full, current).p
    while lof <= alpha and len(history) > 1:
        history.pop()
        restored = dropped.pop()
        steps.append({"restored": restored, "lack_of_fit_p": lof})
        current_terms = history[-1]
        current = full if len(history) == 1 else refit(full, X, y, current_terms)
        lof = likelihood_ratio_test(full, current).p
    return SelectionResult(current, lof, full, dropped, steps)
