"""Model terms and their expansion into design-matrix columns."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np
import pandas as pd
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ..exceptions import ValidationError


@dataclass(frozen=True, order=True)
class Term:
    """Product of factors; ``()`` is the intercept, ``("x", "x")`` a quadratic."""

    factors: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(sorted(self.factors)))

    @property
    def order(self):
        return len(self.factors)

    @property
    def is_intercept(self):
        return not self.factors

    @property
    def is_quadratic(self):
        return self.order == 2 and self.factors[0] == self.factors[1]

    @property
    def is_higher_order(self):
        return self.order >= 2

    @property
    def name(self):
        if not self.factors:
            return "1"
        if self.is_quadratic:
            return f"{self.factors[0]}^2"
        return ":".join(self.factors)

    def contains(self, other):
        """True when ``other``'s factors are a proper sub-multiset of this term's."""
        if other.order >= self.order:
            return False
        mine = list(self.factors)
        for f in other.factors:
            if f not in mine:
                return False
            mine.remove(f)
        return True

    @classmethod
    def parse(cls, text):
        text = text.strip()
        if text in ("1", "intercept"):
            return cls(())
        if text.endswith("^2"):
            base = text[:-2]
            return cls((base, base))
        parts = tuple(p.strip() for p in text.split(":"))
        if len(set(parts)) != len(parts):
            raise ValidationError(f"interaction {text!r} repeats a factor")
        return cls(parts)

    def __str__(self):
        return self.name


class TermSpec:
    """Ordered, duplicate-free term list that always starts with the intercept."""

    def __init__(self, terms=()):
        parsed = [t if isinstance(t, Term) else Term.parse(t) for t in terms]
        out = [Term(())]
        for t in parsed:
            if t.order >= 2 and not t.is_quadratic and len(set(t.factors)) != t.order:
                raise ValidationError(f"interaction {t.name!r} repeats a factor")
            if t in out:
                if t.is_intercept:
                    continue
                raise ValidationError(f"duplicate term {t.name!r}")
            out.append(t)
        self.terms = tuple(out)

    @classmethod
    def full(cls, continuous=(), categorical=(), quadratic=True, interactions=2):
        """Main effects, quadratics in continuous factors, and interactions up to ``interactions``-way."""
        factors = list(continuous) + list(categorical)
        terms = [Term((f,)) for f in factors]
        if quadratic:
            terms += [Term((f, f)) for f in continuous]
        for k in range(2, interactions + 1):
            terms += [Term(c) for c in combinations(factors, k)]
        return cls(terms)

    @classmethod
    def mains(cls, factors):
        return cls([Term((f,)) for f in factors])

    def __iter__(self):
        return iter(self.terms)

    def __len__(self):
        return len(self.terms)

    def __contains__(self, term):
        if isinstance(term, str):
            term = Term.parse(term)
        return term in self.terms

    def __eq__(self, other):
        return isinstance(other, TermSpec) and set(self.terms) == set(other.terms)

    def __hash__(self):
        return hash(frozenset(self.terms))

    def __repr__(self):
        return f"TermSpec({[t.name for t in self.terms]})"

    @property
    def names(self):
        return [t.name for t in self.terms]

    @property
    def factors(self):
        seen = []
        for t in self.terms:
            for f in t.factors:
                if f not in seen:
                    seen.append(f)
        return seen

    def issubset(self, other):
        return set(self.terms) <= set(other.terms)

    def without(self, term):
        if isinstance(term, str):
            term = Term.parse(term)
        return TermSpec([t for t in self.terms if t != term])

    def with_term(self, term):
        if isinstance(term, str):
            term = Term.parse(term)
        return TermSpec(list(self.terms) + [term])

    def droppable(self):
        """Higher-order terms not contained in any other present term."""
        return [
            t for t in self.terms
            if t.is_higher_order and not any(o.contains(t) for o in self.terms)
        ]

    def higher_order(self):
        return [t for t in self.terms if t.is_higher_order]


def as_frame(X):
    """Coerce records, column mappings, or a DataFrame into a DataFrame."""
    if isinstance(X, pd.DataFrame):
        return X
    if isinstance(X, dict):
        return pd.DataFrame(X)
    rows = list(X)
    if rows and hasattr(rows[0], "factor_values"):
        rows = [dict(r.factor_values) for r in rows]
    return pd.DataFrame([dict(r) for r in rows])


class DesignMatrix(TransformerMixin, BaseEstimator):
    """Expand a factor table into model columns for a :class:`TermSpec`.

    Categorical factors become indicator columns with the first level as the
    reference. A factor is categorical if listed in ``categorical`` or if its
    column is non-numeric; its levels come from ``levels`` or the sorted
    values seen in ``fit``.
    """

    def __init__(self, terms=None, categorical=(), levels=None):
        self.terms = terms
        self.categorical = categorical
        self.levels = levels

    def _spec(self):
        return self.terms if isinstance(self.terms, TermSpec) else TermSpec(self.terms or ())

    def fit(self, X, y=None):
        X = as_frame(X)
        spec = self._spec()
        given = dict(self.levels or {})
        self.term_spec_ = spec
        self.levels_ = {}
        for f in spec.factors:
            if f not in X.columns:
                raise ValidationError(f"factor {f!r} missing from data")
            col = X[f]
            is_cat = f in (self.categorical or ()) or f in given or not pd.api.types.is_numeric_dtype(col)
            if is_cat:
                levels = given.get(f)
                if levels is None:
                    levels = sorted({str(v) for v in col})
                self.levels_[f] = tuple(str(v) for v in levels)
        for t in spec:
            if t.is_quadratic and t.factors[0] in self.levels_:
                raise ValidationError(f"quadratic term on categorical factor {t.factors[0]!r}")
        names, owners = [], []
        for i, t in enumerate(spec):
            for label in self._labels(t):
                names.append(label)
                owners.append(i)
        self.feature_names_out_ = np.array(names, dtype=object)
        self.column_terms_ = np.array(owners)
        self.n_features_in_ = len(spec.factors)
        return self

    def _blocks_labels(self, f):
        if f in self.levels_:
            return [f"{f}={lev}" for lev in self.levels_[f][1:]]
        return [f]

    def _labels(self, term):
        if term.is_intercept:
            return ["1"]
        if term.is_quadratic:
            return [f"{term.factors[0]}^2"]
        labels = [""]
        for f in term.factors:
            labels = [f"{a}:{b}" if a else b for a in labels for b in self._blocks_labels(f)]
        return labels

    def _block(self, X, f):
        col = X[f]
        if f in self.levels_:
            values = col.astype(str).to_numpy()
            unknown = set(values) - set(self.levels_[f])
            if unknown:
                raise ValidationError(f"factor {f!r}: unseen level(s) {sorted(unknown)}")
            return np.column_stack([(values == lev).astype(float) for lev in self.levels_[f][1:]]) \
                if len(self.levels_[f]) > 1 else np.zeros((len(values), 0))
        values = pd.to_numeric(col, errors="coerce").to_numpy(dtype=float)
        if not np.all(np.isfinite(values)):
            raise ValidationError(f"factor {f!r} has missing or non-numeric values")
        return values[:, None]

    def transform(self, X):
        check_is_fitted(self, "feature_names_out_")
        X = as_frame(X)
        missing = [f for f in self.term_spec_.factors if f not in X.columns]
        if missing:
            raise ValidationError(f"grid/data is missing factor(s) {missing}")
        n = len(X)
        cache = {f: self._block(X, f) for f in self.term_spec_.factors}
        cols = []
        for t in self.term_spec_:
            if t.is_intercept:
                cols.append(np.ones((n, 1)))
                continue
            if t.is_quadratic:
                cols.append(cache[t.factors[0]] ** 2)
                continue
            block = np.ones((n, 1))
            for f in t.factors:
                b = cache[f]
                block = (block[:, :, None] * b[:, None, :]).reshape(n, -1)
            cols.append(block)
        return np.hstack(cols) if cols else np.zeros((n, 0))

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "feature_names_out_")
        return self.feature_names_out_
