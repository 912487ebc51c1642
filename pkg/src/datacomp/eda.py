"""Exploratory outcome summaries and plot-ready exports."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from .domain import NO_SOURCE, SOURCE_CLASSES, OutcomeClass
from .exceptions import ValidationError


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts with row-conditional proportions; rows without data hold NaN."""

    row_labels: tuple
    col_labels: tuple
    counts: np.ndarray
    proportions: np.ndarray

    @classmethod
    def from_counts(cls, row_labels, col_labels, counts):
        counts = np.asarray(counts, dtype=np.int64)
        totals = counts.sum(axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            props = np.where(totals > 0, counts / np.where(totals > 0, totals, 1), np.nan)
        return cls(tuple(row_labels), tuple(col_labels), counts, props)

    @property
    def total(self):
        return int(self.counts.sum())

    def absent_rows(self):
        return [lab for lab, n in zip(self.row_labels, self.counts.sum(axis=1)) if n == 0]

    def long_rows(self):
        """``(true, predicted, count, proportion)`` with ``None`` for absent proportions."""
        out = []
        for i, r in enumerate(self.row_labels):
            for j, c in enumerate(self.col_labels):
                p = self.proportions[i, j]
                out.append((r, c, int(self.counts[i, j]), None if np.isnan(p) else float(p)))
        return out


def _nonempty(outcomes):
    outcomes = list(outcomes)
    if not outcomes:
        raise ValidationError("no outcomes to summarise")
    return outcomes


def detection_confusion(outcomes):
    """2x2 table of source present (S) / absent (NoS) against what was claimed."""
    outcomes = _nonempty(outcomes)
    idx = {"S": 0, "NoS": 1}
    counts = np.zeros((2, 2), dtype=np.int64)
    for o in outcomes:
        truth = "S" if o.is_source_run else "NoS"
        claimed = "S" if o.outcome_class in (OutcomeClass.I, OutcomeClass.D, OutcomeClass.FP) else "NoS"
        counts[idx[truth], idx[claimed]] += 1
    return ConfusionMatrix.from_counts(("S", "NoS"), ("S", "NoS"), counts)


def identification_confusion(outcomes, catalog):
    """True source (rows) against claimed category including NO_SOURCE (columns)."""
    outcomes = _nonempty(outcomes)
    rows = catalog.sources
    cols = catalog.sources + (NO_SOURCE,)
    ri = {c: i for i, c in enumerate(rows)}
    ci = {c: j for j, c in enumerate(cols)}
    counts = np.zeros((len(rows), len(cols)), dtype=np.int64)
    for o in outcomes:
        if not o.is_source_run:
            continue
        if o.true_category not in ri or o.claimed_category not in ci:
            raise ValidationError(f"run {o.run_id}: category outside the catalog")
        counts[ri[o.true_category], ci[o.claimed_category]] += 1
    return ConfusionMatrix.from_counts(rows, cols, counts)


@dataclass(frozen=True)
class AgreementTable:
    counts: np.ndarray  # rows: team A class, columns: team B class, order I, D, X
    labels: tuple = ("I", "D", "X")

    @property
    def total(self):
        return int(self.counts.sum())

    @property
    def fractions(self):
        return self.counts / self.total if self.total else np.full(self.counts.shape, np.nan)

    @property
    def off_diagonal(self):
        return int(self.total - np.trace(self.counts))

    def row_totals(self):
        return self.counts.sum(axis=1)

    def col_totals(self):
        return self.counts.sum(axis=0)

    def transpose(self):
        return AgreementTable(self.counts.T.copy(), self.labels)

    def long_rows(self):
        f = self.fractions
        return [
            (a, b, int(self.counts[i, j]), float(f[i, j]))
            for i, a in enumerate(self.labels)
            for j, b in enumerate(self.labels)
        ]


def _source_only(outcomes):
    return {o.run_id: o for o in outcomes if o.is_source_run}


def team_agreement(outcomes_a, outcomes_b):
    """Cross-tabulate two teams' I/D/X classes over the same source runs."""
    a = _source_only(outcomes_a)
    b = _source_only(outcomes_b)
    if a.keys() != b.keys():
        diff = sorted(a.keys() ^ b.keys())
        raise ValidationError(f"run sets differ; symmetric difference: {diff[:20]}")
    pos = {c: i for i, c in enumerate(SOURCE_CLASSES)}
    counts = np.zeros((3, 3), dtype=np.int64)
    for run_id, oa in a.items():
        counts[pos[oa.outcome_class], pos[b[run_id].outcome_class]] += 1
    return AgreementTable(counts)


@dataclass(frozen=True)
class SourceBreakdown:
    category: str
    team_id: str
    n: int
    p_i: float
    p_d: float
    p_x: float


def outcome_by_source(outcome_sets, catalog, team_scores=None):
    """Per source and team, the share of runs landing in I, D, and X.

    Teams are listed by ``team_scores`` descending when given, otherwise by
    overall share of correct identifications.
    """
    run_sets = {t: {o.run_id for o in outs} for t, outs in outcome_sets.items()}
    ref = next(iter(run_sets.values()), set())
    for team, runs in run_sets.items():
        if runs != ref:
            raise ValidationError(f"team {team!r} covers a different run set")
    if team_scores is None:
        team_scores = {}
        for team, outs in outcome_sets.items():
            src = [o for o in outs if o.is_source_run]
            team_scores[team] = sum(o.outcome_class is OutcomeClass.I for o in src) / max(len(src), 1)
    teams = sorted(outcome_sets, key=lambda t: (-team_scores[t], t))
    out = []
    for cat in catalog.sources:
        for team in teams:
            cls = Counter(o.outcome_class for o in outcome_sets[team] if o.true_category == cat)
            n = sum(cls[c] for c in SOURCE_CLASSES)
            if n == 0:
                out.append(SourceBreakdown(cat, team, 0, np.nan, np.nan, np.nan))
                continue
            out.append(
                SourceBreakdown(
                    cat, team, n, cls[OutcomeClass.I] / n, cls[OutcomeClass.D] / n, cls[OutcomeClass.X] / n
                )
            )
    return out


@dataclass(frozen=True)
class ScatterPoint:
    run_id: str
    x: object
    y: object
    outcome: str


def _check_factors(key, *names):
    known = set()
    for r in key:
        known.update(r.factor_values)
    for name in names:
        if name not in known:
            raise ValidationError(f"unknown factor {name!r}")


def export_scatter(outcomes, key, x_factor, y_factor, where=None):
    """One point per run passing ``where(run)``, carrying its outcome class."""
    _check_factors(key, x_factor, y_factor)
    by_run = {o.run_id: o for o in outcomes}
    out = []
    for run in key:
        o = by_run.get(run.run_id)
        if o is None or (where is not None and not where(run)):
            continue
        fv = run.factor_values
        out.append(ScatterPoint(run.run_id, fv.get(x_factor), fv.get(y_factor), str(o.outcome_class)))
    return out


def export_pair_scatter(outcomes_a, outcomes_b, key, x_factor, y_factor, where=None):
    """Two-team variant: the outcome is the class pair ``"A/B"``."""
    _check_factors(key, x_factor, y_factor)
    a = {o.run_id: o for o in outcomes_a}
    b = {o.run_id: o for o in outcomes_b}
    out = []
    for run in key:
        if run.run_id not in a or run.run_id not in b:
            continue
        if where is not None and not where(run):
            continue
        fv = run.factor_values
        pair = f"{a[run.run_id].outcome_class}/{b[run.run_id].outcome_class}"
        out.append(ScatterPoint(run.run_id, fv.get(x_factor), fv.get(y_factor), pair))
    return out


def make_filter(category=None, split=None, **factor_equals):
    """Predicate over runs: exact matches on category, split, and factor values."""

    def where(run):
        if category is not None and run.true_category != category:
            return False
        if split is not None and str(run.split) != str(split):
            return False
        for name, value in factor_equals.items():
            v = run.factor_values.get(name)
            if v != value and str(v) != str(value):
                try:
                    if float(v) == float(value):
                        continue
                except (TypeError, ValueError):
                    pass
                return False
        return True

    return where
