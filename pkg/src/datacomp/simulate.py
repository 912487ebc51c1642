"""Synthetic competitions with a known logistic truth, for end-to-end checks."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy.special import expit

from ._utils import stage_rng, stable_int
from .domain import NO_SOURCE, PredictionEntry, RunRecord, Submission
from .exceptions import ValidationError
from .scoring import EPOCH


@dataclass(frozen=True)
class LinearPredictor:
    """``eta(x) = sum(coef * column)`` over named columns.

    Column names follow the design-matrix labels: ``"1"`` for the intercept,
    ``"snr"``, ``"snr^2"``, ``"bg=B"`` for a level indicator, and
    ``"snr:shield"`` for products.
    """

    coefficients: Mapping = field(default_factory=lambda: {"1": 0.0})

    def __post_init__(self):
        object.__setattr__(self, "coefficients", {k: float(v) for k, v in dict(self.coefficients).items()})

    def factors(self):
        out = set()
        for name in self.coefficients:
            for part in name.split(":"):
                if part == "1":
                    continue
                out.add(part.split("=")[0].removesuffix("^2"))
        return out

    def evaluate(self, rows):
        rows = list(rows)
        eta = np.zeros(len(rows))
        for name, c in self.coefficients.items():
            col = np.ones(len(rows))
            for part in name.split(":"):
                if part == "1":
                    continue
                if "=" in part:
                    f, level = part.split("=", 1)
                    col = col * np.array([str(r[f]) == level for r in rows], dtype=float)
                elif part.endswith("^2"):
                    f = part[:-2]
                    col = col * np.array([float(r[f]) for r in rows]) ** 2
                else:
                    col = col * np.array([float(r[part]) for r in rows])
            eta += c * col
        return eta


@dataclass(frozen=True)
class SyntheticTruth:
    """Per-category outcome models plus per-team capability offsets.

    ``detect`` and ``identify`` give logits of P(detect) and P(identify | detect);
    ``location_log_scale`` gives the log of the half-normal miss scale;
    ``no_source`` gives the logit of answering NO_SOURCE correctly. A team's
    offset is added to the detect, identify, and no-source logits and
    subtracted from the log miss scale, so larger offsets are always better.
    """

    detect: Mapping
    identify: Mapping
    teams: Mapping
    location_log_scale: Mapping = field(default_factory=dict)
    no_source: LinearPredictor = field(default_factory=lambda: LinearPredictor({"1": 2.0}))
    confusion: Mapping = field(default_factory=dict)

    def check(self, factor_space, catalog):
        for label, models in (("detect", self.detect), ("identify", self.identify),
                              ("location_log_scale", self.location_log_scale)):
            for cat, model in models.items():
                if cat not in catalog.sources:
                    raise ValidationError(f"truth.{label}: unknown category {cat!r}")
                self._check_factors(model, factor_space, f"truth.{label}[{cat}]")
        for cat in catalog.sources:
            if cat not in self.detect or cat not in self.identify:
                raise ValidationError(f"truth lacks detect/identify models for {cat!r}")
        self._check_factors(self.no_source, factor_space, "truth.no_source")
        if not self.teams:
            raise ValidationError("truth defines no teams")
        for cat, weights in self.confusion.items():
            for other, w in weights.items():
                if other not in catalog.sources or other == cat or w < 0:
                    raise ValidationError(f"truth.confusion[{cat}]: bad entry {other!r}")
        return self

    @staticmethod
    def _check_factors(model, factor_space, where):
        unknown = model.factors() - set(factor_space.names)
        if unknown:
            raise ValidationError(f"{where} references unknown factor(s) {sorted(unknown)}")

    @classmethod
    def from_dict(cls, data):
        def models(d):
            return {k: LinearPredictor(v) for k, v in d.items()}

        return cls(
            detect=models(data["detect"]),
            identify=models(data["identify"]),
            teams={k: float(v) for k, v in data["teams"].items()},
            location_log_scale=models(data.get("location_log_scale", {})),
            no_source=LinearPredictor(data.get("no_source", {"1": 2.0})),
            confusion={k: dict(v) for k, v in data.get("confusion", {}).items()},
        )

    def to_dict(self):
        return {
            "detect": {k: dict(v.coefficients) for k, v in self.detect.items()},
            "identify": {k: dict(v.coefficients) for k, v in self.identify.items()},
            "teams": dict(self.teams),
            "location_log_scale": {k: dict(v.coefficients) for k, v in self.location_log_scale.items()},
            "no_source": dict(self.no_source.coefficients),
            "confusion": {k: dict(v) for k, v in self.confusion.items()},
        }


@dataclass(frozen=True)
class SupersetSpec:
    runs_per_category: Mapping
    replicates: int = 1
    location_range_s: tuple = (5.0, 60.0)

    def __post_init__(self):
        object.__setattr__(self, "runs_per_category", {k: int(v) for k, v in dict(self.runs_per_category).items()})
        lo, hi = (float(v) for v in self.location_range_s)
        if not 0 <= lo < hi:
            raise ValidationError("location_range_s needs 0 <= lo < hi")
        object.__setattr__(self, "location_range_s", (lo, hi))
        if self.replicates < 1:
            raise ValidationError("replicates must be >= 1")

    @classmethod
    def from_dict(cls, data):
        return cls(
            data["runs_per_category"],
            int(data.get("replicates", 1)),
            tuple(data.get("location_range_s", (5.0, 60.0))),
        )

    def to_dict(self):
        return {
            "runs_per_category": dict(self.runs_per_category),
            "replicates": self.replicates,
            "location_range_s": list(self.location_range_s),
        }


def _draw_values(factors, rng):
    out = {}
    for f in factors:
        if f.is_continuous:
            out[f.name] = float(rng.uniform(f.lo, f.hi))
        else:
            out[f.name] = f.levels[int(rng.integers(len(f.levels)))]
    return out


def simulate_superset(factor_space, catalog, spec, seed):
    """Candidate runs drawn uniformly over factor ranges and levels.

    Runs come in replicate blocks that share modeled factor values and differ in
    nuisance values and true location. Run ids are assigned after shuffling so
    they carry no information about the category.
    """
    rng = stage_rng(seed, "simulate-superset")
    modeled = factor_space.modeled
    nuisance = [f for f in factor_space if f.nuisance]
    lo, hi = spec.location_range_s
    drafts = []
    for cat in catalog.all_categories:
        n = spec.runs_per_category.get(cat, 0)
        for i in range(n):
            if i % spec.replicates == 0:
                scenario = _draw_values(modeled, rng)
            values = dict(scenario)
            values.update(_draw_values(nuisance, rng))
            loc = float(rng.uniform(lo, hi)) if cat != NO_SOURCE else None
            drafts.append((values, cat, loc))
    order = rng.permutation(len(drafts))
    width = max(6, len(str(len(drafts))))
    return [
        RunRecord(f"run{k:0{width}d}", drafts[j][0], drafts[j][1], drafts[j][2])
        for k, j in enumerate(order)
    ]


def _pick_wrong(cat, catalog, truth, rng):
    others = [c for c in catalog.sources if c != cat]
    if not others:
        return None
    weights = truth.confusion.get(cat)
    if weights:
        w = np.array([float(weights.get(c, 0.0)) for c in others])
        if w.sum() > 0:
            return others[int(rng.choice(len(others), p=w / w.sum()))]
    return others[int(rng.integers(len(others)))]


def simulate_answers(truth, runs, team, catalog, rng):
    """One team's answers for ``runs``, drawn from the truth models with its offset."""
    offset = truth.teams[team]
    runs = list(runs)
    out = {}
    by_cat = {}
    for r in runs:
        by_cat.setdefault(r.true_category, []).append(r)
    for cat in sorted(by_cat):
        group = by_cat[cat]
        rows = [r.factor_values for r in group]
        if cat == NO_SOURCE:
            p_ok = expit(truth.no_source.evaluate(rows) + offset)
            u = rng.random(len(group))
            for r, p, ui in zip(group, p_ok, u):
                if ui < p:
                    out[r.run_id] = PredictionEntry(r.run_id, NO_SOURCE)
                else:
                    claim = catalog.sources[int(rng.integers(catalog.k))]
                    out[r.run_id] = PredictionEntry(r.run_id, claim, float(rng.uniform(0.0, 60.0)))
            continue
        p_det = expit(truth.detect[cat].evaluate(rows) + offset)
        p_id = expit(truth.identify[cat].evaluate(rows) + offset)
        loc_model = truth.location_log_scale.get(cat)
        log_scale = loc_model.evaluate(rows) if loc_model is not None else np.zeros(len(group))
        with np.errstate(over="ignore"):
            scale = np.exp(log_scale - offset)
        u_det = rng.random(len(group))
        u_id = rng.random(len(group))
        noise = np.abs(rng.standard_normal(len(group)))
        sign = np.where(rng.random(len(group)) < 0.5, -1.0, 1.0)
        for i, r in enumerate(group):
            if not u_det[i] < p_det[i]:
                out[r.run_id] = PredictionEntry(r.run_id, NO_SOURCE)
                continue
            claim = cat if u_id[i] < p_id[i] else (_pick_wrong(cat, catalog, truth, rng) or cat)
            miss = scale[i] * noise[i] if scale[i] > 0 else 0.0
            out[r.run_id] = PredictionEntry(r.run_id, claim, r.true_location_s + sign[i] * miss)
    return out


@dataclass
class SimulatedCompetition:
    superset: list
    answers: dict  # team -> run_id -> PredictionEntry

    def submission_for(self, team, run_ids, timestamp=EPOCH):
        table = self.answers[team]
        return Submission(team, timestamp, tuple(table[r] for r in run_ids))


def simulate_competition(truth, factor_space, catalog, spec, seed):
    """Superset plus every team's answers to every superset run, seed-deterministic."""
    truth.check(factor_space, catalog)
    superset = simulate_superset(factor_space, catalog, spec, seed)
    answers = {
        team: simulate_answers(truth, superset, team, catalog,
                               stage_rng(seed, "simulate-teams", stable_int(team)))
        for team in sorted(truth.teams)
    }
    return SimulatedCompetition(superset, answers)
