"""Construction of training, public-test, and private-test sets.

Sets are drawn from a finite superset of candidate runs. TRAIN is confined to
the narrowest factor ranges and fewest categorical levels, PUBLIC to wider ones,
and PRIVATE covers everything; holes carve boxes out of selected splits.
Within the eligible runs, scenarios inside the informative band are drawn
with weight ``w_in`` and the rest with ``w_out``.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from ._utils import stage_rng
from .domain import NO_SOURCE, SPLIT_ORDER, TEST_SPLITS, Split
from .exceptions import InfeasibleDesignError, ValidationError

# Success probabilities of the two-point D-optimal design for a one-factor
# logistic model.
D_OPT_P_LO = 0.176
D_OPT_P_HI = 0.824


def _logit(p):
    return math.log(p / (1.0 - p))


@dataclass(frozen=True)
class PriorCurve:
    """Anticipated logistic success curve ``P(x) = expit(beta0 + beta1 * x)``."""

    beta0: float
    beta1: float

    def prob(self, x):
        eta = self.beta0 + self.beta1 * np.asarray(x, dtype=float)
        return 1.0 / (1.0 + np.exp(-eta))

    def inverse(self, p):
        if self.beta1 == 0:
            raise ValidationError("degenerate prior: beta1 == 0")
        return (_logit(p) - self.beta0) / self.beta1


def d_optimal_logistic_points(prior):
    """Factor values where ``prior`` reaches success probability 0.176 and 0.824.

    Returned in increasing order regardless of the sign of the slope.
    """
    if prior.beta1 == 0:
        raise ValidationError("degenerate prior: beta1 == 0")
    a = prior.inverse(D_OPT_P_LO)
    b = prior.inverse(D_OPT_P_HI)
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    @property
    def is_empty(self):
        return not self.lo <= self.hi

    def contains(self, x):
        return self.lo <= x <= self.hi

    def intersect(self, other):
        return Interval(max(self.lo, other.lo), min(self.hi, other.hi))


def _where_below(curve, p):
    """Half-line where ``curve`` is below probability ``p``."""
    x = curve.inverse(p)
    return Interval(x, math.inf) if curve.beta1 < 0 else Interval(-math.inf, x)


def _where_above(curve, p):
    x = curve.inverse(p)
    return Interval(-math.inf, x) if curve.beta1 < 0 else Interval(x, math.inf)


def interesting_band(current, dream, factor_range):
    """Range where current capability still fails and dream capability can succeed.

    That is ``P_current(x) < 0.824`` and ``P_dream(x) > 0.176``, clipped to
    ``factor_range``. The result may be empty (``lo > hi``).
    """
    lo, hi = factor_range
    band = Interval(float(lo), float(hi))
    band = band.intersect(_where_below(current, D_OPT_P_HI))
    return band.intersect(_where_above(dream, D_OPT_P_LO))


def _split_set(excludes):
    excludes = {Split(s) for s in excludes}
    if Split.DISCARDED in excludes:
        raise ValidationError("a hole cannot exclude DISCARDED")
    return frozenset(excludes)


@dataclass(frozen=True)
class Hole:
    """Axis-aligned box of factor space kept out of the splits in ``excludes``."""

    bounds: Mapping
    excludes: frozenset

    def __post_init__(self):
        bounds = {k: (float(v[0]), float(v[1])) for k, v in dict(self.bounds).items()}
        for name, (lo, hi) in bounds.items():
            if not lo < hi:
                raise ValidationError(f"hole on {name!r} needs lo < hi")
        if not bounds:
            raise ValidationError("a hole needs at least one factor bound")
        object.__setattr__(self, "bounds", bounds)
        excludes = _split_set(self.excludes)
        if not excludes:
            raise ValidationError("a hole must exclude at least one split")
        # a hole kept out of a wider split must also be kept out of narrower ones
        for i, split in enumerate(SPLIT_ORDER):
            if split in excludes and not all(s in excludes for s in SPLIT_ORDER[:i]):
                raise ValidationError(
                    f"hole excluding {split} must also exclude {', '.join(map(str, SPLIT_ORDER[:i]))}"
                )
        object.__setattr__(self, "excludes", excludes)

    def contains(self, values):
        for name, (lo, hi) in self.bounds.items():
            v = values.get(name)
            if v is None or not lo <= v <= hi:
                return False
        return True

    def to_dict(self):
        out = {k: list(v) for k, v in self.bounds.items()}
        out["excludes"] = [str(s) for s in SPLIT_ORDER if s in self.excludes]
        return out

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        excludes = data.pop("excludes")
        return cls(bounds=data, excludes=frozenset(excludes))


def levels_for_fraction(fraction, n_levels):
    return max(1, math.ceil(fraction * n_levels - 1e-9))


@dataclass(frozen=True)
class SplitConfig:
    """Host-side recipe for carving the superset into the three data sets.

    ``targets`` maps split -> category -> run count. A split may instead give a
    ``no_source_fraction``, from which its NO_SOURCE count is derived.
    """

    targets: Mapping
    train_ranges: Mapping = field(default_factory=dict)
    public_ranges: Mapping = field(default_factory=dict)
    level_fractions: Mapping = field(default_factory=dict)
    holes: tuple = ()
    no_source_fraction: Mapping = field(default_factory=dict)
    bands: Mapping = field(default_factory=dict)
    priors: Mapping = field(default_factory=dict)
    w_in: float = 4.0
    w_out: float = 1.0
    replicate_count: int = 1
    seed: int = 0

    def __post_init__(self):
        targets = {
            Split(s): {str(c): int(n) for c, n in cats.items()} for s, cats in dict(self.targets).items()
        }
        for split in targets:
            if split not in SPLIT_ORDER:
                raise ValidationError(f"targets given for {split}")
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "train_ranges", _ranges(self.train_ranges))
        object.__setattr__(self, "public_ranges", _ranges(self.public_ranges))
        object.__setattr__(self, "bands", _ranges(self.bands, allow_empty=True))
        object.__setattr__(
            self,
            "level_fractions",
            {k: tuple(float(x) for x in v) for k, v in dict(self.level_fractions).items()},
        )
        object.__setattr__(
            self,
            "no_source_fraction",
            {Split(k): float(v) for k, v in dict(self.no_source_fraction).items()},
        )
        object.__setattr__(self, "holes", tuple(self.holes))
        if not self.w_in >= self.w_out > 0:
            raise ValidationError("emphasis weights need w_in >= w_out > 0")
        if self.replicate_count < 1:
            raise ValidationError("replicate_count must be >= 1")
        for name, fr in self.level_fractions.items():
            if len(fr) != 3 or not all(0 < f <= 1 for f in fr) or not fr[0] <= fr[1] <= fr[2]:
                raise ValidationError(
                    f"level fractions for {name!r} must be nondecreasing in (0, 1] across 3 splits"
                )
        for split, frac in self.no_source_fraction.items():
            if not 0 <= frac < 1:
                raise ValidationError(f"no-source fraction for {split} must be in [0, 1)")
            if NO_SOURCE in self.targets.get(split, {}):
                raise ValidationError(f"{split}: give either a NO_SOURCE target or a fraction")
        for name, (lo, hi) in self.train_ranges.items():
            plo, phi = self.public_ranges.get(name, (-math.inf, math.inf))
            if not (plo <= lo and hi <= phi):
                raise ValidationError(f"TRAIN range for {name!r} must lie inside the PUBLIC range")

    def validate(self, factor_space):
        """Cross-check against the factor space; raises ``ValidationError``."""
        for label, ranges in (("TRAIN", self.train_ranges), ("PUBLIC", self.public_ranges)):
            for name, (lo, hi) in ranges.items():
                f = _continuous(factor_space, name, f"{label} range")
                if not (f.lo <= lo and hi <= f.hi):
                    raise ValidationError(f"{label} range for {name!r} exceeds its full range")
        for name in self.level_fractions:
            if name not in factor_space or factor_space[name].is_continuous:
                raise ValidationError(f"level fractions given for non-categorical {name!r}")
        for hole in self.holes:
            for name in hole.bounds:
                _continuous(factor_space, name, "hole")
        for name in self.bands.keys() | self.priors.keys():
            _continuous(factor_space, name, "band")
        modeled = {f.name for f in factor_space.modeled}
        used = (
            set(self.train_ranges) | set(self.public_ranges) | set(self.level_fractions)
            | {n for h in self.holes for n in h.bounds} | set(self.bands) | set(self.priors)
        )
        nuisance = used - modeled
        if nuisance:
            raise ValidationError(
                f"split constraints may not reference nuisance factors: {sorted(nuisance)}"
            )
        return self

    def resolved_targets(self):
        out = {}
        for split in SPLIT_ORDER:
            cats = dict(self.targets.get(split, {}))
            frac = self.no_source_fraction.get(split)
            if frac is not None:
                n_source = sum(n for c, n in cats.items() if c != NO_SOURCE)
                cats[NO_SOURCE] = int(round(frac / (1.0 - frac) * n_source))
            for cat, n in cats.items():
                if n < 0:
                    raise ValidationError(f"negative target for {split}/{cat}")
                if n % self.replicate_count:
                    raise ValidationError(
                        f"target {split}/{cat}={n} is not a multiple of replicate_count={self.replicate_count}"
                    )
            out[split] = {c: n for c, n in cats.items() if n > 0}
        return out

    def allowed_levels(self, factor_space):
        """Nested level sets per split: each split keeps a leading share of the declared levels."""
        out = {s: {} for s in SPLIT_ORDER}
        for f in factor_space:
            if f.is_continuous or f.nuisance:
                continue
            fractions = self.level_fractions.get(f.name, (1.0, 1.0, 1.0))
            for split, frac in zip(SPLIT_ORDER, fractions):
                out[split][f.name] = f.levels[: levels_for_fraction(frac, len(f.levels))]
        return out

    def resolved_bands(self, factor_space):
        bands = {k: Interval(*v) for k, v in self.bands.items()}
        for name, pr in self.priors.items():
            if name in bands:
                continue
            f = factor_space[name]
            bands[name] = interesting_band(
                PriorCurve(*pr["current"]), PriorCurve(*pr["dream"]), (f.lo, f.hi)
            )
        return bands

    def ranges_for(self, split):
        if split is Split.TRAIN:
            merged = dict(self.public_ranges)
            merged.update(self.train_ranges)
            return merged
        if split is Split.PUBLIC:
            return dict(self.public_ranges)
        return {}

    def to_dict(self):
        return {
            "targets": {str(s): dict(c) for s, c in self.targets.items()},
            "train_ranges": {k: list(v) for k, v in self.train_ranges.items()},
            "public_ranges": {k: list(v) for k, v in self.public_ranges.items()},
            "level_fractions": {k: list(v) for k, v in self.level_fractions.items()},
            "holes": [h.to_dict() for h in self.holes],
            "no_source_fraction": {str(s): v for s, v in self.no_source_fraction.items()},
            "bands": {k: list(v) for k, v in self.bands.items()},
            "priors": {k: {kk: list(vv) for kk, vv in v.items()} for k, v in self.priors.items()},
            "w_in": self.w_in,
            "w_out": self.w_out,
            "replicate_count": self.replicate_count,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        data["holes"] = tuple(Hole.from_dict(h) for h in data.get("holes", ()))
        return cls(**data)


def _ranges(ranges, allow_empty=False):
    out = {}
    for name, bounds in dict(ranges).items():
        lo, hi = (float(b) for b in bounds)
        if not (lo < hi or (allow_empty and lo <= hi)):
            raise ValidationError(f"range for {name!r} needs lo < hi")
        out[name] = (lo, hi)
    return out


def _continuous(factor_space, name, what):
    if name not in factor_space:
        raise ValidationError(f"{what} references unknown factor {name!r}")
    f = factor_space[name]
    if not f.is_continuous:
        raise ValidationError(f"{what} on categorical factor {name!r}")
    return f


@dataclass(frozen=True)
class SplitAssignment:
    labels: Mapping
    test_manifest: tuple
    replicate_groups: Mapping = field(default_factory=dict)
    allowed_levels: Mapping = field(default_factory=dict)

    def runs_in(self, split):
        return sorted(r for r, s in self.labels.items() if s is split)

    def apply(self, superset):
        """Superset runs stamped with their split and replicate group, in input order."""
        return [
            r.with_split(self.labels[r.run_id], self.replicate_groups.get(r.run_id))
            for r in superset
        ]


def _eligible(run, split, config, allowed, factor_space):
    values = run.factor_values
    for name, (lo, hi) in config.ranges_for(split).items():
        if not lo <= values[name] <= hi:
            return False
    for name, levels in allowed[split].items():
        if values.get(name) not in levels:
            return False
    for f in factor_space:
        if f.name in values and not f.contains(values[f.name]):
            return False
    return not any(split in h.excludes and h.contains(values) for h in config.holes)


def _scenario_key(run, factor_space):
    return (run.true_category,) + tuple(
        (f.name, run.factor_values.get(f.name)) for f in factor_space.modeled
    )


def _units(superset, factor_space, replicate_count):
    """Chunks of ``replicate_count`` runs that share a scenario, sorted by first run_id."""
    by_scenario = defaultdict(list)
    for run in superset:
        by_scenario[_scenario_key(run, factor_space)].append(run)
    units = []
    for runs in by_scenario.values():
        runs = sorted(runs, key=lambda r: r.run_id)
        for i in range(0, len(runs) - replicate_count + 1, replicate_count):
            units.append(tuple(runs[i : i + replicate_count]))
    units.sort(key=lambda u: u[0].run_id)
    return units


def _in_band(run, bands):
    return all(band.contains(run.factor_values[name]) for name, band in bands.items())


def weighted_sample_without_replacement(weights, k, rng):
    """Indices of ``k`` items drawn sequentially with probability proportional to weight.

    Uses exponential keys ``log(u) / w``; the top-k keys reproduce successive
    weighted draws without replacement.
    """
    weights = np.asarray(weights, dtype=float)
    if k > len(weights):
        raise ValueError("sample larger than population")
    u = rng.random(len(weights))
    keys = np.log(u) / weights
    order = np.argsort(-keys, kind="stable")
    return np.sort(order[:k])


def assign_splits(superset, config, factor_space):
    """Assign every superset run to TRAIN, PUBLIC, PRIVATE, or DISCARDED.

    Splits are filled from the most constrained (TRAIN) outwards; each category
    draws whole replicate units by weighted sampling without replacement.
    Raises :class:`InfeasibleDesignError` naming the (split, category) whose
    target cannot be met.
    """
    config.validate(factor_space)
    ids = [r.run_id for r in superset]
    if len(set(ids)) != len(ids):
        raise ValidationError("superset run_ids must be unique")
    targets = config.resolved_targets()
    allowed = config.allowed_levels(factor_space)
    bands = config.resolved_bands(factor_space)
    rc = config.replicate_count
    units = _units(superset, factor_space, rc)
    rng = stage_rng(config.seed, "design")

    labels = {r.run_id: Split.DISCARDED for r in superset}
    groups = {}
    used = np.zeros(len(units), dtype=bool)
    n_group = 0
    for split in SPLIT_ORDER:
        for category in sorted(targets[split]):
            need = targets[split][category] // rc
            pool = [
                i for i, u in enumerate(units)
                if u[0].true_category == category
                and all(_eligible(r, split, config, allowed, factor_space) for r in u)
            ]
            free = [i for i in pool if not used[i]]
            if len(free) < need:
                raise InfeasibleDesignError(
                    f"{split}/{category}: need {need} unit(s) of {rc} run(s), "
                    f"{len(free)} eligible remain ({len(pool)} eligible before earlier draws)",
                    binding=(str(split), category),
                )
            weights = [config.w_in if _in_band(units[i][0], bands) else config.w_out for i in free]
            for j in weighted_sample_without_replacement(weights, need, rng):
                idx = free[j]
                used[idx] = True
                gid = f"g{n_group:05d}" if rc > 1 else None
                n_group += 1
                for r in units[idx]:
                    labels[r.run_id] = split
                    if gid is not None:
                        groups[r.run_id] = gid

    test_ids = [rid for rid, s in labels.items() if s in TEST_SPLITS]
    order = randomize_test_order(test_ids, config.seed)
    return SplitAssignment(labels, tuple(order), groups, allowed)


def randomize_test_order(assignment_or_ids, seed):
    """Uniform permutation of the test run_ids, driven only by the seed and the id set."""
    if isinstance(assignment_or_ids, SplitAssignment):
        ids = [rid for rid, s in assignment_or_ids.labels.items() if s in TEST_SPLITS]
    else:
        ids = list(assignment_or_ids)
    ids = sorted(ids)
    perm = stage_rng(seed, "test-order").permutation(len(ids))
    return [ids[i] for i in perm]


@dataclass
class SplitReport:
    rules: dict = field(default_factory=dict)

    def add(self, rule, offenders):
        self.rules[rule] = sorted(set(offenders), key=str)

    @property
    def passed(self):
        return all(not v for v in self.rules.values())

    def failures(self):
        return {k: v for k, v in self.rules.items() if v}

    def to_dict(self):
        return {
            "passed": self.passed,
            "rules": {k: {"pass": not v, "offenders": [str(x) for x in v]} for k, v in self.rules.items()},
        }


def check_split_invariants(assignment, config, superset, factor_space):
    """Re-verify every assignment rule independently and report offenders per rule."""
    report = SplitReport()
    by_id = {r.run_id: r for r in superset}
    labels = assignment.labels

    report.add("coverage", set(by_id) ^ set(labels))
    test_ids = {rid for rid, s in labels.items() if s in TEST_SPLITS}
    manifest = list(assignment.test_manifest)
    dup = {rid for rid in manifest if manifest.count(rid) > 1} if len(set(manifest)) != len(manifest) else set()
    report.add("test_manifest", (set(manifest) ^ test_ids) | dup)

    range_bad, hole_bad, level_bad, full_bad = [], [], [], []
    allowed = config.allowed_levels(factor_space)
    for rid, split in labels.items():
        run = by_id.get(rid)
        if run is None or split is Split.DISCARDED:
            continue
        values = run.factor_values
        for name, (lo, hi) in config.ranges_for(split).items():
            if not lo <= values[name] <= hi:
                range_bad.append(rid)
        for f in factor_space:
            if f.name in values and not f.contains(values[f.name]):
                full_bad.append(rid)
        if any(split in h.excludes and h.contains(values) for h in config.holes):
            hole_bad.append(rid)
        for name, levels in allowed[split].items():
            if values.get(name) not in levels:
                level_bad.append(rid)
    report.add("ranges", range_bad + full_bad)
    report.add("holes", hole_bad)
    report.add("levels", level_bad)

    nesting_bad = []
    for f in factor_space:
        if f.is_continuous or f.nuisance:
            continue
        sets = [set(allowed[s][f.name]) for s in SPLIT_ORDER]
        fractions = config.level_fractions.get(f.name, (1.0, 1.0, 1.0))
        sizes_ok = all(
            len(s) == levels_for_fraction(fr, len(f.levels)) for s, fr in zip(sets, fractions)
        )
        if not (sets[0] <= sets[1] <= sets[2]) or not sizes_ok:
            nesting_bad.append(f.name)
    for split in (Split.TRAIN, Split.PUBLIC):
        wider = config.ranges_for(SPLIT_ORDER[SPLIT_ORDER.index(split) + 1])
        for name, (lo, hi) in config.ranges_for(split).items():
            wlo, whi = wider.get(name, (factor_space[name].lo, factor_space[name].hi))
            if not (wlo <= lo and hi <= whi):
                nesting_bad.append(name)
    report.add("nesting", nesting_bad)

    count_bad = []
    targets = config.resolved_targets()
    for split in SPLIT_ORDER:
        counts = defaultdict(int)
        for rid, s in labels.items():
            if s is split and rid in by_id:
                counts[by_id[rid].true_category] += 1
        for cat in set(counts) | set(targets[split]):
            if counts.get(cat, 0) != targets[split].get(cat, 0):
                count_bad.append(f"{split}/{cat}:{counts.get(cat, 0)}!={targets[split].get(cat, 0)}")
    report.add("target_counts", count_bad)

    rep_bad = []
    members = defaultdict(list)
    for rid, gid in assignment.replicate_groups.items():
        members[gid].append(rid)
    for gid, rids in members.items():
        runs = [by_id[r] for r in rids if r in by_id]
        keys = {_scenario_key(r, factor_space) for r in runs}
        splits = {labels.get(r) for r in rids}
        if len(rids) != config.replicate_count or len(keys) != 1 or len(splits) != 1:
            rep_bad.extend(rids)
    if config.replicate_count > 1:
        selected = {rid for rid, s in labels.items() if s is not Split.DISCARDED}
        rep_bad.extend(selected - set(assignment.replicate_groups))
    report.add("replicates", rep_bad)
    return report
