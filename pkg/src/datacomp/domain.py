"""Core records for a competition: factors, runs, predictions, and outcomes."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

from .exceptions import MalformedPredictionError, SubmissionValidationError, ValidationError

NO_SOURCE = "NO_SOURCE"

DEFAULT_SOURCES = ("HEU", "WGPu", "I131", "Co60", "Tc99m", "HEU+Tc99m")


class Split(str, Enum):
    TRAIN = "TRAIN"
    PUBLIC = "PUBLIC"
    PRIVATE = "PRIVATE"
    DISCARDED = "DISCARDED"

    def __str__(self):
        return self.value


SPLIT_ORDER = (Split.TRAIN, Split.PUBLIC, Split.PRIVATE)
TEST_SPLITS = (Split.PUBLIC, Split.PRIVATE)


class OutcomeClass(str, Enum):
    I = "I"  # noqa: E741  detected and identified
    D = "D"  # detected, wrong identification
    X = "X"  # source missed
    TN = "TN"
    FP = "FP"

    def __str__(self):
        return self.value


SOURCE_CLASSES = (OutcomeClass.I, OutcomeClass.D, OutcomeClass.X)
NO_SOURCE_CLASSES = (OutcomeClass.TN, OutcomeClass.FP)


@dataclass(frozen=True)
class SourceCatalog:
    """The K source categories of a competition, plus the implicit ``NO_SOURCE``."""

    sources: tuple = DEFAULT_SOURCES

    def __post_init__(self):
        sources = tuple(str(s) for s in self.sources)
        object.__setattr__(self, "sources", sources)
        if not sources:
            raise ValidationError("at least one source category is required")
        if NO_SOURCE in sources:
            raise ValidationError(f"{NO_SOURCE} is implicit and must not be listed")
        if len(set(sources)) != len(sources):
            raise ValidationError("source categories must be unique")

    @property
    def k(self):
        return len(self.sources)

    @property
    def all_categories(self):
        return self.sources + (NO_SOURCE,)

    def __contains__(self, category):
        return category == NO_SOURCE or category in self.sources

    def check(self, category):
        if category not in self:
            raise ValidationError(f"unknown source category {category!r}")
        return category


@dataclass(frozen=True)
class FactorDef:
    name: str
    kind: str = "continuous"
    lo: float | None = None
    hi: float | None = None
    levels: tuple = ()
    nuisance: bool = False

    def __post_init__(self):
        if self.kind == "continuous":
            if self.lo is None or self.hi is None:
                raise ValidationError(f"continuous factor {self.name!r} needs lo and hi")
            object.__setattr__(self, "lo", float(self.lo))
            object.__setattr__(self, "hi", float(self.hi))
            if not self.lo < self.hi:
                raise ValidationError(f"factor {self.name!r}: range needs lo < hi")
        elif self.kind == "categorical":
            levels = tuple(str(v) for v in self.levels)
            if not levels:
                raise ValidationError(f"categorical factor {self.name!r} has no levels")
            if len(set(levels)) != len(levels):
                raise ValidationError(f"factor {self.name!r}: duplicate levels")
            object.__setattr__(self, "levels", levels)
        else:
            raise ValidationError(f"factor {self.name!r}: unknown kind {self.kind!r}")

    @property
    def is_continuous(self):
        return self.kind == "continuous"

    def coerce(self, value):
        """Convert a raw (possibly string) value to this factor's native type."""
        if self.is_continuous:
            try:
                out = float(value)
            except (TypeError, ValueError):
                raise ValidationError(f"factor {self.name!r}: {value!r} is not a number") from None
            if not math.isfinite(out):
                raise ValidationError(f"factor {self.name!r}: non-finite value")
            return out
        return str(value)

    def contains(self, value):
        if self.is_continuous:
            return self.lo <= value <= self.hi
        return value in self.levels

    def to_dict(self):
        out = {"name": self.name, "kind": self.kind, "nuisance": self.nuisance}
        if self.is_continuous:
            out.update(lo=self.lo, hi=self.hi)
        else:
            out["levels"] = list(self.levels)
        return out

    @classmethod
    def from_dict(cls, data):
        kind = data.get("kind", "categorical" if "levels" in data else "continuous")
        return cls(
            name=data["name"],
            kind=kind,
            lo=data.get("lo"),
            hi=data.get("hi"),
            levels=tuple(data.get("levels", ())),
            nuisance=bool(data.get("nuisance", False)),
        )


@dataclass(frozen=True)
class FactorSpace:
    factors: tuple

    def __post_init__(self):
        factors = tuple(self.factors)
        object.__setattr__(self, "factors", factors)
        names = [f.name for f in factors]
        if len(set(names)) != len(names):
            raise ValidationError("factor names must be unique")

    def __iter__(self):
        return iter(self.factors)

    def __len__(self):
        return len(self.factors)

    def __getitem__(self, name):
        for f in self.factors:
            if f.name == name:
                return f
        raise KeyError(name)

    def __contains__(self, name):
        return any(f.name == name for f in self.factors)

    @property
    def names(self):
        return tuple(f.name for f in self.factors)

    @property
    def modeled(self):
        return tuple(f for f in self.factors if not f.nuisance)

    def check_values(self, values, run_id="?"):
        """Raise unless ``values`` covers every modeled factor within range."""
        for f in self.factors:
            if f.name not in values:
                if f.nuisance:
                    continue
                raise ValidationError(f"run {run_id}: missing factor {f.name!r}")
            if not f.contains(values[f.name]):
                raise ValidationError(
                    f"run {run_id}: {f.name}={values[f.name]!r} outside declared range/levels"
                )

    def to_list(self):
        return [f.to_dict() for f in self.factors]

    @classmethod
    def from_list(cls, items):
        return cls(tuple(FactorDef.from_dict(d) for d in items))


@dataclass(frozen=True, eq=True)
class RunRecord:
    run_id: str
    factor_values: Mapping = field(hash=False)
    true_category: str
    true_location_s: float | None = None
    split: Split | None = None
    replicate_group: str | None = None

    def __post_init__(self):
        if not self.run_id:
            raise ValidationError("run_id must be a non-empty string")
        object.__setattr__(self, "factor_values", MappingProxyType(dict(self.factor_values)))
        if self.split is not None and not isinstance(self.split, Split):
            object.__setattr__(self, "split", Split(self.split))
        has_source = self.true_category != NO_SOURCE
        if has_source and self.true_location_s is None:
            raise ValidationError(f"run {self.run_id}: source run without a true location")
        if not has_source and self.true_location_s is not None:
            raise ValidationError(f"run {self.run_id}: no-source run with a true location")

    @property
    def has_source(self):
        return self.true_category != NO_SOURCE

    def with_split(self, split, replicate_group=None):
        return RunRecord(
            self.run_id,
            self.factor_values,
            self.true_category,
            self.true_location_s,
            split,
            replicate_group if replicate_group is not None else self.replicate_group,
        )


@dataclass(frozen=True)
class PredictionEntry:
    run_id: str
    claimed_category: str
    claimed_location_s: float | None = None

    @property
    def claims_source(self):
        return self.claimed_category != NO_SOURCE

    def problems(self, catalog=None):
        """Reasons this entry is malformed; empty when well formed."""
        out = []
        if catalog is not None and self.claimed_category not in catalog:
            out.append(f"unknown category {self.claimed_category!r}")
        loc = self.claimed_location_s
        if self.claims_source:
            if loc is None:
                out.append("source claimed without a location")
            elif not math.isfinite(loc):
                out.append("non-finite location")
        elif loc is not None:
            out.append("location given for a NO_SOURCE claim")
        return out


@dataclass(frozen=True)
class Submission:
    team_id: str
    timestamp: datetime
    entries: tuple

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        ts = self.timestamp
        if ts.tzinfo is None:
            object.__setattr__(self, "timestamp", ts.replace(tzinfo=timezone.utc))

    def by_run(self):
        return {e.run_id: e for e in self.entries}


@dataclass(frozen=True)
class OutcomeRecord:
    run_id: str
    det: int
    iden: int
    loc_miss_s: float | None
    outcome_class: OutcomeClass
    true_category: str = ""
    claimed_category: str = ""

    @property
    def is_source_run(self):
        return self.outcome_class in SOURCE_CLASSES


def classify_outcome(answer, prediction):
    """Compare a prediction against the answer key for one run.

    Identification needs an exact category match, so claiming one constituent of
    a combined source counts as detected-but-misidentified.
    """
    if prediction.run_id != answer.run_id:
        raise ValidationError(
            f"prediction for {prediction.run_id!r} scored against run {answer.run_id!r}"
        )
    if prediction.claims_source and prediction.claimed_location_s is None:
        raise MalformedPredictionError(f"run {prediction.run_id}: source claimed without location")

    claimed = prediction.claimed_category
    if not answer.has_source:
        cls = OutcomeClass.TN if not prediction.claims_source else OutcomeClass.FP
        return OutcomeRecord(answer.run_id, 0, 0, None, cls, answer.true_category, claimed)

    det = int(prediction.claims_source)
    iden = int(det and claimed == answer.true_category)
    miss = None
    if det:
        miss = abs(prediction.claimed_location_s - answer.true_location_s)
    cls = OutcomeClass.I if iden else (OutcomeClass.D if det else OutcomeClass.X)
    return OutcomeRecord(answer.run_id, det, iden, miss, cls, answer.true_category, claimed)


def classify_submission(submission, key):
    """Outcomes for every key run that the submission answers, in key order."""
    entries = submission.by_run()
    return [classify_outcome(run, entries[run.run_id]) for run in key if run.run_id in entries]


def validate_submission(sub, test_manifest, catalog=None):
    """Return ``sub`` if it answers each test run exactly once with a well-formed entry.

    Every problem is collected and raised together in a
    :class:`SubmissionValidationError`.
    """
    expected = list(test_manifest)
    expected_set = set(expected)
    counts = Counter(e.run_id for e in sub.entries)
    violations = []
    for e in sub.entries:
        if e.run_id not in expected_set:
            violations.append((e.run_id, "unknown run_id"))
            continue
        for reason in e.problems(catalog):
            violations.append((e.run_id, reason))
    for run_id, n in counts.items():
        if n > 1 and run_id in expected_set:
            violations.append((run_id, f"duplicate entry ({n} times)"))
    for run_id in expected:
        if run_id not in counts:
            violations.append((run_id, "missing entry"))
    if violations:
        raise SubmissionValidationError(violations)
    return sub


def select_test_runs(key: Sequence[RunRecord]):
    return [r for r in key if r.split in TEST_SPLITS]


def outcome_counts(outcomes: Iterable[OutcomeRecord]):
    counts = Counter(o.outcome_class for o in outcomes)
    return {cls: counts.get(cls, 0) for cls in OutcomeClass}
