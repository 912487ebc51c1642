"""Leaderboard scoring: additive per-run desirability, submission caps, and mock-based weight checks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from itertools import combinations
from typing import Callable, Mapping

import numpy as np

from ._utils import stage_rng
from .domain import (
    NO_SOURCE,
    OutcomeClass,
    PredictionEntry,
    Split,
    Submission,
    classify_outcome,
    select_test_runs,
    validate_submission,
)
from .exceptions import SubmissionRejected, ValidationError

EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)


@dataclass(frozen=True)
class ScoreWeights:
    w_det: float
    w_iden: float
    w_loc: float
    no_source_weight: float = 0.5
    loc_tolerance_s: float = 5.0

    def __post_init__(self):
        ws = (self.w_det, self.w_iden, self.w_loc)
        if any(not math.isfinite(w) or w < 0 for w in ws):
            raise ValidationError("component weights must be nonnegative")
        if abs(math.fsum(ws) - 1.0) > 1e-12:
            raise ValidationError(f"component weights must sum to 1, got {math.fsum(ws)!r}")
        if not self.no_source_weight > 0:
            raise ValidationError("no_source_weight must be positive")
        if not self.loc_tolerance_s > 0:
            raise ValidationError("loc_tolerance_s must be positive")

    @classmethod
    def normalized(cls, w_det, w_iden, w_loc, **kwargs):
        """Build from any nonnegative triple by rescaling it onto the simplex."""
        total = math.fsum((w_det, w_iden, w_loc))
        if not total > 0:
            raise ValidationError("at least one component weight must be positive")
        return cls(w_det / total, w_iden / total, w_loc / total, **kwargs)

    def to_dict(self):
        return {
            "w_det": self.w_det,
            "w_iden": self.w_iden,
            "w_loc": self.w_loc,
            "no_source_weight": self.no_source_weight,
            "loc_tolerance_s": self.loc_tolerance_s,
        }

    @classmethod
    def from_dict(cls, data):
        keys = ("w_det", "w_iden", "w_loc", "no_source_weight", "loc_tolerance_s")
        return cls(**{k: float(data[k]) for k in keys if k in data})


@dataclass(frozen=True)
class SubmissionPolicy:
    max_total_submissions: int = 100
    max_daily_submissions: int = 5

    def __post_init__(self):
        if self.max_total_submissions < 1 or self.max_daily_submissions < 1:
            raise ValidationError("submission caps must be >= 1")


def location_desirability(miss_s, tolerance_s):
    return max(0.0, 1.0 - miss_s / tolerance_s)


def score_run(outcome, weights):
    """Score one run in [0, 1].

    No-source runs score 1 for a true negative and 0 otherwise. Source runs use
    ``w_det*Det + w_iden*Iden + w_loc*Loc`` with a linear location ramp that
    reaches 0 at ``loc_tolerance_s``; nothing is credited without a detection.
    """
    cls = outcome.outcome_class
    if cls is OutcomeClass.TN:
        return 1.0
    if cls is OutcomeClass.FP or not outcome.det:
        return 0.0
    loc = 0.0
    if outcome.loc_miss_s is not None:
        loc = location_desirability(outcome.loc_miss_s, weights.loc_tolerance_s)
    parts = (weights.w_det, weights.w_iden * outcome.iden, weights.w_loc * loc)
    # dividing by the weight total keeps a perfect run at exactly 1.0
    total = math.fsum((weights.w_det, weights.w_iden, weights.w_loc))
    return min(1.0, math.fsum(parts) / total)


def run_weight(run, weights):
    return weights.no_source_weight if not run.has_source else 1.0


def score_submission(sub, key, weights, catalog=None):
    """Weighted mean run score on the PUBLIC and PRIVATE splits of ``key``.

    The submission is validated against the key's test runs first; an invalid
    one raises :class:`~datacomp.exceptions.SubmissionValidationError`.
    """
    tests = select_test_runs(key)
    validate_submission(sub, [r.run_id for r in tests], catalog)
    entries = sub.by_run()
    sums = {Split.PUBLIC: ([], []), Split.PRIVATE: ([], [])}
    for run in tests:
        s = score_run(classify_outcome(run, entries[run.run_id]), weights)
        w = run_weight(run, weights)
        num, den = sums[run.split]
        num.append(w * s)
        den.append(w)
    out = []
    for split in (Split.PUBLIC, Split.PRIVATE):
        num, den = sums[split]
        if not den:
            raise ValidationError(f"answer key has no {split} runs")
        out.append(min(1.0, math.fsum(num) / math.fsum(den)))
    return tuple(out)


@dataclass(frozen=True)
class LeaderboardEntry:
    team_id: str
    best_public_score: float
    best_private_score: float
    best_submission_timestamp: datetime
    submission_count: int

    def to_dict(self):
        return {
            "team_id": self.team_id,
            "best_public_score": self.best_public_score,
            "best_private_score": self.best_private_score,
            "best_submission_timestamp": self.best_submission_timestamp.isoformat(),
            "submission_count": self.submission_count,
        }


@dataclass(frozen=True)
class Leaderboard:
    """Immutable board state; ``update_leaderboard`` returns a new one."""

    entries: Mapping = field(default_factory=dict)
    history: Mapping = field(default_factory=dict)
    last_timestamp: datetime | None = None

    def ranked(self, board="public"):
        """Entries sorted by score descending, ties to the earliest best submission."""
        attr = "best_public_score" if board == "public" else "best_private_score"
        return sorted(
            self.entries.values(),
            key=lambda e: (-getattr(e, attr), e.best_submission_timestamp, e.team_id),
        )

    def to_dict(self):
        return {
            "entries": [e.to_dict() for e in sorted(self.entries.values(), key=lambda e: e.team_id)],
            "history": {t: [ts.isoformat() for ts in h] for t, h in sorted(self.history.items())},
            "last_timestamp": self.last_timestamp.isoformat() if self.last_timestamp else None,
        }

    @classmethod
    def from_dict(cls, data):
        entries = {}
        for d in data.get("entries", []):
            entries[d["team_id"]] = LeaderboardEntry(
                d["team_id"],
                float(d["best_public_score"]),
                float(d["best_private_score"]),
                parse_timestamp(d["best_submission_timestamp"]),
                int(d["submission_count"]),
            )
        history = {t: tuple(parse_timestamp(x) for x in h) for t, h in data.get("history", {}).items()}
        last = data.get("last_timestamp")
        return cls(entries, history, parse_timestamp(last) if last else None)


def parse_timestamp(text):
    """ISO-8601 to an aware datetime; a trailing ``Z`` and naive times mean UTC."""
    text = text.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    try:
        ts = datetime.fromisoformat(text)
    except ValueError:
        raise ValidationError(f"bad timestamp {text!r}; expected ISO-8601") from None
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts


def update_leaderboard(board, team_id, timestamp, scores, policy):
    """Record an accepted submission; raise :class:`SubmissionRejected` otherwise.

    The public board keeps each team's best public score. The private board
    keeps the private score of that same submission, so the private set
    cannot be probed by chasing private scores.
    """
    if timestamp.tzinfo is None:
        timestamp = timestamp.replace(tzinfo=timezone.utc)
    public, private = scores
    if not (0.0 <= public <= 1.0 and 0.0 <= private <= 1.0):
        raise ValidationError("scores must lie in [0, 1]")
    if board.last_timestamp is not None and timestamp < board.last_timestamp:
        raise SubmissionRejected(
            f"clock regression: {timestamp.isoformat()} precedes {board.last_timestamp.isoformat()}"
        )
    past = board.history.get(team_id, ())
    if len(past) >= policy.max_total_submissions:
        raise SubmissionRejected(
            f"{team_id}: total cap of {policy.max_total_submissions} submissions reached"
        )
    day = timestamp.astimezone(timezone.utc).date()
    today = sum(1 for ts in past if ts.astimezone(timezone.utc).date() == day)
    if today >= policy.max_daily_submissions:
        raise SubmissionRejected(
            f"{team_id}: daily cap of {policy.max_daily_submissions} reached for {day.isoformat()} (UTC)"
        )

    old = board.entries.get(team_id)
    count = len(past) + 1
    if old is None or public > old.best_public_score:
        entry = LeaderboardEntry(team_id, public, private, timestamp, count)
    else:
        entry = replace(old, submission_count=count)
    entries = dict(board.entries)
    entries[team_id] = entry
    history = dict(board.history)
    history[team_id] = past + (timestamp,)
    return Leaderboard(entries, history, timestamp)


# --- mock submissions -------------------------------------------------------


@dataclass(frozen=True)
class AllCorrect:
    label: str = "ALL_CORRECT"


@dataclass(frozen=True)
class ExceptCategory:
    """Every run right except those of ``category``: missed, or called ``as_category``."""

    category: str
    mode: str = "miss"
    as_category: str | None = None

    @property
    def label(self):
        if self.mode == "miss":
            return f"EXCEPT_{self.category}_MISS"
        return f"EXCEPT_{self.category}_AS_{self.as_category}"


@dataclass(frozen=True)
class LocationOffset:
    delta_s: float

    @property
    def label(self):
        return f"LOCATION_OFFSET_{self.delta_s:g}"


@dataclass(frozen=True)
class AllNoSource:
    label: str = "ALL_NO_SOURCE"


@dataclass(frozen=True)
class RandomAnswers:
    seed: int = 0

    @property
    def label(self):
        return f"RANDOM_{self.seed}"


def parse_pattern(text):
    """Parse ``all_correct``, ``all_no_source``, ``offset:<s>``, ``random:<seed>``,
    ``except:<cat>:miss`` or ``except:<cat>:as:<cat2>``."""
    parts = text.split(":")
    head = parts[0].lower()
    if head == "all_correct" and len(parts) == 1:
        return AllCorrect()
    if head == "all_no_source" and len(parts) == 1:
        return AllNoSource()
    if head == "offset" and len(parts) == 2:
        return LocationOffset(float(parts[1]))
    if head == "random" and len(parts) == 2:
        return RandomAnswers(int(parts[1]))
    if head == "except" and len(parts) == 3 and parts[2] == "miss":
        return ExceptCategory(parts[1])
    if head == "except" and len(parts) == 4 and parts[2] == "as":
        return ExceptCategory(parts[1], "misidentify", parts[3])
    raise ValidationError(f"unrecognised mock pattern {text!r}")


def _correct(run):
    if run.has_source:
        return PredictionEntry(run.run_id, run.true_category, run.true_location_s)
    return PredictionEntry(run.run_id, NO_SOURCE)


def generate_mock_submissions(key, patterns, catalog, timestamp=EPOCH):
    """One full test-set submission per pattern, each carrying exactly its systematic error."""
    tests = select_test_runs(key)
    out = []
    for pattern in patterns:
        if isinstance(pattern, ExceptCategory):
            if pattern.category not in catalog.sources:
                raise ValidationError(f"unknown category {pattern.category!r} in mock pattern")
            if pattern.mode not in ("miss", "misidentify"):
                raise ValidationError(f"unknown mock mode {pattern.mode!r}")
            if pattern.mode == "misidentify" and (
                pattern.as_category not in catalog.sources or pattern.as_category == pattern.category
            ):
                raise ValidationError(f"bad misidentification target {pattern.as_category!r}")
        entries = _mock_entries(tests, pattern, catalog)
        out.append(Submission(pattern.label, timestamp, tuple(entries)))
    return out


def _mock_entries(tests, pattern, catalog):
    if isinstance(pattern, AllCorrect):
        return [_correct(r) for r in tests]
    if isinstance(pattern, AllNoSource):
        return [PredictionEntry(r.run_id, NO_SOURCE) for r in tests]
    if isinstance(pattern, LocationOffset):
        return [
            PredictionEntry(r.run_id, r.true_category, r.true_location_s + pattern.delta_s)
            if r.has_source else _correct(r)
            for r in tests
        ]
    if isinstance(pattern, ExceptCategory):
        out = []
        for r in tests:
            if r.true_category != pattern.category:
                out.append(_correct(r))
            elif pattern.mode == "miss":
                out.append(PredictionEntry(r.run_id, NO_SOURCE))
            else:
                out.append(PredictionEntry(r.run_id, pattern.as_category, r.true_location_s))
        return out
    if isinstance(pattern, RandomAnswers):
        rng = stage_rng(pattern.seed, "mock")
        cats = catalog.all_categories
        locs = [r.true_location_s for r in tests if r.has_source] or [0.0]
        hi = max(locs) * 1.5 or 1.0
        out = []
        for r in tests:
            cat = cats[int(rng.integers(len(cats)))]
            loc = float(rng.uniform(0.0, hi)) if cat != NO_SOURCE else None
            out.append(PredictionEntry(r.run_id, cat, loc))
        return out
    raise ValidationError(f"unknown mock pattern {pattern!r}")


# --- weight robustness -------------------------------------------------------


@dataclass
class RobustnessTable:
    candidates: list
    rankings: list  # per candidate: [(team_id, private_score), ...] best first
    swaps: list  # (team_a, team_b, candidate indices where a ranks above b)

    def to_dict(self):
        return {
            "candidates": [w.to_dict() for w in self.candidates],
            "rankings": [[{"team_id": t, "private_score": s} for t, s in r] for r in self.rankings],
            "swaps": [{"pair": [a, b], "a_above_b_under": idx} for a, b, idx in self.swaps],
        }


def weight_robustness(mocks, candidates, key, catalog=None):
    """Rank mock submissions under each candidate weighting and list pairs whose order flips."""
    if not candidates:
        raise ValidationError("need at least one candidate weighting")
    rankings = []
    for weights in candidates:
        scored = [(m.team_id, score_submission(m, key, weights, catalog)[1]) for m in mocks]
        scored.sort(key=lambda t: (-t[1], t[0]))
        rankings.append(scored)
    positions = [{team: i for i, (team, _) in enumerate(r)} for r in rankings]
    swaps = []
    for a, b in combinations(sorted(m.team_id for m in mocks), 2):
        above = [i for i, pos in enumerate(positions) if pos[a] < pos[b]]
        if 0 < len(above) < len(candidates):
            swaps.append((a, b, above))
    return RobustnessTable(list(candidates), rankings, swaps)


def flip_point(mock_a, mock_b, key, make_weights: Callable[[float], ScoreWeights], lo, hi, tol=1e-10):
    """Bisect for the parameter where the private-score order of two mocks reverses.

    ``make_weights(t)`` maps a scalar (for instance ``w_loc``) to a weighting;
    the score difference must change sign over ``[lo, hi]``.
    """

    def gap(t):
        w = make_weights(t)
        return score_submission(mock_a, key, w)[1] - score_submission(mock_b, key, w)[1]

    g_lo, g_hi = gap(lo), gap(hi)
    if g_lo == 0:
        return lo
    if g_hi == 0:
        return hi
    if np.sign(g_lo) == np.sign(g_hi):
        raise ValidationError("score order does not flip over the bracket")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        g_mid = gap(mid)
        if g_mid == 0:
            return mid
        if np.sign(g_mid) == np.sign(g_lo):
            lo, g_lo = mid, g_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
