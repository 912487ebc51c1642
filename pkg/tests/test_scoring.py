from datetime import datetime, timedelta, timezone

import pytest
from hypothesis import given
from hypothesis import strategies as st

from datacomp.domain import NO_SOURCE, OutcomeClass, OutcomeRecord, PredictionEntry, SourceCatalog, Submission
from datacomp.exceptions import SubmissionRejected, SubmissionValidationError, ValidationError
from datacomp.scoring import (
    AllCorrect,
    AllNoSource,
    ExceptCategory,
    Leaderboard,
    LocationOffset,
    RandomAnswers,
    ScoreWeights,
    SubmissionPolicy,
    flip_point,
    generate_mock_submissions,
    parse_pattern,
    score_run,
    score_submission,
    update_leaderboard,
    weight_robustness,
)

from conftest import make_run

W = ScoreWeights(0.5, 0.3, 0.2)
T0 = datetime(2026, 5, 1, 9, 0, tzinfo=timezone.utc)
CATALOG = SourceCatalog()


def outcome(cls, miss=None):
    det = int(cls in ("I", "D"))
    return OutcomeRecord("r", det, int(cls == "I"), miss, OutcomeClass(cls))


class TestWeights:
    def test_must_sum_to_one(self):
        with pytest.raises(ValidationError):
            ScoreWeights(0.5, 0.3, 0.3)
        with pytest.raises(ValidationError):
            ScoreWeights(1.2, -0.2, 0.0)

    def test_positive_tolerance_and_no_source_weight(self):
        with pytest.raises(ValidationError):
            ScoreWeights(1, 0, 0, no_source_weight=0)
        with pytest.raises(ValidationError):
            ScoreWeights(1, 0, 0, loc_tolerance_s=0)

    def test_round_trip(self):
        assert ScoreWeights.from_dict(W.to_dict()) == W


class TestScoreRun:
    def test_perfect_run(self):
        assert score_run(outcome("I", 0.0), ScoreWeights(0.1, 0.2, 0.7)) == 1.0

    def test_missed_source(self):
        assert score_run(outcome("X"), W) == 0.0

    def test_misidentified_far_off(self):
        assert score_run(outcome("D", 5.0), W) == 0.5
        assert score_run(outcome("D", 50.0), W) == 0.5

    def test_location_ramp(self):
        assert score_run(outcome("I", 2.5), W) == pytest.approx(0.5 + 0.3 + 0.2 * 0.5)

    def test_no_source_runs(self):
        assert score_run(outcome("TN"), W) == 1.0
        assert score_run(outcome("FP"), W) == 0.0

    # misses far below float resolution of the ramp legitimately round to a perfect score
    @given(st.sampled_from(["I", "D", "X", "TN", "FP"]), st.one_of(st.just(0.0), st.floats(1e-9, 50)),
           st.floats(0.01, 1), st.floats(0.01, 1), st.floats(0.01, 1))
    def test_extremes_characterised(self, cls, miss, a, b, c):
        w = ScoreWeights.normalized(a, b, c)
        s = score_run(outcome(cls, miss if cls in ("I", "D") else None), w)
        assert 0.0 <= s <= 1.0
        assert (s == 1.0) == (cls == "TN" or (cls == "I" and miss == 0.0))
        assert (s == 0.0) == (cls in ("FP", "X"))

    @given(st.sampled_from(["I", "D"]), st.floats(0, 20), st.floats(0, 1), st.floats(0, 1),
           st.floats(0.01, 1), st.floats(0.1, 100))
    def test_common_scale_leaves_scores_unchanged(self, cls, miss, a, b, c, k):
        w1 = ScoreWeights.normalized(a, b, c)
        w2 = ScoreWeights.normalized(k * a, k * b, k * c)
        o = outcome(cls, miss)
        assert score_run(o, w1) == pytest.approx(score_run(o, w2), abs=1e-12)


def key_for(n_source_public=4, n_none_public=2, n_source_private=6, n_none_private=3):
    runs = []
    sources = CATALOG.sources
    for split, ns, nn in (("PUBLIC", n_source_public, n_none_public), ("PRIVATE", n_source_private, n_none_private)):
        for i in range(ns):
            runs.append(make_run(f"{split[:3]}{i:03d}", sources[i % len(sources)], 10.0 + i, split))
        for i in range(nn):
            runs.append(make_run(f"{split[:3]}n{i:03d}", NO_SOURCE, split=split))
    return runs


class TestScoreSubmission:
    def test_all_correct_is_exactly_one(self):
        key = key_for()
        sub = generate_mock_submissions(key, [AllCorrect()], CATALOG)[0]
        assert score_submission(sub, key, W, CATALOG) == (1.0, 1.0)

    def test_all_no_source_weighted_mean(self):
        key = key_for(4, 2, 6, 3)
        w = ScoreWeights(0.5, 0.3, 0.2, no_source_weight=0.5)
        sub = generate_mock_submissions(key, [AllNoSource()], CATALOG)[0]
        pub, priv = score_submission(sub, key, w, CATALOG)
        assert pub == pytest.approx(0.5 * 2 / (0.5 * 2 + 4))
        assert priv == pytest.approx(0.5 * 3 / (0.5 * 3 + 6))

    def test_invalid_submission_refused(self):
        key = key_for()
        sub = generate_mock_submissions(key, [AllCorrect()], CATALOG)[0]
        short = Submission("t", T0, sub.entries[1:])
        with pytest.raises(SubmissionValidationError):
            score_submission(short, key, W, CATALOG)

    def test_training_runs_ignored(self):
        key = key_for() + [make_run("train1", "HEU", 5.0, "TRAIN")]
        sub = generate_mock_submissions(key, [AllCorrect()], CATALOG)[0]
        assert "train1" not in sub.by_run()
        assert score_submission(sub, key, W, CATALOG) == (1.0, 1.0)


class TestLeaderboard:
    policy = SubmissionPolicy(max_total_submissions=4, max_daily_submissions=2)

    def test_better_public_replaces_entry(self):
        b = update_leaderboard(Leaderboard(), "a", T0, (0.5, 0.4), self.policy)
        b = update_leaderboard(b, "a", T0 + timedelta(hours=1), (0.7, 0.2), self.policy)
        e = b.entries["a"]
        assert (e.best_public_score, e.best_private_score, e.submission_count) == (0.7, 0.2, 2)
        assert e.best_submission_timestamp == T0 + timedelta(hours=1)

    def test_worse_public_only_counts(self):
        b = update_leaderboard(Leaderboard(), "a", T0, (0.7, 0.2), self.policy)
        b = update_leaderboard(b, "a", T0 + timedelta(hours=1), (0.6, 0.99), self.policy)
        e = b.entries["a"]
        assert (e.best_public_score, e.best_private_score, e.submission_count) == (0.7, 0.2, 2)

    def test_total_cap(self):
        b = Leaderboard()
        for day in range(4):
            b = update_leaderboard(b, "a", T0 + timedelta(days=day), (0.1, 0.1), self.policy)
        with pytest.raises(SubmissionRejected):
            update_leaderboard(b, "a", T0 + timedelta(days=5), (0.9, 0.9), self.policy)

    def test_daily_cap_uses_utc_days(self):
        late = datetime(2026, 5, 1, 23, 30, tzinfo=timezone.utc)
        b = update_leaderboard(Leaderboard(), "a", late, (0.1, 0.1), self.policy)
        b = update_leaderboard(b, "a", late + timedelta(minutes=10), (0.1, 0.1), self.policy)
        with pytest.raises(SubmissionRejected):
            update_leaderboard(b, "a", late + timedelta(minutes=20), (0.1, 0.1), self.policy)
        # 00:10 UTC starts a fresh day
        b = update_leaderboard(b, "a", late + timedelta(minutes=40), (0.1, 0.1), self.policy)
        assert b.entries["a"].submission_count == 3

    def test_clock_regression_rejected(self):
        b = update_leaderboard(Leaderboard(), "a", T0, (0.1, 0.1), self.policy)
        with pytest.raises(SubmissionRejected):
            update_leaderboard(b, "b", T0 - timedelta(seconds=1), (0.1, 0.1), self.policy)

    def test_rejection_leaves_board_unchanged(self):
        b = update_leaderboard(Leaderboard(), "a", T0, (0.1, 0.1), self.policy)
        before = b.to_dict()
        with pytest.raises(SubmissionRejected):
            update_leaderboard(b, "a", T0 - timedelta(days=1), (0.9, 0.9), self.policy)
        assert b.to_dict() == before

    def test_ties_go_to_earliest(self):
        b = update_leaderboard(Leaderboard(), "late", T0, (0.3, 0.3), self.policy)
        b = update_leaderboard(b, "early", T0, (0.5, 0.5), self.policy)
        b = update_leaderboard(b, "late", T0 + timedelta(hours=1), (0.5, 0.5), self.policy)
        assert [e.team_id for e in b.ranked("public")] == ["early", "late"]

    def test_replay_is_idempotent_and_round_trips(self):
        stream = [("a", T0, (0.2, 0.3)), ("b", T0 + timedelta(minutes=1), (0.4, 0.1)),
                  ("a", T0 + timedelta(minutes=2), (0.6, 0.5))]

        def replay():
            b = Leaderboard()
            for team, ts, scores in stream:
                b = update_leaderboard(b, team, ts, scores, self.policy)
            return b

        assert replay().to_dict() == replay().to_dict()
        assert Leaderboard.from_dict(replay().to_dict()).to_dict() == replay().to_dict()

    @given(st.lists(st.tuples(st.floats(0, 1), st.floats(0, 1)), min_size=1, max_size=12))
    def test_public_best_never_decreases(self, scores):
        policy = SubmissionPolicy(100, 100)
        b = Leaderboard()
        best = -1.0
        for i, s in enumerate(scores):
            b = update_leaderboard(b, "a", T0 + timedelta(minutes=i), s, policy)
            assert b.entries["a"].best_public_score >= best
            best = b.entries["a"].best_public_score
        assert best == max(s[0] for s in scores)


class TestMocks:
    def test_except_category_miss(self):
        key = key_for(12, 2, 12, 2)
        sub = generate_mock_submissions(key, [ExceptCategory("HEU")], CATALOG)[0]
        for run in key:
            e = sub.by_run()[run.run_id]
            if run.true_category == "HEU":
                assert e.claimed_category == NO_SOURCE
            else:
                assert e.claimed_category == run.true_category

    def test_except_category_misidentify(self):
        key = key_for(12, 2, 12, 2)
        sub = generate_mock_submissions(key, [ExceptCategory("HEU", "misidentify", "WGPu")], CATALOG)[0]
        heu = [sub.by_run()[r.run_id] for r in key if r.true_category == "HEU"]
        assert heu and all(e.claimed_category == "WGPu" for e in heu)

    def test_location_offset(self):
        key = key_for()
        sub = generate_mock_submissions(key, [LocationOffset(1.0)], CATALOG)[0]
        for run in key:
            e = sub.by_run()[run.run_id]
            assert e.claimed_category == run.true_category
            if run.has_source:
                assert e.claimed_location_s == run.true_location_s + 1.0

    def test_unknown_category_rejected(self):
        with pytest.raises(ValidationError):
            generate_mock_submissions(key_for(), [ExceptCategory("Am241")], CATALOG)

    def test_random_mock_is_valid_and_seeded(self):
        key = key_for()
        a = generate_mock_submissions(key, [RandomAnswers(3)], CATALOG)[0]
        b = generate_mock_submissions(key, [RandomAnswers(3)], CATALOG)[0]
        assert a == b
        score_submission(a, key, W, CATALOG)

    @pytest.mark.parametrize("text, expected", [
        ("all_correct", AllCorrect()),
        ("ALL_NO_SOURCE", AllNoSource()),
        ("offset:1", LocationOffset(1.0)),
        ("random:7", RandomAnswers(7)),
        ("except:HEU:miss", ExceptCategory("HEU")),
        ("except:HEU+Tc99m:as:HEU", ExceptCategory("HEU+Tc99m", "misidentify", "HEU")),
    ])
    def test_parse_pattern(self, text, expected):
        assert parse_pattern(text) == expected

    def test_parse_pattern_rejects_garbage(self):
        with pytest.raises(ValidationError):
            parse_pattern("offset")


class TestWeightRobustness:
    def test_single_mock_always_first(self):
        key = key_for()
        mocks = generate_mock_submissions(key, [LocationOffset(2)], CATALOG)
        table = weight_robustness(mocks, [W, ScoreWeights(0, 0, 1)], key, CATALOG)
        assert all(r[0][0] == "LOCATION_OFFSET_2" for r in table.rankings)
        assert table.swaps == []

    def test_identical_weights_identical_rankings(self):
        key = key_for()
        mocks = generate_mock_submissions(key, [AllCorrect(), ExceptCategory("HEU"), LocationOffset(1)], CATALOG)
        table = weight_robustness(mocks, [W, W], key, CATALOG)
        assert table.rankings[0] == table.rankings[1]

    def test_flip_point_matches_closed_form(self):
        # private split: 60 source runs of which 10 are HEU, plus 20 no-source runs
        runs = []
        for i in range(60):
            cat = "HEU" if i < 10 else "WGPu"
            runs.append(make_run(f"p{i:02d}", cat, 30.0, "PRIVATE"))
        runs += [make_run(f"n{i:02d}", NO_SOURCE, split="PRIVATE") for i in range(20)]
        runs.append(make_run("pub", "WGPu", 30.0, "PUBLIC"))
        delta, tol = 2.0, 5.0
        miss_heu, offset = generate_mock_submissions(runs, [ExceptCategory("HEU"), LocationOffset(delta)], CATALOG)

        def weights(t):
            return ScoreWeights((1 - t) / 2, (1 - t) / 2, t, loc_tolerance_s=tol)

        t_star = flip_point(miss_heu, offset, runs, weights, 0.0, 1.0)
        assert t_star == pytest.approx(10 * tol / (60 * delta), abs=1e-8)
        table = weight_robustness([miss_heu, offset], [weights(0.2), weights(0.8)], runs, CATALOG)
        assert table.swaps and table.swaps[0][0:2] == ("EXCEPT_HEU_MISS", "LOCATION_OFFSET_2")

    def test_flip_point_needs_a_sign_change(self):
        key = key_for()
        a, b = generate_mock_submissions(key, [AllCorrect(), AllNoSource()], CATALOG)
        with pytest.raises(ValidationError):
            flip_point(a, b, key, lambda t: ScoreWeights(1 - t, t, 0), 0.0, 1.0)


def test_prediction_entry_problem_messages():
    assert PredictionEntry("r", "HEU").problems() == ["source claimed without a location"]
    assert PredictionEntry("r", NO_SOURCE).problems() == []
