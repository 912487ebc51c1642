from datetime import datetime, timezone

import pytest
from hypothesis import given
from hypothesis import strategies as st

from datacomp.domain import (
    NO_SOURCE,
    FactorDef,
    FactorSpace,
    OutcomeClass,
    PredictionEntry,
    RunRecord,
    SourceCatalog,
    Split,
    Submission,
    classify_outcome,
    classify_submission,
    outcome_counts,
    select_test_runs,
    validate_submission,
)
from datacomp.exceptions import MalformedPredictionError, SubmissionValidationError, ValidationError

from conftest import make_run

TS = datetime(2026, 3, 1, tzinfo=timezone.utc)


class TestTypes:
    def test_factor_range_must_be_ordered(self):
        with pytest.raises(ValidationError):
            FactorDef("snr", "continuous", 3.0, 3.0)

    def test_duplicate_levels_rejected(self):
        with pytest.raises(ValidationError):
            FactorDef("shield", "categorical", levels=("a", "a"))

    def test_duplicate_factor_names_rejected(self):
        f = FactorDef("snr", "continuous", 0, 1)
        with pytest.raises(ValidationError):
            FactorSpace((f, f))

    def test_catalog_needs_a_source(self):
        with pytest.raises(ValidationError):
            SourceCatalog(())
        with pytest.raises(ValidationError):
            SourceCatalog(("HEU", NO_SOURCE))

    def test_default_catalog_has_six_sources(self, catalog):
        assert catalog.k == 6
        assert catalog.all_categories.count(NO_SOURCE) == 1

    def test_location_iff_source(self):
        with pytest.raises(ValidationError):
            RunRecord("r1", {}, "HEU", None)
        with pytest.raises(ValidationError):
            RunRecord("r1", {}, NO_SOURCE, 12.0)
        assert not RunRecord("r1", {}, NO_SOURCE).has_source

    def test_run_record_is_immutable(self):
        run = make_run("r1")
        with pytest.raises(TypeError):
            run.factor_values["snr"] = 1.0

    def test_factor_space_checks_values(self, factor_space):
        factor_space.check_values({"snr": 1.0, "speed": 2.0, "shield": "lead"})
        with pytest.raises(ValidationError):
            factor_space.check_values({"snr": 11.0, "speed": 2.0, "shield": "lead"})
        with pytest.raises(ValidationError):
            factor_space.check_values({"snr": 1.0, "speed": 2.0, "shield": "wood"})
        with pytest.raises(ValidationError):
            factor_space.check_values({"snr": 1.0, "shield": "lead"})

    def test_factor_space_round_trips_through_dicts(self, factor_space):
        assert FactorSpace.from_list(factor_space.to_list()) == factor_space


class TestClassifyOutcome:
    def test_exact_match_is_class_i(self):
        o = classify_outcome(make_run("r1", "WGPu", 30.0), PredictionEntry("r1", "WGPu", 30.0))
        assert (o.outcome_class, o.det, o.iden, o.loc_miss_s) == (OutcomeClass.I, 1, 1, 0.0)

    def test_missed_source_is_class_x(self):
        o = classify_outcome(make_run("r1", "WGPu", 30.0), PredictionEntry("r1", NO_SOURCE))
        assert (o.outcome_class, o.det, o.iden, o.loc_miss_s) == (OutcomeClass.X, 0, 0, None)

    def test_constituent_of_combined_source_is_misidentification(self):
        o = classify_outcome(make_run("r1", "HEU+Tc99m", 20.0), PredictionEntry("r1", "HEU", 22.5))
        assert (o.outcome_class, o.det, o.iden) == (OutcomeClass.D, 1, 0)
        assert o.loc_miss_s == 2.5

    def test_false_positive(self):
        o = classify_outcome(make_run("r1", NO_SOURCE), PredictionEntry("r1", "HEU", 10.0))
        assert o.outcome_class is OutcomeClass.FP

    def test_true_negative(self):
        o = classify_outcome(make_run("r1", NO_SOURCE), PredictionEntry("r1", NO_SOURCE))
        assert o.outcome_class is OutcomeClass.TN

    def test_mismatched_run_id(self):
        with pytest.raises(ValidationError):
            classify_outcome(make_run("r1"), PredictionEntry("r2", NO_SOURCE))

    def test_source_without_location_is_malformed(self):
        with pytest.raises(MalformedPredictionError):
            classify_outcome(make_run("r1"), PredictionEntry("r1", "HEU"))


categories = st.sampled_from(SourceCatalog().all_categories)
locations = st.floats(0, 100, allow_nan=False)


@given(truth=categories, claim=categories, t_loc=locations, c_loc=locations)
def test_outcome_class_consistent_with_components(truth, claim, t_loc, c_loc):
    run = RunRecord("r", {}, truth, None if truth == NO_SOURCE else t_loc)
    pred = PredictionEntry("r", claim, None if claim == NO_SOURCE else c_loc)
    o = classify_outcome(run, pred)
    assert o.iden <= o.det
    if o.outcome_class is OutcomeClass.I:
        assert o.det == 1 and o.iden == 1
    elif o.outcome_class is OutcomeClass.D:
        assert o.det == 1 and o.iden == 0
    elif o.outcome_class is OutcomeClass.X:
        assert o.det == 0
    if o.loc_miss_s is not None:
        assert o.loc_miss_s >= 0
    assert o == classify_outcome(run, pred)


@given(st.lists(st.tuples(categories, categories), min_size=1, max_size=40))
def test_partition_property(pairs):
    outcomes = []
    for i, (truth, claim) in enumerate(pairs):
        run = RunRecord(f"r{i}", {}, truth, None if truth == NO_SOURCE else 5.0)
        outcomes.append(classify_outcome(run, PredictionEntry(run.run_id, claim, None if claim == NO_SOURCE else 5.0)))
    counts = outcome_counts(outcomes)
    n_source = sum(1 for t, _ in pairs if t != NO_SOURCE)
    c = OutcomeClass
    assert counts[c.I] + counts[c.D] + counts[c.X] == n_source
    assert counts[c.TN] + counts[c.FP] == len(pairs) - n_source


class TestValidateSubmission:
    manifest = ["r1", "r2", "r3"]

    def sub(self, entries):
        return Submission("team", TS, entries)

    def test_complete_submission_accepted(self, catalog):
        s = self.sub([PredictionEntry("r1", NO_SOURCE), PredictionEntry("r2", "HEU", 4.0),
                      PredictionEntry("r3", "Co60", 1.0)])
        assert validate_submission(s, self.manifest, catalog) is s

    def test_missing_run_listed(self):
        s = self.sub([PredictionEntry("r1", NO_SOURCE), PredictionEntry("r2", NO_SOURCE)])
        with pytest.raises(SubmissionValidationError) as err:
            validate_submission(s, self.manifest)
        assert err.value.violations == [("r3", "missing entry")]

    def test_duplicate_and_unknown_runs(self):
        s = self.sub([PredictionEntry("r1", NO_SOURCE), PredictionEntry("r1", NO_SOURCE),
                      PredictionEntry("r2", NO_SOURCE), PredictionEntry("r3", NO_SOURCE),
                      PredictionEntry("zz", NO_SOURCE)])
        with pytest.raises(SubmissionValidationError) as err:
            validate_submission(s, self.manifest)
        flagged = {rid for rid, _ in err.value.violations}
        assert flagged == {"r1", "zz"}

    def test_malformed_location(self, catalog):
        s = self.sub([PredictionEntry("r1", "HEU"), PredictionEntry("r2", NO_SOURCE, 3.0),
                      PredictionEntry("r3", "Plutonium", 1.0)])
        with pytest.raises(SubmissionValidationError) as err:
            validate_submission(s, self.manifest, catalog)
        assert {rid for rid, _ in err.value.violations} == {"r1", "r2", "r3"}


def test_select_test_runs_keeps_public_and_private():
    key = [make_run("a", split="TRAIN"), make_run("b", split="PUBLIC"), make_run("c", split="PRIVATE"),
           make_run("d", split="DISCARDED")]
    assert [r.run_id for r in select_test_runs(key)] == ["b", "c"]
    assert {r.split for r in select_test_runs(key)} == {Split.PUBLIC, Split.PRIVATE}


def test_classify_submission_follows_key_order():
    key = [make_run("b"), make_run("a")]
    sub = Submission("t", TS, [PredictionEntry("a", NO_SOURCE), PredictionEntry("b", NO_SOURCE)])
    assert [o.run_id for o in classify_submission(sub, key)] == ["b", "a"]
