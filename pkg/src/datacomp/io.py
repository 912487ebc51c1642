"""CSV readers and writers for manifests, submissions, and long-format reports."""

from __future__ import annotations

import csv
import io
from datetime import datetime, timezone
from pathlib import Path

from ._utils import atomic_write_text, format_number
from .domain import PredictionEntry, RunRecord, Split, Submission
from .exceptions import SubmissionValidationError, ValidationError

RESERVED_COLUMNS = ("run_id", "split", "true_category", "true_location_s", "replicate_group")
SUBMISSION_HEADER = ("run_id", "claimed_category", "claimed_location_s")


def _to_text(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


def write_csv(path, header, rows):
    atomic_write_text(path, _to_text(header, [[_cell(v) for v in row] for row in rows]))


def _cell(value):
    if isinstance(value, str):
        return value
    return format_number(value)


def _read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValidationError(f"{path}: empty CSV")
        return list(reader.fieldnames), list(reader)


def manifest_text(runs, factor_names, *, include_split=True, include_answers=True):
    header = ["run_id"]
    if include_split:
        header.append("split")
    if include_answers:
        header += ["true_category", "true_location_s"]
    if include_split:
        header.append("replicate_group")
    header += list(factor_names)
    rows = []
    for r in runs:
        row = [r.run_id]
        if include_split:
            row.append(str(r.split) if r.split is not None else "")
        if include_answers:
            row += [r.true_category, _cell(r.true_location_s)]
        if include_split:
            row.append(r.replicate_group or "")
        row += [_cell(r.factor_values.get(name)) for name in factor_names]
        rows.append(row)
    return _to_text(header, rows)


def write_manifest(path, runs, factor_names, **kwargs):
    atomic_write_text(path, manifest_text(runs, factor_names, **kwargs))


def read_manifest(path, factor_space=None):
    """Read a run manifest; factor columns are every non-reserved column.

    With ``factor_space`` the factor values are coerced to their declared types
    and range-checked; otherwise numeric-looking cells become floats.
    """
    header, rows = _read_rows(path)
    if "run_id" not in header or "true_category" not in header:
        raise ValidationError(f"{path}: manifest needs run_id and true_category columns")
    factor_cols = [c for c in header if c not in RESERVED_COLUMNS]
    runs = []
    seen = set()
    for row in rows:
        run_id = row["run_id"]
        if run_id in seen:
            raise ValidationError(f"{path}: duplicate run_id {run_id!r}")
        seen.add(run_id)
        values = {}
        for col in factor_cols:
            cell = row[col]
            if cell == "":
                continue
            if factor_space is not None and col in factor_space:
                values[col] = factor_space[col].coerce(cell)
            else:
                values[col] = _guess(cell)
        loc = row.get("true_location_s", "")
        split = row.get("split") or None
        run = RunRecord(
            run_id=run_id,
            factor_values=values,
            true_category=row["true_category"],
            true_location_s=float(loc) if loc not in ("", None) else None,
            split=Split(split) if split else None,
            replicate_group=row.get("replicate_group") or None,
        )
        if factor_space is not None:
            factor_space.check_values(run.factor_values, run_id)
        runs.append(run)
    return runs


def _guess(cell):
    try:
        return float(cell)
    except ValueError:
        return cell


def read_run_ids(path):
    header, rows = _read_rows(path)
    if "run_id" not in header:
        raise ValidationError(f"{path}: missing run_id column")
    return [row["run_id"] for row in rows]


def submission_text(sub):
    rows = [
        [e.run_id, e.claimed_category, _cell(e.claimed_location_s)] for e in sub.entries
    ]
    return _to_text(SUBMISSION_HEADER, rows)


def write_submission(path, sub):
    atomic_write_text(path, submission_text(sub))


def read_submission(path, team_id, timestamp=None):
    """Parse a submission CSV. Unparseable locations are reported per run_id."""
    header, rows = _read_rows(path)
    if tuple(header) != SUBMISSION_HEADER:
        raise ValidationError(
            f"{path}: submission header must be {','.join(SUBMISSION_HEADER)}, got {','.join(header)}"
        )
    entries, problems = [], []
    for row in rows:
        cell = row["claimed_location_s"]
        loc = None
        if cell not in ("", None):
            try:
                loc = float(cell)
            except ValueError:
                problems.append((row["run_id"], f"malformed location {cell!r}"))
                continue
        entries.append(PredictionEntry(row["run_id"], row["claimed_category"], loc))
    if problems:
        raise SubmissionValidationError(problems)
    if timestamp is None:
        timestamp = datetime.fromtimestamp(Path(path).stat().st_mtime, tz=timezone.utc)
    return Submission(team_id, timestamp, tuple(entries))
