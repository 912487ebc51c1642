import pytest

from datacomp.domain import FactorDef, FactorSpace, RunRecord, SourceCatalog

_ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, ok, detail in sorted(_ACCEPTANCE):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {number:>2}. {title}: {detail}")


@pytest.fixture
def report_criterion():
    """Record one acceptance line, print it, and assert it."""

    def record(number, title, ok, detail=""):
        ok = bool(ok)
        _ACCEPTANCE.append((number, title, ok, detail))
        print(f"[{'PASS' if ok else 'FAIL'}] {number}. {title}: {detail}")
        assert ok, f"criterion {number} ({title}) failed: {detail}"

    return record


@pytest.fixture
def catalog():
    return SourceCatalog()


@pytest.fixture
def factor_space():
    return FactorSpace(
        (
            FactorDef("snr", "continuous", 0.0, 10.0),
            FactorDef("speed", "continuous", 1.0, 15.0),
            FactorDef("shield", "categorical", levels=("none", "steel", "lead")),
            FactorDef("lane", "continuous", 1.0, 4.0, nuisance=True),
        )
    )


def make_run(run_id, category="WGPu", location=30.0, split="PRIVATE", **values):
    fv = {"snr": 5.0, "speed": 5.0, "shield": "none", "lane": 2.0}
    fv.update(values)
    if category == "NO_SOURCE":
        location = None
    return RunRecord(run_id, fv, category, location, split)
