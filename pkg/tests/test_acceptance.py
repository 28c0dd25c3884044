"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``[PASS]``/``[FAIL]`` line with the measured
values and appends it to ``acceptance_report.txt`` next to this file, so the
summary is available even when pytest captures stdout.
"""
from pathlib import Path

import pytest

from bubblecluster import acceptance

REPORT = Path(__file__).with_name("acceptance_report.txt")


@pytest.fixture(scope="module", autouse=True)
def _fresh_report():
    REPORT.write_text("")
    yield


@pytest.mark.slow
@pytest.mark.parametrize("cid", sorted(acceptance.RUNNERS))
def test_acceptance_criterion(cid, capsys):
    rec = acceptance.RUNNERS[cid]()
    line = acceptance.format_line(rec)
    with REPORT.open("a") as fh:
        fh.write(line + "\n")
    with capsys.disabled():
        print("\n" + line)
    assert rec["passed"], line
