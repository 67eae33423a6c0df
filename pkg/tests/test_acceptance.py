"""Acceptance criteria 1-12 at their stated tolerances.

Each criterion prints one ``[PASS]``/``[FAIL]`` line straight to the terminal,
so the lines show up in ``pytest -v`` output even when the test passes.
"""

import json

import pytest

from bmlearn.acceptance import CRITERIA

pytestmark = pytest.mark.slow

RESULTS = {}


@pytest.mark.parametrize("criterion", CRITERIA, ids=[f"criterion_{i}" for i in range(1, len(CRITERIA) + 1)])
def test_criterion(criterion, capsys):
    result = criterion()
    RESULTS[result.number] = result
    with capsys.disabled():
        print("\n" + result.line())
    assert result.passed, json.dumps(result.to_dict()["metrics"], indent=1, default=str)[:4000]


def test_summary(capsys):
    if len(RESULTS) < len(CRITERIA):
        pytest.skip("summary needs the full criterion run")
    with capsys.disabled():
        print("\nacceptance summary:")
        for n in sorted(RESULTS):
            print("  " + RESULTS[n].line())
    assert all(r.passed for r in RESULTS.values())
