"""Acceptance gate: the nine primary criteria at their stated tolerances.

Each test prints one PASS/FAIL line (visible in ``pytest -v`` output).  The
worked examples of every module are checked separately below.
"""

import pytest

from fockspec import acceptance


def _check(key, title, fn, capsys):
    outcome = acceptance.run_check(key, title, fn)
    with capsys.disabled():
        print("\n" + outcome.line())
    assert outcome.passed, outcome.detail


@pytest.mark.parametrize("key,title,fn", acceptance.CRITERIA, ids=[k for k, _, _ in acceptance.CRITERIA])
def test_criterion(key, title, fn, capsys):
    _check(key, title, fn, capsys)


@pytest.mark.parametrize("key,title,fn", acceptance.EXAMPLES, ids=[k for k, _, _ in acceptance.EXAMPLES])
def test_example(key, title, fn, capsys):
    _check(key, title, fn, capsys)


def test_nine_criteria_registered():
    assert [k for k, _, _ in acceptance.CRITERIA] == [f"criterion_{i}" for i in range(1, 10)]
