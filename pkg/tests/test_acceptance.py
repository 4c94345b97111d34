"""The nine acceptance criteria, one printed PASS/FAIL line each.

Run ``pytest -s tests/test_acceptance.py`` (or ``lcx acceptance``) to see the lines.
"""

import pytest

from lcx.acceptance import RUNNERS


@pytest.mark.parametrize("number", sorted(RUNNERS))
def test_criterion(number, capsys):
    result = RUNNERS[number](0)
    with capsys.disabled():
        print("\n" + result.line(), flush=True)
    assert result.number == number
    assert result.passed, result.detail
