"""The twelve acceptance criteria at their stated tolerances, one report line each."""

import pytest

from randcert.acceptance import CRITERIA, format_line, run_criterion


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, capsys):
    result = run_criterion(number)
    with capsys.disabled():
        print("\n" + format_line(result))
    assert result.passed, format_line(result)
