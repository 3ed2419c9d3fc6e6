"""One test per acceptance criterion; each prints its PASS/FAIL line."""

import pytest

from conftest import ACCEPTANCE_LINES
from hyperfuse.acceptance import CRITERIA, run_criterion


@pytest.mark.parametrize("number,key,fn", CRITERIA, ids=[f"{n}-{k}" for n, k, _ in CRITERIA])
def test_criterion(number, key, fn):
    result = run_criterion(number, key, fn)
    print(result.line())
    ACCEPTANCE_LINES.append(result.line())
    assert result.passed, result.detail
