"""One test per acceptance criterion; each prints a PASS/FAIL line."""
import pytest

from hvdc_modal.acceptance import CRITERIA, AcceptanceContext


@pytest.fixture(scope="module")
def ctx():
    return AcceptanceContext()


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, ctx, capsys):
    res = CRITERIA[number](ctx)
    with capsys.disabled():
        print("\n" + res.line())
        for f in res.failures[:10]:
            print(f"    {f}")
        if len(res.failures) > 10:
            print(f"    ... {len(res.failures) - 10} more")
    assert res.passed, res.detail
