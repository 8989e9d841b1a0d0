"""Acceptance criteria 1-10, each at its stated tolerance and runtime budget.

Every criterion prints one ``[PASS]``/``[FAIL]`` line (also repeated in the
pytest terminal summary).  Run on its own with::

    python3 -m pytest tests/test_acceptance.py -v
    python3 tests/test_acceptance.py
"""
import sys

import pytest

from dupdel import selfcheck

RESULTS = {}


@pytest.mark.parametrize("criterion", selfcheck.CRITERIA, ids=lambda c: f"criterion_{c.number}_{c.__name__}")
def test_criterion(criterion):
    result = criterion()
    RESULTS[result.number] = result
    print(result.line())
    for desc, ok in result.checks:
        print(f"    {'ok  ' if ok else 'FAIL'} {desc}")
    assert result.within_budget, f"took {result.elapsed:.1f}s, budget {result.budget:.0f}s"
    failed = [d for d, ok in result.checks if not ok]
    assert not failed, "; ".join(failed)


if __name__ == "__main__":
    results = selfcheck.run_selfcheck()
    sys.exit(0 if all(r.passed for r in results) else 1)
