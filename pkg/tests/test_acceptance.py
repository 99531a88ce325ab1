"""Acceptance gate: every criterion at its stated tolerance and scale.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one line per
criterion; the same checks back the ``ulhedge verify`` subcommand.
"""

import pytest

from ulhedge import acceptance

SEED = 20240


@pytest.mark.parametrize("criterion", acceptance.CRITERIA,
                         ids=lambda c: c.__name__.replace("criterion_", ""))
def test_criterion(criterion):
    result = criterion(SEED)
    print()
    print(result.line())
    for detail in result.details:
        print(f"    {detail}")
    assert result.passed, "\n".join(result.details)
