"""Acceptance criteria 1-10, one printed PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -s`` (the lines are printed either
way) or ``dlrep-anchor check``.
"""

import math
from decimal import Decimal

import pytest

from dlrep_anchor import acceptance
from dlrep_anchor.ledger import (
    daily_cost_usd,
    encode_raw_tx,
    canonical_enroll_tx,
    estimate_bandwidth,
    estimate_fee,
)


@pytest.mark.parametrize("number", sorted(acceptance.CHECKS))
def test_criterion(number, capsys):
    result = acceptance.run_check(number, seed=1)
    with capsys.disabled():
        print("\n" + result.line())
    assert result.passed, result.detail
    assert result.within_budget, f"{result.seconds:.2f}s exceeds {result.budget}s"


# independent arithmetic behind criteria 1-3


def test_fee_literals():
    fee = estimate_fee(265, Decimal("0.0000036"))
    assert fee == Decimal("0.000954")
    usd = daily_cost_usd(fee, Decimal(2280), 144)
    assert usd == Decimal("0.000954") * 144 * 2280 == Decimal("313.21728")
    assert 312 * 0.99 <= float(usd) <= 313 * 1.01


def test_canonical_enroll_field_count():
    # version 4, one input: 1 + 36 + 1 + 107 + 4, two outputs: 1 + (8 + 1 + 25) + (8 + 1 + 66), locktime 4
    expected = 4 + 1 + (36 + 1 + 107 + 4) + 1 + (8 + 1 + 25) + (8 + 1 + 2 + 64) + 4
    raw = encode_raw_tx(canonical_enroll_tx())
    assert len(raw) == expected == 267
    assert 250 <= len(raw) <= 280


def test_bandwidth_literals():
    n, f = 2**26, 0.01
    r = estimate_bandwidth(n, f)
    assert r.se_storage_bytes == pytest.approx(4.3e9, rel=0.02)
    assert r.se_per_block_bytes == pytest.approx(298e3, rel=0.02)
    assert r.user_storage_bytes == pytest.approx(1664, rel=1e-9)
    assert r.user_per_block_bytes == pytest.approx(780, rel=0.02)
    assert r.user_per_block_bytes == pytest.approx(64 * math.log2(f * n / 144))
