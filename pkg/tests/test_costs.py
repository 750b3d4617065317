from __future__ import annotations

import random
from decimal import Decimal

import pytest

from seeingeye.costs import (
    CostLedger,
    ModelPrice,
    PriceTable,
    UnknownModel,
    per_iteration_costs,
    total_cost,
)


def random_ledger_and_prices(rng: random.Random, models=("tr", "rs")):
    prices = PriceTable.from_dict(
        {
            m: {
                "input_per_1k": f"0.{rng.randint(0, 999999):06d}",
                "output_per_1k": f"0.{rng.randint(0, 999999):06d}",
            }
            for m in models
        }
    )
    ledger = CostLedger()
    for _ in range(rng.randint(0, 12)):
        ledger.record(
            model=rng.choice(models),
            outer_iteration=rng.randint(1, 3),
            input_tokens=rng.randint(0, 50_000),
            output_tokens=rng.randint(0, 20_000),
        )
    return ledger, prices


def test_hand_arithmetic_single_entry():
    # 1000 in at 0.001/1k -> 0.001; 500 out at 0.002/1k -> 0.001; total 0.002.
    prices = PriceTable({"m": ModelPrice(Decimal("0.001"), Decimal("0.002"))})
    ledger = CostLedger()
    ledger.record("m", 1, 1000, 500)
    cost = total_cost(ledger, prices)
    assert cost.input_usd == Decimal("0.001")
    assert cost.output_usd == Decimal("0.001")
    assert cost.total_usd == Decimal("0.002")


def test_empty_ledger_is_zero():
    cost = total_cost(CostLedger(), PriceTable({}))
    assert (cost.input_usd, cost.output_usd, cost.total_usd) == (0, 0, 0)


def test_published_average_row_arithmetic():
    # Reference check: 0.0090 input + 0.0026 output must total 0.0116 exactly.
    prices = PriceTable(
        {
            "translator-3b": ModelPrice(Decimal("0.001"), Decimal("0.002")),
            "reasoner-8b": ModelPrice(Decimal("0.002"), Decimal("0.004")),
        }
    )
    ledger = CostLedger()
    ledger.record("translator-3b", 1, 5000, 700)
    ledger.record("reasoner-8b", 1, 2000, 300)
    cost = total_cost(ledger, prices)
    assert cost.input_usd == Decimal("0.0090")
    assert cost.output_usd == Decimal("0.0026")
    assert cost.total_usd == Decimal("0.0116")
    assert cost.input_usd + cost.output_usd == cost.total_usd


def test_unknown_model_raises():
    ledger = CostLedger()
    ledger.record("mystery", 1, 10, 10)
    with pytest.raises(UnknownModel):
        total_cost(ledger, PriceTable({}))


def test_linearity_over_concatenation():
    rng = random.Random(7)
    for _ in range(300):
        a, prices = random_ledger_and_prices(rng)
        b, _ = random_ledger_and_prices(rng)
        combined = total_cost(a + b, prices)
        parts = total_cost(a, prices) + total_cost(b, prices)
        assert combined == parts


def test_per_iteration_decomposition():
    rng = random.Random(11)
    for _ in range(300):
        ledger, prices = random_ledger_and_prices(rng)
        subtotals = per_iteration_costs(ledger, prices)
        total = total_cost(ledger, prices)
        assert sum((c.input_usd for c in subtotals.values()), Decimal(0)) == total.input_usd
        assert sum((c.output_usd for c in subtotals.values()), Decimal(0)) == total.output_usd
        assert sum((c.total_usd for c in subtotals.values()), Decimal(0)) == total.total_usd


def test_input_plus_output_equals_total_exactly():
    rng = random.Random(13)
    for _ in range(300):
        ledger, prices = random_ledger_and_prices(rng)
        cost = total_cost(ledger, prices)
        assert cost.input_usd + cost.output_usd == cost.total_usd


def test_negative_tokens_rejected():
    with pytest.raises(ValueError):
        CostLedger().record("m", 1, -1, 0)


def test_negative_prices_rejected():
    with pytest.raises(ValueError):
        ModelPrice(Decimal("-0.001"), Decimal("0.001"))


def test_price_table_file_roundtrip(tmp_path):
    path = tmp_path / "prices.json"
    path.write_text('{"m": {"input_per_1k": "0.0003", "output_per_1k": 0.0006}}')
    table = PriceTable.from_file(path)
    assert table.price("m").input_per_1k == Decimal("0.0003")
    assert table.price("m").output_per_1k == Decimal("0.0006")
