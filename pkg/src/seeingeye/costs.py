"""Token tallies and exact-decimal price accounting.

Money is handled in decimal arithmetic only; per-entry costs are exact
(token counts scaled by per-1000-token prices), so ledger concatenation and
per-iteration decomposition hold with zero tolerance.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from decimal import Decimal, localcontext
from pathlib import Path


class UnknownModel(KeyError):
    pass


@dataclass(frozen=True)
class ModelPrice:
    """USD per 1000 input/output tokens for one model."""

    input_per_1k: Decimal
    output_per_1k: Decimal

    def __post_init__(self) -> None:
        if self.input_per_1k < 0 or self.output_per_1k < 0:
            raise ValueError("prices must be >= 0")


class PriceTable:
    def __init__(self, prices: dict[str, ModelPrice]):
        self._prices = dict(prices)

    @classmethod
    def from_dict(cls, mapping: dict) -> "PriceTable":
        prices = {}
        for model, entry in mapping.items():
            prices[model] = ModelPrice(
                input_per_1k=Decimal(str(entry["input_per_1k"])),
                output_per_1k=Decimal(str(entry["output_per_1k"])),
            )
        return cls(prices)

    @classmethod
    def from_file(cls, path: str | Path) -> "PriceTable":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def price(self, model: str) -> ModelPrice:
        try:
            return self._prices[model]
        except KeyError:
            raise UnknownModel(model) from None

    def models(self) -> list[str]:
        return sorted(self._prices)


@dataclass(frozen=True)
class UsageEntry:
    model: str
    outer_iteration: int
    input_tokens: int
    output_tokens: int
    approximate: bool = False

    def __post_init__(self) -> None:
        if self.input_tokens < 0 or self.output_tokens < 0:
            raise ValueError("token counts must be >= 0")


@dataclass
class CostLedger:
    entries: list[UsageEntry] = field(default_factory=list)

    def record(
        self,
        model: str,
        outer_iteration: int,
        input_tokens: int,
        output_tokens: int,
        approximate: bool = False,
    ) -> UsageEntry:
        entry = UsageEntry(model, outer_iteration, input_tokens, output_tokens, approximate)
        self.entries.append(entry)
        return entry

    def __add__(self, other: "CostLedger") -> "CostLedger":
        return CostLedger(entries=self.entries + other.entries)

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class CostBreakdown:
    input_usd: Decimal
    output_usd: Decimal
    total_usd: Decimal

    def __add__(self, other: "CostBreakdown") -> "CostBreakdown":
        return CostBreakdown(
            self.input_usd + other.input_usd,
            self.output_usd + other.output_usd,
            self.total_usd + other.total_usd,
        )


ZERO_COST = CostBreakdown(Decimal(0), Decimal(0), Decimal(0))


def total_cost(ledger: CostLedger, prices: PriceTable) -> CostBreakdown:
    """Sum of (tokens / 1000) * per-1k price over all entries, exactly.

    Raises UnknownModel if any ledger entry names a model absent from the table.
    """
    with localcontext() as ctx:
        ctx.prec = 50
        input_usd = Decimal(0)
        output_usd = Decimal(0)
        for entry in ledger.entries:
            price = prices.price(entry.model)
            input_usd += Decimal(entry.input_tokens) * price.input_per_1k / 1000
            output_usd += Decimal(entry.output_tokens) * price.output_per_1k / 1000
        return CostBreakdown(input_usd, output_usd, input_usd + output_usd)


def per_iteration_costs(ledger: CostLedger, prices: PriceTable) -> dict[int, CostBreakdown]:
    by_iteration: dict[int, CostLedger] = {}
    for entry in ledger.entries:
        by_iteration.setdefault(entry.outer_iteration, CostLedger()).entries.append(entry)
    return {i: total_cost(sub, prices) for i, sub in sorted(by_iteration.items())}


def format_usd(amount: Decimal) -> str:
    """Render with at most 10 fractional digits, no exponent form."""
    quantized = amount.quantize(Decimal("0.0000000001"))
    text = format(quantized.normalize(), "f")
    return text if "." in text else text + ".0"
