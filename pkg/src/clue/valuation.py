"""ETH/ERC20 holdings, USD conversion under exact decimals, and the aggregate report."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from decimal import (
    ROUND_HALF_EVEN,
    Context,
    Decimal,
    DivisionByZero,
    Inexact,
    InvalidOperation,
)
from pathlib import Path
from typing import TYPE_CHECKING, Any, Iterable, Optional

from clue.model import Address, ParseError, parse_address, wei_to_eth
from clue.source import ChainSource, SourceError

if TYPE_CHECKING:
    from clue.detect.common import Finding

REPORT_VERSION = "1"
CATEGORIES = ("destructed", "attacked_parity", "creation_failure")

# Inexact is trapped: any silent rounding in money arithmetic is a bug.
EXACT = Context(prec=400, traps=[Inexact, InvalidOperation, DivisionByZero])
_DISPLAY = Context(prec=400, rounding=ROUND_HALF_EVEN)
_CENT = Decimal("0.01")


class PriceFileError(ValueError):
    pass


def usd(amount: Decimal) -> str:
    """Serialization-time rounding, half-even to cents."""
    return str(amount.quantize(_CENT, context=_DISPLAY))


def token_usd(raw_amount: int, decimals: int, price: Decimal) -> Decimal:
    return EXACT.multiply(EXACT.scaleb(Decimal(raw_amount), -decimals), price)


def eth_usd(wei: int, price: Decimal) -> Decimal:
    return EXACT.multiply(wei_to_eth(wei), price)


def exact_sum(values: Iterable[Decimal]) -> Decimal:
    total = Decimal(0)
    for v in values:
        total = EXACT.add(total, v)
    return total


def priced_token_usd(balance: TokenBalance, prices: PriceTable) -> Decimal:
    price = prices.tokens.get(balance.token)
    return Decimal(0) if price is None else token_usd(balance.raw_amount, price.decimals, price.usd)


def finding_usd(finding: Finding, prices: PriceTable) -> tuple[Decimal, Decimal]:
    """(ETH value, token value) of a finding under ``prices``."""
    return (
        eth_usd(finding.eth_locked, prices.eth_usd),
        exact_sum(priced_token_usd(t, prices) for t in finding.cbc_locked),
    )


@dataclass(frozen=True)
class TokenPrice:
    symbol: str
    decimals: int
    usd: Decimal


@dataclass(frozen=True)
class PriceTable:
    eth_usd: Decimal
    tokens: dict[Address, TokenPrice] = field(default_factory=dict)
    as_of: str = ""

    def scaled(self, k: Decimal) -> PriceTable:
        return PriceTable(
            EXACT.multiply(self.eth_usd, k),
            {a: TokenPrice(p.symbol, p.decimals, EXACT.multiply(p.usd, k)) for a, p in self.tokens.items()},
            self.as_of,
        )

    def to_json(self) -> dict:
        return {
            "eth_usd": str(self.eth_usd),
            "as_of": self.as_of,
            "tokens": {
                a.hex: {"symbol": p.symbol, "decimals": p.decimals, "usd": str(p.usd)}
                for a, p in sorted(self.tokens.items())
            },
        }


def _price(value: Any, where: str) -> Decimal:
    if isinstance(value, bool) or not isinstance(value, (str, int, Decimal)):
        raise PriceFileError(f"{where}: expected a decimal price, got {value!r}")
    try:
        price = Decimal(value)
    except InvalidOperation:
        raise PriceFileError(f"{where}: not a decimal: {value!r}") from None
    if not price.is_finite() or price < 0:
        raise PriceFileError(f"{where}: price must be finite and non-negative")
    return price


def parse_prices(obj: Any, name: str = "<prices>") -> PriceTable:
    if not isinstance(obj, dict) or "eth_usd" not in obj:
        raise PriceFileError(f"{name}: missing eth_usd")
    tokens = {}
    for addr, entry in (obj.get("tokens") or {}).items():
        where = f"{name}: tokens.{addr}"
        try:
            token = parse_address(addr)
        except ParseError as exc:
            raise PriceFileError(f"{where}: {exc}") from None
        if not isinstance(entry, dict):
            raise PriceFileError(f"{where}: expected an object")
        decimals = entry.get("decimals", 18)
        if isinstance(decimals, Decimal) and decimals == decimals.to_integral_value():
            decimals = int(decimals)
        if not isinstance(decimals, int) or not 0 <= decimals <= 36:
            raise PriceFileError(f"{where}.decimals: must be an integer in 0..36")
        tokens[token] = TokenPrice(str(entry.get("symbol", "")), decimals, _price(entry.get("usd", "0"), where + ".usd"))
    return PriceTable(_price(obj["eth_usd"], f"{name}: eth_usd"), tokens, str(obj.get("as_of", "")))


def load_prices(path: Path | str) -> PriceTable:
    path = Path(path)
    try:
        obj = json.loads(path.read_text(), parse_float=Decimal)
    except FileNotFoundError:
        raise PriceFileError(f"{path}: price file not found") from None
    except json.JSONDecodeError as exc:
        raise PriceFileError(f"{path}: invalid JSON ({exc.msg}, line {exc.lineno})") from None
    return parse_prices(obj, str(path))


@dataclass(frozen=True)
class TokenBalance:
    token: Address
    symbol: str
    decimals: int
    raw_amount: int
    usd_value: Decimal

    def to_json(self) -> dict:
        return {
            "token": self.token.hex,
            "symbol": self.symbol,
            "decimals": self.decimals,
            "raw_amount": str(self.raw_amount),
            "usd": usd(self.usd_value),
        }


@dataclass
class AccountValue:
    account: Address
    eth: int
    tokens: list[TokenBalance]
    eth_usd: Decimal
    cbc_usd: Decimal
    warnings: list[str] = field(default_factory=list)

    @property
    def usd_total(self) -> Decimal:
        return EXACT.add(self.eth_usd, self.cbc_usd)

    @property
    def holds_value(self) -> bool:
        return self.eth > 0 or bool(self.tokens)


def value_account(source: ChainSource, account: Address, prices: PriceTable) -> AccountValue:
    """ETH via get_balance; tokens via balanceOf for every priced token plus any seen in the account's events."""
    warnings: list[str] = []
    eth = source.get_balance(account)
    try:
        seen = {ev.token for ev in source.list_token_events(account)}
    except SourceError as exc:
        warnings.append(f"{account}: token events unavailable: {exc}")
        seen = set()
    balances = []
    for token in sorted(set(prices.tokens) | seen):
        try:
            raw = source.call_balance_of(token, account)
        except SourceError as exc:
            warnings.append(f"{account}: balanceOf({token}) failed, skipped: {exc}")
            continue
        if raw < 0:
            warnings.append(f"{account}: negative replayed balance for {token}, skipped")
            continue
        if raw == 0:
            continue
        price = prices.tokens.get(token)
        if price is None:
            info = source.get_token_info(token)
            symbol, decimals = (info.symbol, info.decimals) if info else ("?", 18)
            warnings.append(f"no price for token {token}; valued at 0")
            balances.append(TokenBalance(token, symbol, decimals, raw, Decimal(0)))
        else:
            balances.append(TokenBalance(token, price.symbol, price.decimals, raw, token_usd(raw, price.decimals, price.usd)))
    return AccountValue(
        account,
        eth,
        balances,
        eth_usd(eth, prices.eth_usd),
        exact_sum(b.usd_value for b in balances),
        warnings,
    )


# --- report -------------------------------------------------------------------


@dataclass
class CategoryReport:
    candidates: int = 0
    findings: list = field(default_factory=list)
    eth_usd: Decimal = Decimal(0)
    cbc_usd: Decimal = Decimal(0)

    @property
    def total_usd(self) -> Decimal:
        return EXACT.add(self.eth_usd, self.cbc_usd)


@dataclass
class LockedReport:
    categories: dict[str, CategoryReport]
    prices: PriceTable
    generated_at: str = ""
    diagnostics: dict = field(default_factory=dict)
    version: str = REPORT_VERSION

    @property
    def findings(self) -> list[Finding]:
        return [f for name in CATEGORIES if name in self.categories for f in self.categories[name].findings]

    @property
    def grand_total_usd(self) -> Decimal:
        return exact_sum(c.total_usd for c in self.categories.values())

    def to_dict(self) -> dict:
        cats = {}
        for name in CATEGORIES:
            if name not in self.categories:
                continue
            cat = self.categories[name]
            cats[name] = {
                "candidates": cat.candidates,
                "findings": [f.to_json(self.prices) for f in cat.findings],
                "eth_usd": usd(cat.eth_usd),
                "cbc_usd": usd(cat.cbc_usd),
                "total_usd": usd(cat.total_usd),
            }
        return {
            "version": self.version,
            "generated_at": self.generated_at,
            "prices_as_of": self.prices.as_of,
            "categories": cats,
            "grand_total_usd": usd(self.grand_total_usd),
            "diagnostics": self.diagnostics,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(
            ["category", "account", "eth_locked_wei", "eth_locked", "eth_usd", "cbc_usd", "total_usd", "first_lock_block", "annotations"]
        )
        for f in self.findings:
            e, c = finding_usd(f, self.prices)
            writer.writerow(
                [
                    f.category,
                    f.account.hex,
                    f.eth_locked,
                    str(wei_to_eth(f.eth_locked).normalize()) if f.eth_locked else "0",
                    usd(e),
                    usd(c),
                    usd(EXACT.add(e, c)),
                    f.first_lock_block,
                    ";".join(f.annotations),
                ]
            )
        return buf.getvalue()

    def merge(self, other: LockedReport) -> LockedReport:
        overlap = set(self.categories) & set(other.categories)
        if overlap:
            raise ValueError(f"cannot merge reports sharing categories {sorted(overlap)}")
        return build_report(
            {**{k: (v.candidates, v.findings) for k, v in self.categories.items()},
             **{k: (v.candidates, v.findings) for k, v in other.categories.items()}},
            self.prices,
            generated_at=self.generated_at,
            diagnostics={**self.diagnostics, **other.diagnostics},
        )


def build_report(
    categories: dict[str, tuple[int, list[Finding]]],
    prices: PriceTable,
    generated_at: str = "",
    diagnostics: Optional[dict] = None,
) -> LockedReport:
    """Total each category; ``categories`` maps name -> (candidate count, findings)."""
    out = {}
    for name in CATEGORIES:
        if name not in categories:
            continue
        candidates, findings = categories[name]
        findings = sorted(findings, key=lambda f: f.account)
        values = [finding_usd(f, prices) for f in findings]
        out[name] = CategoryReport(
            candidates,
            findings,
            exact_sum(e for e, _ in values),
            exact_sum(c for _, c in values),
        )
    return LockedReport(out, prices, generated_at, dict(sorted((diagnostics or {}).items())))
