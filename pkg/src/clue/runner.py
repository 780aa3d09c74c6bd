"""Run configuration and end-to-end orchestration of the three detectors."""

from __future__ import annotations

import configparser
import datetime as _dt
import json
import logging
from dataclasses import dataclass, field
from decimal import Decimal
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Optional

from clue.detect.common import ATTACKED_PARITY, CREATION_FAILURE, DESTRUCTED, PipelineResult
from clue.detect.destructed import run_destructed_pipeline
from clue.detect.eoa import run_eoa_pipeline
from clue.detect.parity import PARITY_KILL_BLOCK, PARITY_LIBRARY, ParityConfig, run_parity_pipeline
from clue.model import AccountState, Address, ParseError, parse_address, parse_hash
from clue.rpc import RpcOptions, open_rpc_source
from clue.source import CapabilityUnavailable, ChainSource, open_fixture_source
from clue.symexec import ExecConfig
from clue.valuation import CATEGORIES, LockedReport, PriceFileError, PriceTable, build_report, load_prices, parse_prices

log = logging.getLogger(__name__)

RPC_ENV = "CLUE_RPC_URL"
DETECTOR_NAMES = {"destructed": DESTRUCTED, "parity": ATTACKED_PARITY, "eoa": CREATION_FAILURE}


class ConfigError(ValueError):
    """Bad or contradictory run settings (CLI exit code 2)."""


def default_prices() -> PriceTable:
    """The shipped September 2020 price table."""
    text = resources.files("clue.data").joinpath("prices_sept2020.json").read_text()
    return parse_prices(json.loads(text, parse_float=Decimal), "prices_sept2020.json")


@dataclass
class RunConfig:
    detectors: tuple[str, ...] = CATEGORIES
    fixture: Optional[Path] = None
    rpc_url: Optional[str] = None
    rpc: RpcOptions = field(default_factory=RpcOptions)
    tx_list: Optional[Path] = None
    candidates: Optional[Path] = None
    prices: Optional[PriceTable] = None
    parity: ParityConfig = field(default_factory=ParityConfig)
    parallelism: int = 1
    generated_at: Optional[str] = None

    def __post_init__(self) -> None:
        unknown = set(self.detectors) - set(CATEGORIES)
        if unknown:
            raise ConfigError(f"unknown detectors {sorted(unknown)}")
        if (self.fixture is None) == (self.rpc_url is None):
            raise ConfigError("exactly one of a fixture directory or an RPC endpoint is required")
        if self.parallelism < 1:
            raise ConfigError("parallelism must be at least 1")


# --- settings resolution ---------------------------------------------------------

# ini (section, key) -> setting name
_INI_KEYS = {
    ("source", "rpc_url"): "rpc_url",
    ("source", "timeout"): "timeout",
    ("source", "retry_count"): "retry_count",
    ("source", "rate_limit"): "rate_limit",
    ("run", "prices"): "prices",
    ("run", "parallelism"): "parallelism",
    ("parity", "library_address"): "library_address",
    ("parity", "attack_block"): "attack_block",
    ("symexec", "max_paths"): "max_paths",
    ("symexec", "max_steps_per_path"): "max_steps_per_path",
    ("symexec", "max_loop_iterations"): "max_loop_iterations",
}


def read_ini(path: Path | str) -> dict[str, str]:
    parser = configparser.ConfigParser()
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    out = {}
    for section in parser.sections():
        for key, value in parser.items(section):
            name = _INI_KEYS.get((section, key))
            if name is None:
                raise ConfigError(f"{path}: unknown setting [{section}] {key}")
            out[name] = value
    base = Path(path).parent
    if "prices" in out and not Path(out["prices"]).is_absolute():
        out["prices"] = str(base / out["prices"])
    return out


def _int(settings: Mapping[str, Any], key: str, default: int) -> int:
    value = settings.get(key)
    if value is None:
        return default
    try:
        return int(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key} must be an integer, got {value!r}") from None


def _float(settings: Mapping[str, Any], key: str, default: float) -> float:
    value = settings.get(key)
    if value is None:
        return default
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key} must be a number, got {value!r}") from None


def resolve_config(
    flags: Mapping[str, Any],
    config_file: Optional[Path | str] = None,
    env: Optional[Mapping[str, str]] = None,
) -> RunConfig:
    """Merge settings: explicit flags beat the config file, which beats the environment.

    When a fixture directory is given, its ``clue.ini`` and ``prices.json``
    act as the config file and price table unless overridden.
    """
    flags = {k: v for k, v in flags.items() if v is not None}
    fixture = Path(flags["fixture"]) if "fixture" in flags else None
    if config_file is None and fixture is not None and (fixture / "clue.ini").exists():
        config_file = fixture / "clue.ini"
    file_settings = read_ini(config_file) if config_file is not None else {}
    env_settings = {"rpc_url": env[RPC_ENV]} if env and env.get(RPC_ENV) else {}
    s: dict[str, Any] = {**env_settings, **file_settings, **flags}
    if fixture is not None and "rpc_url" not in flags:
        # an inherited endpoint must not conflict with an explicit fixture
        s.pop("rpc_url", None)

    try:
        library = parse_address(str(s["library_address"])) if "library_address" in s else PARITY_LIBRARY
    except ParseError as exc:
        raise ConfigError(f"library address: {exc}") from None
    exec_cfg = ExecConfig(
        max_paths=_int(s, "max_paths", ExecConfig.max_paths),
        max_steps_per_path=_int(s, "max_steps_per_path", ExecConfig.max_steps_per_path),
        max_loop_iterations=_int(s, "max_loop_iterations", ExecConfig.max_loop_iterations),
    )
    try:
        parity = ParityConfig(library, _int(s, "attack_block", PARITY_KILL_BLOCK), exec_cfg)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    prices_path = s.get("prices")
    if prices_path is None and fixture is not None and (fixture / "prices.json").exists():
        prices_path = fixture / "prices.json"
    try:
        prices = load_prices(prices_path) if prices_path is not None else default_prices()
    except PriceFileError as exc:
        raise ConfigError(str(exc)) from None

    detectors = flags.get("detectors", CATEGORIES)
    return RunConfig(
        detectors=tuple(detectors),
        fixture=fixture,
        rpc_url=s.get("rpc_url"),
        rpc=RpcOptions(
            timeout=_float(s, "timeout", RpcOptions.timeout),
            retry_count=_int(s, "retry_count", RpcOptions.retry_count),
            rate_limit=_float(s, "rate_limit", RpcOptions.rate_limit),
        ),
        tx_list=Path(s["tx_list"]) if "tx_list" in s else None,
        candidates=Path(s["candidates"]) if "candidates" in s else None,
        prices=prices,
        parity=parity,
        parallelism=_int(s, "parallelism", 1),
        generated_at=s.get("generated_at"),
    )


# --- running ---------------------------------------------------------------------


def _read_lines(path: Path, what: str) -> list[str]:
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {what} file {path}: {exc}") from None
    return [ln.split("#", 1)[0].strip() for ln in text.splitlines() if ln.split("#", 1)[0].strip()]


def _candidate_accounts(source: ChainSource, cfg: RunConfig) -> list[AccountState]:
    if cfg.candidates is not None:
        try:
            addrs = [parse_address(a) for a in _read_lines(cfg.candidates, "candidates")]
        except ParseError as exc:
            raise ConfigError(f"{cfg.candidates}: {exc}") from None
        return [source.get_account_state(a) for a in sorted(set(addrs))]
    try:
        return list(source.list_all_accounts())
    except CapabilityUnavailable:
        raise ConfigError("this source cannot enumerate accounts; pass a candidates file") from None


def _tx_hashes(cfg: RunConfig) -> Optional[list[str]]:
    if cfg.tx_list is None:
        return None
    try:
        return [parse_hash(h) for h in _read_lines(cfg.tx_list, "transaction list")]
    except ParseError as exc:
        raise ConfigError(f"{cfg.tx_list}: {exc}") from None


def open_source(cfg: RunConfig) -> ChainSource:
    if cfg.fixture is not None:
        return open_fixture_source(cfg.fixture)
    return open_rpc_source(cfg.rpc_url, cfg.rpc, _tx_hashes(cfg) or ())


def detect(source: ChainSource, cfg: RunConfig) -> dict[str, PipelineResult]:
    prices = cfg.prices or default_prices()
    results: dict[str, PipelineResult] = {}
    accounts: Optional[list[AccountState]] = None
    for category in CATEGORIES:
        if category not in cfg.detectors:
            continue
        log.info("running %s detector", category)
        if category == DESTRUCTED:
            txs = _tx_hashes(cfg)
            if txs is None:
                try:
                    txs = source.list_traced_transactions()
                except CapabilityUnavailable:
                    raise ConfigError("this source cannot enumerate transactions; pass a transaction list") from None
            results[category] = run_destructed_pipeline(source, txs, prices, cfg.parallelism)
            continue
        if accounts is None:
            accounts = _candidate_accounts(source, cfg)
        if category == ATTACKED_PARITY:
            results[category] = run_parity_pipeline(source, accounts, cfg.parity, prices, cfg.parallelism)
        else:
            results[category] = run_eoa_pipeline(source, accounts, prices, cfg.parallelism)
    return results


def report_from_results(results: dict[str, PipelineResult], prices: PriceTable, generated_at: str) -> LockedReport:
    return build_report(
        {c: (len(r.candidates), r.findings) for c, r in results.items()},
        prices,
        generated_at=generated_at,
        diagnostics={c: r.diagnostics() for c, r in results.items()},
    )


def run(cfg: RunConfig, source: Optional[ChainSource] = None) -> LockedReport:
    """Open the source (unless given), run the selected detectors and total the findings."""
    source = source or open_source(cfg)
    results = detect(source, cfg)
    stamp = cfg.generated_at or _dt.datetime.now(_dt.timezone.utc).replace(microsecond=0).isoformat()
    return report_from_results(results, cfg.prices or default_prices(), stamp)


def format_summary(report: LockedReport) -> str:
    """Per-category table of candidates, findings and USD values."""
    body = report.to_dict()
    rows = [("category", "candidates", "findings", "ETH USD", "CBC USD", "total USD")]
    for name, cat in report.categories.items():
        d = body["categories"][name]
        rows.append((name, str(cat.candidates), str(len(cat.findings)), d["eth_usd"], d["cbc_usd"], d["total_usd"]))
    rows.append(("total", "", str(len(report.findings)), "", "", body["grand_total_usd"]))
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = ["  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths))) for r in rows]
    return "\n".join(lines) + "\n"
