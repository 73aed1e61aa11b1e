"""JSON scenario files: ledgers, batches, rate tables, selection instances and sim configs.

Names stand in for raw bytes wherever possible:

* keys and addresses are human labels (``"alice"`` becomes ``key_from_name("alice")``),
  ``"open"`` is the open address/key, and 64 hex digits are taken literally;
* assets are declared under ``"assets"`` by policy and name; ``"C"`` is the
  primary currency;
* inputs refer to earlier transactions by ``"label"`` or by hex id.

Rationals are ``{"num": n, "den": d}``, a ``"n/d"`` string, an integer, or
``"+inf"``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Optional, Union

from .crypto import OPEN_ADDRESS, OPEN_KEY, key_addr, key_from_name
from .ledger import Batch, Input, Interval, Ledger, Output, OutputRef, Tx, tx_id
from .liveness import SimConfig
from .market import INF, BabelOffer, CandidateTransaction, Rate
from .quantities import AssetId, Quantities
from .scripts import (
    PRIMARY, PRIMARY_POLICY, AlwaysFalse, AlwaysTrue, ForbidPairProduction, PolicyScript, SignedBy,
    asset, encode_script,
)
from .selection import SelectionInstance, ValueModel
from .validation import unlock

SCHEMA_VERSION = 1
PRIMARY_LABEL = "C"
OPEN_LABEL = "open"


class ScenarioError(ValueError):
    """The file parsed as JSON but does not describe a valid scenario."""


class UnknownTx(ScenarioError):
    pass


def load_json(path: Union[str, Path]) -> Any:
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as e:
        raise ScenarioError(f"{path}: malformed JSON: {e}") from e
    except OSError as e:
        raise ScenarioError(f"{path}: {e.strerror}") from e


# ---------------------------------------------------------------------------
# rationals


def parse_rational(x: Any) -> Rate:
    if isinstance(x, bool):
        raise ScenarioError(f"not a rational: {x!r}")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        if x in ("+inf", "inf"):
            return INF
        try:
            return Fraction(x)
        except (ValueError, ZeroDivisionError):
            raise ScenarioError(f"not a rational: {x!r}") from None
    if isinstance(x, dict) and set(x) == {"num", "den"}:
        if not all(isinstance(v, int) and not isinstance(v, bool) for v in x.values()) or x["den"] == 0:
            raise ScenarioError(f"bad rational {x!r}")
        return Fraction(x["num"], x["den"])
    raise ScenarioError(f"not a rational: {x!r}")


def rational_json(q: Rate) -> Any:
    if q == INF:
        return "+inf"
    q = Fraction(q)
    return {"num": q.numerator, "den": q.denominator}


def format_rational(q: Rate) -> str:
    """Exact decimal with at least two places when one exists, else ``n/d``."""
    if q == INF:
        return "+inf"
    q = Fraction(q)
    d = q.denominator
    places = 0
    while d % 2 == 0 or d % 5 == 0:
        if d % 10 == 0:
            d //= 10
        elif d % 2 == 0:
            d //= 2
        else:
            d //= 5
        places += 1
    if d != 1:
        return f"{q.numerator}/{q.denominator}"
    places = max(places, 2)
    scaled = q * 10**places
    sign = "-" if scaled < 0 else ""
    digits = str(abs(scaled.numerator)).rjust(places + 1, "0")
    return f"{sign}{digits[:-places]}.{digits[-places:]}"


# ---------------------------------------------------------------------------
# names


def _hex32(s: str) -> Optional[bytes]:
    if isinstance(s, str) and len(s) == 64:
        try:
            return bytes.fromhex(s)
        except ValueError:
            return None
    return None


def key_of(name: str) -> bytes:
    if name == OPEN_LABEL:
        return OPEN_KEY
    raw = _hex32(name)
    return raw if raw is not None else key_from_name(_require_str(name, "key"))


def addr_of(name: str) -> bytes:
    if name == OPEN_LABEL:
        return OPEN_ADDRESS
    raw = _hex32(name)
    return raw if raw is not None else key_addr(key_from_name(_require_str(name, "address")))


def _require_str(x: Any, what: str) -> str:
    if not isinstance(x, str):
        raise ScenarioError(f"{what} must be a string, got {x!r}")
    return x


def parse_script(x: Any, policies: dict[str, PolicyScript]) -> PolicyScript:
    if isinstance(x, str):
        if x == "primary":
            return PRIMARY_POLICY
        if x not in policies:
            raise ScenarioError(f"unknown policy {x!r}")
        return policies[x]
    if not isinstance(x, dict) or "kind" not in x:
        raise ScenarioError(f"bad policy script {x!r}")
    kind = x["kind"]
    if kind == "AlwaysTrue":
        return AlwaysTrue()
    if kind == "AlwaysFalse":
        return AlwaysFalse()
    if kind == "SignedBy":
        return SignedBy(key_of(x["key"]))
    if kind == "ForbidPairProduction":
        return ForbidPairProduction(parse_script(x["inner"], policies))
    if kind == "PrimaryCurrency":
        return PRIMARY_POLICY
    raise ScenarioError(f"unknown script kind {kind!r}")


@dataclass
class Names:
    """Label tables shared by everything in one scenario file."""

    policies: dict[str, PolicyScript] = field(default_factory=dict)
    assets: dict[str, AssetId] = field(default_factory=lambda: {PRIMARY_LABEL: PRIMARY})
    txs: dict[str, bytes] = field(default_factory=dict)
    # undeclared asset labels become AlwaysTrue-policy tokens when set
    implicit_assets: bool = False

    @classmethod
    def from_json(cls, doc: dict, implicit_assets: bool = False) -> "Names":
        n = cls(implicit_assets=implicit_assets)
        for name, entry in doc.get("policies", {}).items():
            n.policies[name] = parse_script(entry, n.policies)
        for label, entry in doc.get("assets", {}).items():
            if label == PRIMARY_LABEL:
                raise ScenarioError(f"asset label {PRIMARY_LABEL!r} is reserved for the primary currency")
            if not isinstance(entry, dict) or "policy" not in entry:
                raise ScenarioError(f"asset {label!r} needs a policy")
            n.assets[label] = asset(parse_script(entry["policy"], n.policies), entry.get("name", label))
        return n

    def asset(self, label: str) -> AssetId:
        if label not in self.assets:
            if not self.implicit_assets:
                raise ScenarioError(f"unknown asset {label!r}")
            self.assets[label] = asset(AlwaysTrue(), label)
        return self.assets[label]

    def asset_label(self, a: AssetId) -> str:
        for label, known in self.assets.items():
            if known == a:
                return label
        return f"{a.pid.hex()}:{a.name.hex()}"

    def tx_ref(self, ref: str) -> bytes:
        if ref in self.txs:
            return self.txs[ref]
        raw = _hex32(ref)
        if raw is None:
            raise UnknownTx(f"unknown transaction {ref!r}")
        return raw

    def bundle(self, x: Any) -> Quantities:
        if not isinstance(x, dict):
            raise ScenarioError(f"bundle must be an object, got {x!r}")
        entries = []
        for label, q in x.items():
            if not isinstance(q, int) or isinstance(q, bool):
                raise ScenarioError(f"quantity of {label!r} must be an integer")
            entries.append((self.asset(label), q))
        return Quantities(entries)

    def bundle_json(self, q: Quantities) -> dict:
        return {self.asset_label(a): n for a, n in q.items()}


# ---------------------------------------------------------------------------
# transactions


def parse_tx(x: Any, names: Names) -> Tx:
    """Build (and sign) one transaction; registers its label for later references."""
    if not isinstance(x, dict):
        raise ScenarioError(f"transaction must be an object, got {x!r}")
    try:
        inputs = [Input(OutputRef(names.tx_ref(i["tx"]), i["index"]), key_of(i.get("key", OPEN_LABEL)))
                  for i in x.get("inputs", [])]
        outputs = [Output(addr_of(o["addr"]), names.bundle(o["value"])) for o in x.get("outputs", [])]
        vi = x.get("validity", {})
        validity = Interval(vi.get("lo", 0), vi.get("hi"))
        forge = names.bundle(x.get("forge", {}))
        scripts = [parse_script(s, names.policies) for s in x.get("scripts", [])]
        sigs = [bytes.fromhex(s) for s in x.get("sigs", [])]
    except (KeyError, TypeError) as e:
        raise ScenarioError(f"bad transaction {x.get('label', '?')!r}: {e!r}") from e
    except ValueError as e:
        if isinstance(e, ScenarioError):
            raise
        raise ScenarioError(f"bad transaction {x.get('label', '?')!r}: {e}") from e
    if len({i.output_ref for i in inputs}) != len(inputs):
        # a set cannot hold two inputs for one output; flag instead of silently merging
        raise ScenarioError(f"transaction {x.get('label', '?')!r} lists an output reference twice")
    t = Tx(inputs, outputs, validity, forge, scripts, sigs)
    t = unlock(t, [key_of(s) for s in x.get("signers", [])])
    if "label" in x:
        names.txs[_require_str(x["label"], "label")] = tx_id(t)
    return t


def tx_to_json(t: Tx, names: Optional[Names] = None) -> dict:
    """Raw JSON mirror of a transaction (hex ids, keys, addresses, scripts and signatures)."""
    names = names or Names()
    return {
        "id": tx_id(t).hex(),
        "inputs": [{"tx": i.output_ref.id.hex(), "index": i.output_ref.index, "key": i.key.hex()}
                   for i in sorted(t.inputs)],
        "outputs": [{"addr": o.addr.hex(), "value": names.bundle_json(o.value)} for o in t.outputs],
        "validity": {"lo": t.validity.lo, "hi": t.validity.hi},
        "forge": names.bundle_json(t.forge),
        "scripts": sorted(encode_script(s).hex() for s in t.scripts),
        "sigs": sorted(s.hex() for s in t.sigs),
    }


# ---------------------------------------------------------------------------
# ledger scenarios


@dataclass
class LedgerScenario:
    names: Names
    ledger: Ledger
    ticks: list[int]  # newest first, aligned with ledger.txs
    batches: list[Batch]
    tick: int
    labels: dict[bytes, str]


def parse_ledger_scenario(doc: Any) -> LedgerScenario:
    if not isinstance(doc, dict):
        raise ScenarioError("scenario must be a JSON object")
    _check_version(doc)
    names = Names.from_json(doc)
    txs = [parse_tx(x, names) for x in doc.get("ledger", [])]
    ticks = doc.get("ticks", [0] * len(txs))
    if len(ticks) != len(txs):
        raise ScenarioError("ticks must align with the ledger's transactions")
    batches = []
    for b in doc.get("batches", []):
        members = b.get("txs", []) if isinstance(b, dict) else b
        if not members:
            raise ScenarioError("a batch must contain at least one transaction")
        batches.append(Batch(_parse_group(members, names)))
    labels = {h: label for label, h in names.txs.items()}
    return LedgerScenario(names, Ledger.from_oldest_first(txs), list(reversed(ticks)), batches,
                          doc.get("tick", 0), labels)


def _parse_group(members: list, names: Names) -> list[Tx]:
    """Parse transactions that may refer to each other's labels in any list order."""
    out: list[Optional[Tx]] = [None] * len(members)
    pending = list(range(len(members)))
    while pending:
        deferred = []
        for k in pending:
            try:
                out[k] = parse_tx(members[k], names)
            except UnknownTx:
                deferred.append(k)
        if len(deferred) == len(pending):
            parse_tx(members[deferred[0]], names)  # re-raise for the first unresolved one
        pending = deferred
    return out


def _check_version(doc: dict):
    v = doc.get("schemaVersion", SCHEMA_VERSION)
    if v != SCHEMA_VERSION:
        raise ScenarioError(f"unsupported schemaVersion {v!r}")


# ---------------------------------------------------------------------------
# market


@dataclass
class MarketScenario:
    names: Names
    rates: dict[str, list[tuple[AssetId, Rate]]]
    nominal: dict[AssetId, Fraction]
    offers: list[tuple[str, BabelOffer]]


def parse_rates(x: Any, names: Names) -> dict[str, list[tuple[AssetId, Rate]]]:
    if not isinstance(x, dict):
        raise ScenarioError("rates must map buyer names to rate lists")
    out = {}
    for buyer, lst in x.items():
        out[buyer] = [(names.asset(e["token"]), parse_rational(e["rate"])) for e in lst]
    return out


def parse_market_scenario(doc: Any) -> MarketScenario:
    if not isinstance(doc, dict):
        raise ScenarioError("scenario must be a JSON object")
    _check_version(doc)
    names = Names.from_json(doc)
    try:
        rates = parse_rates(doc.get("rates", {}), names)
        nominal = {names.asset(k): Fraction(parse_rational(v)) for k, v in doc.get("nominal", {}).items()}
        offers = []
        for k, o in enumerate(doc.get("offers", [])):
            oid = str(o.get("id", k))
            tokens = tuple((names.asset(tok), n) for tok, n in o["tokens"])
            offers.append((oid, BabelOffer(bytes(32), tokens, o["liability"])))
    except (KeyError, TypeError, OverflowError) as e:
        raise ScenarioError(f"bad market scenario: {e!r}") from e
    except ValueError as e:
        if isinstance(e, ScenarioError):
            raise
        raise ScenarioError(f"bad market scenario: {e}") from e
    return MarketScenario(names, rates, nominal, offers)


# ---------------------------------------------------------------------------
# selection


def parse_instance(doc: Any) -> SelectionInstance:
    if not isinstance(doc, dict):
        raise ScenarioError("instance must be a JSON object")
    _check_version(doc)
    try:
        vm = doc.get("valueModel", {"mode": "constant"})
        alpha = parse_rational(vm.get("alpha", 0))
        cands, tokens = [], {}
        for x in doc["txs"]:
            c = CandidateTransaction(x["id"], x["value"], abs(x["liability"]), x["size"], x.get("token"))
            cands.append(c)
            if c.token is not None:
                tokens[c.id] = c.token
        model = ValueModel(vm.get("mode", "constant"), alpha, tokens)
        return SelectionInstance(cands, doc["blockSize"], doc["reserve"], model)
    except (KeyError, TypeError) as e:
        raise ScenarioError(f"bad selection instance: {e!r}") from e
    except ValueError as e:
        if isinstance(e, ScenarioError):
            raise
        raise ScenarioError(f"bad selection instance: {e}") from e


def instance_to_json(inst: SelectionInstance) -> dict:
    return {
        "schemaVersion": SCHEMA_VERSION,
        "blockSize": inst.block_size,
        "reserve": inst.reserve,
        "valueModel": {"mode": inst.model.mode, "alpha": rational_json(inst.model.alpha)},
        "txs": [{"id": c.id, "value": c.initial_value, "liability": -c.liability_cost, "size": c.size,
                 **({"token": inst.model.token(c)} if inst.model.token(c) is not None else {})}
                for c in inst.mempool],
    }


# ---------------------------------------------------------------------------
# simulation


@dataclass
class SimScenario:
    config: SimConfig
    names: Names
    rates: dict[int, list[tuple[AssetId, Rate]]]
    offers: list[tuple[str, int, Optional[int]]]  # token label, liability, explicit amount


def parse_sim_config(doc: Any, seed: Optional[int] = None) -> SimScenario:
    """``seed`` overrides the file's seed; one of the two must be present."""
    if not isinstance(doc, dict):
        raise ScenarioError("sim config must be a JSON object")
    _check_version(doc)
    names = Names.from_json(doc, implicit_assets=True)
    if seed is None:
        seed = doc.get("seed")
    if seed is None:
        raise ScenarioError("a seed is required (config field or --seed)")
    try:
        m = doc["m"]
        censored = doc.get("censoredTokens")
        cfg = SimConfig(
            m=m, t=doc["t"], delta=parse_rational(doc["delta"]),
            mu_q=parse_rational(doc["muQ"]) if "muQ" in doc else Fraction(m - doc["t"], m),
            k=doc["k"], rounds=doc["rounds"], coverage_p=doc.get("coverageP", 50), seed=seed,
            front_run_prob=parse_rational(doc.get("frontRunProb", 0)),
            censored_tokens=None if censored is None else frozenset(names.asset(c) for c in censored),
            deceptive_rate=parse_rational(doc["deceptiveRate"]) if "deceptiveRate" in doc else None,
        )
        rates = {}
        for buyer, lst in doc.get("rates", {}).items():
            rates[int(buyer)] = [(names.asset(e["token"]), parse_rational(e["rate"])) for e in lst]
        offers = [(o["token"], o["liability"], o.get("amount")) for o in doc["offers"]]
    except (KeyError, TypeError) as e:
        raise ScenarioError(f"bad sim config: {e!r}") from e
    except ValueError as e:
        if isinstance(e, ScenarioError):
            raise
        raise ScenarioError(f"bad sim config: {e}") from e
    for tok, _, _ in offers:
        names.asset(tok)
    return SimScenario(cfg, names, rates, offers)
