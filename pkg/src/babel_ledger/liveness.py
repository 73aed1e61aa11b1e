"""Round-based simulation of the babel fee spot market with honest and adversarial issuers.

Every round one of ``m`` buyers is drawn uniformly as block issuer. Buyer ids
``m - t .. m - 1`` are adversarial. Each offer is submitted at round 0 and,
if some honest buyer finds it attractive under its own rates, that buyer
issues an accepting batch. From round 1 on:

* an honest issuer includes every pending accepting batch, or, when it is
  itself attracted, substitutes its own batch with probability
  ``front_run_prob``;
* an adversarial issuer censors offers in ``censored_tokens`` and includes
  the rest.

Every inclusion is an actual batch run through :func:`apply_batch` on a
simulated ledger, so an inclusion is only recorded if the ledger accepts it.
"""
from __future__ import annotations

import math
import random
import statistics
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional, Sequence

from .crypto import key_addr, key_from_name
from .ledger import Batch, Input, Ledger, Output, OutputRef, Tx, tx_id
from .market import (
    BabelOffer, ExchangeRateTable, build_fee_batch, build_offer_tx, is_attractive,
    min_attractive_amount,
)
from .quantities import AssetId, Quantities
from .scripts import PRIMARY
from .validation import apply_batch

HONEST = "honest"
ADVERSARIAL = "adversarial"
FRONT_RUN = "frontRun"

FEE_ADDRESS = key_addr(key_from_name("sim-fees"))
# a buyer's funds per offer are liability + FEE_PER_BATCH
FEE_PER_BATCH = 1


class InvalidConfig(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    m: int
    t: int
    delta: Fraction
    mu_q: Fraction
    k: int
    rounds: int
    coverage_p: int = 50
    seed: int = 0
    front_run_prob: Fraction = Fraction(0)
    censored_tokens: Optional[frozenset[AssetId]] = None  # None censors every token
    deceptive_rate: Optional[Fraction] = None  # rate published by adversaries for every token

    def __post_init__(self):
        for name in ("delta", "mu_q", "front_run_prob"):
            object.__setattr__(self, name, Fraction(getattr(self, name)))
        if self.deceptive_rate is not None:
            object.__setattr__(self, "deceptive_rate", Fraction(self.deceptive_rate))
        if self.censored_tokens is not None:
            object.__setattr__(self, "censored_tokens", frozenset(self.censored_tokens))

    def validate(self) -> "SimConfig":
        if self.m < 1 or not 0 <= self.t < self.m:
            raise InvalidConfig("need 0 <= t < m")
        if not 0 < self.delta < 1:
            raise InvalidConfig("delta must lie in (0, 1)")
        if Fraction(self.t, self.m - self.t) > 1 - self.delta:
            raise InvalidConfig(f"t/(m-t) = {self.t}/{self.m - self.t} exceeds 1 - delta = {1 - self.delta}")
        if not 0 < self.mu_q <= 1:
            raise InvalidConfig("mu_q must lie in (0, 1]")
        if self.k < 0 or self.rounds < 1:
            raise InvalidConfig("k must be non-negative and rounds positive")
        if not 0 < self.coverage_p <= 100:
            raise InvalidConfig("coverage_p must lie in (0, 100]")
        if not 0 <= self.front_run_prob <= 1:
            raise InvalidConfig("front_run_prob must lie in [0, 1]")
        if self.deceptive_rate is not None and self.deceptive_rate <= 0:
            raise InvalidConfig("deceptive_rate must be positive")
        return self

    @property
    def adversaries(self) -> range:
        return range(self.m - self.t, self.m)

    def is_honest(self, buyer: int) -> bool:
        return buyer < self.m - self.t

    def censors(self, token: AssetId) -> bool:
        return self.censored_tokens is None or token in self.censored_tokens


def liveness_bound(t: int, m: int, mu_q) -> int:
    """Rounds after which at least one honest block is expected: ceil((1/mu_q) * t/(m-t)), at least 1."""
    mu_q = Fraction(mu_q)
    if not 0 <= t < m:
        raise InvalidConfig("need 0 <= t < m")
    if not 0 < mu_q <= 1:
        raise InvalidConfig("mu_q must lie in (0, 1]")
    return max(1, math.ceil(Fraction(t, m - t) / mu_q))


@dataclass(frozen=True)
class OfferOutcome:
    offer_id: int
    submitted_round: int
    included_round: Optional[int]
    included_by: Optional[str]
    settled_round: Optional[int]

    @property
    def latency(self) -> Optional[int]:
        return None if self.included_round is None else self.included_round - self.submitted_round


@dataclass(frozen=True)
class SimResult:
    per_offer: tuple[OfferOutcome, ...]
    honest_blocks: int
    rounds: int
    ledger_length: int = 0

    @property
    def chain_quality(self) -> Fraction:
        # one block per round, so quality and honest growth coincide
        return Fraction(self.honest_blocks, self.rounds)

    @property
    def growth(self) -> Fraction:
        return Fraction(self.honest_blocks, self.rounds)


# ---------------------------------------------------------------------------
# offer sizing and rate publication


def published_table(true_rates: ExchangeRateTable, cfg: SimConfig) -> dict:
    """The table sellers see: honest rows as given, adversarial rows replaced by the deceptive rate."""
    out = {b: list(r) for b, r in true_rates.items()}
    if cfg.deceptive_rate is not None:
        tokens = sorted({tok for r in true_rates.values() for tok, _ in r})
        for b in cfg.adversaries:
            out[b] = [(tok, cfg.deceptive_rate) for tok in tokens]
    return out


def size_offer(offer_id: int, token: AssetId, liability: int, p: int, table: ExchangeRateTable) -> BabelOffer:
    """A single-token offer carrying the minimum amount attractive at coverage ``p``."""
    y = min_attractive_amount(liability, p, token, table)
    return BabelOffer(offer_id.to_bytes(32, "big"), ((token, max(y, 1)),), liability)


# ---------------------------------------------------------------------------
# simulated ledger


def _seller_key(i: int) -> bytes:
    return key_from_name(f"sim-seller-{i}")


def _buyer_key(b: int) -> bytes:
    return key_from_name(f"sim-buyer-{b}")


@dataclass
class _Market:
    """Genesis ledger plus the offer transaction of every offer; shared by all trials."""

    genesis: Ledger
    offer_txs: list[Tx]
    n_offers: int
    funds_index: dict = field(default_factory=dict)

    def batch(self, ledger: Ledger, i: int, buyer: int) -> Batch:
        key = _buyer_key(buyer)
        funds = Input(OutputRef(tx_id(self.genesis.txs[0]), self.funds_index[(buyer, i)]), key)
        return build_fee_batch(ledger, self.offer_txs[i], 0, funds, key, key_addr(key),
                               FEE_PER_BATCH, FEE_ADDRESS)


def _build_market(offers: Sequence[BabelOffer], m: int) -> _Market:
    outputs: list[Output] = []
    for i, o in enumerate(offers):
        outputs.append(Output(key_addr(_seller_key(i)), Quantities(o.tokens)))
    funds_index = {}
    for b in range(m):
        for i, o in enumerate(offers):
            funds_index[(b, i)] = len(outputs)
            outputs.append(Output(key_addr(_buyer_key(b)), Quantities({PRIMARY: -o.liability + FEE_PER_BATCH})))
    forge = Quantities()
    for out in outputs:
        forge = forge + out.value
    genesis_tx = Tx(outputs=outputs, forge=forge)
    genesis = apply_batch(Ledger(), Batch([genesis_tx]), 0)
    gid = tx_id(genesis_tx)
    offer_txs = []
    for i, o in enumerate(offers):
        (token, y), = o.tokens
        key = _seller_key(i)
        offer_txs.append(build_offer_tx(Input(OutputRef(gid, i), key), Quantities(o.tokens), key,
                                        -o.liability, token, y, FEE_ADDRESS, key_addr(key)))
    return _Market(genesis, offer_txs, len(offers), funds_index)


# ---------------------------------------------------------------------------
# simulation


def _trial(cfg: SimConfig, offers: Sequence[BabelOffer], rates: ExchangeRateTable,
           market: _Market, rng: random.Random) -> SimResult:
    acceptors = [[b for b in range(cfg.m) if cfg.is_honest(b) and is_attractive(o, rates.get(b, ()))]
                 for o in offers]
    # the honest buyer who issued the accepting batch, if any
    issued_by = [rng.choice(a) if a else None for a in acceptors]
    included: dict[int, tuple[int, str]] = {}
    ledger = market.genesis
    honest_blocks = 0
    for rnd in range(1, cfg.rounds + 1):
        issuer = rng.randrange(cfg.m)
        honest = cfg.is_honest(issuer)
        honest_blocks += honest
        for i, o in enumerate(offers):
            if i in included or issued_by[i] is None:
                continue
            if honest:
                counterparty, how = issued_by[i], HONEST
                if issuer in acceptors[i] and rng.random() < cfg.front_run_prob:
                    counterparty, how = issuer, FRONT_RUN
            elif cfg.censors(o.tokens[0][0]):
                continue
            else:
                counterparty, how = issued_by[i], ADVERSARIAL
            ledger = apply_batch(ledger, market.batch(ledger, i, counterparty), rnd)
            included[i] = (rnd, how)
    outcomes = []
    for i in range(len(offers)):
        if i in included:
            rnd, how = included[i]
            outcomes.append(OfferOutcome(i, 0, rnd, how, rnd + cfg.k))
        else:
            outcomes.append(OfferOutcome(i, 0, None, None, None))
    return SimResult(tuple(outcomes), honest_blocks, cfg.rounds, len(ledger))


def _check_offers(offers: Sequence[BabelOffer]):
    for o in offers:
        if len(o.tokens) != 1:
            raise InvalidConfig("the simulator handles single-token offers only")


def simulate(cfg: SimConfig, offers: Sequence[BabelOffer], rates: ExchangeRateTable) -> SimResult:
    """One trial seeded by ``cfg.seed``; ``rates`` holds every buyer's true rates."""
    cfg.validate()
    _check_offers(offers)
    return _trial(cfg, offers, rates, _build_market(offers, cfg.m), random.Random(cfg.seed))


def simulate_trials(cfg: SimConfig, offers: Sequence[BabelOffer], rates: ExchangeRateTable,
                    trials: int) -> list[SimResult]:
    """Trials ``0..trials-1`` use seeds ``cfg.seed + trial``."""
    cfg.validate()
    _check_offers(offers)
    market = _build_market(offers, cfg.m)
    return [_trial(cfg, offers, rates, market, random.Random(cfg.seed + n)) for n in range(trials)]


def settled_within(result: SimResult, window: int) -> bool:
    """All offers settled no later than ``window`` rounds after submission."""
    return all(o.settled_round is not None and o.settled_round - o.submitted_round <= window
               for o in result.per_offer)


def summarize(cfg: SimConfig, results: Sequence[SimResult]) -> dict:
    latencies = [o.latency for r in results for o in r.per_offer if o.latency is not None]
    total = sum(len(r.per_offer) for r in results)
    bound = liveness_bound(cfg.t, cfg.m, cfg.mu_q)
    window = bound + cfg.k
    settled = sum(1 for r in results for o in r.per_offer
                  if o.settled_round is not None and o.settled_round - o.submitted_round <= window)
    blocks = sum(r.rounds for r in results)
    honest = sum(r.honest_blocks for r in results)
    quantiles = {}
    if len(latencies) >= 2:
        qs = statistics.quantiles(latencies, n=100, method="inclusive")
        quantiles = {"p50": qs[49], "p90": qs[89], "p99": qs[98]}
    elif latencies:
        quantiles = {"p50": latencies[0], "p90": latencies[0], "p99": latencies[0]}
    return {
        "schemaVersion": 1,
        "trials": len(results),
        "offers": total,
        "included": len(latencies),
        "meanLatency": statistics.fmean(latencies) if latencies else None,
        "latencyQuantiles": quantiles,
        "maxLatency": max(latencies) if latencies else None,
        "livenessBound": bound,
        "settlementWindow": window,
        "settledWithinWindow": Fraction(settled, total) if total else None,
        "trialsFullySettled": sum(settled_within(r, window) for r in results),
        "chainQuality": Fraction(honest, blocks) if blocks else None,
        "expectedChainQuality": Fraction(cfg.m - cfg.t, cfg.m),
    }


def with_seed(cfg: SimConfig, seed: int) -> SimConfig:
    return replace(cfg, seed=seed)

