"""Seeded random generators for selection instances, valid ledgers and babel offers."""
from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .crypto import OPEN_ADDRESS, OPEN_KEY, key_addr, key_from_name
from .ledger import Batch, Input, Ledger, Output, OutputRef, Tx, tx_id
from .market import CandidateTransaction
from .quantities import AssetId, Quantities
from .scripts import PRIMARY, AlwaysTrue, SignedBy, asset
from .selection import SelectionInstance, ValueModel
from .market import build_offer_tx
from .validation import apply_batch, unlock

TOKEN_LABELS = "ABC"


def random_instance(rng: random.Random, n_max: int, decay: bool, *, max_value: int = 100,
                    max_cost: int = 20, max_size: int = 50) -> SelectionInstance:
    """1..n_max candidates; S_B uniform in [1, total size], R uniform in [0, total cost]."""
    n = rng.randint(1, n_max)
    cands = [CandidateTransaction(i + 1, rng.randint(0, max_value), rng.randint(0, max_cost),
                                  rng.randint(1, max_size), rng.choice(TOKEN_LABELS))
             for i in range(n)]
    block_size = rng.randint(1, sum(c.size for c in cands))
    reserve = rng.randint(0, sum(c.liability_cost for c in cands))
    model = ValueModel("token_decay", Fraction(rng.randint(1, 4), 4)) if decay else ValueModel()
    return SelectionInstance(cands, block_size, reserve, model)


# ---------------------------------------------------------------------------
# ledgers


OWNERS = tuple(key_from_name(f"owner-{k}") for k in range(4))
ISSUER = key_from_name("token-issuer")
MINT_POLICY = SignedBy(ISSUER)
FREE_POLICY = AlwaysTrue()
MINTED = tuple(asset(MINT_POLICY, f"M{k}") for k in range(2))
FREE = tuple(asset(FREE_POLICY, f"F{k}") for k in range(2))


@dataclass
class Wallet:
    """Unspent outputs owned by the generator's keys, tracked alongside the ledger."""

    ledger: Ledger

    def owned(self) -> list[tuple[OutputRef, Output, bytes]]:
        by_addr = {key_addr(k): k for k in OWNERS}
        return [(ref, o, by_addr[o.addr]) for ref, o in sorted(self.ledger.utxo.items()) if o.addr in by_addr]


def _split(rng: random.Random, value: Quantities, parts: int) -> list[Quantities]:
    """Split a non-negative bundle into ``parts`` non-negative bundles summing to it."""
    out = [dict() for _ in range(parts)]
    for a, n in value.items():
        cuts = sorted(rng.randint(0, n) for _ in range(parts - 1))
        for k, (lo, hi) in enumerate(zip([0] + cuts, cuts + [n])):
            if hi > lo:
                out[k][a] = hi - lo
    return [Quantities(d) for d in out]


def genesis_tx(rng: random.Random) -> Tx:
    outputs = []
    for k in OWNERS:
        v = {PRIMARY: rng.randint(50, 500)}
        for a in FREE:
            if rng.random() < 0.5:
                v[a] = rng.randint(1, 50)
        outputs.append(Output(key_addr(k), Quantities(v)))
    forge = Quantities()
    for o in outputs:
        forge = forge + o.value
    return Tx(outputs=outputs, forge=forge)


def _transfer(rng: random.Random, w: Wallet) -> Optional[Batch]:
    owned = w.owned()
    if not owned:
        return None
    picks = rng.sample(owned, rng.randint(1, min(3, len(owned))))
    value = Quantities()
    for _, o, _ in picks:
        value = value + o.value
    forge = Quantities()
    scripts = set()
    roll = rng.random()
    if roll < 0.3:
        forge = Quantities({rng.choice(MINTED): rng.randint(1, 20)})
        scripts.add(MINT_POLICY)
    elif roll < 0.45:
        # burn part of a minted holding
        held = [a for a in MINTED if value[a] > 0]
        if held:
            a = rng.choice(held)
            forge = Quantities({a: -rng.randint(1, value[a])})
            scripts.add(MINT_POLICY)
    total = value + forge
    parts = _split(rng, total, rng.randint(1, 3))
    outputs = [Output(key_addr(rng.choice(OWNERS)), p) for p in parts if p]
    t = Tx({Input(ref, k) for ref, _, k in picks}, outputs, forge=forge, scripts=scripts)
    secrets = {k for _, _, k in picks}
    if scripts:
        secrets.add(ISSUER)
    return Batch([unlock(t, secrets)])


def _pair_production(rng: random.Random, w: Wallet) -> Optional[Batch]:
    """A two-transaction batch: create +q/-q of a free token, then resolve the liability."""
    owned = w.owned()
    if not owned:
        return None
    ref, o, k = rng.choice(owned)
    a = rng.choice(FREE)
    q = rng.randint(1, 30)
    holder = rng.choice(OWNERS)
    outs = [Output(OPEN_ADDRESS, Quantities({a: -q})), Output(key_addr(holder), Quantities({a: q}))]
    if o.value:
        outs.append(Output(key_addr(k), o.value))
    t1 = unlock(Tx({Input(ref, k)}, outs, scripts={FREE_POLICY}), [k])
    h = tx_id(t1)
    t2 = Tx({Input(OutputRef(h, 0), OPEN_KEY), Input(OutputRef(h, 1), holder)}, [], scripts={FREE_POLICY})
    return Batch([t1, unlock(t2, [holder])])


def random_valid_ledger(rng: random.Random, steps: int) -> tuple[Ledger, list[int]]:
    """A fully valid ledger built by applying ``steps`` random batches; returns it with its ticks."""
    w = Wallet(apply_batch(Ledger(), Batch([genesis_tx(rng)]), 0))
    ticks = [0]
    for step in range(1, steps + 1):
        make = _pair_production if rng.random() < 0.25 else _transfer
        b = make(rng, w)
        if b is None:
            continue
        w.ledger = apply_batch(w.ledger, b, step)
        ticks[:0] = [step] * len(b)
    return w.ledger, ticks


def pair_production_tx(rng: random.Random, l: Ledger, token: AssetId, *, with_script: bool) -> tuple[Tx, Tx]:
    """``(t_pair, t_resolve)``: t_pair splits an owned output and adds +q/-q of ``token``;
    t_resolve spends both halves. Scripts for ``token`` are attached only when asked."""
    by_addr = {key_addr(k): k for k in OWNERS}
    owned = [(ref, o) for ref, o in sorted(l.utxo.items()) if o.addr in by_addr]
    ref, o = rng.choice(owned)
    k = by_addr[o.addr]
    q = rng.randint(1, 10**6)
    holder = rng.choice(OWNERS)
    tagged = [("keep", Output(key_addr(k), o.value)), ("neg", Output(OPEN_ADDRESS, Quantities({token: -q}))),
              ("pos", Output(key_addr(holder), Quantities({token: q})))]
    rng.shuffle(tagged)
    outs = [x for _, x in tagged]
    neg = next(i for i, (tag, _) in enumerate(tagged) if tag == "neg")
    pos = next(i for i, (tag, _) in enumerate(tagged) if tag == "pos")
    scripts = {FREE_POLICY} if with_script else set()
    t_pair = unlock(Tx({Input(ref, k)}, outs, scripts=scripts), [k])
    h = tx_id(t_pair)
    t_resolve = Tx({Input(OutputRef(h, neg), OPEN_KEY), Input(OutputRef(h, pos), holder)}, [], scripts=scripts)
    return t_pair, unlock(t_resolve, [holder])


# ---------------------------------------------------------------------------
# babel offers


SELLER = key_from_name("seller")
COUNTERPARTY = key_from_name("counterparty")
FEE_ADDRESS = key_addr(key_from_name("fee-collector"))


@dataclass(frozen=True)
class FeeBatchCase:
    ledger: Ledger  # holds the seller's and the counterparty's funds
    offer_tx: Tx
    funds: Input
    fee: int
    token: AssetId
    x: int
    y: int


def random_fee_batch_case(rng: random.Random, *, exact_funds: bool = False) -> FeeBatchCase:
    """A funded seller offering ``y`` tokens against a ``-x`` liability, and a counterparty able to cover it."""
    token = rng.choice(FREE + MINTED)
    x = rng.randint(1, 10**4)
    y = rng.randint(1, 10**6)
    fee = rng.randint(0, 500)
    seller_value = Quantities({token: y + rng.randint(0, 100), PRIMARY: rng.randint(0, 100)})
    funds_value = Quantities({PRIMARY: x + fee + (0 if exact_funds else rng.randint(0, 1000))})
    g = Tx(outputs=[Output(key_addr(SELLER), seller_value), Output(key_addr(COUNTERPARTY), funds_value)],
           forge=seller_value + funds_value)
    ledger = apply_batch(Ledger(), Batch([g]), 0)
    gid = tx_id(g)
    offer_tx = build_offer_tx(Input(OutputRef(gid, 0), SELLER), seller_value, SELLER, x, token, y,
                              FEE_ADDRESS, key_addr(SELLER))
    return FeeBatchCase(ledger, offer_tx, Input(OutputRef(gid, 1), COUNTERPARTY), fee, token, x, y)
