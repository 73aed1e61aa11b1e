"""Babel offers, buyers' exchange-rate tables, coverage and fee-batch assembly."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Hashable, Mapping, Optional, Sequence, Union

from .crypto import OPEN_ADDRESS, OPEN_KEY
from .ledger import ALWAYS, Batch, Input, Interval, Ledger, Output, OutputRef, Tx, get_spent_output, tx_id
from .quantities import AssetId, Quantities
from .scripts import PRIMARY, PRIMARY_POLICY
from .validation import unlock

INF = math.inf
Rate = Union[Fraction, float]  # float only for the +inf sentinel

BuyerId = Hashable
ExchangeRateTable = Mapping[BuyerId, Sequence[tuple[AssetId, Rate]]]
NominalValueTable = Mapping[AssetId, Fraction]


class MarketError(ValueError):
    pass


class InvalidAmount(MarketError):
    pass


class NoRates(MarketError):
    pass


class UnpricedToken(MarketError):
    pass


class InsufficientFunds(MarketError):
    pass


class NotABabelOutput(MarketError):
    pass


@dataclass(frozen=True)
class BabelOffer:
    tx_id: bytes
    tokens: tuple[tuple[AssetId, int], ...]
    liability: int

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        if not self.tokens:
            raise InvalidAmount("an offer needs at least one token")
        if any(n <= 0 for _, n in self.tokens):
            raise InvalidAmount("offered token amounts must be positive")
        if self.liability >= 0:
            raise InvalidAmount("liability must be negative")

    @classmethod
    def from_output(cls, txid: bytes, o: Output) -> "BabelOffer":
        neg = o.value.negative_part()
        if o.addr != OPEN_ADDRESS or list(neg) != [PRIMARY]:
            raise NotABabelOutput("output is not an open primary-currency liability")
        pos = o.value.positive_part()
        if not pos or PRIMARY in pos:
            raise NotABabelOutput("babel output must offer custom tokens only")
        return cls(txid, tuple(pos.items()), neg[PRIMARY])


def make_swap_output(give: Quantities, want: Quantities) -> Output:
    if not give or not want:
        raise InvalidAmount("both sides of a swap must be nonzero")
    if not give.is_nonnegative() or not want.is_nonnegative():
        raise InvalidAmount("swap sides must be non-negative bundles")
    if give.support() & want.support():
        raise InvalidAmount("give and want must not share assets")
    return Output(OPEN_ADDRESS, give - want)


def make_babel_output(x: int, token: AssetId, y: int) -> Output:
    if x <= 0 or y <= 0:
        raise InvalidAmount("babel output amounts must be positive")
    if token == PRIMARY:
        raise InvalidAmount("babel output must offer a custom token")
    return make_swap_output(Quantities({token: y}), Quantities({PRIMARY: x}))


def _finite(rate: Rate) -> bool:
    return rate != INF


def percentile(p: int, token: AssetId, bl: ExchangeRateTable) -> Fraction:
    """Nearest-rank percentile of the finite rates published for ``token``."""
    if not 0 < p <= 100:
        raise ValueError("percentile must be in (0, 100]")
    rates = sorted(Fraction(r) for lst in bl.values() for tok, r in lst if tok == token and _finite(r))
    if not rates:
        raise NoRates(f"no finite rates listed for {token!r}")
    rank = -(-p * len(rates) // 100)  # ceil(p*N/100), 1-based
    return rates[rank - 1]


def min_attractive_amount(liability: int, p: int, token: AssetId, bl: ExchangeRateTable) -> int:
    return math.ceil(abs(liability) * percentile(p, token, bl))


def is_attractive(offer: BabelOffer, rates: Sequence[tuple[AssetId, Rate]]) -> bool:
    table = {tok: r for tok, r in rates}
    covered = Fraction(0)
    for tok, amount in offer.tokens:
        r = table.get(tok)
        if r is None or not _finite(r):
            continue
        covered += Fraction(amount) / Fraction(r)
    return covered >= abs(offer.liability)


@dataclass(frozen=True)
class CandidateTransaction:
    id: int
    initial_value: int
    liability_cost: int
    size: int
    token: Optional[Hashable] = None

    def __post_init__(self):
        if self.size < 1:
            raise ValueError("size must be positive")
        if self.initial_value < 0 or self.liability_cost < 0:
            raise ValueError("value and liability cost must be non-negative")


def batch_val(offer: BabelOffer, nominal: NominalValueTable, *, cand_id: int = 0, size: int = 1) -> CandidateTransaction:
    acc = Fraction(0)
    for tok, amount in offer.tokens:
        if tok not in nominal:
            raise UnpricedToken(f"no nominal value for {tok!r}")
        acc += (amount * Fraction(nominal[tok])) ** 2
    value = math.floor(acc / abs(offer.liability))
    token = offer.tokens[0][0] if len(offer.tokens) == 1 else None
    return CandidateTransaction(cand_id, value, abs(offer.liability), size, token)


def nominal_from_ratio(token_per_primary: Fraction) -> Fraction:
    r = Fraction(token_per_primary)
    if r <= 0:
        raise ValueError("exchange ratio must be positive")
    return 1 / r


# ---------------------------------------------------------------------------
# transaction builders


def build_offer_tx(seller_input: Input, seller_funds: Quantities, seller_secret: bytes,
                   x: int, token: AssetId, y: int, fee_addr: bytes, change_addr: bytes,
                   validity: Interval = ALWAYS) -> Tx:
    """A seller transaction paying its fee ``x`` from a babel liability.

    Outputs: the babel output ``{C: -x, token: y}``, the fee ``{C: x}`` and the
    seller's change (omitted when empty).
    """
    babel = make_babel_output(x, token, y)
    change = seller_funds - Quantities({token: y})
    if not change.is_nonnegative():
        raise InsufficientFunds("seller funds do not cover the offered tokens")
    outputs = [babel, Output(fee_addr, Quantities({PRIMARY: x}))]
    if change:
        outputs.append(Output(change_addr, change))
    t = Tx({seller_input}, outputs, validity, scripts={PRIMARY_POLICY})
    return unlock(t, [seller_secret])


def build_fee_batch(ledger: Ledger, offer_tx: Tx, babel_index: int, funds: Input, funds_secret: bytes,
                    counterparty_addr: bytes, fee: int, fee_addr: bytes,
                    validity: Interval = ALWAYS) -> Batch:
    """Batch ``offer_tx`` with a fee-paying transaction that consumes its babel output.

    ``ledger`` must hold the counterparty's ``funds`` output.
    """
    if not 0 <= babel_index < len(offer_tx.outputs):
        raise NotABabelOutput("babel output index out of range")
    babel = offer_tx.outputs[babel_index]
    offer = BabelOffer.from_output(tx_id(offer_tx), babel)
    x = -offer.liability
    if fee < 0:
        raise InvalidAmount("fee must be non-negative")
    have = get_spent_output(funds, ledger).value
    need = Quantities({PRIMARY: x + fee})
    change = have - need
    if not change.is_nonnegative():
        raise InsufficientFunds(f"counterparty funds {have[PRIMARY]} < {x + fee}")

    outputs = [Output(counterparty_addr, babel.value.positive_part())]
    if fee:
        outputs.append(Output(fee_addr, Quantities({PRIMARY: fee})))
    if change:
        outputs.append(Output(counterparty_addr, change))
    babel_in = Input(OutputRef(tx_id(offer_tx), babel_index), OPEN_KEY)
    t_fee = Tx({babel_in, funds}, outputs, validity, scripts={PRIMARY_POLICY})
    return Batch([offer_tx, unlock(t_fee, [funds_secret])])
