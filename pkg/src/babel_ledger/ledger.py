"""Transactions, ledgers, canonical encoding and the UTXO-set helpers."""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .crypto import DIGEST_LEN, sha256
from .quantities import AssetId, Quantities, ZERO
from .scripts import PolicyScript, decode_script, encode_script

U64_MAX = 2**64 - 1
I128_MIN = -(2**127)
I128_MAX = 2**127 - 1
TX_TAG = 0x54


class LedgerError(Exception):
    pass


class MissingTx(LedgerError):
    def __init__(self, tx_id: bytes):
        super().__init__(f"no transaction with id {tx_id.hex()}")
        self.tx_id = tx_id


class IndexOutOfRange(LedgerError):
    def __init__(self, ref: "OutputRef", n_outputs: int):
        super().__init__(f"output index {ref.index} out of range for {ref.id.hex()[:16]} ({n_outputs} outputs)")
        self.ref = ref


def _check_digest(b: bytes, what: str):
    if len(b) != DIGEST_LEN:
        raise ValueError(f"{what} must be {DIGEST_LEN} bytes, got {len(b)}")


@dataclass(frozen=True, order=True)
class OutputRef:
    id: bytes
    index: int

    def __post_init__(self):
        _check_digest(self.id, "tx id")
        if self.index < 0:
            raise ValueError("output index must be non-negative")

    def __repr__(self):
        return f"OutputRef({self.id.hex()[:8]}, {self.index})"


@dataclass(frozen=True, order=True)
class Input:
    output_ref: OutputRef
    key: bytes

    def __post_init__(self):
        _check_digest(self.key, "public key")


@dataclass(frozen=True)
class Output:
    addr: bytes
    value: Quantities

    def __post_init__(self):
        _check_digest(self.addr, "address")


@dataclass(frozen=True)
class Interval:
    """Closed tick interval; ``hi=None`` is unbounded above."""

    lo: int = 0
    hi: Optional[int] = None

    def __post_init__(self):
        if self.lo < 0 or self.lo > U64_MAX:
            raise ValueError("interval lower bound out of u64 range")
        if self.hi is not None and not (self.lo <= self.hi < U64_MAX):
            raise ValueError("interval upper bound must satisfy lo <= hi < 2**64-1")

    def __contains__(self, tick: int) -> bool:
        return self.lo <= tick and (self.hi is None or tick <= self.hi)


ALWAYS = Interval()


@dataclass(frozen=True)
class Tx:
    inputs: frozenset[Input] = frozenset()
    outputs: tuple[Output, ...] = ()
    validity: Interval = ALWAYS
    forge: Quantities = ZERO
    scripts: frozenset = frozenset()
    sigs: frozenset[bytes] = frozenset()

    def __post_init__(self):
        # accept any iterable for the collection fields
        object.__setattr__(self, "inputs", frozenset(self.inputs))
        object.__setattr__(self, "outputs", tuple(self.outputs))
        object.__setattr__(self, "scripts", frozenset(self.scripts))
        object.__setattr__(self, "sigs", frozenset(self.sigs))
        for s in self.sigs:
            _check_digest(s, "signature")

    @property
    def id(self) -> bytes:
        return tx_id(self)

    def with_sigs(self, sigs: Iterable[bytes]) -> "Tx":
        return Tx(self.inputs, self.outputs, self.validity, self.forge, self.scripts, frozenset(sigs))


# ---------------------------------------------------------------------------
# canonical encoding


def _u32(n: int) -> bytes:
    return struct.pack(">I", n)


def encode_bundle(q: Quantities) -> bytes:
    out = [_u32(len(q))]
    for a, n in q.items():  # items are sorted by AssetId
        if not I128_MIN <= n <= I128_MAX:
            raise OverflowError(f"quantity {n} does not fit in signed 128 bits")
        out.append(a.pid + bytes([len(a.name)]) + a.name + n.to_bytes(16, "big", signed=True))
    return b"".join(out)


def _encode_input(i: Input) -> bytes:
    return i.output_ref.id + _u32(i.output_ref.index) + i.key


def _encode_output(o: Output) -> bytes:
    return o.addr + encode_bundle(o.value)


def encode_tx(t: Tx) -> bytes:
    parts = [bytes([TX_TAG])]
    ins = sorted(_encode_input(i) for i in t.inputs)
    parts.append(_u32(len(ins)))
    parts.extend(ins)
    parts.append(_u32(len(t.outputs)))
    parts.extend(_encode_output(o) for o in t.outputs)
    hi = U64_MAX if t.validity.hi is None else t.validity.hi
    parts.append(struct.pack(">QQ", t.validity.lo, hi))
    parts.append(encode_bundle(t.forge))
    scripts = sorted(encode_script(s) for s in t.scripts)
    parts.append(_u32(len(scripts)))
    parts.extend(scripts)
    sigs = sorted(t.sigs)
    parts.append(_u32(len(sigs)))
    parts.extend(sigs)
    return b"".join(parts)


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        chunk = self.buf[self.pos:self.pos + n]
        if len(chunk) != n:
            raise ValueError("truncated transaction encoding")
        self.pos += n
        return chunk

    def u32(self) -> int:
        return struct.unpack(">I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack(">Q", self.take(8))[0]


def _decode_bundle(r: _Reader) -> Quantities:
    entries = []
    for _ in range(r.u32()):
        pid = r.take(DIGEST_LEN)
        name = r.take(r.take(1)[0])
        n = int.from_bytes(r.take(16), "big", signed=True)
        if n == 0:
            raise ValueError("zero entry in bundle encoding")
        entries.append((AssetId(pid, name), n))
    q = Quantities(entries)
    if len(q) != len(entries):
        raise ValueError("duplicate asset in bundle encoding")
    return q


def decode_tx(buf: bytes) -> Tx:
    r = _Reader(buf)
    if r.take(1)[0] != TX_TAG:
        raise ValueError("bad transaction tag")
    inputs = []
    for _ in range(r.u32()):
        ref = OutputRef(r.take(DIGEST_LEN), r.u32())
        inputs.append(Input(ref, r.take(DIGEST_LEN)))
    outputs = []
    for _ in range(r.u32()):
        addr = r.take(DIGEST_LEN)
        outputs.append(Output(addr, _decode_bundle(r)))
    lo, hi = r.u64(), r.u64()
    validity = Interval(lo, None if hi == U64_MAX else hi)
    forge = _decode_bundle(r)
    scripts = []
    for _ in range(r.u32()):
        s, r.pos = decode_script(r.buf, r.pos)
        scripts.append(s)
    sigs = [r.take(DIGEST_LEN) for _ in range(r.u32())]
    if r.pos != len(buf):
        raise ValueError("trailing bytes after transaction encoding")
    t = Tx(frozenset(inputs), tuple(outputs), validity, forge, frozenset(scripts), frozenset(sigs))
    if encode_tx(t) != buf:
        raise ValueError("non-canonical transaction encoding")
    return t


_id_cache: dict[Tx, bytes] = {}


def tx_id(t: Tx) -> bytes:
    """SHA-256 of the canonical encoding with the signature set emptied.

    Signatures sign the id, so they cannot be part of what is hashed.
    """
    cached = _id_cache.get(t)
    if cached is None:
        cached = sha256(encode_tx(t.with_sigs(())))
        if len(_id_cache) > 200_000:
            _id_cache.clear()
        _id_cache[t] = cached
    return cached


# ---------------------------------------------------------------------------
# ledgers


@dataclass(frozen=True)
class Ledger:
    """A list of transactions, newest first (``txs[0]`` is the head)."""

    txs: tuple[Tx, ...] = ()
    _index: Optional[dict] = field(default=None, repr=False, compare=False)
    _utxo: Optional[dict] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "txs", tuple(self.txs))

    def __len__(self):
        return len(self.txs)

    @classmethod
    def from_oldest_first(cls, txs: Sequence[Tx]) -> "Ledger":
        l = cls()
        for t in txs:
            l = l.cons(t)
        return l

    def oldest_first(self) -> list[Tx]:
        return list(reversed(self.txs))

    @property
    def index(self) -> dict[bytes, Tx]:
        if self._index is None:
            object.__setattr__(self, "_index", {tx_id(t): t for t in self.txs})
        return self._index

    @property
    def utxo(self) -> dict[OutputRef, Output]:
        """Unspent outputs with their values; read-only by convention."""
        if self._utxo is None:
            u: dict[OutputRef, Output] = {}
            for t in reversed(self.txs):
                _apply_to_utxo(u, t)
            object.__setattr__(self, "_utxo", u)
        return self._utxo

    def cons(self, t: Tx) -> "Ledger":
        """``t :: self`` with the lookup caches carried over incrementally."""
        index = dict(self.index)
        index[tx_id(t)] = t
        u = dict(self.utxo)
        _apply_to_utxo(u, t)
        return Ledger((t,) + self.txs, index, u)


def _apply_to_utxo(u: dict, t: Tx) -> None:
    for i in t.inputs:
        u.pop(i.output_ref, None)
    h = tx_id(t)
    for k, o in enumerate(t.outputs):
        u[OutputRef(h, k)] = o


@dataclass(frozen=True)
class Batch:
    """Transactions admitted atomically, applied in list order."""

    txs: tuple[Tx, ...]

    def __post_init__(self):
        object.__setattr__(self, "txs", tuple(self.txs))
        if not self.txs:
            raise ValueError("a batch must contain at least one transaction")

    def __len__(self):
        return len(self.txs)

    def __iter__(self):
        return iter(self.txs)


def unspent_tx_outputs(t: Tx) -> set[OutputRef]:
    h = tx_id(t)
    return {OutputRef(h, k) for k in range(len(t.outputs))}


def unspent_outputs(l: Ledger) -> set[OutputRef]:
    return set(l.utxo)


def lookup_tx(l: Ledger, txid: bytes) -> Tx:
    try:
        return l.index[txid]
    except KeyError:
        raise MissingTx(txid) from None


def get_spent_output(i: Input, l: Ledger) -> Output:
    t = lookup_tx(l, i.output_ref.id)
    if i.output_ref.index >= len(t.outputs):
        raise IndexOutOfRange(i.output_ref, len(t.outputs))
    return t.outputs[i.output_ref.index]
