"""Token bundles: finitely-supported maps from asset ids to signed integers."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Union

DIGEST_LEN = 32
MAX_NAME_LEN = 32


@dataclass(frozen=True, order=True)
class AssetId:
    pid: bytes
    name: bytes = b""

    def __post_init__(self):
        if len(self.pid) != DIGEST_LEN:
            raise ValueError(f"policy id must be {DIGEST_LEN} bytes, got {len(self.pid)}")
        if len(self.name) > MAX_NAME_LEN:
            raise ValueError(f"asset name longer than {MAX_NAME_LEN} bytes")

    def __repr__(self):
        label = self.name.decode("utf-8", "replace") or "<primary>"
        return f"AssetId({label}@{self.pid[:4].hex()})"


class Quantities(Mapping[AssetId, int]):
    """Immutable token bundle. Missing keys read as 0; zero entries are never stored.

    Forms an abelian group under ``+`` and a partial order under ``<=`` (pointwise).
    """

    __slots__ = ("_items", "_hash")

    def __init__(self, entries: Union[Mapping[AssetId, int], Iterable[tuple[AssetId, int]], None] = None):
        acc: dict[AssetId, int] = {}
        if entries is not None:
            pairs = entries.items() if isinstance(entries, Mapping) else entries
            for asset, q in pairs:
                if not isinstance(asset, AssetId):
                    raise TypeError(f"expected AssetId key, got {type(asset).__name__}")
                if not isinstance(q, int) or isinstance(q, bool):
                    raise TypeError(f"quantity must be int, got {type(q).__name__}")
                acc[asset] = acc.get(asset, 0) + q
        self._items = tuple(sorted((a, q) for a, q in acc.items() if q != 0))
        self._hash = None

    # Mapping protocol
    def __getitem__(self, asset: AssetId) -> int:
        for a, q in self._items:
            if a == asset:
                return q
        return 0

    def __contains__(self, asset) -> bool:
        return any(a == asset for a, _ in self._items)

    def __iter__(self) -> Iterator[AssetId]:
        return (a for a, _ in self._items)

    def __len__(self) -> int:
        return len(self._items)

    def items(self):
        return self._items

    def support(self) -> frozenset[AssetId]:
        return frozenset(a for a, _ in self._items)

    def __eq__(self, other) -> bool:
        if isinstance(other, Quantities):
            return self._items == other._items
        if isinstance(other, Mapping):
            return self == Quantities(other)
        return NotImplemented

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(self._items)
        return self._hash

    def __repr__(self):
        body = ", ".join(f"{a!r}: {q}" for a, q in self._items)
        return "{" + body + "}"

    # group structure
    def __add__(self, other: Quantities) -> Quantities:
        if not isinstance(other, Quantities):
            return NotImplemented
        return Quantities(self._items + other._items)

    def __neg__(self) -> Quantities:
        return Quantities((a, -q) for a, q in self._items)

    def __sub__(self, other: Quantities) -> Quantities:
        if not isinstance(other, Quantities):
            return NotImplemented
        return self + (-other)

    # pointwise partial order; a <= b iff b - a has no negative entry
    def __le__(self, other: Quantities) -> bool:
        if not isinstance(other, Quantities):
            return NotImplemented
        return (other - self).is_nonnegative()

    def __ge__(self, other: Quantities) -> bool:
        if not isinstance(other, Quantities):
            return NotImplemented
        return other <= self

    def is_nonnegative(self) -> bool:
        return all(q > 0 for _, q in self._items)

    def positive_part(self) -> Quantities:
        return Quantities((a, q) for a, q in self._items if q > 0)

    def negative_part(self) -> Quantities:
        return Quantities((a, q) for a, q in self._items if q < 0)

    def restrict(self, pid: bytes) -> Quantities:
        return Quantities((a, q) for a, q in self._items if a.pid == pid)


ZERO = Quantities()


def total(bundles: Iterable[Quantities]) -> Quantities:
    pairs: list[tuple[AssetId, int]] = []
    for b in bundles:
        pairs.extend(b.items())
    return Quantities(pairs)
