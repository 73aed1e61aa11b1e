"""Forging policy scripts: a closed, data-encoded set with canonical encodings."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from .crypto import DIGEST_LEN, sha256
from .quantities import AssetId


@dataclass(frozen=True)
class AlwaysTrue:
    pass


@dataclass(frozen=True)
class AlwaysFalse:
    pass


@dataclass(frozen=True)
class SignedBy:
    key: bytes

    def __post_init__(self):
        if len(self.key) != DIGEST_LEN:
            raise ValueError("SignedBy key must be 32 bytes")


@dataclass(frozen=True)
class ForbidPairProduction:
    inner: "PolicyScript"


@dataclass(frozen=True)
class PrimaryCurrency:
    pass


PolicyScript = Union[AlwaysTrue, AlwaysFalse, SignedBy, ForbidPairProduction, PrimaryCurrency]

TAG_ALWAYS_TRUE = 0x01
TAG_ALWAYS_FALSE = 0x02
TAG_SIGNED_BY = 0x03
TAG_FORBID_PAIR = 0x04
TAG_PRIMARY = 0x05


def encode_script(s: PolicyScript) -> bytes:
    if isinstance(s, AlwaysTrue):
        return bytes([TAG_ALWAYS_TRUE])
    if isinstance(s, AlwaysFalse):
        return bytes([TAG_ALWAYS_FALSE])
    if isinstance(s, SignedBy):
        return bytes([TAG_SIGNED_BY]) + s.key
    if isinstance(s, ForbidPairProduction):
        return bytes([TAG_FORBID_PAIR]) + encode_script(s.inner)
    if isinstance(s, PrimaryCurrency):
        return bytes([TAG_PRIMARY])
    raise TypeError(f"not a policy script: {s!r}")


def decode_script(buf: bytes, pos: int = 0) -> tuple[PolicyScript, int]:
    """Decode one script starting at ``pos``; returns (script, next position)."""
    if pos >= len(buf):
        raise ValueError("truncated script encoding")
    tag = buf[pos]
    pos += 1
    if tag == TAG_ALWAYS_TRUE:
        return AlwaysTrue(), pos
    if tag == TAG_ALWAYS_FALSE:
        return AlwaysFalse(), pos
    if tag == TAG_SIGNED_BY:
        key = buf[pos:pos + DIGEST_LEN]
        if len(key) != DIGEST_LEN:
            raise ValueError("truncated SignedBy key")
        return SignedBy(key), pos + DIGEST_LEN
    if tag == TAG_FORBID_PAIR:
        inner, pos = decode_script(buf, pos)
        return ForbidPairProduction(inner), pos
    if tag == TAG_PRIMARY:
        return PrimaryCurrency(), pos
    raise ValueError(f"unknown script tag 0x{tag:02x}")


def script_addr(s: PolicyScript) -> bytes:
    return sha256(encode_script(s))


def asset(policy: PolicyScript, name: Union[str, bytes] = b"") -> AssetId:
    if isinstance(name, str):
        name = name.encode()
    return AssetId(script_addr(policy), name)


PRIMARY_POLICY = PrimaryCurrency()
# The primary currency C: the unnamed asset under the PrimaryCurrency policy.
PRIMARY = asset(PRIMARY_POLICY)
