"""Simulation-grade hashing and signatures.

Keys are 32-byte strings and act as their own secret (identity keypair), so a
signature over ``h`` by key ``k`` is ``sha256(k || h)``. The ledger rules only
exercise the structure of signing, so any scheme with the same three functions
can be dropped in.
"""
from __future__ import annotations

import hashlib

DIGEST_LEN = 32

# Outputs at the open address may be spent by anybody presenting OPEN_KEY.
OPEN_ADDRESS = bytes(DIGEST_LEN)
OPEN_KEY = bytes(DIGEST_LEN)


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def key_addr(key: bytes) -> bytes:
    return sha256(key)


def sign(secret: bytes, message_hash: bytes) -> bytes:
    return sha256(secret + message_hash)


def verify(key: bytes, sig: bytes, message_hash: bytes) -> bool:
    return sig == sha256(key + message_hash)


def key_from_name(name: str) -> bytes:
    """Deterministic test/scenario key derived from a human label."""
    return sha256(b"babel-ledger-key:" + name.encode())
