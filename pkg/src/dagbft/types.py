"""Block, reference and transaction types plus the canonical wire format.

A block is identified by the triplet (author, round, digest). The digest is
a 16-byte blake2b over the canonical serialization of everything except the
signature, so equal content means equal identity. Signatures are simulated
(keyed recomputation) -- good enough to model "invalid signature" rejects
without pulling in real crypto.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from hashlib import blake2b
from typing import Iterable, Optional

DIGEST_SIZE = 16
DEFAULT_TX_BYTES = 512

_REF = struct.Struct(">HI16s")  # author, round, digest
_BLOCK_HEAD = struct.Struct(">HIH")  # author, round, parent count
_TX_HEAD = struct.Struct(">IQH")  # payload length, created_us, client


class WireFormatError(ValueError):
    """Raised when bytes do not decode to a well-formed block."""


@dataclass(frozen=True, order=True)
class BlockRef:
    """The (author, round, digest) identity triplet of a block."""

    author: int
    round: int
    digest: bytes

    def __repr__(self) -> str:  # compact: v3/r7/@a1b2c3
        return f"v{self.author}/r{self.round}/@{self.digest.hex()[:8]}"

    def encode(self) -> bytes:
        return _REF.pack(self.author, self.round, self.digest)

    @staticmethod
    def decode(buf: bytes, offset: int = 0) -> "BlockRef":
        author, round_, digest = _REF.unpack_from(buf, offset)
        return BlockRef(author, round_, digest)

    def to_text(self) -> str:
        """Round-trippable text form used in commit logs."""
        return f"v{self.author}/r{self.round}/{self.digest.hex()}"

    @staticmethod
    def from_text(text: str) -> "BlockRef":
        try:
            author_s, round_s, digest_s = text.split("/")
            return BlockRef(int(author_s[1:]), int(round_s[1:]), bytes.fromhex(digest_s))
        except (ValueError, IndexError) as exc:
            raise WireFormatError(f"bad block ref text: {text!r}") from exc


@dataclass(frozen=True)
class Transaction:
    """Opaque client payload with its creation time (microseconds) and client id."""

    payload: bytes
    created_us: int = 0
    client: int = 0

    def encoded_size(self) -> int:
        return _TX_HEAD.size + len(self.payload)


def _encode_txs(txs: tuple[Transaction, ...]) -> bytes:
    parts = [struct.pack(">I", len(txs))]
    for tx in txs:
        parts.append(_TX_HEAD.pack(len(tx.payload), tx.created_us, tx.client))
        parts.append(tx.payload)
    return b"".join(parts)


def _signing_key(author: int) -> bytes:
    # Deterministic per-validator "secret"; the point is only that a block
    # signed for one author fails verification for any other content/author.
    return blake2b(b"dagbft-key-%d" % author, digest_size=DIGEST_SIZE).digest()


def sign_digest(author: int, digest: bytes) -> bytes:
    return blake2b(digest, key=_signing_key(author), digest_size=DIGEST_SIZE).digest()


@dataclass(frozen=True)
class Block:
    """An immutable DAG vertex.

    ``parents`` are references to round-1 blocks; validity rules live in
    :func:`dagbft.dag.validate_block`. The digest and derived lookups are
    computed once at construction and cached.
    """

    author: int
    round: int
    parents: tuple[BlockRef, ...]
    payload: tuple[Transaction, ...] = ()
    signature: bytes = b""
    digest: bytes = field(default=b"", compare=False)
    parent_set: frozenset[BlockRef] = field(default=frozenset(), compare=False, repr=False)

    def __post_init__(self) -> None:
        body = self._body_bytes()
        digest = blake2b(body, digest_size=DIGEST_SIZE).digest()
        object.__setattr__(self, "digest", digest)
        object.__setattr__(self, "parent_set", frozenset(self.parents))
        if not self.signature:
            object.__setattr__(self, "signature", sign_digest(self.author, digest))

    def _body_bytes(self) -> bytes:
        head = _BLOCK_HEAD.pack(self.author, self.round, len(self.parents))
        parts = [head]
        parts.extend(p.encode() for p in self.parents)
        parts.append(_encode_txs(self.payload))
        return b"".join(parts)

    @property
    def ref(self) -> BlockRef:
        return BlockRef(self.author, self.round, self.digest)

    def verify_signature(self) -> bool:
        return self.signature == sign_digest(self.author, self.digest)

    def payload_bytes(self) -> int:
        return sum(tx.encoded_size() for tx in self.payload)

    # -- wire format ----------------------------------------------------------

    def encode(self) -> bytes:
        return self._body_bytes() + self.signature

    @staticmethod
    def decode(buf: bytes) -> "Block":
        try:
            author, round_, n_parents = _BLOCK_HEAD.unpack_from(buf, 0)
            off = _BLOCK_HEAD.size
            parents = []
            for _ in range(n_parents):
                parents.append(BlockRef.decode(buf, off))
                off += _REF.size
            (n_txs,) = struct.unpack_from(">I", buf, off)
            off += 4
            txs = []
            for _ in range(n_txs):
                size, created_us, client = _TX_HEAD.unpack_from(buf, off)
                off += _TX_HEAD.size
                payload = buf[off : off + size]
                if len(payload) != size:
                    raise WireFormatError("truncated transaction payload")
                off += size
                txs.append(Transaction(payload, created_us, client))
            signature = buf[off : off + DIGEST_SIZE]
            if len(signature) != DIGEST_SIZE or off + DIGEST_SIZE != len(buf):
                raise WireFormatError("bad block length")
        except struct.error as exc:
            raise WireFormatError(str(exc)) from None
        return Block(author, round_, tuple(parents), tuple(txs), signature)


def genesis_blocks(committee_size: int) -> list[Block]:
    """The canonical round-0 block of every validator.

    Well known to everybody: empty parents, empty payload, so every honest
    participant derives byte-identical genesis digests without communication.
    """
    return [Block(author=v, round=0, parents=()) for v in range(committee_size)]


def sort_refs(refs: Iterable[BlockRef]) -> list[BlockRef]:
    """Canonical order used everywhere ties must break deterministically."""
    return sorted(refs, key=lambda r: (r.round, r.author, r.digest))


def make_transactions(
    count: int,
    size: int = DEFAULT_TX_BYTES,
    created_us: int = 0,
    client: int = 0,
    tag: Optional[bytes] = None,
) -> list[Transaction]:
    """Convenience for tests/demos: ``count`` filler transactions."""
    base = tag or b"tx"
    out = []
    for i in range(count):
        body = (base + b"-%d" % i).ljust(size, b".")[:size]
        out.append(Transaction(body, created_us, client))
    return out
