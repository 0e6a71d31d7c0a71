"""Threshold signatures and the common coin.

Only the ideal test scheme lives here. Shares are HMACs keyed from a dealer
seed, and the aggregate of a message at a threshold is a fixed function of
(digest, threshold, dealer seed). Any large-enough subset therefore yields the
same bytes, which is the uniqueness the coin relies on.
"""
from __future__ import annotations

import hashlib
import hmac
import struct
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Iterable

from core.errors import InsufficientShares, InvalidCoin, MixedMessages

DIGEST_SIZE = 32


def hash_digest(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


@dataclass(frozen=True)
class PublicSet:
    n: int
    f: int
    # ideal-scheme oracle key; a pairing-based scheme would hold public keys here
    verifier: bytes

    @property
    def quorum(self) -> int:
        return 2 * self.f + 1

    @property
    def coin_threshold(self) -> int:
        return self.f + 1


@dataclass(frozen=True)
class KeyMaterial:
    replica_id: int
    secret: bytes
    public_set: PublicSet


@dataclass(frozen=True)
class SigShare:
    signer: int
    message_digest: bytes
    share: bytes


@dataclass(frozen=True)
class ThresholdSig:
    message_digest: bytes
    threshold: int
    agg: bytes
    # unauthenticated hint naming who contributed; not part of identity or encoding
    signers: tuple[int, ...] = field(default=(), compare=False)


class ThresholdScheme(ABC):
    """Surface a production threshold scheme has to provide."""

    public_set: PublicSet

    @property
    def n(self) -> int:
        return self.public_set.n

    @property
    def f(self) -> int:
        return self.public_set.f

    @abstractmethod
    def sign_share(self, key: KeyMaterial, message: bytes) -> SigShare: ...

    @abstractmethod
    def verify_share(self, share: SigShare, message: bytes | None = None) -> bool: ...

    @abstractmethod
    def aggregate(self, shares: Iterable[SigShare], threshold: int) -> ThresholdSig: ...

    @abstractmethod
    def verify_threshold(self, sig: ThresholdSig, message: bytes) -> bool: ...

    @abstractmethod
    def coin_leader(self, coin_sig: ThresholdSig) -> int: ...


def _u64(value: int) -> bytes:
    return struct.pack("<Q", value)


class IdealScheme(ThresholdScheme):
    def __init__(self, public_set: PublicSet):
        self.public_set = public_set

    def _secret(self, replica_id: int) -> bytes:
        return hmac.digest(self.public_set.verifier, b"share" + _u64(replica_id), "sha256")

    def _expected_agg(self, digest: bytes, threshold: int) -> bytes:
        return hmac.digest(self.public_set.verifier, b"agg" + _u64(threshold) + digest, "sha256")

    def sign_share(self, key: KeyMaterial, message: bytes) -> SigShare:
        digest = hash_digest(message)
        return SigShare(key.replica_id, digest, hmac.digest(key.secret, digest, "sha256"))

    def verify_share(self, share: SigShare, message: bytes | None = None) -> bool:
        if not 0 <= share.signer < self.n:
            return False
        if message is not None and hash_digest(message) != share.message_digest:
            return False
        expected = hmac.digest(self._secret(share.signer), share.message_digest, "sha256")
        return hmac.compare_digest(expected, share.share)

    def aggregate(self, shares: Iterable[SigShare], threshold: int) -> ThresholdSig:
        shares = list(shares)
        digests = {s.message_digest for s in shares}
        if len(digests) > 1:
            raise MixedMessages(f"{len(digests)} distinct digests in one aggregation")
        signers = {s.signer for s in shares if self.verify_share(s)}
        if len(signers) < threshold or not digests:
            raise InsufficientShares(f"{len(signers)} distinct valid signers, need {threshold}")
        digest = digests.pop()
        return ThresholdSig(digest, threshold, self._expected_agg(digest, threshold), tuple(sorted(signers)))

    def verify_threshold(self, sig: ThresholdSig, message: bytes) -> bool:
        try:
            if sig.threshold < self.f + 1 or sig.threshold > self.n:
                return False
            if hash_digest(message) != sig.message_digest:
                return False
            return hmac.compare_digest(self._expected_agg(sig.message_digest, sig.threshold), sig.agg)
        except (AttributeError, TypeError):
            return False

    def coin_leader(self, coin_sig: ThresholdSig) -> int:
        expected = self._expected_agg(coin_sig.message_digest, coin_sig.threshold)
        if coin_sig.threshold != self.f + 1 or not hmac.compare_digest(expected, coin_sig.agg):
            raise InvalidCoin("coin signature does not verify")
        return int.from_bytes(hash_digest(coin_sig.agg)[:8], "little") % self.n


def deal(n: int, f: int, seed: int) -> tuple[IdealScheme, list[KeyMaterial]]:
    """Trusted dealer: one scheme instance plus a key per replica."""
    if n != 3 * f + 1:
        raise ValueError(f"n={n} must equal 3f+1 for f={f}")
    verifier = hash_digest(b"dealer" + _u64(seed & 0xFFFFFFFFFFFFFFFF))
    public_set = PublicSet(n, f, verifier)
    scheme = IdealScheme(public_set)
    keys = [KeyMaterial(i, scheme._secret(i), public_set) for i in range(n)]
    return scheme, keys
