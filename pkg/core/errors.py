from __future__ import annotations


class ChainSmrError(Exception):
    """Base error for the replication library and its harness."""


class CryptoError(ChainSmrError):
    """Threshold-signature material could not be combined or checked."""


class InsufficientShares(CryptoError):
    """Fewer distinct valid signers than the threshold."""


class MixedMessages(CryptoError):
    """Shares passed to one aggregation sign different digests."""


class InvalidCoin(CryptoError):
    """Coin signature failed verification, so no leader can be derived."""


class MissingAncestor(ChainSmrError):
    """A block (or one of its ancestors) is not in the local tree yet."""

    def __init__(self, block_id: bytes):
        super().__init__(f"missing block {block_id.hex()[:16]}")
        self.block_id = block_id


class InvalidScenario(ChainSmrError):
    """Scenario file or overrides describe an impossible configuration."""


class TamperedLog(ChainSmrError):
    """Persisted commit log does not match its hash chain."""

    def __init__(self, path: str, line: int, reason: str):
        super().__init__(f"{path}:{line}: {reason}")
        self.path = path
        self.line = line
