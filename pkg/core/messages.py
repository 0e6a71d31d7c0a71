"""Wire messages. ``sender`` is filled by the authenticated channel."""
from __future__ import annotations

from dataclasses import dataclass

from core.crypto import SigShare
from core.types import FTC, FQC, TC, AnyBlock, Block, CoinQC, FallbackBlock, TimeoutMsg

__all__ = [
    "Proposal", "Vote", "FallbackProposal", "FallbackVote", "TimeoutMsg", "TCMsg",
    "FTCMsg", "FQCMsg", "CoinShare", "CoinQCMsg", "BlockRequest", "BlockResponse",
]


@dataclass(frozen=True)
class Proposal:
    sender: int
    block: Block


@dataclass(frozen=True)
class Vote:
    sender: int
    block_id: bytes
    round: int
    view: int
    share: SigShare


@dataclass(frozen=True)
class FallbackProposal:
    sender: int
    block: FallbackBlock


@dataclass(frozen=True)
class FallbackVote:
    sender: int
    block_id: bytes
    round: int
    view: int
    height: int
    proposer: int
    share: SigShare


@dataclass(frozen=True)
class TCMsg:
    sender: int
    tc: TC


@dataclass(frozen=True)
class FTCMsg:
    sender: int
    ftc: FTC


@dataclass(frozen=True)
class FQCMsg:
    sender: int
    fqc: FQC


@dataclass(frozen=True)
class CoinShare:
    sender: int
    view: int
    share: SigShare


@dataclass(frozen=True)
class CoinQCMsg:
    sender: int
    coin_qc: CoinQC


@dataclass(frozen=True)
class BlockRequest:
    sender: int
    block_id: bytes


@dataclass(frozen=True)
class BlockResponse:
    sender: int
    block: AnyBlock
