"""Equivocation test driver.

The driver runs a protocol replica but sends two conflicting versions of each
of its proposals and f-blocks, one to each half of the replicas, and votes for
every proposal it sees. It exists to exercise the unique-certification and
safety checkers; it is not a Byzantine strategy search.
"""
from __future__ import annotations

from core.messages import FallbackProposal, FallbackVote, Proposal, Vote
from core.types import (Block, FallbackBlock, decode_payload, encode_payload, fvote_message, make_block,
                        make_fallback_block, vote_message)
from replicas import get_replica_factory
from replicas.base import Proposed

# outside any id the load generator hands out
TWIN_TXN_BASE = 1 << 62


def _twin_block(block: Block) -> Block:
    payload = encode_payload(decode_payload(block.payload) + [TWIN_TXN_BASE + block.round])
    return make_block(block.qc, block.tc or block.coin_qc, block.round, block.view, payload)


class EquivocationMixin:
    def _multicast(self, msg) -> None:
        twin = None
        if isinstance(msg, Proposal):
            twin = Proposal(msg.sender, _twin_block(msg.block))
        elif isinstance(msg, FallbackProposal):
            fb = msg.block
            twin = FallbackProposal(msg.sender, make_fallback_block(_twin_block(fb.inner), fb.height, fb.proposer))
        if twin is None:
            super()._multicast(msg)
            return
        self.byzantine["equivocations_sent"] += 1
        self._out.append(Proposed(twin.block))
        half = self.n // 2
        for dst in range(self.n):
            self._send(dst, msg if dst < half else twin)

    def on_proposal(self, msg: Proposal) -> None:
        super().on_proposal(msg)
        blk = msg.block
        if isinstance(blk, Block) and blk.round > 0:
            share = self._sign(vote_message(blk.id, blk.round, blk.view))
            self._send(self.leader(blk.round + 1), Vote(self.id, blk.id, blk.round, blk.view, share))

    def on_fallback_proposal(self, msg: FallbackProposal) -> None:
        super().on_fallback_proposal(msg)
        fb = msg.block
        if isinstance(fb, FallbackBlock):
            share = self._sign(fvote_message(fb.id, fb.round, fb.view, fb.height, fb.proposer))
            self._send(fb.proposer, FallbackVote(self.id, fb.id, fb.round, fb.view, fb.height, fb.proposer, share))


def _with_equivocation(cls: type) -> type:
    return type(f"Equivocating{cls.__name__}", (EquivocationMixin, cls), {})


def equivocating(protocol: str):
    """Replica factory for ``protocol`` with the equivocation driver mixed in."""
    return get_replica_factory(protocol, wrap=_with_equivocation)
