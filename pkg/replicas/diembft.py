"""3-chain DiemBFT with the round-based pacemaker.

The view number exists only for the shared types and stays 0.
"""
from __future__ import annotations

from core.errors import MissingAncestor
from core.messages import Proposal, TCMsg, TimeoutMsg, Vote
from core.types import (QC, TC, AnyBlock, Block, Cert, QuorumCollector, form_tc, make_block, round_message,
                        three_chain, validate_tc, verify_qc, vote_message, well_formed)
from replicas.base import CertFormed, Proposed, Replica, ReplicaContext, SetTimer
from utils.logging_utils import log_debug


class DiemBFTReplica(Replica):
    protocol = "diembft3"

    def __init__(self, ctx: ReplicaContext):
        super().__init__(ctx)
        self.r_lock = 0
        self.timed_out_round = 0
        self.last_tc: TC | None = None
        self.timeouts: QuorumCollector[TC] = QuorumCollector(self.quorum, lambda msgs: form_tc(msgs, self.scheme))
        self.collectors.append(self.timeouts)
        self._proposals: dict[int, bytes] = {}
        self._proposed: set[int] = set()
        self._tcs_seen: set[int] = set()
        self._routes.update({
            Proposal: self.on_proposal,
            TimeoutMsg: self.on_timeout,
            TCMsg: self.on_tc,
        })

    def on_start(self) -> None:
        self._process_cert(self.genesis_qc)

    # --- pacemaker -------------------------------------------------------------------

    def on_round_enter(self, round: int, tc: TC | None = None) -> None:
        # a TC entry is kept until a QC moves the round forward
        self.last_tc = tc
        if tc is not None and tc.round == round - 1 and self.leader(round) != self.id:
            self._send(self.leader(round), TCMsg(self.id, tc))
        self._out.append(SetTimer(self.cfg.tau, ("round", round)))
        if self.leader(round) == self.id:
            self.propose(round)

    def on_protocol_timer(self, tag: tuple) -> None:
        _, round = tag
        if round != self.r_cur or round <= self.timed_out_round:
            return
        self.timed_out_round = round
        log_debug("round_timeout", replica=self.id, round=round)
        self._multicast(TimeoutMsg(self.id, self._sign(round_message(round)), self.qc_high, round=round))

    def on_timeout(self, msg: TimeoutMsg) -> None:
        if msg.round is None or not self._share_ok(msg.sender, msg.share, round_message(msg.round)):
            self.byzantine["invalid_timeout"] += 1
            return
        high = msg.high_qc
        if not isinstance(high, QC) or high.round >= msg.round or not verify_qc(high, self.scheme):
            self.byzantine["invalid_timeout"] += 1
            return
        self._process_cert(high)
        if msg.round < self.r_cur:
            return
        tc = self.timeouts.add(msg.round, msg.round, msg)
        if tc is not None:
            self._out.append(CertFormed(tc))
            self._process_tc(tc)

    def on_tc(self, msg: TCMsg) -> None:
        if not validate_tc(msg.tc, self.scheme):
            self.byzantine["invalid_tc"] += 1
            return
        self._process_tc(msg.tc)

    def _process_tc(self, tc: TC) -> None:
        if tc.round in self._tcs_seen:
            return
        self._tcs_seen.add(tc.round)
        for qc in tc.high_qcs:
            self._process_cert(qc)
        self._advance(tc.round + 1, tc)

    # --- steady state ----------------------------------------------------------------

    def proposal_tc(self, round: int) -> TC | None:
        return None

    def propose(self, round: int) -> None:
        if round in self._proposed:
            return
        self._proposed.add(round)
        block = make_block(self.qc_high, self.proposal_tc(round), round, self.v_cur, self._next_payload(self.qc_high))
        self._store(block)
        self._out.append(Proposed(block))
        self._multicast(Proposal(self.id, block))

    def _valid_proposal(self, msg: Proposal) -> bool:
        block = msg.block
        if not isinstance(block, Block) or msg.sender != self.leader(block.round) or not well_formed(block):
            return False
        if not isinstance(block.qc, QC) or block.qc.round >= block.round or not verify_qc(block.qc, self.scheme):
            return False
        if block.coin_qc is not None:
            return False
        return block.tc is None or (block.tc.round < block.round and validate_tc(block.tc, self.scheme))

    def on_proposal(self, msg: Proposal) -> None:
        if not self._valid_proposal(msg):
            self.byzantine["invalid_proposal"] += 1
            return
        block = msg.block
        seen = self._proposals.setdefault(block.round, block.id)
        if seen != block.id:
            self.byzantine["equivocation"] += 1
            return
        self._store(block)
        self._process_cert(block.qc)
        if block.tc is not None:
            self._process_tc(block.tc)
        if self.safe_to_vote(block):
            self.r_vote = block.round
            share = self._sign(vote_message(block.id, block.round, block.view))
            self._send(self.leader(block.round + 1), Vote(self.id, block.id, block.round, block.view, share))

    def safe_to_vote(self, block: Block) -> bool:
        return (block.round == self.r_cur and block.view == self.v_cur and block.round > self.r_vote
                and block.round > self.timed_out_round and block.qc.round >= self.r_lock)

    # --- lock and commit --------------------------------------------------------------

    def lock(self, cert: Cert) -> None:
        blk = self.tree.get(cert.block_id)
        if blk is None:
            raise MissingAncestor(cert.block_id)
        if blk.qc is not None:
            self.r_lock = max(self.r_lock, blk.qc.round)

    def commit_candidate(self, cert: Cert) -> AnyBlock | None:
        return three_chain(self.tree, cert)

    def _prune(self, tip: AnyBlock) -> None:
        super()._prune(tip)
        self.timeouts.prune(tip.round + 1)
        self._proposals = {r: bid for r, bid in self._proposals.items() if r > tip.round}
        self._proposed = {r for r in self._proposed if r > tip.round}
        self._tcs_seen = {r for r in self._tcs_seen if r > tip.round}
