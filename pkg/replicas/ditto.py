"""Ditto: Jolteon-style steady state with an asynchronous fallback.

Steady state runs in views. A view timeout moves every replica into the
fallback of that view once 2f+1 timeouts form an f-TC. There each replica
grows its own two-block f-chain, and after 2f+1 height-2 f-QCs the common
coin elects one chain. Certificates of the elected chain are endorsed and
rank above everything else in the view; a 2-chain of endorsed f-blocks
commits like a steady 2-chain.

With ``vaba=True`` no steady leader ever proposes and every view times out
on entry, which turns the fallback into a 2-chain VABA.
"""
from __future__ import annotations

from dataclasses import replace

from core.errors import MissingAncestor
from core.messages import (CoinQCMsg, CoinShare, FallbackProposal, FallbackVote, FQCMsg, FTCMsg, Proposal,
                           TimeoutMsg, Vote)
from core.types import (FQC, FTC, QC, AnyBlock, Block, CoinQC, Cert, FallbackBlock, QuorumCollector, coin_message,
                        form_coinqc, form_fqc, form_ftc, fvote_message, make_block, make_fallback_block, rank_of,
                        verify_cert, verify_coin_qc, verify_fqc, verify_ftc, view_message, vote_message, well_formed)
from replicas.base import CertFormed, Proposed, Replica, ReplicaContext, SetTimer, ViewChange
from utils.logging_utils import log_debug

ADOPTION_POLICIES = ("first", "rank")


def backoff_update(x: int, event: str, factor: int = 5) -> int:
    if event == "missed_leader":
        return x * factor
    if event == "steady_progress":
        return 1
    raise ValueError(f"unknown backoff event {event!r}")


class DittoReplica(Replica):
    protocol = "ditto"

    def __init__(self, ctx: ReplicaContext):
        super().__init__(ctx)
        if self.cfg.adoption not in ADOPTION_POLICIES:
            raise ValueError(f"adoption must be one of {ADOPTION_POLICIES}")
        self.vaba = self.cfg.vaba
        self.fallback = False
        self.fallback_view = -1
        self.timed_out_view = -1
        self.f_voted_round: dict[int, int] = {}
        self.f_voted_height: dict[int, int] = {}
        self.coins: dict[int, CoinQC] = {}
        self.backoff_x = 1
        self.streak = 0
        self.awaiting_leader = False

        self.view_timeouts: QuorumCollector[FTC] = QuorumCollector(self.quorum,
                                                                   lambda msgs: form_ftc(msgs, self.scheme))
        self.fvotes: QuorumCollector[FQC] = QuorumCollector(self.quorum, lambda msgs: form_fqc(msgs, self.scheme))
        self.coin_shares: QuorumCollector[CoinQC] = QuorumCollector(self.f + 1,
                                                                    lambda msgs: form_coinqc(msgs, self.scheme))
        self.collectors += [self.view_timeouts, self.fvotes, self.coin_shares]

        # (view, proposer, height) -> f-QC without endorsement evidence
        self._fqcs: dict[tuple[int, int, int], FQC] = {}
        self._h2_proposers: dict[int, set[int]] = {}
        self._coin_sent: set[int] = set()
        self._own_h1: FallbackBlock | None = None
        self._h2_sent = False
        self._deferred_h1: dict[bytes, FQC] = {}
        self._early_fblocks: dict[int, list[FallbackBlock]] = {}
        self._proposals: dict[tuple[int, int], bytes] = {}
        self._proposed: set[tuple[int, int]] = set()
        self._views_proposed: set[int] = set()
        self._sweeping = False
        self._routes.update({
            Proposal: self.on_proposal,
            TimeoutMsg: self.on_timeout,
            FTCMsg: self.on_ftc,
            FallbackProposal: self.on_fallback_proposal,
            FallbackVote: self.on_fallback_vote,
            FQCMsg: self.on_fqc,
            CoinShare: self.on_coin_share,
            CoinQCMsg: self.on_coin_qc,
        })

    def is_round_leader(self) -> bool:
        return not self.fallback and not self.vaba and self.leader(self.r_cur) == self.id

    def on_start(self) -> None:
        self._sweeping = True
        self._process_cert(self.genesis_qc)
        self._sweeping = False
        if self.vaba:
            self._timeout_view()
        else:
            self.on_round_enter(self.r_cur)

    # --- certificates -------------------------------------------------------------------

    def _effective(self, cert: Cert) -> bool:
        """A regular QC, or an f-QC whose proposer is the coin-elected leader of its view."""
        if isinstance(cert, QC):
            return True
        coin = cert.coin_qc or self.coins.get(cert.view)
        return coin is not None and coin.view == cert.view and coin.leader == cert.proposer

    def _process_cert(self, cert: Cert) -> None:
        if not isinstance(cert, FQC):
            super()._process_cert(cert)
            return
        self._observe_fqc(cert)
        # endorsement evidence doubles as the view's coin-QC
        if cert.coin_qc is not None and cert.coin_qc.view not in self.coins:
            self.exit_fallback(cert.coin_qc)

    def _observe_fqc(self, fqc: FQC) -> None:
        if fqc.view < self._settled[0]:
            return
        key = (fqc.view, fqc.proposer, fqc.height)
        plain = replace(fqc, coin_qc=None)
        fresh = key not in self._fqcs
        if fresh:
            self._fqcs[key] = plain
        coin = self.coins.get(fqc.view)
        if coin is not None and coin.leader == fqc.proposer:
            super()._process_cert(replace(plain, coin_qc=coin))
        if fresh and self.fallback and fqc.view == self.fallback_view == self.v_cur:
            self._on_certified_fblock(plain)

    def lock(self, cert: Cert) -> None:
        pass

    def commit_candidate(self, cert: Cert) -> AnyBlock | None:
        tip = self.tree.get(cert.block_id)
        if tip is None:
            raise MissingAncestor(cert.block_id)
        qc = tip.qc
        if qc is None or tip.round != qc.round + 1 or tip.view != qc.view or not self._effective(qc):
            return None
        parent = self.tree.get(qc.block_id)
        if parent is None:
            raise MissingAncestor(qc.block_id)
        return parent

    def _prune(self, tip: AnyBlock) -> None:
        super()._prune(tip)
        view = tip.view
        self._fqcs = {k: fqc for k, fqc in self._fqcs.items() if k[0] >= view}
        self._deferred_h1 = {bid: fqc for bid, fqc in self._deferred_h1.items() if fqc.view >= view}
        self._h2_proposers = {v: ps for v, ps in self._h2_proposers.items() if v >= view}
        self._coin_sent = {v for v in self._coin_sent if v >= view}
        self._proposals = {k: bid for k, bid in self._proposals.items() if k[0] >= view}
        self._proposed = {k for k in self._proposed if k[0] >= view}
        self._views_proposed = {v for v in self._views_proposed if v >= view}
        self.fvotes.prune((view,))
        self.view_timeouts.prune(view)
        self.coin_shares.prune(view)

    def _store(self, block: AnyBlock) -> bool:
        if not super()._store(block):
            return False
        if isinstance(block, FallbackBlock) and block.height == 2 and isinstance(block.qc, FQC):
            self._observe_fqc(block.qc)
        fqc = self._deferred_h1.pop(block.id, None)
        if fqc is not None and self.fallback and fqc.view == self.v_cur:
            self._consider_adoption(fqc)
        return True

    # --- steady state ---------------------------------------------------------------------

    def on_round_enter(self, round: int, tc=None) -> None:
        if self._sweeping or self.fallback or self.timed_out_view >= self.v_cur:
            return
        self._out.append(SetTimer(self.cfg.tau, ("steady", self.v_cur, round)))
        if self.leader(round) == self.id and not self.vaba:
            self.steady_propose(round)

    def steady_propose(self, round: int) -> None:
        slot = (self.v_cur, round)
        if slot in self._proposed:
            return
        self._proposed.add(slot)
        coin = None
        if self.v_cur not in self._views_proposed:
            coin = self.coins.get(self.v_cur - 1)
        self._views_proposed.add(self.v_cur)
        block = make_block(self.qc_high, coin, round, self.v_cur, self._next_payload(self.qc_high))
        self._store(block)
        self._out.append(Proposed(block))
        self._multicast(Proposal(self.id, block))

    def _valid_proposal(self, msg: Proposal) -> bool:
        block = msg.block
        if not isinstance(block, Block) or msg.sender != self.leader(block.round) or not well_formed(block):
            return False
        if block.tc is not None or block.qc is None or block.qc.round >= block.round:
            return False
        if not verify_cert(block.qc, self.scheme):
            return False
        coin = block.coin_qc
        return coin is None or (coin.view == block.view - 1 and verify_coin_qc(coin, self.scheme))

    def on_proposal(self, msg: Proposal) -> None:
        if not self._valid_proposal(msg):
            self.byzantine["invalid_proposal"] += 1
            return
        block = msg.block
        seen = self._proposals.setdefault((block.view, block.round), block.id)
        if seen != block.id:
            self.byzantine["equivocation"] += 1
            return
        self._store(block)
        if block.coin_qc is not None:
            self.exit_fallback(block.coin_qc)
        self._process_cert(block.qc)
        if self.steady_vote_ok(block):
            self.r_vote = block.round
            share = self._sign(vote_message(block.id, block.round, block.view))
            self._send(self.leader(block.round + 1), Vote(self.id, block.id, block.round, block.view, share))
            if self.awaiting_leader:
                self.awaiting_leader = False
                self.backoff_x = backoff_update(self.backoff_x, "steady_progress", self.cfg.backoff_factor)
                self.streak = 0

    def steady_vote_ok(self, block: Block) -> bool:
        qc = block.qc
        return (not self.fallback and self.timed_out_view < self.v_cur
                and block.round == self.r_cur and block.view == self.v_cur and block.round > self.r_vote
                and block.round == qc.round + 1 and self._effective(qc)
                and rank_of(qc) >= rank_of(self.qc_high))

    def on_protocol_timer(self, tag: tuple) -> None:
        _, view, round = tag
        if view != self.v_cur or round != self.r_cur or self.fallback or self.timed_out_view >= view:
            return
        if self.awaiting_leader:
            self.awaiting_leader = False
            self.backoff_x = backoff_update(self.backoff_x, "missed_leader", self.cfg.backoff_factor)
            self.streak = 0
        self._timeout_view()

    def _timeout_view(self) -> None:
        if self.timed_out_view >= self.v_cur:
            return
        self.timed_out_view = self.v_cur
        # stops steady voting; the fallback itself starts with the f-TC
        self.fallback = True
        log_debug("view_timeout", replica=self.id, view=self.v_cur, round=self.r_cur)
        share = self._sign(view_message(self.v_cur))
        self._multicast(TimeoutMsg(self.id, share, self.qc_high, view=self.v_cur))

    def on_timeout(self, msg: TimeoutMsg) -> None:
        if msg.view is None or not self._share_ok(msg.sender, msg.share, view_message(msg.view)):
            self.byzantine["invalid_timeout"] += 1
            return
        high = msg.high_qc
        if not verify_cert(high, self.scheme) or not self._effective(high):
            self.byzantine["invalid_timeout"] += 1
            return
        self._process_cert(high)
        if msg.view < self.v_cur:
            return
        ftc = self.view_timeouts.add(msg.view, msg.view, msg)
        if ftc is not None:
            self._out.append(CertFormed(ftc))
            self.enter_fallback(ftc)

    # --- fallback ---------------------------------------------------------------------------

    def on_ftc(self, msg: FTCMsg) -> None:
        if not verify_ftc(msg.ftc, self.scheme):
            self.byzantine["invalid_ftc"] += 1
            return
        self.enter_fallback(msg.ftc)

    def enter_fallback(self, ftc: FTC) -> None:
        if ftc.view < self.v_cur or self.fallback_view >= ftc.view:
            return
        self.fallback = True
        self.awaiting_leader = False
        self.v_cur = ftc.view
        self.fallback_view = ftc.view
        self.timed_out_view = max(self.timed_out_view, ftc.view)
        self.f_voted_round = {}
        self.f_voted_height = {}
        self._h2_sent = False
        self._out.append(ViewChange("enter_fallback", ftc.view))
        log_debug("enter_fallback", replica=self.id, view=ftc.view, qc_high_round=self.qc_high.round)
        self._multicast(FTCMsg(self.id, ftc))

        qc = self.qc_high
        inner = make_block(qc, None, qc.round + 1, self.v_cur, self._next_payload(qc))
        self._own_h1 = make_fallback_block(inner, 1, self.id)
        self._store(self._own_h1)
        self._out.append(Proposed(self._own_h1))
        self._multicast(FallbackProposal(self.id, self._own_h1))

        for key, fqc in list(self._fqcs.items()):
            if key[0] == ftc.view:
                self._on_certified_fblock(fqc)
        for fb in self._early_fblocks.pop(ftc.view, []):
            self.fallback_vote(fb)
        for view in [v for v in self._early_fblocks if v < ftc.view]:
            del self._early_fblocks[view]

    def _valid_fblock(self, msg: FallbackProposal) -> bool:
        fb = msg.block
        if not isinstance(fb, FallbackBlock) or msg.sender != fb.proposer or not well_formed(fb):
            return False
        if fb.qc is None or fb.qc.round >= fb.round:
            return False
        if fb.height == 2:
            return isinstance(fb.qc, FQC) and fb.qc.height == 1 and verify_fqc(fb.qc, self.scheme)
        return verify_cert(fb.qc, self.scheme)

    def on_fallback_proposal(self, msg: FallbackProposal) -> None:
        if not self._valid_fblock(msg):
            self.byzantine["invalid_fblock"] += 1
            return
        fb = msg.block
        self._store(fb)
        if fb.height == 1:
            self._process_cert(fb.qc)
        if fb.view > self.fallback_view:
            self._early_fblocks.setdefault(fb.view, []).append(fb)
            return
        self.fallback_vote(fb)

    def fallback_vote(self, fb: FallbackBlock) -> None:
        if not self.fallback or fb.view != self.v_cur or fb.view != self.fallback_view:
            return
        j = fb.proposer
        if fb.height <= self.f_voted_height.get(j, 0):
            return
        qc = fb.qc
        if fb.height == 1:
            ok = self._effective(qc) and rank_of(qc) >= rank_of(self.qc_high) and fb.round == qc.round + 1
        else:
            ok = (qc.view == self.v_cur and fb.round == qc.round + 1
                  and fb.round > self.f_voted_round.get(j, 0))
        if not ok:
            return
        self.f_voted_round[j] = fb.round
        self.f_voted_height[j] = fb.height
        share = self._sign(fvote_message(fb.id, fb.round, fb.view, fb.height, j))
        self._send(j, FallbackVote(self.id, fb.id, fb.round, fb.view, fb.height, j, share))

    def on_fallback_vote(self, vote: FallbackVote) -> None:
        message = fvote_message(vote.block_id, vote.round, vote.view, vote.height, vote.proposer)
        if vote.proposer != self.id or not self._share_ok(vote.sender, vote.share, message):
            self.byzantine["invalid_fvote"] += 1
            return
        key = (vote.block_id, vote.round, vote.view, vote.height, vote.proposer)
        fqc = self.fvotes.add((vote.view, vote.height), key, vote)
        if fqc is None:
            return
        self._out.append(CertFormed(fqc))
        if fqc.height == 2:
            # own height-2 f-QC goes out even after this view's exit
            self._multicast(FQCMsg(self.id, fqc))
        else:
            self._observe_fqc(fqc)

    def on_fqc(self, msg: FQCMsg) -> None:
        if not verify_fqc(msg.fqc, self.scheme):
            self.byzantine["invalid_fqc"] += 1
            return
        self._process_cert(msg.fqc)

    def _on_certified_fblock(self, fqc: FQC) -> None:
        if fqc.height == 1:
            self._consider_adoption(fqc)
            return
        proposers = self._h2_proposers.setdefault(fqc.view, set())
        proposers.add(fqc.proposer)
        if len(proposers) >= self.quorum and fqc.view not in self._coin_sent:
            self._coin_sent.add(fqc.view)
            log_debug("coin_share", replica=self.id, view=fqc.view)
            self._multicast(CoinShare(self.id, fqc.view, self._sign(coin_message(fqc.view))))

    def _consider_adoption(self, fqc: FQC) -> None:
        if self._h2_sent:
            return
        if self.cfg.adoption == "first" or fqc.proposer == self.id:
            self._propose_h2(fqc)
            return
        candidate = self.tree.get(fqc.block_id)
        if candidate is None:
            self._deferred_h1[fqc.block_id] = fqc
            return
        own = self._own_h1
        if own is None or rank_of(candidate.qc) > rank_of(own.qc):
            self._propose_h2(fqc)

    def _propose_h2(self, fqc: FQC) -> None:
        self._h2_sent = True
        inner = make_block(fqc, None, fqc.round + 1, self.v_cur, self._next_payload(fqc))
        fb = make_fallback_block(inner, 2, self.id)
        self._store(fb)
        self._out.append(Proposed(fb))
        self._multicast(FallbackProposal(self.id, fb))

    # --- leader election and exit ----------------------------------------------------------------

    def on_coin_share(self, msg: CoinShare) -> None:
        if not self._share_ok(msg.sender, msg.share, coin_message(msg.view)):
            self.byzantine["invalid_coin_share"] += 1
            return
        if msg.view < self.v_cur or msg.view in self.coins:
            return
        coin = self.coin_shares.add(msg.view, msg.view, msg)
        if coin is not None:
            self._out.append(CertFormed(coin))
            self.exit_fallback(coin)

    def on_coin_qc(self, msg: CoinQCMsg) -> None:
        if not verify_coin_qc(msg.coin_qc, self.scheme):
            self.byzantine["invalid_coin_qc"] += 1
            return
        self.exit_fallback(msg.coin_qc)

    def exit_fallback(self, coin: CoinQC) -> None:
        if coin.view in self.coins:
            return
        self.coins[coin.view] = coin
        if coin.view < self.v_cur:
            self._sweep_endorsed(coin)
            return
        self._multicast(CoinQCMsg(self.id, coin))
        if self.fallback and self.fallback_view == coin.view:
            self.r_vote = self.f_voted_round.get(coin.leader, 0)
        self.fallback = False
        self.v_cur = coin.view + 1
        self._out.append(ViewChange("exit_fallback", coin.view, coin.leader))
        log_debug("exit_fallback", replica=self.id, view=coin.view, leader=coin.leader)
        self._sweeping = True
        try:
            self._sweep_endorsed(coin)
        finally:
            self._sweeping = False
        self.streak += 1
        self._enter_view()

    def _sweep_endorsed(self, coin: CoinQC) -> None:
        for height in (1, 2):
            fqc = self._fqcs.get((coin.view, coin.leader, height))
            if fqc is not None:
                self._observe_fqc(fqc)

    def _enter_view(self) -> None:
        if self.vaba or self.streak < self.backoff_x:
            self._timeout_view()
            return
        self.awaiting_leader = True
        self.on_round_enter(self.r_cur)
