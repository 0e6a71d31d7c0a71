"""Uniform replica contract.

A replica consumes one input (start, a delivered message, or a timer) and
returns the list of actions it produced. The simulator turns ``Send`` and
``SetTimer`` into events; the remaining actions are trace records.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from itertools import cycle
from typing import Callable, ClassVar, Iterator, Union

from core.crypto import KeyMaterial, SigShare, ThresholdScheme
from core.errors import MissingAncestor
from core.messages import BlockRequest, BlockResponse, Vote
from core.types import (QC, AnyBlock, Block, BlockTree, Cert, QuorumCollector, ancestors, decode_payload,
                        encode_payload, form_qc, rank_of, vote_message, well_formed)
from utils.logging_utils import log_debug


@dataclass(frozen=True)
class Send:
    to: int | None  # None: every replica, sender included
    msg: object


@dataclass(frozen=True)
class SetTimer:
    delay: int
    tag: tuple


@dataclass(frozen=True)
class Proposed:
    block: AnyBlock


@dataclass(frozen=True)
class Committed:
    block: AnyBlock
    depth: int
    direct: bool


@dataclass(frozen=True)
class CertFormed:
    cert: object


@dataclass(frozen=True)
class ViewChange:
    kind: str  # "enter_fallback" | "exit_fallback"
    view: int
    leader: int | None = None


Action = Union[Send, SetTimer, Proposed, Committed, CertFormed, ViewChange]


@dataclass(frozen=True)
class ReplicaConfig:
    n: int
    f: int
    delta: int = 10
    tau: int = 40
    batch_size: int = 1
    backoff_factor: int = 5
    vaba: bool = False
    adoption: str = "rank"

    @property
    def sync_delay(self) -> int:
        return max(self.tau, 2 * self.delta)


@dataclass
class ReplicaContext:
    scheme: ThresholdScheme
    key: KeyMaterial
    genesis: Block
    genesis_qc: QC
    config: ReplicaConfig
    mempool: object | None = None


class Replica:
    protocol: ClassVar[str] = "base"

    def __init__(self, ctx: ReplicaContext):
        self.id = ctx.key.replica_id
        self.cfg = ctx.config
        self.n = ctx.config.n
        self.f = ctx.config.f
        self.quorum = 2 * self.f + 1
        self.scheme = ctx.scheme
        self.key = ctx.key
        self.mempool = ctx.mempool
        self.genesis_qc = ctx.genesis_qc
        self.tree = BlockTree(ctx.genesis, ctx.genesis_qc)

        self.r_cur = 0
        self.r_vote = 0
        self.v_cur = 0
        self.qc_high: Cert = ctx.genesis_qc

        self.log: list[AnyBlock] = []
        self.committed: set[bytes] = {ctx.genesis.id}
        self.byzantine: Counter = Counter()
        self.votes: QuorumCollector[QC] = QuorumCollector(self.quorum, lambda msgs: form_qc(msgs, self.scheme))
        self.collectors: list[QuorumCollector] = [self.votes]

        self._processed: set[tuple[bytes, bool]] = set()
        # (view, round) of the committed tip; certificates below it change nothing
        self._settled = (ctx.genesis.view, ctx.genesis.round)
        self._waiting: dict[bytes, list[Cert]] = {}
        self._sync_from: dict[bytes, Iterator[int]] = {}
        self._depth = 0
        self._out: list[Action] = []
        self._routes: dict[type, Callable] = {
            Vote: self.on_vote,
            BlockRequest: self.on_block_request,
            BlockResponse: self.on_block_response,
        }

    # --- contract -----------------------------------------------------------------

    def start(self) -> list[Action]:
        self._begin(0)
        self.on_start()
        return self._out

    def handle(self, msg, depth: int) -> list[Action]:
        self._begin(depth)
        route = self._routes.get(type(msg))
        if route is None:
            self.byzantine["unroutable"] += 1
        else:
            route(msg)
        return self._out

    def on_timer(self, tag: tuple, depth: int) -> list[Action]:
        self._begin(depth)
        if tag[0] == "sync":
            self._on_sync_timer(tag[1])
        else:
            self.on_protocol_timer(tag)
        return self._out

    def leader(self, round: int) -> int:
        return round % self.n

    def is_round_leader(self) -> bool:
        return self.leader(self.r_cur) == self.id

    def byzantine_counts(self) -> dict[str, int]:
        counts = Counter(self.byzantine)
        for collector in self.collectors:
            counts["duplicate_vote"] += collector.duplicates
            counts["conflicting_vote"] += collector.conflicts
        return {k: v for k, v in sorted(counts.items()) if v}

    # --- protocol hooks ---------------------------------------------------------------

    def on_start(self) -> None:
        raise NotImplementedError

    def on_protocol_timer(self, tag: tuple) -> None:
        raise NotImplementedError

    def on_round_enter(self, round: int, tc=None) -> None:
        raise NotImplementedError

    def lock(self, cert: Cert) -> None:
        """Lock rule beyond qc_high, which is already updated when this runs."""

    def commit_candidate(self, cert: Cert) -> AnyBlock | None:
        raise NotImplementedError

    def on_qc_formed(self, qc: QC) -> None:
        self._process_cert(qc)

    # --- certificate pipeline -------------------------------------------------------------

    def _process_cert(self, cert: Cert) -> None:
        """Advance Round, Lock, Commit for one certificate; repeats are no-ops."""
        if not self._learn(cert):
            return
        self._update_qc_high(cert)
        self._lock_and_commit(cert)
        self._advance(cert.round + 1)

    def _learn(self, cert: Cert) -> bool:
        key = (cert.block_id, bool(getattr(cert, "endorsed", False)))
        if key in self._processed or self._is_settled(cert.block_id):
            return False
        self._processed.add(key)
        self.tree.certify(cert)
        return True

    def _update_qc_high(self, cert: Cert) -> None:
        if rank_of(cert) > rank_of(self.qc_high):
            self.qc_high = cert

    def _advance(self, round: int, tc=None) -> bool:
        if round <= self.r_cur:
            return False
        self.r_cur = round
        self.on_round_enter(round, tc)
        return True

    def _lock_and_commit(self, cert: Cert) -> None:
        try:
            self.lock(cert)
            candidate = self.commit_candidate(cert)
            if candidate is not None:
                self._commit_through(candidate)
        except MissingAncestor as exc:
            self._await_block(exc.block_id, cert)

    def _commit_through(self, candidate: AnyBlock) -> None:
        if candidate.id in self.committed:
            return
        for blk in ancestors(self.tree, candidate.id, stop=self.committed):
            self.committed.add(blk.id)
            self.log.append(blk)
            if self.mempool is not None:
                self.mempool.mark_committed(decode_payload(blk.payload))
            self._out.append(Committed(blk, self._depth, blk.id == candidate.id))
        self._prune(candidate)

    def _is_settled(self, block_id: bytes) -> bool:
        blk = self.tree.get(block_id)
        return blk is not None and (blk.view, blk.round) < self._settled

    def _prune(self, tip: AnyBlock) -> None:
        """Forget per-round state below the committed tip."""
        self._settled = (tip.view, tip.round)
        self._processed = {k for k in self._processed if not self._is_settled(k[0])}
        self.votes.prune((tip.view, tip.round + 1))

    # --- helpers ---------------------------------------------------------------------

    def _begin(self, depth: int) -> None:
        self._depth = depth
        self._out = []

    def _multicast(self, msg) -> None:
        self._out.append(Send(None, msg))

    def _send(self, to: int, msg) -> None:
        self._out.append(Send(to, msg))

    def _sign(self, message: bytes) -> SigShare:
        return self.scheme.sign_share(self.key, message)

    def _share_ok(self, sender: int, share: SigShare, message: bytes) -> bool:
        return share.signer == sender and self.scheme.verify_share(share, message)

    def _next_payload(self, parent: Cert) -> bytes:
        if self.mempool is None:
            return b""
        # transactions already riding on the uncommitted branch
        exclude: set[int] = set()
        cur = parent.block_id
        while cur not in self.committed:
            blk = self.tree.get(cur)
            if blk is None:
                break
            exclude.update(decode_payload(blk.payload))
            if blk.qc is None:
                break
            cur = blk.qc.block_id
        return encode_payload(self.mempool.next_batch(self.cfg.batch_size, exclude))

    # --- block store and sync -----------------------------------------------------------

    def _store(self, block: AnyBlock) -> bool:
        if not self.tree.add(block):
            return False
        self._sync_from.pop(block.id, None)
        for cert in self._waiting.pop(block.id, ()):
            self._lock_and_commit(cert)
        return True

    def _await_block(self, block_id: bytes, cert: Cert) -> None:
        bucket = self._waiting.setdefault(block_id, [])
        if cert in bucket:
            return
        bucket.append(cert)
        if len(bucket) == 1:
            # the certificate's signers stored the block before voting for its descendant
            peers = [s for s in cert.sig.signers if s != self.id and 0 <= s < self.n]
            self._sync_from[block_id] = cycle(peers or [i for i in range(self.n) if i != self.id])
            self._out.append(SetTimer(self.cfg.sync_delay, ("sync", block_id)))

    def _on_sync_timer(self, block_id: bytes) -> None:
        if block_id in self.tree or block_id not in self._waiting:
            return
        peer = next(self._sync_from[block_id])
        log_debug("block_sync", replica=self.id, block=block_id.hex()[:16], peer=peer)
        self._send(peer, BlockRequest(self.id, block_id))
        self._out.append(SetTimer(self.cfg.sync_delay, ("sync", block_id)))

    def on_block_request(self, msg: BlockRequest) -> None:
        blk = self.tree.get(msg.block_id)
        if blk is not None:
            self._send(msg.sender, BlockResponse(self.id, blk))

    def on_block_response(self, msg: BlockResponse) -> None:
        if msg.block.id not in self._waiting:
            return
        if not well_formed(msg.block):
            self.byzantine["invalid_block"] += 1
            return
        self._store(msg.block)

    # --- steady-state votes ----------------------------------------------------------------

    def on_vote(self, vote: Vote) -> None:
        if not self._share_ok(vote.sender, vote.share, vote_message(vote.block_id, vote.round, vote.view)):
            self.byzantine["invalid_vote"] += 1
            return
        qc = self.votes.add((vote.view, vote.round), (vote.block_id, vote.round, vote.view), vote)
        if qc is not None:
            self._out.append(CertFormed(qc))
            self.on_qc_formed(qc)
