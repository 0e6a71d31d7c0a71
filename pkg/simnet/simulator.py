"""Deterministic discrete-event simulator.

Events sit in one heap ordered by (time, insertion sequence). All randomness
comes from a single ``random.Random(seed)``, so a scenario fully determines
its trace.
"""
from __future__ import annotations

import heapq
import json
import random
from array import array
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterator

from core import config
from core.crypto import deal, hash_digest
from core.types import FQC, FTC, QC, TC, CoinQC, canonical, decode_payload, make_genesis
from replicas import get_replica_factory
from replicas.base import (CertFormed, Committed, Proposed, Replica, ReplicaConfig, ReplicaContext, Send, SetTimer,
                           ViewChange)
from simnet.load import Mempool, inject_load
from simnet.network import delay_of
from simnet.scenario import Scenario
from utils.logging_utils import log_debug, log_event

DELIVER, TIMER, CLIENT = 0, 1, 2

ReplicaFactory = Callable[[ReplicaContext], Replica]


@dataclass(frozen=True)
class CommitRecord:
    position: int
    block_id: str
    payload_digest: str
    time: int
    depth: int
    view: int
    round: int
    height: int


@dataclass(frozen=True)
class BlockRecord:
    parent: str | None
    round: int
    view: int
    height: int
    proposer: int | None
    time: int
    depth: int
    txns: tuple[int, ...] = ()


@dataclass(frozen=True)
class CertRecord:
    kind: str  # "qc" | "fqc"
    view: int
    round: int
    block_id: str
    height: int = 0
    proposer: int | None = None


@dataclass(frozen=True)
class TCRecord:
    round: int
    max_high_round: int


@dataclass(frozen=True)
class DirectCommit:
    replica: int
    block_id: str
    round: int
    view: int


class MessageLedger:
    """Columnar send/deliver log; one row per point-to-point send."""

    COLUMNS = ("sent", "due", "delivered", "src", "dst", "kind", "size", "depth")

    def __init__(self):
        for col in self.COLUMNS:
            setattr(self, col, array("q"))
        self.kinds: list[str] = []
        self._kind_index: dict[str, int] = {}

    def __len__(self) -> int:
        return len(self.sent)

    def record(self, sent: int, due: int | None, src: int, dst: int, kind: str, size: int, depth: int) -> int:
        k = self._kind_index.get(kind)
        if k is None:
            k = self._kind_index[kind] = len(self.kinds)
            self.kinds.append(kind)
        self.sent.append(sent)
        self.due.append(-1 if due is None else due)
        self.delivered.append(-1)
        self.src.append(src)
        self.dst.append(dst)
        self.kind.append(k)
        self.size.append(size)
        self.depth.append(depth)
        return len(self.sent) - 1

    def deliver(self, row: int, time: int) -> None:
        self.delivered[row] = time

    def by_kind(self) -> dict[str, int]:
        counts = [0] * len(self.kinds)
        for k in self.kind:
            counts[k] += 1
        return {name: counts[i] for i, name in enumerate(self.kinds)}

    def between(self, members: set[int]) -> Iterator[int]:
        for row in range(len(self.sent)):
            if self.src[row] in members and self.dst[row] in members:
                yield row

    def digest(self) -> str:
        blob = b"".join(getattr(self, col).tobytes() for col in self.COLUMNS)
        return hash_digest(blob + "\x00".join(self.kinds).encode()).hex()


@dataclass
class Trace:
    scenario: dict
    honest: list[int]
    commit_logs: dict[int, list[CommitRecord]] = field(default_factory=dict)
    blocks: dict[str, BlockRecord] = field(default_factory=dict)
    certs: list[CertRecord] = field(default_factory=list)
    coins: dict[int, int] = field(default_factory=dict)
    tcs: list[TCRecord] = field(default_factory=list)
    direct_commits: list[DirectCommit] = field(default_factory=list)
    fallbacks: dict[int, dict] = field(default_factory=dict)
    txns: dict[int, int] = field(default_factory=dict)
    byzantine: dict[int, dict[str, int]] = field(default_factory=dict)
    ledger: MessageLedger = field(default_factory=MessageLedger)
    truncated: bool = False
    end_time: int = 0
    events: int = 0

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "honest": self.honest,
            "commit_logs": {i: [asdict(r) for r in log] for i, log in self.commit_logs.items()},
            "blocks": {bid: asdict(b) for bid, b in self.blocks.items()},
            "certs": [asdict(c) for c in self.certs],
            "coins": self.coins,
            "tcs": [asdict(t) for t in self.tcs],
            "direct_commits": [asdict(d) for d in self.direct_commits],
            "fallbacks": self.fallbacks,
            "txns": self.txns,
            "byzantine": self.byzantine,
            "ledger": {"messages_total": len(self.ledger), "by_kind": self.ledger.by_kind(),
                       "digest": self.ledger.digest()},
            "truncated": self.truncated,
            "end_time": self.end_time,
            "events": self.events,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hash_digest(self.to_json().encode()).hex()


def hop_clock(trace: Trace) -> dict[str, int]:
    """Per block committed by every honest replica: hops from proposal to the last honest commit."""
    commit_depths: dict[str, list[int]] = {}
    for i in trace.honest:
        for rec in trace.commit_logs.get(i, ()):
            commit_depths.setdefault(rec.block_id, []).append(rec.depth)
    hops = {}
    for bid, depths in commit_depths.items():
        blk = trace.blocks.get(bid)
        if blk is None or len(depths) < len(trace.honest):
            continue
        hops[bid] = max(depths) - blk.depth
    return hops


class Simulation:
    def __init__(self, scenario: Scenario, replica_overrides: dict[int, ReplicaFactory] | None = None,
                 max_events: int = config.MAX_EVENTS):
        self.scenario = scenario
        self.max_events = max_events
        self.rng = random.Random(scenario.seed)
        self.heap: list[tuple] = []
        self._seq = 0
        self.now = 0

        overrides = replica_overrides or {}
        crashed = set(scenario.crash_set)
        scheme, keys = deal(scenario.n, scenario.f, scenario.seed)
        genesis, genesis_qc = make_genesis(scheme, keys)
        cfg = ReplicaConfig(n=scenario.n, f=scenario.f, delta=scenario.delta, tau=scenario.tau,
                            batch_size=scenario.batch_size, backoff_factor=scenario.backoff_factor,
                            adoption=scenario.adoption)
        factory = get_replica_factory(scenario.protocol)

        self.replicas: dict[int, Replica] = {}
        for i in range(scenario.n):
            if i in crashed:
                continue
            ctx = ReplicaContext(scheme, keys[i], genesis, genesis_qc, cfg, Mempool())
            self.replicas[i] = overrides.get(i, factory)(ctx)
        self.honest = [i for i in sorted(self.replicas) if i not in overrides]
        self.last_depth = {i: 0 for i in self.replicas}

        self.trace = Trace(scenario=scenario.to_dict(), honest=list(self.honest))
        for i in self.honest:
            self.trace.commit_logs[i] = []
        self._cert_keys: set[tuple] = set()
        self._tc_keys: set[tuple] = set()
        self._load = inject_load(scenario.load_rate, scenario.batch_size, scenario.duration.ticks)

    def _push(self, time: int, kind: int, *payload) -> None:
        self._seq += 1
        heapq.heappush(self.heap, (time, self._seq, kind, payload))

    def _next_client_event(self) -> None:
        nxt = next(self._load, None)
        if nxt is not None:
            self._push(nxt[0], CLIENT, nxt[1])

    # --- action dispatch ---------------------------------------------------------------

    def _dispatch(self, src: int, actions: list, depth: int) -> None:
        self.last_depth[src] = depth
        rep = self.replicas[src]
        for act in actions:
            if isinstance(act, Send):
                self._send(src, rep, act, depth)
            elif isinstance(act, SetTimer):
                self._push(self.now + act.delay, TIMER, src, act.tag)
            elif isinstance(act, Committed):
                self._record_commit(src, act)
            elif isinstance(act, Proposed):
                self._record_block(act.block, depth)
            elif isinstance(act, CertFormed):
                self._record_cert(act.cert)
            elif isinstance(act, ViewChange):
                self._record_view_change(act)

    def _send(self, src: int, rep: Replica, act: Send, depth: int) -> None:
        targets = range(self.scenario.n) if act.to is None else (act.to,)
        kind = type(act.msg).__name__
        size = len(canonical(act.msg))
        leader = rep.is_round_leader()
        for dst in targets:
            delay = delay_of(src, dst, self.scenario.adversary, self.now, self.rng, delta=self.scenario.delta,
                             gst=self.scenario.gst, sender_is_leader=leader)
            if dst not in self.replicas:
                delay = None
            due = None if delay is None else self.now + delay
            row = self.trace.ledger.record(self.now, due, src, dst, kind, size, depth + 1)
            if due is not None:
                self._push(due, DELIVER, dst, act.msg, depth + 1, row)

    def _record_commit(self, replica: int, act: Committed) -> None:
        if replica not in self.trace.commit_logs:
            return
        blk = act.block
        log = self.trace.commit_logs[replica]
        bid = blk.id.hex()
        log.append(CommitRecord(len(log), bid, hash_digest(blk.payload).hex(), self.now, act.depth,
                                blk.view, blk.round, blk.height))
        if act.direct:
            self.trace.direct_commits.append(DirectCommit(replica, bid, blk.round, blk.view))

    def _record_block(self, blk, depth: int) -> None:
        bid = blk.id.hex()
        if bid in self.trace.blocks:
            return
        parent = blk.parent_id.hex() if blk.parent_id is not None else None
        self.trace.blocks[bid] = BlockRecord(parent, blk.round, blk.view, blk.height, blk.proposer, self.now, depth,
                                            tuple(decode_payload(blk.payload)))

    def _record_cert(self, cert) -> None:
        if isinstance(cert, QC):
            rec = CertRecord("qc", cert.view, cert.round, cert.block_id.hex())
        elif isinstance(cert, FQC):
            rec = CertRecord("fqc", cert.view, cert.round, cert.block_id.hex(), cert.height, cert.proposer)
        elif isinstance(cert, TC):
            key = (cert.round, cert.max_high_round)
            if key not in self._tc_keys:
                self._tc_keys.add(key)
                self.trace.tcs.append(TCRecord(*key))
            return
        elif isinstance(cert, CoinQC):
            self.trace.coins.setdefault(cert.view, cert.leader)
            return
        elif isinstance(cert, FTC):
            self.trace.fallbacks.setdefault(cert.view, _fallback_entry())["ftc"] = True
            return
        else:
            return
        key = _cert_key(rec)
        if key not in self._cert_keys:
            self._cert_keys.add(key)
            self.trace.certs.append(rec)

    def _record_view_change(self, act: ViewChange) -> None:
        entry = self.trace.fallbacks.setdefault(act.view, _fallback_entry())
        if act.kind == "enter_fallback":
            entry["entered"] += 1
        else:
            entry["exited"] += 1
            entry["closed_at"] = self.now
            if act.leader is not None:
                entry["leader"] = act.leader

    # --- main loop ---------------------------------------------------------------------

    def run(self) -> Trace:
        sc = self.scenario
        log_debug("simulation_start", protocol=sc.protocol, n=sc.n, seed=sc.seed, adversary=sc.adversary.kind)
        for i in sorted(self.replicas):
            self._dispatch(i, self.replicas[i].start(), 0)
        self._next_client_event()

        ticks, target = sc.duration.ticks, sc.duration.blocks
        while self.heap:
            time = self.heap[0][0]
            if time > ticks:
                self.now = ticks
                break
            if self.trace.events >= self.max_events:
                self.trace.truncated = True
                break
            _, _, kind, payload = heapq.heappop(self.heap)
            self.now = time
            self.trace.events += 1
            if kind == DELIVER:
                dst, msg, depth, row = payload
                self.trace.ledger.deliver(row, time)
                self._dispatch(dst, self.replicas[dst].handle(msg, depth), depth)
            elif kind == TIMER:
                rid, tag = payload
                depth = self.last_depth[rid]
                self._dispatch(rid, self.replicas[rid].on_timer(tag, depth), depth)
            else:
                (batch,) = payload
                for t in batch:
                    self.trace.txns[t] = time
                for i in sorted(self.replicas):
                    self.replicas[i].mempool.add(batch)
                self._next_client_event()
            if target is not None and all(len(self.trace.commit_logs[i]) >= target for i in self.honest):
                break

        self.trace.end_time = self.now
        self._finalize()
        log_event("simulation_finish", protocol=sc.protocol, seed=sc.seed, end_time=self.now,
                  events=self.trace.events, commits=min((len(v) for v in self.trace.commit_logs.values()), default=0),
                  truncated=self.trace.truncated)
        return self.trace

    def _finalize(self) -> None:
        trace = self.trace
        # a fallback decided if an honest replica committed one of its f-blocks before the view closed
        first_commit: dict[int, int] = {}
        for i in self.honest:
            for rec in trace.commit_logs[i]:
                if rec.height > 0 and rec.time < first_commit.get(rec.view, rec.time + 1):
                    first_commit[rec.view] = rec.time
        for view, entry in trace.fallbacks.items():
            closed = entry["closed_at"] if entry["closed_at"] is not None else trace.end_time
            entry["committed"] = view in first_commit and first_commit[view] <= closed
        for i in sorted(self.replicas):
            counts = self.replicas[i].byzantine_counts()
            if counts:
                trace.byzantine[i] = counts
        log_debug("trace_finalized", blocks=len(trace.blocks), certs=len(trace.certs), fallbacks=len(trace.fallbacks))


def _fallback_entry() -> dict:
    return {"entered": 0, "exited": 0, "leader": None, "ftc": False, "committed": False, "closed_at": None}


def _cert_key(rec: CertRecord) -> tuple:
    return (rec.kind, rec.view, rec.round, rec.block_id, rec.height, rec.proposer)


def run(scenario: Scenario, replica_overrides: dict[int, ReplicaFactory] | None = None,
        max_events: int = config.MAX_EVENTS) -> Trace:
    return Simulation(scenario, replica_overrides, max_events).run()
