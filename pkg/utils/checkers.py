"""Trace checkers: safety, liveness, delivery and the structural chain invariants."""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

from simnet.simulator import Trace


@dataclass(frozen=True)
class Verdict:
    ok: bool
    detail: str = ""
    position: int | None = None
    blocks: tuple = ()
    violations: tuple = field(default=(), repr=False)

    def __bool__(self) -> bool:
        return self.ok

    @property
    def label(self) -> str:
        return "PASS" if self.ok else "FAIL"


def check_safety(trace: Trace) -> Verdict:
    """Honest commit logs are pairwise prefix-consistent and each position has one payload."""
    return check_prefix_consistency({i: trace.commit_logs.get(i, []) for i in trace.honest})


def check_prefix_consistency(logs: dict[int, list]) -> Verdict:
    """Logs of records with ``block_id`` and ``payload_digest`` agree position by position."""
    if not logs:
        return Verdict(True, "no honest replicas")
    ref_id = max(logs, key=lambda i: (len(logs[i]), -i))
    ref = logs[ref_id]
    first = None
    for i, log in logs.items():
        for pos, rec in enumerate(log):
            other = ref[pos]
            if rec.block_id != other.block_id or rec.payload_digest != other.payload_digest:
                if first is None or pos < first[0]:
                    first = (pos, i, rec, other)
                break
    if first is None:
        return Verdict(True)
    pos, i, rec, other = first
    return Verdict(False, f"replicas {i} and {ref_id} diverge at position {pos}", pos,
                   (rec.block_id, other.block_id))


def committed_txns(trace: Trace, replica: int) -> set[int]:
    out: set[int] = set()
    for rec in trace.commit_logs.get(replica, ()):
        blk = trace.blocks.get(rec.block_id)
        if blk is not None:
            out.update(blk.txns)
    return out


def check_liveness(trace: Trace, window: int | None = None) -> Verdict:
    """Every transaction injected at least ``window`` ticks before the end is in every honest log."""
    if trace.truncated:
        return Verdict(True, "skipped: truncated trace")
    if not trace.txns:
        return Verdict(True, "no load")
    if window is None:
        window = 10 * max(trace.scenario.get("tau", 0), trace.scenario.get("delta", 1))
    due = {t for t, at in trace.txns.items() if at <= trace.end_time - window}
    if not due:
        return Verdict(True, "no transaction old enough")
    for i in trace.honest:
        missing = due - committed_txns(trace, i)
        if missing:
            return Verdict(False, f"replica {i} misses {len(missing)} of {len(due)} transactions",
                           violations=tuple(sorted(missing)[:10]))
    return Verdict(True)


def check_delivery(trace: Trace) -> Verdict:
    """Honest-to-honest sends due before the end were delivered."""
    if trace.truncated:
        return Verdict(True, "skipped: truncated trace")
    ledger = trace.ledger
    honest = set(trace.honest)
    late = [row for row in ledger.between(honest)
            if ledger.due[row] < 0 or (ledger.due[row] < trace.end_time and ledger.delivered[row] < 0)]
    if late:
        return Verdict(False, f"{len(late)} honest messages undelivered", violations=tuple(late[:10]))
    return Verdict(True)


def endorsed_blocks(trace: Trace) -> dict[int, set[str]]:
    """Per view, the certified f-blocks on the coin-elected leader's f-chain.

    That is the leader's height-2 block and the height-1 block it extends, or the
    leader's height-1 block alone when no height-2 block of the leader was certified.
    """
    fqcs: dict[tuple[int, int, int], list[str]] = {}
    certified = set()
    for cert in trace.certs:
        if cert.kind == "fqc":
            fqcs.setdefault((cert.view, cert.proposer, cert.height), []).append(cert.block_id)
            certified.add(cert.block_id)
    out: dict[int, set[str]] = {}
    for view, leader in trace.coins.items():
        chain: set[str] = set()
        tops = fqcs.get((view, leader, 2), [])
        for bid in tops:
            chain.add(bid)
            blk = trace.blocks.get(bid)
            if blk is not None and blk.parent in certified:
                chain.add(blk.parent)
        if not tops:
            chain.update(fqcs.get((view, leader, 1), []))
        if chain:
            out[view] = chain
    return out


def _endorsed_ids(trace: Trace) -> set[str]:
    return set().union(*endorsed_blocks(trace).values())


def check_unique_certification(trace: Trace) -> Verdict:
    """At most one regular block per (view, round), and one endorsed f-block per (view, round)."""
    endorsed = _endorsed_ids(trace)
    seen: dict[tuple, str] = {}
    bad = []
    for cert in trace.certs:
        if cert.kind == "qc":
            key = ("qc", cert.view, cert.round)
        elif cert.block_id in endorsed:
            key = ("endorsed", cert.view, cert.round)
        else:
            continue
        prev = seen.setdefault(key, cert.block_id)
        if prev != cert.block_id:
            bad.append((key, prev, cert.block_id))
    if bad:
        return Verdict(False, f"{len(bad)} doubly certified slots", violations=tuple(bad))
    return Verdict(True)


def check_chain_shape(trace: Trace) -> Verdict:
    """Certified blocks sit one round above their parent and never in an older view."""
    bad = []
    for cert in trace.certs:
        blk = trace.blocks.get(cert.block_id)
        parent = trace.blocks.get(blk.parent) if blk is not None and blk.parent is not None else None
        if blk is None or parent is None:
            continue
        if blk.round != parent.round + 1 or blk.view < parent.view:
            bad.append(cert.block_id)
    if bad:
        return Verdict(False, f"{len(bad)} malformed chain links", violations=tuple(bad[:10]))
    return Verdict(True)


def check_no_endorsed_parent(trace: Trace) -> Verdict:
    """No endorsed f-block is the parent of a certified regular block of the same view."""
    endorsed = _endorsed_ids(trace)
    bad = []
    for cert in trace.certs:
        if cert.kind != "qc":
            continue
        blk = trace.blocks.get(cert.block_id)
        if blk is None or blk.parent not in endorsed:
            continue
        if trace.blocks[blk.parent].view == blk.view:
            bad.append(cert.block_id)
    if bad:
        return Verdict(False, f"{len(bad)} regular blocks on a same-view endorsed parent", violations=tuple(bad))
    return Verdict(True)


def _extends(trace: Trace, tip: str, ancestor: str) -> bool:
    cur = tip
    while cur is not None:
        if cur == ancestor:
            return True
        blk = trace.blocks.get(cur)
        cur = blk.parent if blk is not None else None
    return False


def check_endorsed_agreement(trace: Trace) -> Verdict:
    """Endorsed f-blocks of one view extend one another."""
    bad = []
    for view, ids in sorted(endorsed_blocks(trace).items()):
        for a, b in combinations(sorted(ids), 2):
            if not (_extends(trace, a, b) or _extends(trace, b, a)):
                bad.append((view, a, b))
    if bad:
        return Verdict(False, f"{len(bad)} forked endorsed pairs", violations=tuple(bad))
    return Verdict(True)


def check_tc_propagation(trace: Trace) -> Verdict:
    """Every TC above a direct-committed round carries a high QC at least that round."""
    if not trace.direct_commits or not trace.tcs:
        return Verdict(True)
    bad = []
    for b in sorted({d.round for d in trace.direct_commits}):
        bad += [(b, tc.round, tc.max_high_round) for tc in trace.tcs if tc.round > b and tc.max_high_round < b]
    if bad:
        return Verdict(False, f"{len(bad)} TCs lost a direct commit", violations=tuple(bad[:10]))
    return Verdict(True)


def structural_checks(trace: Trace) -> dict[str, Verdict]:
    protocol = trace.scenario.get("protocol")
    checks = {"unique_certification": check_unique_certification(trace)}
    if protocol in ("ditto", "vaba2"):
        checks["chain_shape"] = check_chain_shape(trace)
        checks["no_endorsed_parent"] = check_no_endorsed_parent(trace)
        checks["endorsed_agreement"] = check_endorsed_agreement(trace)
    if protocol == "jolteon":
        checks["tc_propagation"] = check_tc_propagation(trace)
    return checks
