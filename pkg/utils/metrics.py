"""Run report derived from a Trace."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import linregress

from simnet.simulator import Trace, hop_clock
from utils.checkers import check_liveness, check_safety

PERCENTILES = (50, 95, 99)
NON_NUMERIC = ("scenario", "messages_by_kind", "byzantine", "safety_verdict", "liveness_verdict", "truncated")


@dataclass(frozen=True)
class Report:
    scenario: dict
    commits_total: int
    throughput: float
    hop_mean: float | None
    hop_p50: float | None
    hop_p95: float | None
    hop_p99: float | None
    messages_total: int
    messages_per_commit: float | None
    messages_per_view: float | None
    messages_by_kind: dict[str, int]
    decision_hops_mean: float | None
    views_completed: int
    views_per_decision: float | None
    fallback_commit_fraction: float | None
    steady_commits: int
    fallback_commits: int
    latency_mean: float | None
    latency_p95: float | None
    safety_verdict: str
    liveness_verdict: str
    byzantine: dict = field(default_factory=dict)
    truncated: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def _ratio(a: float, b: float) -> float | None:
    return a / b if b else None


def _round(x) -> float | None:
    return None if x is None else round(float(x), 6)


def reference_log(trace: Trace) -> list:
    """Shortest honest commit log: the blocks every honest replica committed."""
    logs = [trace.commit_logs.get(i, []) for i in trace.honest]
    return min(logs, key=len) if logs else []


def decision_hops(trace: Trace) -> list[int]:
    """Per honest replica, hop gaps between successive depths at which new blocks were committed."""
    gaps = []
    for i in trace.honest:
        last = 0
        for depth in sorted({rec.depth for rec in trace.commit_logs.get(i, ())}):
            gaps.append(depth - last)
            last = depth
    return gaps


def fallback_views(trace: Trace) -> dict[int, dict]:
    return {v: e for v, e in trace.fallbacks.items() if e["entered"] or e["ftc"]}


def metrics(trace: Trace) -> Report:
    ref = reference_log(trace)
    hops = np.array(sorted(hop_clock(trace).values()), dtype=float)
    hop_stats = np.percentile(hops, PERCENTILES) if hops.size else [None] * len(PERCENTILES)

    txns = 0
    latencies = []
    for rec in ref:
        blk = trace.blocks.get(rec.block_id)
        if blk is None:
            continue
        txns += len(blk.txns)
        latencies += [rec.time - trace.txns[t] for t in blk.txns if t in trace.txns]
    lat = np.array(latencies, dtype=float)

    fallbacks = fallback_views(trace)
    views_completed = sum(1 for e in trace.fallbacks.values() if e["exited"])
    decided = sum(1 for e in fallbacks.values() if e["committed"])
    fallback_commits = sum(1 for rec in ref if rec.height > 0)
    gaps = decision_hops(trace)
    ledger = trace.ledger

    return Report(
        scenario=trace.scenario,
        commits_total=len(ref),
        throughput=round(txns / trace.end_time, 6) if trace.end_time else 0.0,
        hop_mean=_round(hops.mean()) if hops.size else None,
        hop_p50=_round(hop_stats[0]),
        hop_p95=_round(hop_stats[1]),
        hop_p99=_round(hop_stats[2]),
        messages_total=len(ledger),
        messages_per_commit=_round(_ratio(len(ledger), len(ref))),
        messages_per_view=_round(_ratio(len(ledger), views_completed)),
        messages_by_kind=ledger.by_kind(),
        decision_hops_mean=_round(np.mean(gaps)) if gaps else None,
        views_completed=views_completed,
        views_per_decision=_round(_ratio(views_completed, decided)),
        fallback_commit_fraction=_round(_ratio(decided, len(fallbacks))),
        steady_commits=len(ref) - fallback_commits,
        fallback_commits=fallback_commits,
        latency_mean=_round(lat.mean()) if lat.size else None,
        latency_p95=_round(np.percentile(lat, 95)) if lat.size else None,
        safety_verdict=check_safety(trace).label,
        liveness_verdict=check_liveness(trace).label,
        byzantine={str(i): c for i, c in sorted(trace.byzantine.items())},
        truncated=trace.truncated,
    )


def fit_exponent(xs, ys) -> float:
    """Least-squares slope of log(ys) against log(xs)."""
    x = np.log(np.asarray(xs, dtype=float))
    y = np.log(np.asarray(ys, dtype=float))
    return float(linregress(x, y).slope)


def aggregate(reports: list[dict]) -> dict[str, dict]:
    """Mean and standard deviation of every numeric report field across runs."""
    out = {}
    for name in Report.__dataclass_fields__:
        if name in NON_NUMERIC:
            continue
        nums = [v for v in (r.get(name) for r in reports) if v is not None]
        if not nums:
            out[name] = {"mean": None, "std": None, "runs": 0}
            continue
        arr = np.array(nums, dtype=float)
        out[name] = {"mean": _round(arr.mean()), "std": _round(arr.std()), "runs": len(nums)}
    out["safety_failures"] = sum(r["safety_verdict"] != "PASS" for r in reports)
    return out
