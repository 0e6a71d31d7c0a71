"""Hash-chained JSON-lines commit logs, one file per honest replica."""
from __future__ import annotations

import json
import os
from dataclasses import dataclass

from core.crypto import hash_digest
from core.errors import TamperedLog
from core.types import canonical
from simnet.simulator import CommitRecord, Trace
from utils.logging_utils import log_debug

GENESIS_CHAIN = "00" * 32
LOG_PATTERN = "replica-{}.jsonl"


@dataclass(frozen=True)
class PersistedRecord:
    position: int
    block_id: str
    payload_digest: str
    time: int
    chain: str

    def body(self) -> tuple:
        return (self.position, self.block_id, self.payload_digest, self.time)


def chain_hash(prev: str, body: tuple) -> str:
    return hash_digest(bytes.fromhex(prev) + canonical(body)).hex()


def _line(rec: PersistedRecord) -> str:
    return json.dumps({"position": rec.position, "block_id": rec.block_id, "payload_digest": rec.payload_digest,
                       "time": rec.time, "chain": rec.chain}, sort_keys=True, separators=(",", ":"))


def persisted_records(log: list[CommitRecord]) -> list[PersistedRecord]:
    out = []
    prev = GENESIS_CHAIN
    for rec in log:
        body = (rec.position, rec.block_id, rec.payload_digest, rec.time)
        prev = chain_hash(prev, body)
        out.append(PersistedRecord(*body, chain=prev))
    return out


def write_log(path: str, log: list[CommitRecord]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in persisted_records(log):
            fh.write(_line(rec) + "\n")


def write_logs(trace: Trace, out_dir: str) -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for i in trace.honest:
        path = os.path.join(out_dir, LOG_PATTERN.format(i))
        write_log(path, trace.commit_logs.get(i, []))
        paths.append(path)
    log_debug("logs_written", out_dir=out_dir, replicas=len(paths))
    return paths


def read_log(path: str) -> list[PersistedRecord]:
    """Load and verify one log; raises TamperedLog on the first bad line."""
    out = []
    prev = GENESIS_CHAIN
    with open(path, "rb") as fh:
        for lineno, raw in enumerate(fh, start=1):
            try:
                data = json.loads(raw.decode("utf-8"))
                rec = PersistedRecord(int(data["position"]), str(data["block_id"]), str(data["payload_digest"]),
                                      int(data["time"]), str(data["chain"]))
                expected = chain_hash(prev, rec.body())
            except (ValueError, KeyError, TypeError) as e:
                raise TamperedLog(path, lineno, f"unreadable record: {e}") from e
            if rec.position != len(out):
                raise TamperedLog(path, lineno, f"position {rec.position}, expected {len(out)}")
            if rec.chain != expected:
                raise TamperedLog(path, lineno, "hash chain mismatch")
            out.append(rec)
            prev = rec.chain
    return out


def find_logs(out_dir: str) -> dict[int, str]:
    found = {}
    for name in sorted(os.listdir(out_dir)):
        if name.startswith("replica-") and name.endswith(".jsonl"):
            idx = name[len("replica-"):-len(".jsonl")]
            if idx.isdigit():
                found[int(idx)] = os.path.join(out_dir, name)
    return found
