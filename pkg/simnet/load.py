"""Client load: a per-replica mempool and a deterministic injection schedule."""
from __future__ import annotations

from collections import OrderedDict
from typing import Iterable, Iterator


class Mempool:
    """Pending transactions in arrival order; a transaction leaves only once committed."""

    def __init__(self):
        self._pending: OrderedDict[int, None] = OrderedDict()
        self._done: set[int] = set()

    def __len__(self) -> int:
        return len(self._pending)

    def add(self, txns: Iterable[int]) -> None:
        for t in txns:
            if t not in self._done:
                self._pending.setdefault(t, None)

    def next_batch(self, size: int, exclude: set[int] = frozenset()) -> list[int]:
        batch = []
        for t in self._pending:
            if len(batch) >= size:
                break
            if t not in exclude:
                batch.append(t)
        return batch

    def mark_committed(self, txns: Iterable[int]) -> None:
        for t in txns:
            self._done.add(t)
            self._pending.pop(t, None)


def inject_load(rate: float, batch_size: int, until: int, start: int = 0) -> Iterator[tuple[int, list[int]]]:
    """Yield (time, txn ids): ``batch_size`` transactions every ``batch_size / rate`` ticks."""
    if rate <= 0:
        return
    interval = batch_size / rate
    next_id = 1
    k = 0
    while True:
        t = start + int(k * interval)
        if t > until:
            return
        yield t, list(range(next_id, next_id + batch_size))
        next_id += batch_size
        k += 1
