"""Adversarial message scheduling."""
from __future__ import annotations

import random

from simnet.scenario import AdversaryPolicy


def delay_of(src: int, dst: int, policy: AdversaryPolicy, now: int, rng: random.Random, *, delta: int,
             gst: int | None = None, sender_is_leader: bool = False) -> int | None:
    """Ticks until delivery of one message, or None when it is never delivered.

    Every honest-to-honest message gets a finite delay. After ``gst`` the
    partially synchronous schedule is bounded by ``delta``; before it the
    window shrinks so that delivery still happens by ``gst + delta``.
    """
    if src == dst:
        return 0
    if src in policy.crash_set or dst in policy.crash_set:
        return None

    if policy.has("asynchronous"):
        delay = rng.randint(1, policy.reorder * delta)
    elif policy.has("partial_synchrony") and gst is not None and now < gst:
        delay = rng.randint(1, max(gst - now, 0) + delta)
    else:
        delay = rng.randint(1, delta)

    if policy.has("leader_ddos") and sender_is_leader:
        delay += policy.ddos_delay
    return delay
