from dataclasses import replace
from typing import Callable

from core.errors import InvalidScenario
from replicas.base import Replica, ReplicaConfig, ReplicaContext
from replicas.diembft import DiemBFTReplica
from replicas.ditto import DittoReplica
from replicas.jolteon import JolteonReplica

PROTOCOLS: dict[str, type[Replica]] = {
    "diembft3": DiemBFTReplica,
    "jolteon": JolteonReplica,
    "ditto": DittoReplica,
    "vaba2": DittoReplica,
}


def get_replica_factory(protocol: str, wrap: Callable[[type], type] | None = None
                        ) -> Callable[[ReplicaContext], Replica]:
    """Replica constructor for a protocol name; ``wrap`` may swap in a subclass."""
    try:
        cls = PROTOCOLS[protocol]
    except KeyError:
        raise InvalidScenario(f"unknown protocol {protocol!r}, expected one of {sorted(PROTOCOLS)}") from None
    if wrap is not None:
        cls = wrap(cls)

    def make(ctx: ReplicaContext) -> Replica:
        if protocol == "vaba2":
            ctx.config = replace(ctx.config, vaba=True, tau=0)
        return cls(ctx)

    return make


__all__ = ["PROTOCOLS", "Replica", "ReplicaConfig", "ReplicaContext", "get_replica_factory"]
