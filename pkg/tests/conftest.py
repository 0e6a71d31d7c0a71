import pytest

from core.crypto import deal
from core.messages import Vote
from core.types import make_genesis, vote_message
from replicas import get_replica_factory
from replicas.base import ReplicaConfig, ReplicaContext, Send
from simnet.load import Mempool
from simnet.scenario import scenario_from_dict


@pytest.fixture
def dealt():
    scheme, keys = deal(4, 1, seed=42)
    return scheme, keys


@pytest.fixture
def genesis(dealt):
    scheme, keys = dealt
    return make_genesis(scheme, keys)


@pytest.fixture
def make_replica(dealt, genesis):
    """Build replica ``i`` of an n=4 system for a protocol, with its own mempool."""
    scheme, keys = dealt
    blk, qc = genesis

    def build(protocol: str, i: int = 0, **cfg):
        config = ReplicaConfig(n=4, f=1, **cfg)
        ctx = ReplicaContext(scheme, keys[i], blk, qc, config, Mempool())
        return get_replica_factory(protocol)(ctx)

    return build


@pytest.fixture
def sign_vote(dealt):
    scheme, keys = dealt

    def build(signer: int, block):
        share = scheme.sign_share(keys[signer], vote_message(block.id, block.round, block.view))
        return Vote(signer, block.id, block.round, block.view, share)

    return build


@pytest.fixture
def scenario():
    """Scenario factory over a small synchronous default."""

    def build(**overrides):
        data = {"n": 4, "f": 1, "protocol": "jolteon", "adversary": "synchronous", "delta": 10, "seed": 1,
                "duration": 3_000}
        data.update(overrides)
        return scenario_from_dict(data)

    return build


def sends(actions, kind=None):
    out = [a for a in actions if isinstance(a, Send)]
    if kind is not None:
        out = [a for a in out if isinstance(a.msg, kind)]
    return out
