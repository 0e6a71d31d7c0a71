import random

import pytest

from core import config
from core.errors import InvalidScenario
from simnet import AdversaryPolicy, hop_clock, load_scenario, run, scenario_from_dict
from simnet.load import Mempool, inject_load
from simnet.network import delay_of
from simnet.simulator import MessageLedger


class TestDelays:
    def test_self_send_is_immediate(self):
        assert delay_of(2, 2, AdversaryPolicy("asynchronous"), 0, random.Random(0), delta=10) == 0

    def test_crashed_endpoints_drop(self):
        policy = AdversaryPolicy("crash", crash_set=(3,))
        rng = random.Random(0)
        assert delay_of(3, 1, policy, 0, rng, delta=10) is None
        assert delay_of(1, 3, policy, 0, rng, delta=10) is None
        assert delay_of(1, 2, policy, 0, rng, delta=10) is not None

    def test_synchronous_bounded_by_delta(self):
        rng = random.Random(1)
        delays = [delay_of(0, 1, AdversaryPolicy(), 0, rng, delta=10) for _ in range(500)]
        assert min(delays) >= 1 and max(delays) <= 10

    def test_partial_synchrony_delivers_by_gst_plus_delta(self):
        rng = random.Random(2)
        policy = AdversaryPolicy("partial_synchrony")
        for now in (0, 500, 999):
            d = delay_of(0, 1, policy, now, rng, delta=10, gst=1000)
            assert now + d <= 1000 + 10
        assert delay_of(0, 1, policy, 2000, rng, delta=10, gst=1000) <= 10

    def test_asynchronous_window(self):
        rng = random.Random(3)
        policy = AdversaryPolicy("asynchronous", reorder=4)
        delays = {delay_of(0, 1, policy, 0, rng, delta=10) for _ in range(2000)}
        assert max(delays) <= 40 and max(delays) > 10

    def test_ddos_hits_only_the_leader(self):
        policy = AdversaryPolicy("leader_ddos", ddos_delay=80)
        assert delay_of(0, 1, policy, 0, random.Random(4), delta=10, sender_is_leader=True) > 80
        assert delay_of(0, 1, policy, 0, random.Random(4), delta=10) <= 10

    def test_composite_combines_parts(self):
        policy = AdversaryPolicy("composite", crash_set=(2,), ddos_delay=50, parts=("asynchronous", "leader_ddos"))
        rng = random.Random(5)
        assert delay_of(2, 0, policy, 0, rng, delta=10) is None
        assert delay_of(0, 1, policy, 0, rng, delta=10, sender_is_leader=True) > 50


class TestLoad:
    def test_inject_load_schedule(self):
        events = list(inject_load(rate=0.5, batch_size=2, until=20))
        assert [t for t, _ in events] == [0, 4, 8, 12, 16, 20]
        assert events[1][1] == [3, 4]

    def test_no_load_without_rate(self):
        assert list(inject_load(0, 1, 100)) == []

    def test_mempool_excludes_and_forgets_committed(self):
        pool = Mempool()
        pool.add([1, 2, 3, 4])
        assert pool.next_batch(2, exclude={1}) == [2, 3]
        pool.mark_committed([2])
        pool.add([2])
        assert pool.next_batch(10) == [1, 3, 4]
        assert len(pool) == 3


class TestScenario:
    def test_rejects_wrong_sizes(self, scenario):
        with pytest.raises(InvalidScenario):
            scenario(n=5)

    def test_rejects_too_many_crashes(self, scenario):
        with pytest.raises(InvalidScenario):
            scenario(adversary="crash", crash_set=[1, 2])

    def test_rejects_unknown_protocol(self, scenario):
        with pytest.raises(InvalidScenario):
            scenario(protocol="pbft")

    def test_partial_synchrony_needs_gst(self, scenario):
        with pytest.raises(InvalidScenario):
            scenario(adversary="partial_synchrony")

    def test_vaba_defaults_tau_to_zero(self, scenario):
        assert scenario(protocol="vaba2").tau == 0
        assert scenario(delta=5).tau == 20

    def test_overrides_keep_tau_valid(self, scenario):
        sc = scenario(protocol="vaba2").with_overrides(protocol="jolteon")
        assert sc.tau == 40 and sc.protocol == "jolteon"
        assert scenario().with_overrides(protocol="vaba2").tau == 0

    def test_dict_round_trip(self, scenario):
        sc = scenario(adversary={"kind": "composite", "parts": ["crash", "asynchronous"]}, crash_set=[2],
                      duration={"ticks": 500, "blocks": 3})
        assert scenario_from_dict(sc.to_dict()) == sc

    def test_env_seed_overrides_file(self, tmp_path, monkeypatch):
        path = tmp_path / "s.json"
        path.write_text('{"n": 4, "f": 1, "protocol": "ditto", "seed": 3}')
        monkeypatch.setattr(config, "CHAINSMR_SEED", 99)
        assert load_scenario(str(path)).seed == 99

    def test_unreadable_file(self, tmp_path):
        with pytest.raises(InvalidScenario):
            load_scenario(str(tmp_path / "missing.json"))


def test_ledger_counts_kinds():
    ledger = MessageLedger()
    ledger.record(0, 3, 0, 1, "Vote", 10, 1)
    row = ledger.record(0, None, 0, 2, "Proposal", 50, 1)
    ledger.deliver(0, 3)
    assert ledger.by_kind() == {"Vote": 1, "Proposal": 1}
    assert list(ledger.between({0, 1})) == [0]
    assert ledger.due[row] == -1


@pytest.mark.parametrize("protocol, hops", [("jolteon", 5), ("diembft3", 7)])
def test_happy_path_hop_counts(scenario, protocol, hops):
    trace = run(scenario(protocol=protocol, duration={"ticks": 100_000, "blocks": 30}))
    counts = hop_clock(trace)
    assert len(counts) >= 25
    assert set(counts.values()) == {hops}


def test_every_send_is_in_the_ledger(scenario):
    trace = run(scenario(duration=500))
    ledger = trace.ledger
    assert len(ledger) > 0
    # multicasts include the sender, delivered without delay
    self_rows = [r for r in range(len(ledger)) if ledger.src[r] == ledger.dst[r]]
    assert self_rows and all(ledger.due[r] == ledger.sent[r] for r in self_rows)


def test_same_seed_same_trace(scenario):
    sc = scenario(protocol="ditto", adversary="asynchronous", load_rate=0.2, duration=2_000)
    assert run(sc).to_json() == run(sc).to_json()


def test_different_seed_different_trace(scenario):
    a = run(scenario(protocol="ditto", adversary="asynchronous", duration=2_000, seed=1))
    b = run(scenario(protocol="ditto", adversary="asynchronous", duration=2_000, seed=2))
    assert a.digest() != b.digest()


def test_event_cap_marks_truncated(scenario):
    trace = run(scenario(duration=100_000), max_events=200)
    assert trace.truncated
    assert trace.events == 200


def test_crashed_leader_is_skipped(scenario):
    trace = run(scenario(adversary="crash", crash_set=[1], load_rate=0.1, duration=5_000))
    assert trace.honest == [0, 2, 3]
    assert trace.tcs
    assert all(len(trace.commit_logs[i]) > 20 for i in trace.honest)


def test_partial_synchrony_recovers_after_gst(scenario):
    trace = run(scenario(protocol="diembft3", n=7, f=2, adversary="partial_synchrony", gst=1_500,
                         load_rate=0.1, duration=6_000))
    assert min(len(trace.commit_logs[i]) for i in trace.honest) > 10


def test_single_replica_scenarios_are_rejected(scenario):
    with pytest.raises(InvalidScenario, match="never advances"):
        scenario(n=1, f=0)
