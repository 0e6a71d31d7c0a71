import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from simnet import run, scenario_from_dict
from simnet.byzantine import equivocating
from utils.checkers import check_delivery, check_safety, structural_checks

PROTOCOLS = ("jolteon", "diembft3", "ditto", "vaba2")
KINDS = ("synchronous", "partial_synchrony", "asynchronous", "leader_ddos", "crash")


@st.composite
def scenarios(draw, durations=st.integers(800, 2_500)):
    f = draw(st.sampled_from((1, 2)))
    n = 3 * f + 1
    kind = draw(st.sampled_from(KINDS))
    data = {
        "n": n,
        "f": f,
        "protocol": draw(st.sampled_from(PROTOCOLS)),
        "adversary": kind,
        "delta": 10,
        "seed": draw(st.integers(0, 2 ** 32 - 1)),
        "duration": draw(durations),
        "load_rate": draw(st.sampled_from((0.0, 0.1, 0.3))),
    }
    if kind == "crash":
        data["crash_set"] = draw(st.lists(st.integers(0, n - 1), min_size=1, max_size=f, unique=True))
    if kind == "partial_synchrony":
        data["gst"] = draw(st.integers(0, data["duration"]))
    if kind == "leader_ddos":
        data["ddos_delay"] = draw(st.sampled_from((40, 80)))
    return scenario_from_dict(data)


FUZZ = settings(max_examples=30, deadline=None, suppress_health_check=[HealthCheck.too_slow])


@FUZZ
@given(scenarios())
def test_random_scenarios_stay_safe(sc):
    trace = run(sc)
    assert check_safety(trace), check_safety(trace).detail
    assert check_delivery(trace)
    failed = {name: v.detail for name, v in structural_checks(trace).items() if not v}
    assert not failed


@FUZZ
@given(st.sampled_from(PROTOCOLS), st.integers(0, 2 ** 32 - 1), st.sampled_from(("synchronous", "asynchronous")))
def test_equivocating_replica_cannot_split_honest_logs(protocol, seed, kind):
    sc = scenario_from_dict({"n": 4, "f": 1, "protocol": protocol, "adversary": kind, "seed": seed,
                             "duration": 2_000, "load_rate": 0.1})
    trace = run(sc, replica_overrides={0: equivocating(protocol)})
    assert trace.honest == [1, 2, 3]
    assert check_safety(trace)
    assert all(structural_checks(trace).values())


@pytest.mark.parametrize("protocol", PROTOCOLS)
def test_equivocation_is_actually_attempted(protocol):
    sc = scenario_from_dict({"n": 4, "f": 1, "protocol": protocol, "seed": 11, "duration": 2_000})
    trace = run(sc, replica_overrides={0: equivocating(protocol)})
    assert trace.byzantine.get(0, {}).get("equivocations_sent", 0) > 0
