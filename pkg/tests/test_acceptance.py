"""Long-running behavioural targets. Deselect with ``-m "not slow"``."""
import os

import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from core import config
from simnet import hop_clock, load_scenario, run, scenario_from_dict
from simnet.byzantine import equivocating
from test_fuzz import PROTOCOLS, scenarios
from utils.checkers import check_safety, structural_checks
from utils.metrics import fallback_views, fit_exponent, metrics

pytestmark = pytest.mark.slow

SCENARIOS = os.path.join(config.BASE_DIR, "scenarios")
SIZES = ((4, 1), (7, 2), (10, 3))


def _sc(**data):
    base = {"adversary": "synchronous", "delta": 10, "seed": 1}
    base.update(data)
    return scenario_from_dict(base)


@pytest.mark.parametrize("protocol, hops", [("jolteon", 5), ("diembft3", 7)])
@pytest.mark.parametrize("n, f", SIZES[:2])
def test_happy_path_block_latency(protocol, hops, n, f):
    trace = run(_sc(n=n, f=f, protocol=protocol, load_rate=0.5, batch_size=4,
                    duration={"ticks": 200_000, "blocks": 200}))
    counts = hop_clock(trace)
    assert len(counts) >= 195
    assert set(counts.values()) == {hops}


def test_steady_state_messages_grow_linearly():
    per_commit = []
    for n, f in SIZES:
        report = metrics(run(_sc(n=n, f=f, protocol="jolteon", duration={"ticks": 200_000, "blocks": 100})))
        per_commit.append(report.messages_per_commit)
    assert fit_exponent([n for n, _ in SIZES], per_commit) == pytest.approx(1.0, abs=0.15)


def test_fallback_messages_grow_quadratically():
    per_view = []
    for n, f in SIZES:
        report = metrics(run(_sc(n=n, f=f, protocol="vaba2", duration={"ticks": 500_000, "blocks": 30})))
        per_view.append(report.messages_per_view)
    assert fit_exponent([n for n, _ in SIZES], per_view) == pytest.approx(2.0, abs=0.2)


def test_fallback_commits_with_two_thirds_probability():
    decided = total = 0
    for seed in range(1_000):
        trace = run(_sc(n=4, f=1, protocol="ditto", adversary={"kind": "asynchronous", "reorder": 8},
                        seed=seed, duration=2_500))
        views = fallback_views(trace)
        if not views:
            continue
        first = views[min(views)]
        if not first["exited"]:
            continue
        total += 1
        decided += first["committed"]
    assert total >= 500
    assert decided / total >= 0.60


def test_vaba_expected_latency():
    sc = load_scenario(os.path.join(SCENARIOS, "vaba_crash.json"))
    sc = scenario_from_dict({**sc.to_dict(), "duration": {"ticks": 10_000_000, "blocks": 1_000}})
    report = metrics(run(sc))
    assert report.commits_total >= 1_000
    assert report.views_per_decision == pytest.approx(1.5, abs=0.15)
    assert report.decision_hops_mean == pytest.approx(10.5, abs=1.0)


@pytest.mark.parametrize("protocol, expect_progress", [
    ("jolteon", False), ("diembft3", False), ("ditto", True), ("vaba2", True),
])
def test_leader_ddos_contrast(protocol, expect_progress):
    # tau defaults to 4 delta, and to 0 for vaba2
    sc = _sc(n=4, f=1, protocol=protocol, adversary="leader_ddos", ddos_delay=2 * 40,
             duration={"ticks": 60_000, "blocks": 60} if expect_progress else 60_000)
    report = metrics(run(sc))
    if expect_progress:
        assert report.commits_total >= 50
    else:
        assert report.commits_total == 0


@st.composite
def fuzz_cases(draw):
    sc = draw(scenarios(durations=st.integers(1_000, 4_000)))
    overrides = None
    if sc.f == 1 and not sc.crash_set and draw(st.booleans()):
        overrides = {0: equivocating(sc.protocol)}
    return sc, overrides


@settings(max_examples=500, deadline=None, suppress_health_check=list(HealthCheck))
@given(fuzz_cases())
def test_safety_and_structure_under_fuzz(case):
    sc, overrides = case
    trace = run(sc, replica_overrides=overrides)
    verdict = check_safety(trace)
    assert verdict, verdict.detail
    failed = {name: v.detail for name, v in structural_checks(trace).items() if not v}
    assert not failed


DETERMINISM = [
    (protocol, adversary, seed)
    for protocol in PROTOCOLS
    for adversary, seed in (("synchronous", 3), ("asynchronous", 8), ("leader_ddos", 13),
                            ("crash", 21), ("partial_synchrony", 34))
]


@pytest.mark.parametrize("protocol, adversary, seed", DETERMINISM)
def test_replay_is_byte_identical(protocol, adversary, seed):
    extra = {"crash_set": [2]} if adversary == "crash" else {}
    if adversary == "partial_synchrony":
        extra["gst"] = 1_000
    sc = _sc(n=4, f=1, protocol=protocol, adversary=adversary, seed=seed, load_rate=0.2, duration=3_000, **extra)
    first, second = run(sc), run(sc)
    assert first.to_json() == second.to_json()
    assert metrics(first).to_dict() == metrics(second).to_dict()
