import pytest

from simnet import run
from simnet.simulator import CommitRecord, Trace
from utils.metrics import aggregate, decision_hops, fit_exponent, metrics


def test_fit_exponent_recovers_power_law():
    xs = [4, 7, 10, 13]
    assert fit_exponent(xs, [3 * x ** 2 for x in xs]) == pytest.approx(2.0)
    assert fit_exponent(xs, [5 * x for x in xs]) == pytest.approx(1.0)


def test_decision_hops_are_gaps_between_new_commit_depths():
    def rec(pos, depth):
        return CommitRecord(pos, str(pos), "", 0, depth, 0, pos, 0)

    trace = Trace(scenario={}, honest=[0, 1],
                  commit_logs={0: [rec(0, 7), rec(1, 7), rec(2, 14)], 1: [rec(0, 8)]})
    assert decision_hops(trace) == [7, 7, 8]


def test_happy_path_report(scenario):
    trace = run(scenario(load_rate=0.2, batch_size=4, duration={"ticks": 50_000, "blocks": 40}))
    report = metrics(trace)
    assert report.commits_total >= 40
    assert report.hop_p50 == report.hop_p99 == 5
    assert report.messages_per_commit <= 4 * 4
    assert report.steady_commits == report.commits_total and report.fallback_commits == 0
    assert report.views_completed == 0 and report.views_per_decision is None
    assert report.safety_verdict == "PASS" and report.liveness_verdict == "PASS"
    assert report.throughput > 0 and report.latency_mean > 0


def test_report_is_a_function_of_the_trace(scenario):
    sc = scenario(protocol="ditto", adversary="asynchronous", load_rate=0.1, duration=3_000)
    assert metrics(run(sc)) == metrics(run(sc))


def test_vaba_report_counts_views(scenario):
    trace = run(scenario(protocol="vaba2", duration={"ticks": 100_000, "blocks": 20}))
    report = metrics(trace)
    assert report.views_completed > 0
    assert report.fallback_commits == report.commits_total
    assert 0 < report.views_per_decision < 3.0
    assert report.messages_per_view > 0


def test_aggregate_mean_and_std(scenario):
    reports = [metrics(run(scenario(seed=s, duration=1_000))).to_dict() for s in (1, 2)]
    summary = aggregate(reports)
    assert summary["commits_total"]["runs"] == 2
    assert summary["hop_mean"]["mean"] == 5
    assert summary["hop_mean"]["std"] == 0
    assert summary["views_per_decision"]["runs"] == 0
    assert summary["safety_failures"] == 0
    assert "scenario" not in summary
