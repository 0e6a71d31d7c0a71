import json
import os
from argparse import Namespace

from core import config
from core.errors import ChainSmrError
from simnet import Scenario, load_scenario, run, scenario_from_dict
from utils.checkers import structural_checks
from utils.logging_utils import log_error, log_event
from utils.metrics import metrics
from utils.persist import write_logs

REPORT_FILE = "report.json"
SCENARIO_FILE = "scenario.json"
DIGEST_FILE = "trace.sha256"


def resolve_scenario(args: Namespace, seed: int | None = None) -> Scenario:
    scenario = load_scenario(args.scenario)
    return scenario.with_overrides(protocol=args.protocol, adversary=args.adversary, seed=seed)


def _write_json(path: str, data) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(data, fh, sort_keys=True, indent=2, ensure_ascii=False)
        fh.write("\n")


def execute(scenario: Scenario, out_dir: str) -> dict:
    """Run one scenario and write report, scenario echo, commit logs and the trace digest."""
    trace = run(scenario)
    report = metrics(trace).to_dict()
    report["structural"] = {name: v.label for name, v in structural_checks(trace).items()}
    os.makedirs(out_dir, exist_ok=True)
    _write_json(os.path.join(out_dir, REPORT_FILE), report)
    _write_json(os.path.join(out_dir, SCENARIO_FILE), scenario.to_dict())
    write_logs(trace, out_dir)
    with open(os.path.join(out_dir, DIGEST_FILE), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(trace.digest() + "\n")
    return report


def cmd_run(args: Namespace) -> int:
    out_dir = args.out or config.OUT_DIR
    try:
        scenario = resolve_scenario(args)
        log_event("run_start", protocol=scenario.protocol, n=scenario.n, seed=scenario.seed, out=out_dir)
        report = execute(scenario, out_dir)
    except ChainSmrError as e:
        log_error(request_type="run", error=e, scenario=args.scenario)
        return 2

    failed = [name for name, label in report["structural"].items() if label != "PASS"]
    log_event("run_finish", protocol=scenario.protocol, seed=scenario.seed, commits=report["commits_total"],
              safety=report["safety_verdict"], liveness=report["liveness_verdict"], structural_failures=failed)
    return 0 if report["safety_verdict"] == "PASS" and not failed else 1


def cmd_replay(args: Namespace) -> int:
    out_dir = args.out or config.OUT_DIR
    try:
        if args.scenario:
            scenario = resolve_scenario(args)
        else:
            with open(os.path.join(out_dir, SCENARIO_FILE), encoding="utf-8") as fh:
                scenario = scenario_from_dict(json.load(fh))
        with open(os.path.join(out_dir, DIGEST_FILE), encoding="utf-8") as fh:
            expected = fh.read().strip()
        digest = run(scenario).digest()
    except (ChainSmrError, OSError, ValueError) as e:
        log_error(request_type="replay", error=e, out=out_dir)
        return 2

    if digest != expected:
        log_error(request_type="replay", error="trace digest mismatch", expected=expected, actual=digest)
        return 1
    log_event("replay_ok", protocol=scenario.protocol, seed=scenario.seed, digest=digest)
    return 0
