import asyncio
import csv
import json
import os
from argparse import Namespace
from concurrent.futures import ProcessPoolExecutor

from core import config
from core.errors import ChainSmrError, InvalidScenario
from simnet import Scenario
from utils.logging_utils import log_error, log_event
from utils.metrics import NON_NUMERIC, Report, aggregate

from .run import execute, resolve_scenario

SUMMARY_CSV = "sweep.csv"
SUMMARY_JSON = "sweep.json"


def parse_seeds(raw: str | None, base: int) -> list[int]:
    """``"k"`` means k seeds from the scenario seed; ``"a-b"`` is an inclusive range."""
    if raw is None:
        return [base]
    try:
        if "-" in raw:
            lo, hi = (int(x) for x in raw.split("-", 1))
        else:
            lo, hi = base, base + int(raw) - 1
    except ValueError:
        raise InvalidScenario(f"bad --seeds value {raw!r}") from None
    if hi < lo:
        raise InvalidScenario(f"empty seed range {raw!r}")
    return list(range(lo, hi + 1))


async def sweep(scenario: Scenario, seeds: list[int], out_dir: str, workers: int = config.SWEEP_WORKERS
                ) -> list[dict]:
    loop = asyncio.get_running_loop()
    with ProcessPoolExecutor(max_workers=max(1, workers)) as pool:
        tasks = [
            loop.run_in_executor(pool, execute, scenario.with_overrides(seed=seed),
                                 os.path.join(out_dir, f"seed-{seed}"))
            for seed in seeds
        ]
        reports = []
        for seed, report in zip(seeds, await asyncio.gather(*tasks)):
            log_event("sweep_seed", seed=seed, commits=report["commits_total"], safety=report["safety_verdict"])
            reports.append(report)
    return reports


def write_summary(reports: list[dict], seeds: list[int], out_dir: str) -> dict:
    columns = ["seed"] + [name for name in Report.__dataclass_fields__ if name not in NON_NUMERIC]
    columns += ["safety_verdict", "liveness_verdict", "truncated"]
    with open(os.path.join(out_dir, SUMMARY_CSV), "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
        writer.writeheader()
        for seed, report in zip(seeds, reports):
            writer.writerow({"seed": seed, **report})
    summary = aggregate(reports)
    with open(os.path.join(out_dir, SUMMARY_JSON), "w", encoding="utf-8", newline="\n") as fh:
        json.dump(summary, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return summary


def cmd_sweep(args: Namespace) -> int:
    out_dir = args.out or config.OUT_DIR
    try:
        scenario = resolve_scenario(args)
        seeds = parse_seeds(args.seeds, scenario.seed)
        log_event("sweep_start", protocol=scenario.protocol, n=scenario.n, seeds=len(seeds), out=out_dir)
        os.makedirs(out_dir, exist_ok=True)
        reports = asyncio.run(sweep(scenario, seeds, out_dir))
        summary = write_summary(reports, seeds, out_dir)
    except ChainSmrError as e:
        log_error(request_type="sweep", error=e, scenario=args.scenario)
        return 2

    log_event("sweep_finish", runs=len(reports), safety_failures=summary["safety_failures"],
              fallback_commit_fraction=summary["fallback_commit_fraction"]["mean"])
    return 1 if summary["safety_failures"] else 0
