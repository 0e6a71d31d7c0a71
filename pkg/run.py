import argparse
import sys

from core.config import ENV
from handlers import get_commands
from utils.logging_utils import log_event


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chainsmr", description="Chained BFT state machine replication simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in get_commands():
        cmd = sub.add_parser(name)
        cmd.add_argument("--scenario", required=name in ("run", "sweep"), help="scenario JSON file")
        cmd.add_argument("--out", help="output directory (default CHAINSMR_OUT)")
        cmd.add_argument("--protocol", help="override the scenario protocol")
        cmd.add_argument("--adversary", help="override the scenario adversary kind")
        if name == "sweep":
            cmd.add_argument("--seeds", help="number of seeds, or an inclusive range a-b")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    log_event("cli_start", env=ENV, command=args.command)
    return get_commands()[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
