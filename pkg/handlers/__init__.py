from typing import Callable

from .check import cmd_check
from .run import cmd_replay, cmd_run
from .sweep import cmd_sweep


def get_commands() -> dict[str, Callable]:
    return {
        "run": cmd_run,
        "sweep": cmd_sweep,
        "check": cmd_check,
        "replay": cmd_replay,
    }
