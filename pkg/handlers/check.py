from argparse import Namespace

from core import config
from core.errors import ChainSmrError, TamperedLog
from utils.checkers import check_prefix_consistency
from utils.logging_utils import log_error, log_event
from utils.persist import find_logs, read_log


def cmd_check(args: Namespace) -> int:
    out_dir = args.out or config.OUT_DIR
    try:
        paths = find_logs(out_dir)
        logs = {i: read_log(path) for i, path in paths.items()}
    except TamperedLog as e:
        log_error(request_type="check", error=e, path=e.path, line=e.line)
        return 1
    except (ChainSmrError, OSError) as e:
        log_error(request_type="check", error=e, out=out_dir)
        return 2

    if not logs:
        log_error(request_type="check", error="no persisted logs found", out=out_dir)
        return 2

    verdict = check_prefix_consistency(logs)
    if not verdict:
        log_error(request_type="check", error=verdict.detail, position=verdict.position, blocks=verdict.blocks)
        return 1
    log_event("check_ok", out=out_dir, replicas=len(logs), records=sum(len(v) for v in logs.values()))
    return 0
