from __future__ import annotations

from core.types import TC, AnyBlock, Block, Cert, two_chain
from replicas.diembft import DiemBFTReplica


class JolteonReplica(DiemBFTReplica):
    """2-chain commit; the lock is qc_high itself, proposals after a TC carry it."""

    protocol = "jolteon"

    def proposal_tc(self, round: int) -> TC | None:
        if self.last_tc is not None and self.last_tc.round == round - 1:
            return self.last_tc
        return None

    def safe_to_vote(self, block: Block) -> bool:
        if not (block.round == self.r_cur and block.view == self.v_cur and block.round > self.r_vote
                and block.round > self.timed_out_round):
            return False
        if block.round == block.qc.round + 1:
            return True
        tc = block.tc
        return tc is not None and block.round == tc.round + 1 and block.qc.round >= tc.max_high_round

    def lock(self, cert: Cert) -> None:
        pass

    def commit_candidate(self, cert: Cert) -> AnyBlock | None:
        return two_chain(self.tree, cert)
