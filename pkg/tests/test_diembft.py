import pytest

from conftest import sends
from core.messages import Proposal, TCMsg, TimeoutMsg, Vote
from core.types import TC, form_qc, make_block, round_message
from replicas.base import CertFormed, Committed, Proposed, SetTimer


def _chain_proposals(dealt, genesis, sign_vote, rounds):
    """Proposals for consecutive rounds, each carrying the QC of the previous block."""
    scheme, _ = dealt
    qc = genesis[1]
    out = []
    for r in range(1, rounds + 1):
        blk = make_block(qc, None, r, 0)
        out.append(Proposal(r % 4, blk))
        qc = form_qc([sign_vote(i, blk) for i in range(3)], scheme)
    return out


def _tc(dealt, genesis, round):
    scheme, keys = dealt
    sig = scheme.aggregate([scheme.sign_share(k, round_message(round)) for k in keys[:3]], 3)
    return TC(round, sig, (genesis[1],) * 3)


def test_leader_of_round_one_proposes_on_start(make_replica):
    rep = make_replica("diembft3", 1)
    actions = rep.start()
    assert SetTimer(40, ("round", 1)) in actions
    (prop,) = sends(actions, Proposal)
    assert prop.to is None
    assert prop.msg.block.round == 1 and prop.msg.block.qc == rep.genesis_qc
    assert any(isinstance(a, Proposed) for a in actions)


def test_non_leader_only_arms_timer(make_replica):
    rep = make_replica("diembft3", 2)
    actions = rep.start()
    assert actions == [SetTimer(40, ("round", 1))]


def test_vote_goes_to_next_leader(make_replica, dealt, genesis, sign_vote):
    rep = make_replica("diembft3", 3)
    rep.start()
    (p1,) = _chain_proposals(dealt, genesis, sign_vote, 1)
    (vote,) = sends(rep.handle(p1, 1), Vote)
    assert vote.to == 2
    assert vote.msg.block_id == p1.block.id
    assert rep.r_vote == 1


def test_proposal_from_wrong_leader_is_dropped(make_replica, dealt, genesis, sign_vote):
    rep = make_replica("diembft3", 3)
    rep.start()
    (p1,) = _chain_proposals(dealt, genesis, sign_vote, 1)
    assert rep.handle(Proposal(0, p1.block), 1) == []
    assert rep.byzantine["invalid_proposal"] == 1


def test_second_block_for_a_round_counts_as_equivocation(make_replica, genesis):
    rep = make_replica("diembft3", 3)
    rep.start()
    a = make_block(genesis[1], None, 1, 0, b"\x01" * 8)
    b = make_block(genesis[1], None, 1, 0, b"\x02" * 8)
    rep.handle(Proposal(1, a), 1)
    assert sends(rep.handle(Proposal(1, b), 1), Vote) == []
    assert rep.byzantine["equivocation"] == 1


def test_timeout_blocks_voting_in_that_round(make_replica, dealt, genesis, sign_vote):
    rep = make_replica("diembft3", 3)
    rep.start()
    actions = rep.on_timer(("round", 1), 0)
    (timeout,) = sends(actions, TimeoutMsg)
    assert timeout.to is None and timeout.msg.round == 1
    (p1,) = _chain_proposals(dealt, genesis, sign_vote, 1)
    assert sends(rep.handle(p1, 1), Vote) == []
    # one-shot per round
    assert rep.on_timer(("round", 1), 0) == []


def test_votes_form_qc_and_next_leader_proposes(make_replica, dealt, genesis, sign_vote):
    rep = make_replica("diembft3", 2)
    rep.start()
    (p1,) = _chain_proposals(dealt, genesis, sign_vote, 1)
    rep.handle(p1, 1)
    out = []
    for signer in range(3):
        out += rep.handle(sign_vote(signer, p1.block), 2)
    assert [type(a.cert).__name__ for a in out if isinstance(a, CertFormed)] == ["QC"]
    (prop,) = sends(out, Proposal)
    assert prop.msg.block.round == 2 and prop.msg.block.qc.block_id == p1.block.id
    assert rep.r_cur == 2


def test_bad_vote_share_is_counted(make_replica, dealt, genesis, sign_vote):
    rep = make_replica("diembft3", 2)
    rep.start()
    (p1,) = _chain_proposals(dealt, genesis, sign_vote, 1)
    vote = sign_vote(0, p1.block)
    rep.handle(Vote(1, vote.block_id, vote.round, vote.view, vote.share), 2)
    assert rep.byzantine["invalid_vote"] == 1


def test_three_chain_commits_first_block(make_replica, dealt, genesis, sign_vote):
    rep = make_replica("diembft3", 0)
    rep.start()
    proposals = _chain_proposals(dealt, genesis, sign_vote, 4)
    commits = []
    for depth, prop in enumerate(proposals, start=1):
        commits += [a for a in rep.handle(prop, depth) if isinstance(a, Committed)]
    assert [c.block.id for c in commits] == [proposals[0].block.id]
    assert commits[0].direct
    assert rep.r_lock == 2


def test_tc_advances_round_and_is_forwarded(make_replica, dealt, genesis):
    rep = make_replica("diembft3", 0)
    rep.start()
    out = rep.handle(TCMsg(3, _tc(dealt, genesis, 1)), 1)
    assert rep.r_cur == 2
    (fwd,) = sends(out, TCMsg)
    assert fwd.to == 2


def test_invalid_tc_is_dropped(make_replica, dealt, genesis):
    rep = make_replica("diembft3", 0)
    rep.start()
    tc = _tc(dealt, genesis, 1)
    rep.handle(TCMsg(3, TC(2, tc.sig, tc.high_qcs)), 1)
    assert rep.r_cur == 1
    assert rep.byzantine["invalid_tc"] == 1


def test_timeouts_form_tc(make_replica, dealt, genesis):
    scheme, keys = dealt
    rep = make_replica("diembft3", 0)
    rep.start()
    out = []
    for i in range(3):
        out += rep.handle(TimeoutMsg(i, scheme.sign_share(keys[i], round_message(1)), genesis[1], round=1), 1)
    (tc,) = [a.cert for a in out if isinstance(a, CertFormed)]
    assert tc.round == 1 and rep.r_cur == 2


@pytest.mark.parametrize("protocol", ["diembft3", "jolteon"])
def test_diembft_proposals_never_carry_tc_but_jolteon_does(make_replica, dealt, genesis, protocol):
    rep = make_replica(protocol, 2)
    rep.start()
    out = rep.handle(TCMsg(3, _tc(dealt, genesis, 1)), 1)
    (prop,) = sends(out, Proposal)
    assert (prop.msg.block.tc is not None) == (protocol == "jolteon")
