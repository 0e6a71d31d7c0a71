"""Blocks, certificates, rank and the block tree shared by every protocol."""
from __future__ import annotations

import struct
from dataclasses import dataclass, fields, is_dataclass
from typing import Callable, Container, Generic, Iterable, TypeVar, Union

from core.crypto import KeyMaterial, SigShare, ThresholdScheme, ThresholdSig, hash_digest
from core.errors import CryptoError, MissingAncestor

# --- canonical serialization -------------------------------------------------


def canonical(obj) -> bytes:
    """Length-prefixed, tag-per-value encoding; integers are 64-bit little-endian."""
    out: list[bytes] = []
    _encode(obj, out)
    return b"".join(out)


def _encode(obj, out: list[bytes]) -> None:
    if obj is None:
        out.append(b"\x00")
    elif isinstance(obj, bool):
        out.append(b"\x04\x01" if obj else b"\x04\x00")
    elif isinstance(obj, int):
        out.append(b"\x01" + struct.pack("<q", obj))
    elif isinstance(obj, (bytes, bytearray)):
        out.append(b"\x02" + struct.pack("<Q", len(obj)))
        out.append(bytes(obj))
    elif isinstance(obj, str):
        raw = obj.encode()
        out.append(b"\x03" + struct.pack("<Q", len(raw)))
        out.append(raw)
    elif isinstance(obj, (tuple, list)):
        out.append(b"\x05" + struct.pack("<Q", len(obj)))
        for item in obj:
            _encode(item, out)
    elif is_dataclass(obj):
        fs = [fld for fld in fields(obj) if fld.compare]
        out.append(b"\x06" + struct.pack("<Q", len(fs)))
        for fld in fs:
            _encode(getattr(obj, fld.name), out)
    else:
        raise TypeError(f"cannot encode {type(obj).__name__}")


def vote_message(block_id: bytes, round: int, view: int) -> bytes:
    return canonical((b"vote", block_id, round, view))


def fvote_message(block_id: bytes, round: int, view: int, height: int, proposer: int) -> bytes:
    return canonical((b"fvote", block_id, round, view, height, proposer))


def round_message(round: int) -> bytes:
    return canonical((b"round", round))


def view_message(view: int) -> bytes:
    return canonical((b"view", view))


def coin_message(view: int) -> bytes:
    return canonical((b"coin", view))


# --- certificates --------------------------------------------------------------


@dataclass(frozen=True, order=True)
class Rank:
    # field order is the comparison order
    view: int
    endorsed: bool
    round: int


@dataclass(frozen=True)
class QC:
    block_id: bytes
    round: int
    view: int
    sig: ThresholdSig

    @property
    def message(self) -> bytes:
        return vote_message(self.block_id, self.round, self.view)


@dataclass(frozen=True)
class CoinQC:
    view: int
    sig: ThresholdSig
    leader: int


@dataclass(frozen=True)
class FQC:
    block_id: bytes
    round: int
    view: int
    height: int
    proposer: int
    sig: ThresholdSig
    # endorsement evidence, attached once the view's coin is known
    coin_qc: CoinQC | None = None

    @property
    def message(self) -> bytes:
        return fvote_message(self.block_id, self.round, self.view, self.height, self.proposer)

    @property
    def endorsed(self) -> bool:
        coin = self.coin_qc
        return coin is not None and coin.view == self.view and coin.leader == self.proposer


@dataclass(frozen=True)
class TC:
    round: int
    sig: ThresholdSig
    high_qcs: tuple[QC, ...]

    @property
    def max_high_round(self) -> int:
        return max((qc.round for qc in self.high_qcs), default=0)


@dataclass(frozen=True)
class FTC:
    view: int
    sig: ThresholdSig


Cert = Union[QC, FQC]


@dataclass(frozen=True)
class TimeoutMsg:
    sender: int
    share: SigShare
    high_qc: Cert
    round: int | None = None
    view: int | None = None


# --- blocks ------------------------------------------------------------------------


@dataclass(frozen=True)
class Block:
    id: bytes
    qc: Cert | None
    round: int
    view: int
    payload: bytes = b""
    tc: TC | None = None
    coin_qc: CoinQC | None = None

    height = 0
    proposer = None

    @property
    def parent_id(self) -> bytes | None:
        return self.qc.block_id if self.qc is not None else None


@dataclass(frozen=True)
class FallbackBlock:
    inner: Block
    height: int
    proposer: int
    id: bytes

    @property
    def qc(self) -> Cert:
        return self.inner.qc

    @property
    def round(self) -> int:
        return self.inner.round

    @property
    def view(self) -> int:
        return self.inner.view

    @property
    def payload(self) -> bytes:
        return self.inner.payload

    @property
    def parent_id(self) -> bytes:
        return self.inner.parent_id

    tc = None
    coin_qc = None


AnyBlock = Union[Block, FallbackBlock]


def block_id(qc: Cert | None, round: int, view: int, payload: bytes) -> bytes:
    return hash_digest(canonical((b"block", qc, round, view, payload)))


def make_block(qc: Cert | None, tc_or_coinqc: TC | CoinQC | None, round: int, view: int,
               payload: bytes = b"") -> Block:
    tc = tc_or_coinqc if isinstance(tc_or_coinqc, TC) else None
    coin = tc_or_coinqc if isinstance(tc_or_coinqc, CoinQC) else None
    return Block(block_id(qc, round, view, payload), qc, round, view, payload, tc, coin)


def fallback_block_id(inner_id: bytes, height: int, proposer: int) -> bytes:
    return hash_digest(canonical((b"fblock", inner_id, height, proposer)))


def make_fallback_block(inner: Block, height: int, proposer: int) -> FallbackBlock:
    return FallbackBlock(inner, height, proposer, fallback_block_id(inner.id, height, proposer))


def well_formed(block: AnyBlock) -> bool:
    inner = block.inner if isinstance(block, FallbackBlock) else block
    if inner.id != block_id(inner.qc, inner.round, inner.view, inner.payload):
        return False
    if isinstance(block, FallbackBlock):
        return block.height in (1, 2) and block.id == fallback_block_id(inner.id, block.height, block.proposer)
    return True


def make_genesis(scheme: ThresholdScheme, keys: list[KeyMaterial]) -> tuple[Block, QC]:
    genesis = make_block(None, None, 0, 0, b"")
    msg = vote_message(genesis.id, 0, 0)
    sig = scheme.aggregate((scheme.sign_share(k, msg) for k in keys), scheme.public_set.quorum)
    return genesis, QC(genesis.id, 0, 0, sig)


def rank_of(item: Cert | AnyBlock) -> Rank:
    if isinstance(item, FQC):
        return Rank(item.view, item.endorsed, item.round)
    return Rank(item.view, False, item.round)


# --- verification --------------------------------------------------------------------


def verify_qc(qc: QC, scheme: ThresholdScheme) -> bool:
    return qc.sig.threshold == scheme.public_set.quorum and scheme.verify_threshold(qc.sig, qc.message)


def verify_coin_qc(coin: CoinQC, scheme: ThresholdScheme) -> bool:
    if coin.sig.threshold != scheme.public_set.coin_threshold:
        return False
    if not scheme.verify_threshold(coin.sig, coin_message(coin.view)):
        return False
    try:
        return scheme.coin_leader(coin.sig) == coin.leader
    except CryptoError:
        return False


def verify_fqc(fqc: FQC, scheme: ThresholdScheme) -> bool:
    if fqc.height not in (1, 2) or fqc.sig.threshold != scheme.public_set.quorum:
        return False
    if not scheme.verify_threshold(fqc.sig, fqc.message):
        return False
    if fqc.coin_qc is not None:
        return fqc.coin_qc.view == fqc.view and verify_coin_qc(fqc.coin_qc, scheme)
    return True


def verify_cert(cert, scheme: ThresholdScheme) -> bool:
    if isinstance(cert, QC):
        return verify_qc(cert, scheme)
    if isinstance(cert, FQC):
        return verify_fqc(cert, scheme)
    return False


def verify_ftc(ftc: FTC, scheme: ThresholdScheme) -> bool:
    return ftc.sig.threshold == scheme.public_set.quorum and scheme.verify_threshold(ftc.sig, view_message(ftc.view))


def validate_tc(tc: TC, scheme: ThresholdScheme) -> bool:
    quorum = scheme.public_set.quorum
    if tc.sig.threshold != quorum or not scheme.verify_threshold(tc.sig, round_message(tc.round)):
        return False
    if len(tc.high_qcs) != quorum:
        return False
    return all(qc.round < tc.round and verify_qc(qc, scheme) for qc in tc.high_qcs)


# --- certificate formation -------------------------------------------------------------

C = TypeVar("C")


def _first_quorum(msgs: Iterable, key: Callable, threshold: int):
    groups: dict = {}
    for m in msgs:
        bucket = groups.setdefault(key(m), {})
        bucket.setdefault(m.share.signer, m)
        if len(bucket) >= threshold:
            return key(m), list(bucket.values())[:threshold]
    return None, None


def form_qc(votes: Iterable, scheme: ThresholdScheme) -> QC | None:
    """None means not yet."""
    q = scheme.public_set.quorum
    key, chosen = _first_quorum(votes, lambda v: (v.block_id, v.round, v.view), q)
    if chosen is None:
        return None
    return QC(*key, scheme.aggregate((v.share for v in chosen), q))


def form_fqc(votes: Iterable, scheme: ThresholdScheme) -> FQC | None:
    q = scheme.public_set.quorum
    key, chosen = _first_quorum(votes, lambda v: (v.block_id, v.round, v.view, v.height, v.proposer), q)
    if chosen is None:
        return None
    return FQC(*key, scheme.aggregate((v.share for v in chosen), q))


def form_tc(timeouts: Iterable[TimeoutMsg], scheme: ThresholdScheme) -> TC | None:
    q = scheme.public_set.quorum
    rnd, chosen = _first_quorum(timeouts, lambda t: t.round, q)
    if chosen is None:
        return None
    return TC(rnd, scheme.aggregate((t.share for t in chosen), q), tuple(t.high_qc for t in chosen))


def form_ftc(timeouts: Iterable[TimeoutMsg], scheme: ThresholdScheme) -> FTC | None:
    q = scheme.public_set.quorum
    view, chosen = _first_quorum(timeouts, lambda t: t.view, q)
    if chosen is None:
        return None
    return FTC(view, scheme.aggregate((t.share for t in chosen), q))


def form_coinqc(shares: Iterable, scheme: ThresholdScheme) -> CoinQC | None:
    t = scheme.public_set.coin_threshold
    view, chosen = _first_quorum(shares, lambda s: s.view, t)
    if chosen is None:
        return None
    sig = scheme.aggregate((s.share for s in chosen), t)
    return CoinQC(view, sig, scheme.coin_leader(sig))


class QuorumCollector(Generic[C]):
    """Incremental certificate formation.

    The first share of a signer in a slot wins. A repeat of the same key counts
    as a duplicate and a different key as a conflict; neither is collected.
    ``former`` runs exactly once per key, when the key reaches ``threshold``.
    Slots below the prune floor are forgotten and their late shares ignored.
    """

    def __init__(self, threshold: int, former: Callable[[list], C]):
        self.threshold = threshold
        self._former = former
        self._first: dict = {}  # slot -> signer -> key
        self._msgs: dict = {}  # slot -> key -> shares
        self._floor = None
        self.duplicates = 0
        self.conflicts = 0

    def add(self, slot, key, msg) -> C | None:
        if self._floor is not None and slot < self._floor:
            return None
        signer = msg.share.signer
        seen = self._first.setdefault(slot, {})
        previous = seen.get(signer)
        if previous is not None:
            if previous == key:
                self.duplicates += 1
            else:
                self.conflicts += 1
            return None
        seen[signer] = key
        bucket = self._msgs.setdefault(slot, {}).setdefault(key, [])
        bucket.append(msg)
        if len(bucket) == self.threshold:
            return self._former(bucket)
        return None

    def prune(self, floor) -> None:
        if self._floor is not None and floor <= self._floor:
            return
        self._floor = floor
        for slot in [s for s in self._first if s < floor]:
            del self._first[slot]
            self._msgs.pop(slot, None)

    @property
    def slots(self) -> list:
        return list(self._first)


# --- block tree --------------------------------------------------------------------


class BlockTree:
    def __init__(self, genesis: Block, genesis_qc: QC):
        self.genesis = genesis
        self._blocks: dict[bytes, AnyBlock] = {genesis.id: genesis}
        self._certs: dict[bytes, Cert] = {genesis.id: genesis_qc}

    def __contains__(self, block_id: bytes) -> bool:
        return block_id in self._blocks

    def __len__(self) -> int:
        return len(self._blocks)

    def add(self, block: AnyBlock) -> bool:
        if block.id in self._blocks:
            return False
        self._blocks[block.id] = block
        return True

    def get(self, block_id: bytes) -> AnyBlock | None:
        return self._blocks.get(block_id)

    def certify(self, cert: Cert) -> bool:
        if cert.block_id in self._certs:
            return False
        self._certs[cert.block_id] = cert
        return True

    def cert_for(self, block_id: bytes) -> Cert | None:
        return self._certs.get(block_id)


def ancestors(tree: BlockTree, block_id: bytes, stop: Container[bytes] = ()) -> list[AnyBlock]:
    """Genesis-first chain ending at ``block_id``; the walk ends early at any id in ``stop``."""
    chain = []
    cur = block_id
    while cur not in stop:
        blk = tree.get(cur)
        if blk is None:
            raise MissingAncestor(cur)
        chain.append(blk)
        if blk.qc is None:
            break
        cur = blk.qc.block_id
    chain.reverse()
    return chain


def _block_or_raise(tree: BlockTree, block_id: bytes) -> AnyBlock:
    blk = tree.get(block_id)
    if blk is None:
        raise MissingAncestor(block_id)
    return blk


def two_chain(tree: BlockTree, tip: Cert, same_view: bool = False) -> AnyBlock | None:
    b1 = _block_or_raise(tree, tip.block_id)
    qc = b1.qc
    if qc is None or b1.round != qc.round + 1:
        return None
    if same_view and b1.view != qc.view:
        return None
    return _block_or_raise(tree, qc.block_id)


def three_chain(tree: BlockTree, tip: Cert) -> AnyBlock | None:
    b2 = _block_or_raise(tree, tip.block_id)
    q1 = b2.qc
    if q1 is None or b2.round != q1.round + 1:
        return None
    b1 = _block_or_raise(tree, q1.block_id)
    q0 = b1.qc
    if q0 is None or b1.round != q0.round + 1:
        return None
    return _block_or_raise(tree, q0.block_id)


# --- payloads ----------------------------------------------------------------------


def encode_payload(txns: Iterable[int]) -> bytes:
    return b"".join(struct.pack("<Q", t) for t in txns)


def decode_payload(payload: bytes) -> list[int]:
    if len(payload) % 8:
        return []
    return [t for (t,) in struct.iter_unpack("<Q", payload)]
