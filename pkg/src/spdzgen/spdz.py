"""Linear algebra on additive shares and Beaver multiplication.

Shares are plain residues mod p; linear operations are share-wise and free of
communication.  An opening is the only synchronization point: every party
ships its share to a collector, which reconstructs and (optionally)
broadcasts.  Multiplication consumes one dispensed triple per product:

    rho = open([x] - [a]),  eps = open([y] - [b])
    [x*y] = [c] + eps*[a] + rho*[b] + rho*eps

with the public rho*eps term added by exactly one designated party (the
lowest party identifier unless told otherwise).  Triples are strictly
one-time-use, enforced by a spent-id ledger.
"""

from __future__ import annotations

import random
import threading
from dataclasses import dataclass

from .dispense import BeaverTripleShares, split_additive
from .errors import ShareError, TripleReuseError
from .net import PartyId, Runtime

OPEN_TAG = "open"
OPEN_RESULT_TAG = "open-result"
SHARE_TAG = "share"


@dataclass(frozen=True)
class SharedValue:
    id: str
    parties: tuple
    shares: dict  # PartyId -> residue in [0, p)

    def share_of(self, pid: PartyId) -> int:
        try:
            return self.shares[pid]
        except KeyError:
            raise ShareError("party %s holds no share of %s" % (pid, self.id))


@dataclass(frozen=True)
class BeaverOpenings:
    """The two public values a multiplication reveals: rho = x - a, eps = y - b."""

    rho: int
    eps: int


def _check_same_parties(x: SharedValue, y: SharedValue):
    if x.parties != y.parties:
        raise ShareError("mismatched party sets: %s vs %s" % (x.id, y.id))


def share_secret(runtime: Runtime, owner: PartyId, secret: int, parties, p: int,
                 value_id: str | None = None,
                 rng: random.Random | None = None) -> SharedValue:
    """Owner splits a secret and delivers one share to each other party."""
    parties = tuple(parties)
    if value_id is None:
        value_id = runtime.fresh_id("v")
    if rng is None:
        rng = runtime.rng(owner)
    values = split_additive(secret % p, len(parties), p, rng)
    shares = dict(zip(parties, values))
    w = (p.bit_length() + 7) // 8
    for pid in parties:
        if pid == owner:
            continue
        runtime.send(owner, pid, "%s:%s" % (SHARE_TAG, value_id), shares[pid].to_bytes(w, "big"))
    runtime.pump()
    for pid in parties:
        if pid != owner:
            runtime.take(pid, "%s:%s" % (SHARE_TAG, value_id))
    return SharedValue(id=value_id, parties=parties, shares=shares)


def from_shares(value_id: str, shares: dict) -> SharedValue:
    return SharedValue(id=value_id, parties=tuple(shares.keys()), shares=dict(shares))


def triple_component(triple: BeaverTripleShares, which: str) -> SharedValue:
    shares = {"a": triple.a_shares, "b": triple.b_shares, "c": triple.c_shares}[which]
    return SharedValue(id="%s.%s" % (triple.triple_id, which),
                       parties=triple.parties, shares=dict(shares))


def add_local(x: SharedValue, y: SharedValue, p: int) -> SharedValue:
    _check_same_parties(x, y)
    return SharedValue(id="(%s+%s)" % (x.id, y.id), parties=x.parties,
                       shares={pid: (x.shares[pid] + y.shares[pid]) % p for pid in x.parties})


def sub_local(x: SharedValue, y: SharedValue, p: int) -> SharedValue:
    _check_same_parties(x, y)
    return SharedValue(id="(%s-%s)" % (x.id, y.id), parties=x.parties,
                       shares={pid: (x.shares[pid] - y.shares[pid]) % p for pid in x.parties})


def scale_local(k: int, x: SharedValue, p: int) -> SharedValue:
    return SharedValue(id="(%d*%s)" % (k % p, x.id), parties=x.parties,
                       shares={pid: k * x.shares[pid] % p for pid in x.parties})


def add_const(x: SharedValue, const: int, p: int,
              designated: PartyId | None = None) -> SharedValue:
    """Add a public constant at exactly one party's share."""
    if designated is None:
        designated = min(x.parties)
    if designated not in x.parties:
        raise ShareError("designated party %s not in share set" % (designated,))
    shares = dict(x.shares)
    shares[designated] = (shares[designated] + const) % p
    return SharedValue(id="(%s+c)" % x.id, parties=x.parties, shares=shares)


def open_values(runtime: Runtime, values, p: int,
                collector: PartyId | None = None,
                recipients=None) -> list[int]:
    """Open a batch of shared values through the runtime.

    Every party sends one message carrying its share of each value to the
    collector, which reconstructs and broadcasts the results to `recipients`
    (all contributing parties by default; pass an explicit list to reveal the
    values to a subset only).
    """
    values = list(values)
    if not values:
        return []
    parties = values[0].parties
    for v in values[1:]:
        if v.parties != parties:
            raise ShareError("batched opening across mismatched party sets")
    if collector is None:
        collector = min(parties)
    batch_id = runtime.fresh_id("o")
    w = (p.bit_length() + 7) // 8
    tag = "%s:%s" % (OPEN_TAG, batch_id)
    for pid in parties:
        blob = b"".join(v.share_of(pid).to_bytes(w, "big") for v in values)
        if pid != collector:
            runtime.send(pid, collector, tag, blob)
    runtime.pump()
    contributions = {collector: [v.share_of(collector) for v in values]}
    for msg in runtime.take_all(collector, tag):
        contributions[msg.src] = [int.from_bytes(msg.payload[i * w:(i + 1) * w], "big")
                                  for i in range(len(values))]
    missing = [pid for pid in parties if pid not in contributions]
    if missing:
        raise ShareError("incomplete opening, missing %s" % ", ".join(map(str, missing)))
    opened = [sum(contributions[pid][i] for pid in parties) % p for i in range(len(values))]
    result_blob = b"".join(x.to_bytes(w, "big") for x in opened)
    result_tag = "%s:%s" % (OPEN_RESULT_TAG, batch_id)
    targets = parties if recipients is None else tuple(recipients)
    for pid in targets:
        if pid != collector:
            runtime.send(collector, pid, result_tag, result_blob)
    runtime.pump()
    for pid in targets:
        if pid != collector:
            runtime.take(pid, result_tag)
    return opened


def open_value(runtime: Runtime, value: SharedValue, p: int,
               collector: PartyId | None = None, recipients=None) -> int:
    return open_values(runtime, [value], p, collector=collector, recipients=recipients)[0]


class TripleLedger:
    """Spent-set keyed by triple id; thread-safe for concurrent controls."""

    def __init__(self):
        self._spent = set()
        self._lock = threading.Lock()

    def spend(self, triple_id: str):
        with self._lock:
            if triple_id in self._spent:
                raise TripleReuseError("triple %s already consumed" % triple_id)
            self._spent.add(triple_id)

    def __len__(self):
        return len(self._spent)


def beaver_mult(runtime: Runtime, x: SharedValue, y: SharedValue,
                triple: BeaverTripleShares, p: int, ledger: TripleLedger,
                designated: PartyId | None = None) -> SharedValue:
    """Multiply two shared values with one fresh dispensed triple."""
    _check_same_parties(x, y)
    if tuple(triple.parties) != x.parties:
        raise ShareError("triple %s dispensed to a different party set" % triple.triple_id)
    ledger.spend(triple.triple_id)
    a = triple_component(triple, "a")
    b = triple_component(triple, "b")
    opened = open_values(runtime, [sub_local(x, a, p), sub_local(y, b, p)], p)
    op = BeaverOpenings(rho=opened[0], eps=opened[1])
    if designated is None:
        designated = min(x.parties)
    shares = {}
    for pid in x.parties:
        z = (triple.c_shares[pid]
             + op.eps * triple.a_shares[pid]
             + op.rho * triple.b_shares[pid]) % p
        if pid == designated:
            z = (z + op.rho * op.eps) % p
        shares[pid] = z
    return SharedValue(id=runtime.fresh_id("prod"), parties=x.parties, shares=shares)


def reconstruct_value(value: SharedValue, p: int) -> int:
    """Test-harness oracle: sum all shares directly."""
    return sum(value.shares[pid] for pid in value.parties) % p
