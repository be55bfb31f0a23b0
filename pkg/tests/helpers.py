"""Shared test utilities: manufactured triples for field-level unit tests."""

import itertools

from spdzgen.dispense import BeaverTripleShares, split_additive


def make_triple(a, b, c, p, parties, rng, triple_id):
    return BeaverTripleShares(
        triple_id=triple_id,
        parties=tuple(parties),
        a_shares=dict(zip(parties, split_additive(a, len(parties), p, rng))),
        b_shares=dict(zip(parties, split_additive(b, len(parties), p, rng))),
        c_shares=dict(zip(parties, split_additive(c, len(parties), p, rng))),
    )


def triple_stream(p, parties, rng, prefix="ts"):
    """Endless valid random triples; a stand-in for the dispensation layer."""
    for i in itertools.count():
        a, b = rng.randrange(1, p), rng.randrange(1, p)
        yield make_triple(a, b, a * b % p, p, parties, rng, "%s%d" % (prefix, i))
