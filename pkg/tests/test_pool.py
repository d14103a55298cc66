import numpy as np
import pytest

from pufkeys import bits as B
from pufkeys.errors import KeyReuse, PoolDepleted
from pufkeys.protocols.pool import KeyPool, Provenance


def filled(rng, *sizes, provenance=Provenance.PUF_DERIVED):
    pool = KeyPool("alice", "bob")
    chunks = []
    for i, n in enumerate(sizes):
        bits = B.random_bits(rng, n)
        pool.deposit(bits, provenance, f"seg{i}")
        chunks.append(bits)
    return pool, np.concatenate(chunks)


def test_withdraw_dispenses_lowest_unspent_run(rng):
    pool, everything = filled(rng, 100, 60)
    off1, first = pool.withdraw(64)
    off2, second = pool.withdraw(64)
    assert (off1, off2) == (0, 64)
    assert np.array_equal(first, everything[:64])
    assert np.array_equal(second, everything[64:128])
    assert pool.consumed_bits == 128
    assert pool.available_bits == 32


def test_withdraw_skips_a_hole_that_is_too_small(rng):
    pool, _ = filled(rng, 200)
    pool.take(10, 5)
    offset, _ = pool.withdraw(20)
    assert offset == 15
    offset, _ = pool.withdraw(10)
    assert offset == 0


def test_take_refuses_spent_or_missing_bits(rng):
    pool, everything = filled(rng, 128)
    assert np.array_equal(pool.take(32, 32), everything[32:64])
    with pytest.raises(KeyReuse):
        pool.take(40, 8)
    with pytest.raises(PoolDepleted):
        pool.take(120, 16)
    with pytest.raises(PoolDepleted):
        pool.take(-1, 4)


def test_depleted_pool_reports_available_bits(rng):
    pool, _ = filled(rng, 50)
    with pytest.raises(PoolDepleted, match="50 available"):
        pool.withdraw(51)


def test_withdraw_within_stays_inside_the_segment(rng):
    pool, everything = filled(rng, 64, 64)
    seg = pool.segment("seg1")
    offset, bits = pool.withdraw_within(seg, 16)
    assert offset == 64
    assert np.array_equal(bits, everything[64:80])
    pool.withdraw_within(seg, 48)
    with pytest.raises(PoolDepleted):
        pool.withdraw_within(seg, 1)
    # the first segment is untouched
    assert pool.available_bits == 64


def test_segment_lookup_and_latest(rng):
    pool, _ = filled(rng, 8, 8)
    pool.deposit(B.random_bits(rng, 8), Provenance.QKD_GENERATED, "S0003")
    pool.deposit(B.random_bits(rng, 8), Provenance.QKD_GENERATED, "S0004")
    assert pool.latest(Provenance.QKD_GENERATED).label == "S0004"
    assert pool.latest(Provenance.RELAYED) is None
    assert pool.segment("seg1").offset == 8
    with pytest.raises(KeyError):
        pool.segment("seg1", Provenance.QKD_GENERATED)


def test_listener_sees_every_deposit_and_withdrawal(rng):
    events = []
    pool = KeyPool("a", "b", lambda ev, p, off, n, note: events.append((ev, off, n, note)))
    pool.deposit(B.random_bits(rng, 32), Provenance.RELAYED, "r")
    pool.withdraw(8, "first")
    pool.take(16, 8, "second")
    assert events == [("deposit", 0, 32, "relay:r"), ("withdraw", 0, 8, "first"), ("withdraw", 16, 8, "second")]


def test_peek_does_not_spend(rng):
    pool, everything = filled(rng, 16)
    assert np.array_equal(pool.peek(0, 16), everything)
    assert pool.available_bits == 16


def test_withdrawn_bits_are_copies(rng):
    pool, _ = filled(rng, 16)
    _, bits = pool.withdraw(8)
    bits ^= 1
    assert np.array_equal(pool.peek(0, 8), bits ^ 1)
