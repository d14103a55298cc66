import hmac

import numpy as np
import pytest

from oracles import gf_mul, gf_poly_eval
from pufkeys import bits as B
from pufkeys.errors import KeyExhausted, ParameterError, UnknownPadIndex
from pufkeys.mac import (
    GF8,
    GF64,
    ItsMacKey,
    Tag,
    block_count,
    comp_mac,
    comp_verify,
    encode_message,
    epsilon,
    field_for,
    hash_table,
    key_material_bits,
    mac_tag,
    mac_verify,
    poly_hash,
)

MOD8 = 0x11B
MOD64 = (1 << 64) | 0x1B
ONE_BYTE = [bytes([i]) for i in range(256)]

# frozen from the sympy GF(2)[x] oracle
HASH_W8_MSG03_KEY02 = 0x0E
PRODUCT_W64 = 0x48827AB55D976FA0
HASH_W64_CONFIRM = 0x356A19638D8A63E7


def test_frozen_values_match_the_oracle():
    assert gf_poly_eval(2, encode_message(b"\x03", 8), MOD8) == HASH_W8_MSG03_KEY02
    assert gf_mul(0x0123456789ABCDEF, 0xFEDCBA9876543210, MOD64) == PRODUCT_W64
    assert gf_poly_eval(0x0123456789ABCDEF, encode_message(b"key-confirm|R", 64), MOD64) == HASH_W64_CONFIRM


def test_frozen_values_match_the_implementation():
    assert poly_hash(2, encode_message(b"\x03", 8), GF8) == HASH_W8_MSG03_KEY02
    assert GF64.mul(0x0123456789ABCDEF, 0xFEDCBA9876543210) == PRODUCT_W64
    assert poly_hash(0x0123456789ABCDEF, encode_message(b"key-confirm|R", 64), GF64) == HASH_W64_CONFIRM


def test_known_byte_field_product():
    assert GF8.mul(0x57, 0x83) == 0xC1


def test_field_multiplication_agrees_with_oracle(rng):
    for a, b in rng.integers(0, 256, size=(300, 2)):
        assert GF8.mul(int(a), int(b)) == gf_mul(int(a), int(b), MOD8)
    for _ in range(100):
        a, b = (int.from_bytes(rng.bytes(8), "big") for _ in range(2))
        assert GF64.mul(a, b) == gf_mul(a, b, MOD64)


def test_polynomial_hash_agrees_with_oracle(rng):
    for _ in range(50):
        key = int.from_bytes(rng.bytes(8), "big")
        msg = rng.bytes(int(rng.integers(0, 40)))
        blocks = encode_message(msg, 64)
        assert poly_hash(key, blocks, GF64) == gf_poly_eval(key, blocks, MOD64)


def test_hash_has_no_constant_term():
    assert poly_hash(0, encode_message(b"abcdefghij", 64)) == 0
    assert poly_hash(1, encode_message(b"", 8), GF8) == 0
    assert poly_hash(1, encode_message(b"\x00", 8), GF8) == 1


def test_messages_differing_only_in_length_have_no_fixed_offset():
    # with a constant term, b"" and b"\x00" would differ by 1 under every key
    msgs = [b"", b"\x00", b"\x00\x00", b"ab", b"ab\x00"]
    table = hash_table(8, msgs)
    for i, a in enumerate(msgs):
        for j, b in enumerate(msgs):
            if i != j:
                m = max(len(encode_message(a, 8)), len(encode_message(b, 8)))
                assert np.bincount(table[i] ^ table[j]).max() <= m


def test_encoding_is_injective_on_trailing_zeros():
    assert encode_message(b"a", 64) != encode_message(b"a\0", 64)
    assert block_count(9, 64) == len(encode_message(b"x" * 9, 64)) == 3
    assert block_count(0, 8) == 1


def test_distinct_one_block_messages_collide_on_at_most_m_keys():
    table = hash_table(8, ONE_BYTE)
    m = 2
    for i in range(256):
        collisions = (table == table[i]).sum(axis=1)
        collisions[i] = 0
        assert collisions.max() <= m


def test_two_block_messages_collide_on_at_most_m_keys(rng):
    msgs = [rng.bytes(2) for _ in range(40)]
    table = hash_table(8, msgs)
    for i in range(len(msgs)):
        for j in range(i + 1, len(msgs)):
            if msgs[i] != msgs[j]:
                assert (table[i] == table[j]).sum() <= 3


def test_substitution_forgery_bound_exhaustive_at_w8():
    # Seeing (msg, tag) fixes pad = tag ^ H_h(msg) for each hash key h, so the
    # forgery (msg2, tag2) succeeds for exactly the h with H_h(msg2) ^ H_h(msg) = tag2 ^ tag.
    table = hash_table(8, ONE_BYTE).astype(np.int64)
    offsets = 256 * np.arange(256)[:, None]
    worst = 0
    for i in range(256):
        diff = table ^ table[i]
        counts = np.bincount((diff + offsets).ravel(), minlength=65536).reshape(256, 256)
        counts[i] = 0
        worst = max(worst, int(counts.max()))
    assert worst / 256 <= epsilon(8, 2) == 2 / 256


def test_bit_flip_rejection_rate_exhaustive_at_w8():
    table = hash_table(8, ONE_BYTE)
    accepted = total = 0
    for i in range(256):
        for bit in range(8):
            j = i ^ (1 << bit)
            accepted += int((table[i] == table[j]).sum())
            total += 256
    assert 1 - accepted / total >= 1 - 2 / 256


def test_tag_round_trip_and_budget(rng):
    key = ItsMacKey.from_bits(B.random_bits(rng, key_material_bits(64, 2)), 64, 2)
    t0 = mac_tag(key, b"hello")
    t1 = mac_tag(key, b"world")
    assert (t0.pad_index, t1.pad_index) == (0, 1) and key.uses_remaining == 0
    assert mac_verify(key, b"hello", t0) and mac_verify(key, b"world", t1)
    assert not mac_verify(key, b"hellp", t0)
    assert not mac_verify(key, b"hello", Tag(t0.value, 1))
    with pytest.raises(KeyExhausted):
        mac_tag(key, b"again")
    with pytest.raises(UnknownPadIndex):
        mac_verify(key, b"hello", Tag(t0.value, 2))
    assert not mac_verify(key, b"hello", Tag(1 << 64, 0))


def test_verification_does_not_spend_pads():
    key = ItsMacKey.from_bits(B.from_int(99, key_material_bits(8, 3)), 8, 3)
    tag = mac_tag(key, b"m")
    for _ in range(5):
        assert mac_verify(key, b"m", tag)
    assert key.uses_remaining == 2


def test_each_pad_serves_one_message(rng):
    key = ItsMacKey.from_bits(B.random_bits(rng, key_material_bits(64, 8)), 64, 8)
    for i in range(8):
        mac_tag(key, f"message {i}".encode())
    assert sorted(key.used) == list(range(8))
    assert len(set(key.used.values())) == 8


def test_key_derivation_consumes_exactly_the_material():
    bits = B.from_int(0xAB << 16 | 0xCD << 8 | 0xEF, 24)
    key = ItsMacKey.from_bits(bits, 8, 2)
    assert (key.hash_key, key.otp_pads) == (0xAB, [0xCD, 0xEF])
    with pytest.raises(ParameterError):
        ItsMacKey.from_bits(bits[:16], 8, 2)


def test_tag_wire_format():
    tag = Tag(0x0102030405060708, 3)
    assert tag.to_bytes(64) == bytes.fromhex("030102030405060708")
    assert Tag.from_bytes(tag.to_bytes(64), 64) == tag
    with pytest.raises(ParameterError):
        Tag.from_bytes(b"\x00\x01", 64)


def test_verify_uses_constant_time_comparison(monkeypatch):
    calls = []
    real = hmac.compare_digest

    def spy(a, b):
        calls.append((a, b))
        return real(a, b)

    monkeypatch.setattr("pufkeys.mac.hmac.compare_digest", spy)
    key = ItsMacKey.from_bits(B.from_int(5, key_material_bits(64, 1)), 64, 1)
    mac_verify(key, b"x", mac_tag(key, b"x"))
    assert len(calls) == 1 and len(calls[0][0]) == 8


def test_unknown_width():
    with pytest.raises(ParameterError):
        field_for(16)


def test_comp_mac_properties(rng):
    key = rng.bytes(16)
    assert comp_mac(key, b"m") == comp_mac(key, b"m")
    assert len(comp_mac(key, b"m")) == 8
    distances = []
    for _ in range(1000):
        a, b = comp_mac(rng.bytes(16), b"m"), comp_mac(rng.bytes(16), b"m")
        distances.append(np.unpackbits(np.frombuffer(bytes(x ^ y for x, y in zip(a, b)), np.uint8)).sum())
    assert np.mean(distances) == pytest.approx(32, abs=0.6)
    for _ in range(1000):
        k = rng.bytes(16)
        msg = bytearray(rng.bytes(20))
        tag = comp_mac(k, bytes(msg))
        msg[int(rng.integers(20))] ^= 1 << int(rng.integers(8))
        assert not comp_verify(k, bytes(msg), tag)
