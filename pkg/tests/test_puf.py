import hashlib

import numpy as np
import pytest

from oracles import majority_key_failure, more_than_k_blocks_wrong
from pufkeys import bits as B
from pufkeys.errors import (
    ChallengeLengthMismatch,
    CrpSpaceTooLarge,
    DuplicateChallenge,
    ParameterError,
    ReconciliationFailure,
)
from pufkeys.puf import (
    DEFAULT_PARAMS,
    Challenge,
    ExtractorParams,
    HelperData,
    Strength,
    Token,
    challenge_space,
    concat_keys,
    crp_table,
    enroll,
    evaluate_raw,
    reference_response,
    reproduce,
)
from pufkeys.randomness import monobit_test

SEED = bytes(range(32))

# majority-only decoding error rate from the Binomial(15, 0.1) tail over 273 blocks
MAJORITY_FAILURE = 0.0091377434874331880
# more than three wrong blocks: floor on list-decoding failure
BEYOND_LIST = 2.8731254601271282e-10


def quiet(token_id="t", seed=SEED, bits=64):
    return Token(token_id, seed, Strength.STRONG, bits, 0.0)


def test_frozen_oracle_values_match_the_oracle():
    assert float(majority_key_failure(15, 0.1, 273)) == pytest.approx(MAJORITY_FAILURE, rel=1e-12)
    assert float(more_than_k_blocks_wrong(15, 0.1, 273, 3)) == pytest.approx(BEYOND_LIST, rel=1e-12)


def test_response_is_the_keyed_prf_expansion():
    c = Challenge(0x0123456789ABCDEF, 64)
    stream = hashlib.shake_256(b"\x00\x20" + SEED + b"puf-response" + b"\x00\x40" + bytes.fromhex("0123456789abcdef"))
    expected = np.unpackbits(np.frombuffer(stream.digest(512), np.uint8))
    assert np.array_equal(reference_response(quiet(), c), expected)
    assert B.to_hex(reference_response(quiet(), c)[:64]) == stream.hexdigest(8)


def test_noiseless_token_is_deterministic():
    c = Challenge(7, 64)
    assert np.array_equal(evaluate_raw(quiet(), c, None), evaluate_raw(quiet(), c, None))


def test_noisy_token_needs_a_noise_source():
    with pytest.raises(ParameterError):
        evaluate_raw(Token("t", SEED), Challenge(7, 64), None)


def test_challenge_length_is_checked():
    with pytest.raises(ChallengeLengthMismatch):
        evaluate_raw(quiet(), Challenge(7, 32), None)


def test_repeated_noisy_reads_disagree_at_twice_p_times_one_minus_p(rng):
    token = Token("t", SEED, intra_error_rate=0.10)
    c = Challenge(99, 64)
    d = [B.hamming_fraction(evaluate_raw(token, c, rng), evaluate_raw(token, c, rng)) for _ in range(1000)]
    # per-read sd is sqrt(0.18 * 0.82 / 4096) ~ 0.006, so the mean is tight
    assert np.mean(d) == pytest.approx(2 * 0.10 * 0.90, abs=0.002)


def test_independent_tokens_disagree_on_half_the_bits(rng):
    c = Challenge(5, 64)
    d = [
        B.hamming_fraction(reference_response(Token.create("a", rng), c), reference_response(Token.create("b", rng), c))
        for _ in range(1000)
    ]
    assert abs(np.mean(d) - 0.5) < 0.01


def test_extractor_budget():
    assert DEFAULT_PARAMS.n_blocks == 273
    assert DEFAULT_PARAMS.key_budget == 257
    enroll(quiet(), Challenge(1, 64))
    with pytest.raises(ParameterError):
        enroll(quiet(), Challenge(1, 64), ExtractorParams(key_bits=512))
    with pytest.raises(ParameterError):
        ExtractorParams(rep_n=14).validate()


def test_enroll_twice_gives_the_same_key():
    c = Challenge(3, 64)
    h1, k1 = enroll(quiet(), c, hash_seed=42)
    h2, k2 = enroll(quiet(), c, hash_seed=42)
    assert k1 == k2 and k1.source == (("t", c),)
    assert len(k1) == 256


def test_noiseless_reproduce_equals_enroll():
    token = quiet()
    for v in range(20):
        c = Challenge(v, 64)
        helper, key = enroll(token, c)
        assert reproduce(token, c, helper, None) == key


def test_helper_data_round_trips_through_dict():
    helper, _ = enroll(quiet(), Challenge(3, 64))
    again = HelperData.from_dict(helper.to_dict())
    assert np.array_equal(again.code_offset, helper.code_offset)
    assert again.checksum == helper.checksum and again.hash_seed == helper.hash_seed


def test_majority_decoding_alone_fails_at_the_binomial_rate(rng):
    token = Token("t", SEED, intra_error_rate=0.10)
    c = Challenge(11, 64)
    helper, key = enroll(token, c)
    trials = 5000
    wrong = sum(
        not np.array_equal(reproduce(token, c, helper, rng, verify=False).bits, key.bits) for _ in range(trials)
    )
    sd = (MAJORITY_FAILURE * (1 - MAJORITY_FAILURE) / trials) ** 0.5
    assert abs(wrong / trials - MAJORITY_FAILURE) < 3 * sd


def test_checked_reproduction_recovers_every_key_in_2000_reads(rng):
    token = Token("t", SEED, intra_error_rate=0.10)
    c = Challenge(12, 64)
    helper, key = enroll(token, c)
    for _ in range(2000):
        assert reproduce(token, c, helper, rng) == key


def test_wrong_token_is_caught_by_the_checksum(rng):
    c = Challenge(13, 64)
    helper, key = enroll(Token("t", SEED), c)
    caught = 0
    for _ in range(1000):
        imposter = Token("t", rng.bytes(32))
        try:
            got = reproduce(imposter, c, helper, rng)
        except ReconciliationFailure:
            caught += 1
        else:
            caught += got != key
    assert caught >= 999


def test_concat_keys():
    token = quiet()
    k1 = enroll(token, Challenge(1, 64))[1]
    k2 = enroll(token, Challenge(2, 64))[1]
    joined = concat_keys([k1, k2])
    assert len(joined) == 512
    assert np.array_equal(joined.bits[:256], k1.bits)
    assert [c.value for _, c in joined.source] == [1, 2]
    with pytest.raises(DuplicateChallenge):
        concat_keys([k1, k1])
    other = enroll(quiet("u"), Challenge(3, 64))[1]
    with pytest.raises(ParameterError):
        concat_keys([k1, other])


def test_concatenated_short_keys_look_random():
    token = quiet()
    params = ExtractorParams(key_bits=100)
    keys = [enroll(token, Challenge(v, 64), params)[1] for v in range(3)]
    joined = concat_keys(keys)
    assert len(joined) == 300
    assert monobit_test(joined.bits).passed


def test_weak_token_enumerates_and_strong_token_refuses():
    weak = Token("w", SEED, Strength.WEAK, Strength.WEAK.default_challenge_bits, 0.0)
    table = crp_table(weak, ExtractorParams(raw_response_bits=512, rep_n=3, key_bits=64, entropy_margin=8))
    assert len(table) == 1024
    assert len({c for c, _, _ in table}) == 1024
    with pytest.raises(CrpSpaceTooLarge):
        next(challenge_space(quiet()))


def test_challenge_validation():
    with pytest.raises(ParameterError):
        Challenge(16, 4)
    assert Challenge.from_hex("0a", 8) == Challenge(10, 8)
    assert Challenge(10, 12).hex() == "00a"
