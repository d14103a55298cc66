import numpy as np
import pytest

from pufkeys import bits as B
from pufkeys.errors import FrameError
from pufkeys.protocols import wire
from pufkeys.puf import Challenge


def sample_messages(rng):
    key = B.random_bits(rng, 256)
    return [
        wire.ChallengeMsg(Challenge(0xDEADBEEF, 64)),
        wire.ChallengeAuthMsg(Challenge(5, 8), b"\x01" * 8),
        wire.ConfirmMsg(b"\x00" + bytes(range(8))),
        wire.RelayMsg(key, 1536, "charlie", b"\x00tagbytes"),
        wire.AuthInitMsg(Challenge(77, 64), B.random_bits(rng, 12), None),
        wire.AuthInitMsg(None, B.random_bits(rng, 64), 4096),
        wire.AuthTagMsg(b"\x03" + bytes(8)),
        wire.ReqConnectMsg("alice", 512, b"gate1234"),
        wire.AbortMsg("KeyMismatch"),
        wire.QkdPpMsg(2**62 + 1, b"\xaa" * 8, 768, b"\x00" * 9),
        wire.DataMsg("S0007", 40, b"ciphertext"),
    ]


def same_message(a, b):
    if type(a) is not type(b):
        return False
    for name in a.__dataclass_fields__:
        x, y = getattr(a, name), getattr(b, name)
        if isinstance(x, np.ndarray):
            if not np.array_equal(x, y):
                return False
        elif x != y:
            return False
    return True


def test_every_message_type_round_trips(rng):
    msgs = sample_messages(rng)
    assert {type(m).TYPE for m in msgs} == set(wire.FrameType)
    for msg in msgs:
        frame = msg.to_frame()
        assert same_message(wire.decode(frame), msg)


def test_header_carries_type_and_payload_length(rng):
    for msg in sample_messages(rng):
        frame = msg.to_frame()
        kind, length = wire.HEADER.unpack_from(frame)
        assert kind == msg.TYPE
        assert length == len(frame) - wire.HEADER.size
        assert wire.frame_type(frame) is msg.TYPE


def test_bit_strings_keep_their_length():
    odd = B.as_bits([1, 0, 1, 1, 0])
    decoded = wire.decode(wire.AuthInitMsg(None, odd, 0).to_frame())
    assert decoded.s.size == 5
    assert np.array_equal(decoded.s, odd)


@pytest.mark.parametrize(
    "frame, fragment",
    [
        (b"\x01\x00", "shorter than its header"),
        (b"\x7f\x00\x00\x00\x00", "unknown frame type"),
        (b"\x08\x00\x00\x00\x05ab", "declared length"),
        (b"\x03\x00\x00\x00\x01\x00", "truncated"),
        (b"\x08\x00\x00\x00\x03\x00\x00z", "trailing"),
        (b"\x01\x00\x00\x00\x02\x00\x00", "zero-length challenge"),
        (b"\x08\x00\x00\x00\x03\x00\x01\xff", "utf-8"),
    ],
)
def test_malformed_frames_raise_frame_error(frame, fragment):
    with pytest.raises(FrameError, match=fragment):
        wire.decode(frame)


def test_every_truncation_of_a_valid_frame_is_rejected(rng):
    for msg in sample_messages(rng):
        frame = msg.to_frame()
        for cut in range(len(frame)):
            with pytest.raises(FrameError):
                wire.decode(frame[:cut])


def test_overlong_blob_rejected():
    with pytest.raises(FrameError):
        wire.ConfirmMsg(b"x" * 70000).to_frame()


def test_scan_for_secrets_finds_verbatim_keys(rng):
    key = B.random_bits(rng, 256)
    other = B.random_bits(rng, 256)
    frames = [wire.RelayMsg(key, 0, "c", b"").to_frame(), wire.AbortMsg("x").to_frame()]
    assert wire.scan_for_secrets(frames, [other, key]) == [1]


def test_scan_for_secrets_skips_short_secrets():
    frames = [b"\x00\x00\x00\x00\x00\x00"]
    assert wire.scan_for_secrets(frames, [B.from_int(0, 16)]) == []
    assert wire.scan_for_secrets(frames, [B.from_int(0, 32)]) == [0]
