"""Framed, type-tagged protocol messages.

Frame layout: ``type (1 byte) || length (4 bytes, big-endian) || payload``.
Payload fields are fixed-width big-endian integers or u16-length-prefixed
byte strings; bit strings carry their bit count.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass

from .. import bits as B
from ..errors import FrameError
from ..puf import Challenge


class FrameType(enum.IntEnum):
    CHALLENGE = 0x01
    CHALLENGE_AUTH = 0x02
    CONFIRM = 0x03
    RELAY = 0x04
    AUTH_INIT = 0x05
    AUTH_TAG = 0x06
    REQ_CONNECT = 0x07
    # not part of the core message set, used by the simulator
    ABORT = 0x08
    QKD_PP = 0x09
    DATA = 0x0A


HEADER = struct.Struct(">BI")
MAX_PAYLOAD = 1 << 20


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise FrameError("payload truncated")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def uint(self, width: int) -> int:
        return int.from_bytes(self.take(width), "big")

    def blob(self) -> bytes:
        return self.take(self.uint(2))

    def text(self) -> str:
        try:
            return self.blob().decode()
        except UnicodeDecodeError:
            raise FrameError("invalid utf-8 string") from None

    def bits(self) -> B.Bits:
        n = self.uint(2)
        return B.from_bytes(self.take((n + 7) // 8), n)

    def challenge(self) -> Challenge:
        nbits = self.uint(2)
        if nbits == 0:
            raise FrameError("zero-length challenge")
        value = self.uint((nbits + 7) // 8)
        try:
            return Challenge(value, nbits)
        except ValueError as exc:
            raise FrameError(str(exc)) from None

    def done(self) -> None:
        if self.pos != len(self.data):
            raise FrameError(f"{len(self.data) - self.pos} trailing bytes")


def _blob(data: bytes) -> bytes:
    if len(data) > 0xFFFF:
        raise FrameError("field too long")
    return len(data).to_bytes(2, "big") + data


def _text(s: str) -> bytes:
    return _blob(s.encode())


def _bits(bits: B.Bits) -> bytes:
    return int(bits.size).to_bytes(2, "big") + B.to_bytes(bits)


class Message:
    TYPE: FrameType

    def payload(self) -> bytes:
        raise NotImplementedError

    @classmethod
    def parse(cls, r: _Reader) -> "Message":
        raise NotImplementedError

    def to_frame(self) -> bytes:
        body = self.payload()
        return HEADER.pack(self.TYPE, len(body)) + body


@dataclass(frozen=True)
class ChallengeMsg(Message):
    TYPE = FrameType.CHALLENGE
    challenge: Challenge

    def payload(self):
        return self.challenge.to_bytes()

    @classmethod
    def parse(cls, r):
        return cls(r.challenge())


@dataclass(frozen=True)
class ChallengeAuthMsg(Message):
    TYPE = FrameType.CHALLENGE_AUTH
    challenge: Challenge
    comp_tag: bytes

    def payload(self):
        return self.challenge.to_bytes() + _blob(self.comp_tag)

    @classmethod
    def parse(cls, r):
        return cls(r.challenge(), r.blob())


@dataclass(frozen=True)
class ConfirmMsg(Message):
    TYPE = FrameType.CONFIRM
    tag: bytes

    def payload(self):
        return _blob(self.tag)

    @classmethod
    def parse(cls, r):
        return cls(r.blob())


@dataclass(frozen=True, eq=False)
class RelayMsg(Message):
    TYPE = FrameType.RELAY
    masked_key: B.Bits
    key_offset: int
    requester: str
    tag: bytes

    def payload(self):
        return _bits(self.masked_key) + self.key_offset.to_bytes(4, "big") + _text(self.requester) + _blob(self.tag)

    @classmethod
    def parse(cls, r):
        return cls(r.bits(), r.uint(4), r.text(), r.blob())


@dataclass(frozen=True, eq=False)
class AuthInitMsg(Message):
    TYPE = FrameType.AUTH_INIT
    challenge: Challenge | None
    s: B.Bits
    key_offset: int | None = None

    def payload(self):
        out = bytearray()
        out += b"\x01" + self.challenge.to_bytes() if self.challenge else b"\x00"
        out += _bits(self.s)
        out += b"\x00" if self.key_offset is None else b"\x01" + self.key_offset.to_bytes(4, "big")
        return bytes(out)

    @classmethod
    def parse(cls, r):
        challenge = r.challenge() if r.uint(1) else None
        s = r.bits()
        offset = r.uint(4) if r.uint(1) else None
        return cls(challenge, s, offset)


@dataclass(frozen=True)
class AuthTagMsg(Message):
    TYPE = FrameType.AUTH_TAG
    tag: bytes

    def payload(self):
        return _blob(self.tag)

    @classmethod
    def parse(cls, r):
        return cls(r.blob())


@dataclass(frozen=True)
class ReqConnectMsg(Message):
    TYPE = FrameType.REQ_CONNECT
    peer_id: str
    key_offset: int = 0
    comp_tag: bytes = b""

    def payload(self):
        return _text(self.peer_id) + self.key_offset.to_bytes(4, "big") + _blob(self.comp_tag)

    @classmethod
    def parse(cls, r):
        return cls(r.text(), r.uint(4), r.blob())


@dataclass(frozen=True)
class AbortMsg(Message):
    TYPE = FrameType.ABORT
    reason: str

    def payload(self):
        return _text(self.reason)

    @classmethod
    def parse(cls, r):
        return cls(r.text())


@dataclass(frozen=True)
class QkdPpMsg(Message):
    """Post-processing summary of an abstract QKD session (error-verification hash)."""

    TYPE = FrameType.QKD_PP
    verify_seed: int
    verify_hash: bytes
    key_offset: int = 0
    tag: bytes = b""

    def payload(self):
        return (
            self.verify_seed.to_bytes(8, "big") + _blob(self.verify_hash)
            + self.key_offset.to_bytes(4, "big") + _blob(self.tag)
        )

    @classmethod
    def parse(cls, r):
        return cls(r.uint(8), r.blob(), r.uint(4), r.blob())


@dataclass(frozen=True)
class DataMsg(Message):
    TYPE = FrameType.DATA
    segment: str
    offset: int
    ciphertext: bytes

    def payload(self):
        return _text(self.segment) + self.offset.to_bytes(4, "big") + _blob(self.ciphertext)

    @classmethod
    def parse(cls, r):
        return cls(r.text(), r.uint(4), r.blob())


MESSAGE_TYPES: dict[FrameType, type[Message]] = {
    cls.TYPE: cls
    for cls in (
        ChallengeMsg, ChallengeAuthMsg, ConfirmMsg, RelayMsg, AuthInitMsg,
        AuthTagMsg, ReqConnectMsg, AbortMsg, QkdPpMsg, DataMsg,
    )
}


def frame_type(frame: bytes) -> FrameType:
    if len(frame) < HEADER.size:
        raise FrameError("frame shorter than its header")
    try:
        return FrameType(frame[0])
    except ValueError:
        raise FrameError(f"unknown frame type {frame[0]:#04x}") from None


def decode(frame: bytes) -> Message:
    kind = frame_type(frame)
    _, length = HEADER.unpack_from(frame)
    if length > MAX_PAYLOAD or len(frame) != HEADER.size + length:
        raise FrameError(f"declared length {length} does not match frame of {len(frame)} bytes")
    reader = _Reader(frame[HEADER.size:])
    msg = MESSAGE_TYPES[kind].parse(reader)
    reader.done()
    return msg


def scan_for_secrets(frames: list[bytes], secrets: list[B.Bits], min_bytes: int = 4) -> list[int]:
    """Indices of ``secrets`` whose packed bytes occur verbatim in any frame.

    Only secrets of at least ``min_bytes`` bytes are checked, since short
    byte strings match by chance.
    """
    hits = []
    blob = b"\x00".join(frames)
    for i, secret in enumerate(secrets):
        packed = B.to_bytes(secret)
        if len(packed) >= min_bytes and packed in blob:
            hits.append(i)
    return hits

