"""Wegman-Carter message authentication over GF(2^w).

The hash is polynomial evaluation: message blocks (plus a trailing length
block) are the coefficients, the hash key is the evaluation point. The hash
value is then masked with a fresh one-time pad, so a key holding ``l`` pads
authenticates ``l`` messages, each with forgery probability at most
``m / 2^w`` for messages of ``m`` blocks.

``w = 64`` is the operational width; ``w = 8`` exists so the bound can be
checked exhaustively.
"""

from __future__ import annotations

import functools
import hashlib
import hmac
from dataclasses import dataclass, field

import numpy as np

from . import bits as B
from .errors import KeyExhausted, ParameterError, UnknownPadIndex


class GF2Field:
    """GF(2^w) with elements as ints and a fixed reduction polynomial."""

    def __init__(self, width: int, modulus: int):
        if modulus >> width != 1:
            raise ParameterError("reduction polynomial must have degree w")
        self.width = width
        self.modulus = modulus
        self.order = 1 << width
        # toy widths get a full product table
        self._table = self._build_table() if width <= 8 else None

    def _build_table(self) -> list[list[int]]:
        return [[self._shift_mul(a, b) for b in range(self.order)] for a in range(self.order)]

    def mul(self, a: int, b: int) -> int:
        if self._table is not None:
            return self._table[a][b]
        return self._shift_mul(a, b)

    def _shift_mul(self, a: int, b: int) -> int:
        result = 0
        top = self.width
        while b:
            if b & 1:
                result ^= a
            b >>= 1
            a <<= 1
            if a >> top:
                a ^= self.modulus
        return result

    @functools.lru_cache(maxsize=64)
    def byte_tables(self, factor: int) -> tuple[list[int], ...]:
        """Tables ``t[i][b] = factor * (b << 8i)``: a fixed factor costs one lookup per byte."""
        tables = []
        base = factor
        for _ in range((self.width + 7) // 8):
            table = [0] * 256
            power = base
            for j in range(8):
                table[1 << j] = power
                power = self._shift_mul(power, 2)
            for b in range(3, 256):
                if b & (b - 1):
                    table[b] = table[b & (b - 1)] ^ table[b & -b]
            tables.append(table)
            base = power
        return tuple(tables)

    def __repr__(self):
        return f"GF2Field(2^{self.width}, {self.modulus:#x})"


GF8 = GF2Field(8, 0x11B)                 # x^8 + x^4 + x^3 + x + 1
GF64 = GF2Field(64, (1 << 64) | 0x1B)    # x^64 + x^4 + x^3 + x + 1
FIELDS = {8: GF8, 64: GF64}


def field_for(w: int) -> GF2Field:
    try:
        return FIELDS[w]
    except KeyError:
        raise ParameterError(f"unsupported field width {w}; choose one of {sorted(FIELDS)}") from None


def encode_message(msg: bytes, w: int) -> list[int]:
    """Split ``msg`` into w-bit blocks, zero-padding the last, then append its byte length."""
    step = w // 8
    if len(msg) >> w:
        raise ParameterError(f"message of {len(msg)} bytes too long for w={w}")
    blocks = [
        int.from_bytes(msg[i:i + step].ljust(step, b"\0"), "big")
        for i in range(0, len(msg), step)
    ]
    blocks.append(len(msg))
    return blocks


def block_count(msg_len: int, w: int) -> int:
    step = w // 8
    return -(-msg_len // step) + 1


def epsilon(w: int, m: int) -> float:
    """Forgery bound for messages of ``m`` blocks (length block included)."""
    return m / (1 << w)


def poly_hash(hash_key: int, blocks: list[int], field: GF2Field = GF64) -> int:
    """``sum(b_i * k^(m - i + 1))`` for blocks ``b_1..b_m``.

    There is no constant term: otherwise two messages whose encodings differ
    only in the last block would differ by a key-independent offset.
    """
    acc = 0
    if field.width <= 8:
        for block in blocks:
            acc = field.mul(acc ^ block, hash_key)
        return acc
    tables = field.byte_tables(hash_key)
    for block in blocks:
        acc ^= block
        product = 0
        for table in tables:
            product ^= table[acc & 0xFF]
            acc >>= 8
        acc = product
    return acc


def key_material_bits(w: int, l: int) -> int:
    return (1 + l) * w


@dataclass(frozen=True)
class Tag:
    value: int
    pad_index: int

    def to_bytes(self, w: int) -> bytes:
        return bytes([self.pad_index]) + self.value.to_bytes(w // 8, "big")

    @classmethod
    def from_bytes(cls, data: bytes, w: int) -> "Tag":
        if len(data) != 1 + w // 8:
            raise ParameterError(f"tag encoding must be {1 + w // 8} bytes, got {len(data)}")
        return cls(int.from_bytes(data[1:], "big"), data[0])


@dataclass
class ItsMacKey:
    w: int
    hash_key: int = field(repr=False)
    otp_pads: list[int] = field(repr=False)
    next_pad: int = 0
    # pad index -> digest of the message it authenticated
    used: dict[int, bytes] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.field = field_for(self.w)
        if len(self.otp_pads) > 256:
            raise ParameterError("at most 256 pads fit the one-byte pad index")

    @property
    def l(self) -> int:
        return len(self.otp_pads)

    @property
    def uses_remaining(self) -> int:
        return self.l - self.next_pad

    @classmethod
    def from_bits(cls, key_bits: B.Bits, w: int, l: int) -> "ItsMacKey":
        """Derive a key from exactly ``(1 + l) * w`` secret bits: hash key first, then pads."""
        need = key_material_bits(w, l)
        if key_bits.size != need:
            raise ParameterError(f"an {l}-pad key at w={w} needs {need} bits, got {key_bits.size}")
        words = key_bits.reshape(1 + l, w)
        values = [B.to_int(row) for row in words]
        return cls(w, values[0], values[1:])

    def clone(self) -> "ItsMacKey":
        return ItsMacKey(self.w, self.hash_key, list(self.otp_pads))


def _digest(msg: bytes) -> bytes:
    return hashlib.sha256(msg).digest()


def mac_tag(key: ItsMacKey, msg: bytes) -> Tag:
    if key.uses_remaining < 1:
        raise KeyExhausted(f"all {key.l} pads of this key are spent")
    index = key.next_pad
    value = poly_hash(key.hash_key, encode_message(msg, key.w), key.field) ^ key.otp_pads[index]
    key.next_pad += 1
    key.used[index] = _digest(msg)
    return Tag(value, index)


def mac_verify(key: ItsMacKey, msg: bytes, tag: Tag) -> bool:
    if not 0 <= tag.pad_index < key.l:
        raise UnknownPadIndex(f"pad index {tag.pad_index} outside 0..{key.l - 1}")
    if not 0 <= tag.value < key.field.order:
        return False
    expected = poly_hash(key.hash_key, encode_message(msg, key.w), key.field) ^ key.otp_pads[tag.pad_index]
    width = key.w // 8
    # compare_digest runs in time independent of where the bytes differ
    return hmac.compare_digest(expected.to_bytes(width, "big"), tag.value.to_bytes(width, "big"))


COMP_TAG_BYTES = 8


def comp_mac(key: bytes, msg: bytes) -> bytes:
    """Computationally secure keyed tag for DoS filtering; not an ITS MAC."""
    return B.prf(key, b"comp-mac|" + msg, COMP_TAG_BYTES)


def comp_verify(key: bytes, msg: bytes, tag: bytes) -> bool:
    return hmac.compare_digest(comp_mac(key, msg), tag)


def hash_table(w: int, msgs: list[bytes]) -> np.ndarray:
    """``table[i, k]`` = poly_hash of ``msgs[i]`` at every hash key ``k`` (toy widths only)."""
    gf = field_for(w)
    if w > 16:
        raise ParameterError("exhaustive tables are limited to w <= 16")
    return np.array(
        [[poly_hash(k, encode_message(m, w), gf) for k in range(gf.order)] for m in msgs],
        dtype=np.int64,
    )
