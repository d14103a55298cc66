"""Bit-string helpers.

Bit strings are 1-d ``numpy.uint8`` arrays holding 0/1 values, most
significant bit first. Hex renderings use ``ceil(n / 4)`` lowercase digits
of the big-endian integer value, so lengths that are not a multiple of 8
round-trip exactly when the length is known.
"""

from __future__ import annotations

import hashlib

import numpy as np

Bits = np.ndarray


def as_bits(values) -> Bits:
    arr = np.asarray(values, dtype=np.uint8)
    if arr.ndim != 1:
        raise ValueError("bit strings are one-dimensional")
    if arr.size and arr.max() > 1:
        raise ValueError("bit strings hold only 0 and 1")
    return arr


def random_bits(rng: np.random.Generator, n: int) -> Bits:
    return rng.integers(0, 2, size=n, dtype=np.uint8)


def xor(a: Bits, b: Bits) -> Bits:
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    return np.bitwise_xor(a, b)


def from_bytes(data: bytes, n: int | None = None) -> Bits:
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8))
    return bits if n is None else bits[:n]


def to_bytes(bits: Bits) -> bytes:
    """Pack MSB-first, zero-padding the final byte on the right."""
    return np.packbits(bits).tobytes()


def to_int(bits: Bits) -> int:
    if bits.size == 0:
        return 0
    return int.from_bytes(to_bytes(bits), "big") >> ((-bits.size) % 8)


def from_int(value: int, n: int) -> Bits:
    if value < 0 or value >> n:
        raise ValueError(f"{value} does not fit in {n} bits")
    nbytes = (n + 7) // 8
    padded = value << ((-n) % 8)
    return from_bytes(padded.to_bytes(nbytes, "big"), n)


def hex_width(n: int) -> int:
    return (n + 3) // 4


def to_hex(bits: Bits) -> str:
    return format(to_int(bits), f"0{hex_width(bits.size)}x")


def from_hex(text: str, n: int) -> Bits:
    if len(text) != hex_width(n) or text != text.lower():
        raise ValueError(f"expected {hex_width(n)} lowercase hex digits, got {text!r}")
    return from_int(int(text, 16), n)


def hamming_fraction(a: Bits, b: Bits) -> float:
    return float(np.count_nonzero(xor(a, b))) / a.size


def prf(key: bytes, data: bytes, nbytes: int) -> bytes:
    """Keyed pseudo-random function with arbitrary output length.

    SHAKE-256 over a length-prefixed key followed by the input.
    """
    h = hashlib.shake_256()
    h.update(len(key).to_bytes(2, "big"))
    h.update(key)
    h.update(data)
    return h.digest(nbytes)
