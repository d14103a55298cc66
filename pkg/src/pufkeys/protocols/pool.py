"""Shared-secret key pools with single-use bit accounting."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .. import bits as B
from ..errors import KeyReuse, PoolDepleted


class Provenance(enum.Enum):
    PUF_DERIVED = "puf"
    QKD_GENERATED = "qkd"
    RELAYED = "relay"


@dataclass(frozen=True)
class Segment:
    offset: int
    length: int
    provenance: Provenance
    label: str


# listener(event, pool, offset, nbits, note)
PoolListener = Callable[[str, "KeyPool", int, int, str], None]


class KeyPool:
    """Secret bits shared by ``owner`` with ``peer``.

    Bits are addressed by absolute offset. Every bit is dispensed at most
    once: ``withdraw`` takes the lowest unspent contiguous run, ``take``
    claims a specific range announced by the peer.
    """

    def __init__(self, owner: str, peer: str, listener: PoolListener | None = None):
        self.owner = owner
        self.peer = peer
        self.listener = listener
        self._bits = np.zeros(0, dtype=np.uint8)
        self._spent = np.zeros(0, dtype=bool)
        self.segments: list[Segment] = []

    def __repr__(self):
        return f"KeyPool({self.owner}->{self.peer}, size={self.size}, available={self.available_bits})"

    @property
    def size(self) -> int:
        return int(self._bits.size)

    @property
    def consumed_bits(self) -> int:
        return int(self._spent.sum())

    @property
    def available_bits(self) -> int:
        return self.size - self.consumed_bits

    def _notify(self, event: str, offset: int, n: int, note: str) -> None:
        if self.listener:
            self.listener(event, self, offset, n, note)

    def deposit(self, bits: B.Bits, provenance: Provenance, label: str) -> int:
        offset = self.size
        self._bits = np.concatenate([self._bits, bits.astype(np.uint8)])
        self._spent = np.concatenate([self._spent, np.zeros(bits.size, dtype=bool)])
        self.segments.append(Segment(offset, int(bits.size), provenance, label))
        self._notify("deposit", offset, int(bits.size), f"{provenance.value}:{label}")
        return offset

    def _next_run(self, n: int) -> int | None:
        free = ~self._spent
        start = 0
        while start + n <= self.size:
            if free[start:start + n].all():
                return start
            # skip past the last spent bit in the window
            start += int(np.flatnonzero(~free[start:start + n])[-1]) + 1
        return None

    def withdraw(self, n: int, purpose: str = "") -> tuple[int, B.Bits]:
        offset = self._next_run(n)
        if offset is None:
            raise PoolDepleted(
                f"pool {self.owner}->{self.peer} has no {n} contiguous unspent bits "
                f"({self.available_bits} available)"
            )
        return offset, self._claim(offset, n, purpose)

    def withdraw_within(self, segment: Segment, n: int, purpose: str = "") -> tuple[int, B.Bits]:
        """Like ``withdraw`` but restricted to one segment."""
        end = segment.offset + segment.length
        start = segment.offset
        while start + n <= end:
            window = self._spent[start:start + n]
            if not window.any():
                return start, self._claim(start, n, purpose)
            start += int(np.flatnonzero(window)[-1]) + 1
        raise PoolDepleted(f"segment {segment.label} has no {n} contiguous unspent bits")

    def take(self, offset: int, n: int, purpose: str = "") -> B.Bits:
        if offset < 0 or offset + n > self.size:
            raise PoolDepleted(f"pool {self.owner}->{self.peer} has no bits at [{offset}, {offset + n})")
        if self._spent[offset:offset + n].any():
            raise KeyReuse(f"pool {self.owner}->{self.peer} bits at [{offset}, {offset + n}) already spent")
        return self._claim(offset, n, purpose)

    def _claim(self, offset: int, n: int, purpose: str) -> B.Bits:
        self._spent[offset:offset + n] = True
        self._notify("withdraw", offset, n, purpose)
        return self._bits[offset:offset + n].copy()

    def segment(self, label: str, provenance: Provenance | None = None) -> Segment:
        for seg in reversed(self.segments):
            if seg.label == label and (provenance is None or seg.provenance is provenance):
                return seg
        raise KeyError(f"no segment {label!r} in pool {self.owner}->{self.peer}")

    def latest(self, provenance: Provenance) -> Segment | None:
        return next((s for s in reversed(self.segments) if s.provenance is provenance), None)

    def peek(self, offset: int, n: int) -> B.Bits:
        """Read bits without spending them (tests and audits only)."""
        return self._bits[offset:offset + n].copy()
