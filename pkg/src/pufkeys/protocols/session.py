"""Protocol identifiers, outcomes and per-session transcripts."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from ..errors import ParameterError


class Protocol(enum.Enum):
    P2P_ESTABLISH = "P2PEstablish"
    KDC_ESTABLISH = "KdcEstablish"
    RELAY = "Relay"
    ENTITY_AUTH = "EntityAuth"
    QKD_SESSION = "QkdSession"
    DATA = "Data"


class OutcomeKind(enum.Enum):
    ESTABLISHED = "Established"
    AUTHENTICATED = "Authenticated"
    DELIVERED = "Delivered"
    # a party whose part finished without a verdict of its own (e.g. the prover)
    COMPLETED = "Completed"
    REJECTED = "Rejected"
    ABORTED = "Aborted"

    @property
    def failed(self) -> bool:
        return self in (OutcomeKind.REJECTED, OutcomeKind.ABORTED)


@dataclass(frozen=True)
class Outcome:
    kind: OutcomeKind
    reason: str | None = None

    def __str__(self):
        return f"{self.kind.value}({self.reason})" if self.reason else self.kind.value

    @classmethod
    def aborted(cls, reason: str) -> "Outcome":
        return cls(OutcomeKind.ABORTED, reason)


@dataclass(frozen=True)
class TranscriptEntry:
    tick: int
    src: str
    dst: str
    frame: bytes


@dataclass
class SessionTranscript:
    session_id: str
    protocol: Protocol
    messages: list[TranscriptEntry] = field(default_factory=list)
    _outcome: Outcome | None = None

    @property
    def outcome(self) -> Outcome | None:
        return self._outcome

    @outcome.setter
    def outcome(self, value: Outcome) -> None:
        if self._outcome is not None:
            raise ParameterError(f"session {self.session_id} outcome already set to {self._outcome}")
        self._outcome = value

    def record(self, tick: int, src: str, dst: str, frame: bytes) -> None:
        self.messages.append(TranscriptEntry(tick, src, dst, frame))

    @property
    def frames(self) -> list[bytes]:
        return [m.frame for m in self.messages]


def combine_outcomes(outcomes: list[Outcome]) -> Outcome:
    """Session verdict from the parties' individual outcomes, in finishing order.

    The first failure wins; otherwise the most specific success is reported.
    """
    for outcome in outcomes:
        if outcome.kind.failed:
            return outcome
    for kind in (OutcomeKind.AUTHENTICATED, OutcomeKind.ESTABLISHED, OutcomeKind.DELIVERED):
        if any(o.kind is kind for o in outcomes):
            return Outcome(kind)
    return Outcome(OutcomeKind.COMPLETED)
