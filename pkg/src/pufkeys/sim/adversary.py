"""Adversary models that sit on simulated channels.

Adversaries only see what crosses a channel, plus whatever the scenario
grants them explicitly (a set of challenge values, a database snapshot,
a stolen token). They act through an ``AdversaryView`` and never get a
handle on the simulator itself.
"""

from __future__ import annotations

import enum

import numpy as np

from .. import bits as B
from ..errors import FrameError, ParameterError
from ..protocols import wire
from ..protocols.parties import verify_hash
from ..puf import Challenge
from .engine import AdversaryView, Packet


class AdversaryKind(enum.Enum):
    PASSIVE = "passive"
    MITM = "mitm"
    CHALLENGE_TAMPER = "challenge_tamper"
    REPLAY = "replay"
    REQUEST_FLOOD = "request_flood"
    DB_COMPROMISE = "db_compromise"


class Adversary:
    kind: AdversaryKind = AdversaryKind.PASSIVE

    def __init__(self, targets: tuple[str, str] | None = None, seed: int = 0):
        # None means every channel is watched
        self.targets = frozenset(targets) if targets else None
        self.rng = np.random.default_rng(seed)
        self.view: AdversaryView | None = None
        self.observed: list[Packet] = []

    def bind(self, view: AdversaryView) -> None:
        self.view = view

    def watches(self, a: str, b: str) -> bool:
        return self.targets is None or frozenset((a, b)) == self.targets

    def splices(self, actor: str, peer: str) -> bool:
        return False

    def record_quantum(self, session: str, actor: str, peer: str, bits: B.Bits) -> None:
        pass

    def intercept(self, packet: Packet) -> list[Packet]:
        self.observed.append(packet)
        return [packet]

    def act(self, action: str, **params) -> None:
        raise ParameterError(f"{self.kind.value} adversary has no action {action!r}")

    def report(self) -> dict:
        return {"kind": self.kind.value, "observed": len(self.observed)}


class Passive(Adversary):
    kind = AdversaryKind.PASSIVE


def _forge_tag(original: bytes, rng: np.random.Generator) -> bytes:
    """Same pad index, uniformly guessed value."""
    if not original:
        return original
    return original[:1] + rng.bytes(len(original) - 1)


class MitM(Adversary):
    """Splices the link between two users and impersonates each to the other.

    ``attacks`` selects what is touched: ``qkd`` (splice the quantum link
    and rewrite post-processing), ``data`` (decrypt and re-encrypt),
    ``establish`` (answer key confirmations with guessed tags).
    """

    kind = AdversaryKind.MITM

    def __init__(self, targets: tuple[str, str], attacks=("establish", "qkd", "data"), seed: int = 0):
        super().__init__(targets, seed)
        self.attacks = frozenset(attacks)
        unknown = self.attacks - {"establish", "qkd", "data"}
        if unknown:
            raise ParameterError(f"unknown MitM attacks {sorted(unknown)}")
        self.quantum: dict[tuple[str, str], B.Bits] = {}
        self.decrypted: list[bytes] = []
        self.forged_tags = 0

    def splices(self, actor, peer):
        return "qkd" in self.attacks and self.watches(actor, peer)

    def record_quantum(self, session, actor, peer, bits):
        self.quantum[(session, actor)] = bits

    def _key_with(self, session: str, actor: str, n: int) -> B.Bits:
        # the adversary ran the quantum exchange with each side itself
        if (session, actor) not in self.quantum:
            self.quantum[(session, actor)] = self.view.spliced_bits(session, actor, n)
        return self.quantum[(session, actor)]

    def intercept(self, packet):
        self.observed.append(packet)
        try:
            msg = wire.decode(packet.frame)
        except FrameError:
            return [packet]
        if isinstance(msg, wire.QkdPpMsg) and "qkd" in self.attacks:
            key = self._key_with(packet.session, packet.dst, self.view.fresh_bits)
            forged = wire.QkdPpMsg(
                msg.verify_seed, verify_hash(msg.verify_seed, key), msg.key_offset, _forge_tag(msg.tag, self.rng)
            )
            self.forged_tags += bool(msg.tag)
            return [Packet(packet.src, packet.dst, packet.session, forged.to_frame())]
        if isinstance(msg, wire.DataMsg) and "data" in self.attacks:
            return [self._reencrypt(packet, msg)]
        if isinstance(msg, wire.ConfirmMsg) and "establish" in self.attacks:
            self.forged_tags += 1
            forged = wire.ConfirmMsg(_forge_tag(msg.tag, self.rng))
            return [Packet(packet.src, packet.dst, packet.session, forged.to_frame())]
        return [packet]

    def _reencrypt(self, packet: Packet, msg: wire.DataMsg) -> Packet:
        n = 8 * len(msg.ciphertext)
        fresh = self.view.fresh_bits
        if (msg.segment, packet.src) not in self.quantum or msg.offset + n > fresh:
            return packet
        inbound = self._key_with(msg.segment, packet.src, fresh)[msg.offset:msg.offset + n]
        outbound = self._key_with(msg.segment, packet.dst, fresh)[msg.offset:msg.offset + n]
        plaintext = bytes(a ^ b for a, b in zip(msg.ciphertext, B.to_bytes(inbound)))
        self.decrypted.append(plaintext)
        self.view.note("decrypt", packet.session, f"{len(plaintext)} bytes")
        ciphertext = bytes(a ^ b for a, b in zip(plaintext, B.to_bytes(outbound)))
        forged = wire.DataMsg(msg.segment, msg.offset, ciphertext)
        return Packet(packet.src, packet.dst, packet.session, forged.to_frame())

    def report(self):
        return {**super().report(), "forged_tags": self.forged_tags, "decrypted": len(self.decrypted)}


class ChallengeTamper(Adversary):
    """Replaces challenges in flight with other enrolled challenge values.

    ``known_challenges`` is an explicit grant: challenge values are not
    secret, but the adversary has to learn them somewhere.
    """

    kind = AdversaryKind.CHALLENGE_TAMPER

    def __init__(self, known_challenges: list[Challenge], targets=None, seed: int = 0):
        super().__init__(targets, seed)
        self.known = list(known_challenges)
        self.substituted = 0

    def intercept(self, packet):
        self.observed.append(packet)
        try:
            msg = wire.decode(packet.frame)
        except FrameError:
            return [packet]
        if not isinstance(msg, (wire.ChallengeMsg, wire.ChallengeAuthMsg)):
            return [packet]
        options = [c for c in self.known if c != msg.challenge]
        if not options:
            return [packet]
        swap = options[int(self.rng.integers(len(options)))]
        self.known.remove(swap)
        self.substituted += 1
        if isinstance(msg, wire.ChallengeAuthMsg):
            forged = wire.ChallengeAuthMsg(swap, msg.comp_tag)
        else:
            forged = wire.ChallengeMsg(swap)
        return [Packet(packet.src, packet.dst, packet.session, forged.to_frame())]

    def report(self):
        return {**super().report(), "substituted": self.substituted}


class Replay(Adversary):
    """Records challenge frames and plays them back, each in a fresh session."""

    kind = AdversaryKind.REPLAY
    RECORDED = (wire.FrameType.CHALLENGE, wire.FrameType.CHALLENGE_AUTH)

    def __init__(self, targets=None, seed: int = 0):
        super().__init__(targets, seed)
        self.recorded: list[Packet] = []
        self.replayed = 0

    def intercept(self, packet):
        self.observed.append(packet)
        try:
            kind = wire.frame_type(packet.frame)
        except FrameError:
            return [packet]
        if kind in self.RECORDED:
            self.recorded.append(packet)
        return [packet]

    def act(self, action, **params):
        if action != "replay":
            super().act(action, **params)
        for packet in list(self.recorded):
            self.view.inject(Packet(packet.src, packet.dst, self.view.new_session_id(), packet.frame))
            self.replayed += 1

    def report(self):
        return {**super().report(), "recorded": len(self.recorded), "replayed": self.replayed}


class RequestFlood(Adversary):
    """Forges REQ_CONNECT frames in another user's name to drain the KDC's pools."""

    kind = AdversaryKind.REQUEST_FLOOD

    def __init__(self, targets=None, seed: int = 0):
        super().__init__(targets, seed)
        self.sent = 0

    def act(self, action, requester: str = "", manager: str = "kdc", target: str = "", count: int = 1, key_bits: int = 256, **params):
        if action != "flood":
            super().act(action, **params)
        for i in range(count):
            # offsets walk the requester's pool so some of them hit unspent bits
            msg = wire.ReqConnectMsg(target, i * key_bits, self.rng.bytes(8))
            self.view.inject(Packet(requester, manager, self.view.new_session_id(), msg.to_frame()))
            self.sent += 1

    def report(self):
        return {**super().report(), "forged_requests": self.sent}


class DbCompromise(Adversary):
    """Holds read-only database snapshots and, optionally, stolen tokens."""

    kind = AdversaryKind.DB_COMPROMISE

    def __init__(self, snapshots=(), stolen_tokens=None, stolen_helpers=None, seed: int = 0):
        super().__init__(None, seed)
        self.snapshots = list(snapshots)
        self.stolen_tokens = dict(stolen_tokens or {})
        self.stolen_helpers = dict(stolen_helpers or {})

    def report(self):
        return {
            **super().report(),
            "snapshots": len(self.snapshots),
            "stolen_tokens": sorted(self.stolen_tokens),
        }
