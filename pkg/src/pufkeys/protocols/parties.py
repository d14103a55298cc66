"""Protocol parties as sans-IO state machines.

A party never touches the network. ``start`` and ``receive`` queue frames
in ``outbox``; the driver (the simulator, or the direct runner in
``api``) moves frames between parties and decides when time runs out.
Everything a party needs from its environment (randomness, PUF noise,
the quantum link, logging) comes through a ``PartyContext``.
"""

from __future__ import annotations

from typing import Protocol as TypingProtocol

import numpy as np

from .. import bits as B
from ..crpstore import consume_entry, draw_random_entry
from ..errors import (
    DatabaseDepleted,
    FrameError,
    KeyExhausted,
    KeyReuse,
    ParameterError,
    PoolDepleted,
    ReconciliationFailure,
    UnknownChallenge,
)
from ..mac import ItsMacKey, Tag, comp_mac, comp_verify, key_material_bits, mac_tag, mac_verify
from ..puf import Challenge, reproduce, toeplitz_hash
from . import wire
from .actors import Actor, ActorIdentity, ActorRole, AuthKeyState, auth_respond
from .params import ProtocolConfig
from .pool import Provenance
from .session import Outcome, OutcomeKind, Protocol

VERIFY_HASH_BITS = 64


class PartyContext(TypingProtocol):
    config: ProtocolConfig
    rng: np.random.Generator
    noise: np.random.Generator

    def emit(self, actor: str, event: str, session: str, detail: str) -> None: ...

    def quantum_bits(self, session: str, actor: str, peer: str, n: int) -> B.Bits: ...

    def identity(self, actor_id: str) -> ActorIdentity: ...


class Party:
    protocol: Protocol
    role: str = "party"

    def __init__(self, ctx: PartyContext, actor: Actor, peer: str, session_id: str):
        self.ctx = ctx
        self.actor = actor
        self.peer = peer
        self.session_id = session_id
        self.outbox: list[tuple[str, bytes]] = []
        self.outcome: Outcome | None = None
        self.result: dict = {}

    def __repr__(self):
        return f"{type(self).__name__}({self.actor.actor_id}<->{self.peer}, {self.session_id}, {self.outcome})"

    @property
    def cfg(self) -> ProtocolConfig:
        return self.ctx.config

    @property
    def done(self) -> bool:
        return self.outcome is not None

    def start(self) -> None:
        """Initiators override this; responders wait for their first frame."""

    def drain(self) -> list[tuple[str, bytes]]:
        out, self.outbox = self.outbox, []
        return out

    def log(self, event: str, detail: str = "") -> None:
        self.ctx.emit(self.actor.actor_id, event, self.session_id, detail)

    def send(self, msg: wire.Message, dst: str | None = None) -> None:
        self.outbox.append((dst or self.peer, msg.to_frame()))

    def finish(self, kind: OutcomeKind, reason: str | None = None) -> None:
        if self.outcome is None:
            self.outcome = Outcome(kind, reason)
            self.log("outcome", str(self.outcome))

    def abort(self, reason: str, notify: bool = True) -> None:
        if self.outcome is not None:
            return
        if notify:
            self.send(wire.AbortMsg(reason))
        self.finish(OutcomeKind.ABORTED, reason)

    def receive(self, src: str, frame: bytes) -> None:
        if self.done:
            return
        try:
            msg = wire.decode(frame)
        except FrameError as exc:
            self.log("malformed", str(exc))
            self.abort("Malformed")
            return
        if isinstance(msg, wire.AbortMsg):
            self.finish(OutcomeKind.ABORTED, f"PeerAbort:{msg.reason}")
            return
        self.handle(src, msg)

    def handle(self, src: str, msg: wire.Message) -> None:
        self.log("unexpected", type(msg).__name__)
        self.abort("Unexpected")

    def parse_tag(self, data: bytes, w: int) -> Tag | None:
        try:
            return Tag.from_bytes(data, w)
        except ParameterError:
            return None


# -- establishment ----------------------------------------------------------


def confirm_message(role: bytes, session_id: str, challenge: Challenge) -> bytes:
    return b"key-confirm|" + role + b"|" + session_id.encode() + b"|" + challenge.to_bytes()


def challenge_gate_message(session_id: str, challenge: Challenge) -> bytes:
    return b"challenge|" + session_id.encode() + b"|" + challenge.to_bytes()


def establishment_protocol(holder: ActorIdentity) -> Protocol:
    return Protocol.KDC_ESTABLISH if holder.role is ActorRole.KDC_MANAGER else Protocol.P2P_ESTABLISH


class _Establish(Party):
    """Shared tail of both establishment roles: confirmation and deposit."""

    def _confirm_key(self, key: B.Bits, own_pad: int) -> ItsMacKey:
        # pad 0 tags the responder's message, pad 1 the initiator's
        mac = ItsMacKey.from_bits(key[:self.cfg.confirm_bits], self.cfg.confirm_w, 2)
        mac.next_pad = own_pad
        return mac

    def _deposit(self, key: B.Bits) -> None:
        kept = key[self.cfg.confirm_bits:]
        offset = self.actor.pool(self.peer).deposit(kept, Provenance.PUF_DERIVED, self.session_id)
        self.result.update(key=key, deposited=kept, offset=offset)
        self.finish(OutcomeKind.ESTABLISHED)

    def _check_confirm(self, msg: wire.Message, role: bytes, pad: int) -> bool:
        if not isinstance(msg, wire.ConfirmMsg):
            return False
        tag = self.parse_tag(msg.tag, self.cfg.confirm_w)
        if tag is None or tag.pad_index != pad:
            return False
        return mac_verify(self.mac, confirm_message(role, self.session_id, self.challenge), tag)


class EstablishInitiator(_Establish):
    """Database holder: draws a challenge and recovers the responder's key."""

    role = "initiator"

    def __init__(self, ctx, actor, peer, session_id):
        super().__init__(ctx, actor, peer, session_id)
        self.protocol = establishment_protocol(actor.identity)

    def start(self) -> None:
        db = self.actor.databases.get(self.peer)
        if db is None:
            self.abort("NoDatabase", notify=False)
            return
        try:
            entry = draw_random_entry(db, self.ctx.rng)
        except DatabaseDepleted:
            self.log("depleted", db.db_id)
            self.abort("DatabaseDepleted", notify=False)
            return
        self.challenge = entry.challenge
        joint = consume_entry(db, entry.challenge)
        self.log("consume", f"{db.db_id} {entry.challenge.hex()}")
        try:
            token = self.actor.token(self.peer)
            helper = self.actor.helper_store(self.peer)[entry.challenge]
            own = reproduce(token, entry.challenge, helper, self.ctx.noise, self.cfg.extractor)
        except (ReconciliationFailure, UnknownChallenge) as exc:
            self.abort(type(exc).__name__, notify=False)
            return
        self.key = B.xor(joint, own.bits)

        comp_key = self.actor.comp_keys.get(self.peer)
        if self.cfg.gate_requests and comp_key is not None:
            gate = comp_mac(comp_key, challenge_gate_message(self.session_id, entry.challenge))
            self.send(wire.ChallengeAuthMsg(entry.challenge, gate))
        else:
            self.send(wire.ChallengeMsg(entry.challenge))

        if not self.cfg.its_auth:
            self._deposit(self.key)
            return
        self.mac = self._confirm_key(self.key, own_pad=1)

    def handle(self, src, msg):
        if not self._check_confirm(msg, b"R", 0):
            self.abort("KeyMismatch")
            return
        tag = mac_tag(self.mac, confirm_message(b"I", self.session_id, self.challenge))
        self.send(wire.ConfirmMsg(tag.to_bytes(self.cfg.confirm_w)))
        self._deposit(self.key)


class EstablishResponder(_Establish):
    """Token holder on the other side: reproduces its key for the received challenge."""

    role = "responder"

    def __init__(self, ctx, actor, peer, session_id):
        super().__init__(ctx, actor, peer, session_id)
        self.protocol = establishment_protocol(ctx.identity(peer))
        self.challenge: Challenge | None = None

    def handle(self, src, msg):
        if self.challenge is None:
            self._on_challenge(msg)
            return
        if not self._check_confirm(msg, b"I", 1):
            self.abort("KeyMismatch", notify=False)
            return
        self._deposit(self.key)

    def _on_challenge(self, msg: wire.Message) -> None:
        if not isinstance(msg, (wire.ChallengeMsg, wire.ChallengeAuthMsg)):
            self.abort("Unexpected")
            return
        comp_key = self.actor.comp_keys.get(self.peer)
        if self.cfg.gate_requests and comp_key is not None:
            gate_msg = challenge_gate_message(self.session_id, msg.challenge)
            if not isinstance(msg, wire.ChallengeAuthMsg) or not comp_verify(comp_key, gate_msg, msg.comp_tag):
                self.abort("ChallengeAuthFail", notify=False)
                return
        challenge = msg.challenge
        blacklist = self.actor.blacklist(self.peer)
        if challenge in blacklist:
            self.abort("Replay")
            return
        blacklist.add(challenge)
        self.log("blacklist", challenge.hex())
        self.challenge = challenge
        try:
            token = self.actor.token(self.peer)
            token.check_challenge(challenge)
            helper = self.actor.helper_store(self.peer)[challenge]
            own = reproduce(token, challenge, helper, self.ctx.noise, self.cfg.extractor)
        except UnknownChallenge:
            self.abort("UnknownChallenge")
            return
        except ReconciliationFailure:
            self.abort("ReconciliationFailure")
            return
        except ParameterError:
            self.abort("Malformed")
            return
        self.key = own.bits
        if not self.cfg.its_auth:
            self._deposit(self.key)
            return
        self.mac = self._confirm_key(self.key, own_pad=0)
        tag = mac_tag(self.mac, confirm_message(b"R", self.session_id, challenge))
        self.send(wire.ConfirmMsg(tag.to_bytes(self.cfg.confirm_w)))



# -- relay through the KDC -------------------------------------------------


def request_gate_message(session_id: str, requester: str, target: str, offset: int) -> bytes:
    return f"req-connect|{session_id}|{requester}|{target}|{offset}".encode()


def relay_message(session_id: str, requester: str, offset: int, masked: B.Bits) -> bytes:
    return f"relay|{session_id}|{requester}|{offset}|".encode() + B.to_bytes(masked)


class RelayRequester(Party):
    """Charlie: spends pool key k_MC and asks the manager to pass it on."""

    protocol = Protocol.RELAY
    role = "requester"

    def __init__(self, ctx, actor, peer, session_id, target: str):
        super().__init__(ctx, actor, peer, session_id)
        self.target = target

    def start(self) -> None:
        n = self.cfg.relay_key_bits
        try:
            offset, key = self.actor.pool(self.peer).withdraw(n, f"relay-key {self.session_id}")
        except PoolDepleted:
            self.abort("PoolDepleted", notify=False)
            return
        gate = b""
        comp_key = self.actor.comp_keys.get(self.peer)
        if self.cfg.gate_requests and comp_key is not None:
            gate = comp_mac(comp_key, request_gate_message(self.session_id, self.actor.actor_id, self.target, offset))
        self.send(wire.ReqConnectMsg(self.target, offset, gate))
        # nothing comes back to the requester; the key is shared once the target accepts
        self.actor.pool(self.target).deposit(key, Provenance.RELAYED, self.session_id)
        self.result.update(key=key)
        self.finish(OutcomeKind.COMPLETED)


class RelayManager(Party):
    """KDC: re-encrypts the requester's key under a key it shares with the target."""

    protocol = Protocol.RELAY
    role = "manager"

    def handle(self, src, msg):
        if not isinstance(msg, wire.ReqConnectMsg):
            self.abort("Unexpected")
            return
        requester, target = self.peer, msg.peer_id
        if self.cfg.gate_requests:
            comp_key = self.actor.comp_keys.get(requester)
            gate_msg = request_gate_message(self.session_id, requester, target, msg.key_offset)
            if comp_key is None or not comp_verify(comp_key, gate_msg, msg.comp_tag):
                # dropped silently: an unauthenticated request costs no key material
                self.abort("RequestAuthFail", notify=False)
                return
        if target == requester or target not in self.actor.pools and target not in self.actor.databases:
            self.abort("UnknownPeer", notify=False)
            return
        n = self.cfg.relay_key_bits
        try:
            k_mc = self.actor.pool(requester).take(msg.key_offset, n, f"relay-key {self.session_id}")
        except (PoolDepleted, KeyReuse) as exc:
            self.abort(type(exc).__name__, notify=False)
            return
        try:
            offset, material = self.actor.pool(target).withdraw(n + self.cfg.relay_auth_bits, f"relay-mask {self.session_id}")
        except PoolDepleted:
            self.log("depleted", f"pool {target}")
            self.abort("PoolDepleted", notify=False)
            return
        k_ma, kappa = material[:n], material[n:]
        masked = B.xor(k_mc, k_ma)
        mac = ItsMacKey.from_bits(kappa, self.cfg.relay_w, 1)
        tag = mac_tag(mac, relay_message(self.session_id, requester, offset, masked))
        self.send(wire.RelayMsg(masked, offset, requester, tag.to_bytes(self.cfg.relay_w)), dst=target)
        self.finish(OutcomeKind.COMPLETED)


class RelayRecipient(Party):
    """Alice: unmasks k_MC with her own pool key after checking the manager's tag."""

    protocol = Protocol.RELAY
    role = "recipient"

    def handle(self, src, msg):
        if not isinstance(msg, wire.RelayMsg):
            self.abort("Unexpected")
            return
        n = int(msg.masked_key.size)
        if n != self.cfg.relay_key_bits:
            self.abort("Malformed")
            return
        try:
            material = self.actor.pool(self.peer).take(msg.key_offset, n + self.cfg.relay_auth_bits, f"relay-mask {self.session_id}")
        except (PoolDepleted, KeyReuse) as exc:
            self.abort(type(exc).__name__)
            return
        k_ma, kappa = material[:n], material[n:]
        mac = ItsMacKey.from_bits(kappa, self.cfg.relay_w, 1)
        tag = self.parse_tag(msg.tag, self.cfg.relay_w)
        message = relay_message(self.session_id, msg.requester, msg.key_offset, msg.masked_key)
        if tag is None or tag.pad_index != 0 or not mac_verify(mac, message, tag):
            self.abort("AuthFail")
            return
        key = B.xor(k_ma, msg.masked_key)
        self.actor.pool(msg.requester).deposit(key, Provenance.RELAYED, self.session_id)
        self.result.update(key=key, requester=msg.requester)
        self.finish(OutcomeKind.ESTABLISHED)


# -- entity authentication -------------------------------------------------


class AuthVerifier(Party):
    """Manager side: issues a nonce and checks the device's tag over ID || s."""

    protocol = Protocol.ENTITY_AUTH
    role = "verifier"

    def start(self) -> None:
        policy = self.cfg.entity
        material = key_material_bits(policy.w, 1 if policy.mode == "inline" else policy.l)
        challenge = None
        if policy.mode == "inline":
            db = self.actor.databases.get(self.peer)
            if db is None:
                self.abort("NoDatabase", notify=False)
                return
            try:
                entry = draw_random_entry(db, self.ctx.rng)
            except DatabaseDepleted:
                self.abort("DatabaseDepleted", notify=False)
                return
            joint = consume_entry(db, entry.challenge)
            self.log("consume", f"{db.db_id} {entry.challenge.hex()}")
            try:
                own = reproduce(
                    self.actor.token(self.peer), entry.challenge,
                    self.actor.helper_store(self.peer)[entry.challenge], self.ctx.noise, self.cfg.extractor,
                )
            except ReconciliationFailure:
                self.abort("ReconciliationFailure", notify=False)
                return
            device_key = B.xor(joint, own.bits)
            self.state = AuthKeyState(ItsMacKey.from_bits(device_key[:material], policy.w, 1), -1)
            challenge = entry.challenge
        else:
            state = self.actor.auth_states.get(self.peer)
            if state is None or (state.exhausted and policy.rotate):
                try:
                    offset, bits = self.actor.pool(self.peer).withdraw(material, f"auth-key {self.session_id}")
                except PoolDepleted:
                    self.abort("PoolDepleted", notify=False)
                    return
                state = AuthKeyState(ItsMacKey.from_bits(bits, policy.w, policy.l), offset)
                self.actor.auth_states[self.peer] = state
            self.state = state
        try:
            self.s = self.state.issue(self.ctx.rng, policy.s_bits)
        except KeyExhausted:
            self.abort("KeyExhausted", notify=False)
            return
        offset = None if policy.mode == "inline" else self.state.key_offset
        self.send(wire.AuthInitMsg(challenge, self.s, offset))

    def handle(self, src, msg):
        if not isinstance(msg, wire.AuthTagMsg):
            self.abort("Unexpected")
            return
        tag = self.parse_tag(msg.tag, self.cfg.entity.w)
        id_string = self.ctx.identity(self.peer).id_string
        verdict = "TagMismatch" if tag is None else self.state.check(
            id_string, self.s, tag, self.cfg.entity.track_replays
        )
        if verdict:
            self.finish(OutcomeKind.REJECTED, verdict)
        else:
            self.finish(OutcomeKind.AUTHENTICATED)


class AuthProver(Party):
    """Device side: answers the nonce with a tag under the shared key."""

    protocol = Protocol.ENTITY_AUTH
    role = "prover"

    def handle(self, src, msg):
        if not isinstance(msg, wire.AuthInitMsg):
            self.abort("Unexpected")
            return
        policy = self.cfg.entity
        if msg.challenge is not None:
            try:
                own = reproduce(
                    self.actor.token(self.peer), msg.challenge,
                    self.actor.helper_store(self.peer)[msg.challenge], self.ctx.noise,
                    self.cfg.extractor,
                    # counterfeit hardware cannot pass the checksum and answers regardless
                    verify=not self.actor.counterfeit,
                )
            except (ReconciliationFailure, UnknownChallenge, ParameterError) as exc:
                self.abort(type(exc).__name__)
                return
            key = ItsMacKey.from_bits(own.bits[:key_material_bits(policy.w, 1)], policy.w, 1)
        else:
            state = self.actor.auth_states.get(self.peer)
            if state is None or state.key_offset != msg.key_offset:
                try:
                    bits = self.actor.pool(self.peer).take(
                        msg.key_offset or 0, key_material_bits(policy.w, policy.l), f"auth-key {self.session_id}"
                    )
                except (PoolDepleted, KeyReuse) as exc:
                    self.abort(type(exc).__name__)
                    return
                state = AuthKeyState(ItsMacKey.from_bits(bits, policy.w, policy.l), msg.key_offset)
                self.actor.auth_states[self.peer] = state
            key = state.key
        try:
            tag = auth_respond(key, self.actor.identity.id_string, msg.s)
        except KeyExhausted:
            self.abort("KeyExhausted")
            return
        self.send(wire.AuthTagMsg(tag.to_bytes(policy.w)))
        self.finish(OutcomeKind.COMPLETED)


# -- abstract QKD session --------------------------------------------------


def verify_hash(seed: int, key: B.Bits) -> bytes:
    """Error-verification hash of a sifted key under a public per-session seed."""
    return B.to_bytes(toeplitz_hash(seed, key, VERIFY_HASH_BITS))


def pp_message(role: bytes, session_id: str, seed: int, digest: bytes, offset: int) -> bytes:
    return b"qkd-pp|" + role + b"|" + f"{session_id}|{seed}|{offset}|".encode() + digest


class _Qkd(Party):
    protocol = Protocol.QKD_SESSION

    def _auth_key(self, bits: B.Bits) -> ItsMacKey:
        return ItsMacKey.from_bits(bits[:key_material_bits(self.cfg.qkd_w, self.cfg.qkd_pads)], self.cfg.qkd_w, self.cfg.qkd_pads)

    def _tag(self, role: bytes, seed: int, digest: bytes, pad: int) -> bytes:
        if not self.cfg.its_auth:
            return b""
        self.mac.next_pad = pad
        return mac_tag(self.mac, pp_message(role, self.session_id, seed, digest, self.offset)).to_bytes(self.cfg.qkd_w)

    def _tag_ok(self, msg: wire.QkdPpMsg, role: bytes, pad: int) -> bool:
        if not self.cfg.its_auth:
            return True
        tag = self.parse_tag(msg.tag, self.cfg.qkd_w)
        if tag is None or tag.pad_index != pad:
            return False
        return mac_verify(self.mac, pp_message(role, self.session_id, msg.verify_seed, msg.verify_hash, self.offset), tag)

    def _deposit(self) -> None:
        offset = self.actor.pool(self.peer).deposit(self.fresh, Provenance.QKD_GENERATED, self.session_id)
        spent = self.cfg.auth_budget if self.cfg.its_auth else 0
        self.result.update(key=self.fresh, offset=offset, net_bits=int(self.fresh.size) - spent)
        self.finish(OutcomeKind.ESTABLISHED)


class QkdInitiator(_Qkd):
    """Runs post-processing for one QKD session, authenticated from the pool."""

    role = "qkd-initiator"

    def start(self) -> None:
        self.offset = 0
        if self.cfg.its_auth:
            try:
                self.offset, bits = self.actor.pool(self.peer).withdraw(self.cfg.auth_budget, f"qkd-auth {self.session_id}")
            except PoolDepleted:
                self.log("depleted", f"pool {self.peer}")
                self.abort("PoolDepleted", notify=False)
                return
            self.mac = self._auth_key(bits)
        self.fresh = self.ctx.quantum_bits(self.session_id, self.actor.actor_id, self.peer, self.cfg.fresh_bits)
        self.seed = int(self.ctx.rng.integers(0, 2**63))
        self.digest = verify_hash(self.seed, self.fresh)
        tag = self._tag(b"A", self.seed, self.digest, 0)
        self.send(wire.QkdPpMsg(self.seed, self.digest, self.offset, tag))

    def handle(self, src, msg):
        if not isinstance(msg, wire.QkdPpMsg) or msg.verify_seed != self.seed:
            self.abort("Unexpected")
            return
        if not self._tag_ok(msg, b"B", 1):
            self.abort("AuthFail")
            return
        if msg.verify_hash != self.digest:
            self.abort("KeyMismatch")
            return
        self._deposit()


class QkdResponder(_Qkd):
    role = "qkd-responder"

    def handle(self, src, msg):
        if not isinstance(msg, wire.QkdPpMsg):
            self.abort("Unexpected")
            return
        self.offset = msg.key_offset
        if self.cfg.its_auth:
            try:
                bits = self.actor.pool(self.peer).take(self.offset, self.cfg.auth_budget, f"qkd-auth {self.session_id}")
            except (PoolDepleted, KeyReuse) as exc:
                self.abort(type(exc).__name__)
                return
            self.mac = self._auth_key(bits)
        if not self._tag_ok(msg, b"A", 0):
            self.abort("AuthFail")
            return
        self.fresh = self.ctx.quantum_bits(self.session_id, self.actor.actor_id, self.peer, self.cfg.fresh_bits)
        digest = verify_hash(msg.verify_seed, self.fresh)
        if digest != msg.verify_hash:
            self.abort("KeyMismatch")
            return
        self.send(wire.QkdPpMsg(msg.verify_seed, digest, self.offset, self._tag(b"B", msg.verify_seed, digest, 1)))
        self._deposit()


# -- one-time-pad data messages ----------------------------------------------


class DataSender(Party):
    """Encrypts a message with unspent bits of the latest QKD segment."""

    protocol = Protocol.DATA
    role = "sender"

    def __init__(self, ctx, actor, peer, session_id, plaintext: bytes):
        super().__init__(ctx, actor, peer, session_id)
        self.plaintext = plaintext

    def start(self) -> None:
        pool = self.actor.pool(self.peer)
        segment = pool.latest(Provenance.QKD_GENERATED)
        n = 8 * len(self.plaintext)
        if segment is None:
            self.abort("NoKey", notify=False)
            return
        try:
            offset, pad = pool.withdraw_within(segment, n, f"data {self.session_id}")
        except PoolDepleted:
            self.abort("PoolDepleted", notify=False)
            return
        ciphertext = bytes(a ^ b for a, b in zip(self.plaintext, B.to_bytes(pad)))
        self.send(wire.DataMsg(segment.label, offset - segment.offset, ciphertext))
        self.finish(OutcomeKind.COMPLETED)


class DataReceiver(Party):
    protocol = Protocol.DATA
    role = "receiver"

    def handle(self, src, msg):
        if not isinstance(msg, wire.DataMsg):
            self.abort("Unexpected")
            return
        pool = self.actor.pool(self.peer)
        try:
            segment = pool.segment(msg.segment, Provenance.QKD_GENERATED)
        except KeyError:
            self.abort("NoKey", notify=False)
            return
        n = 8 * len(msg.ciphertext)
        if msg.offset + n > segment.length:
            self.abort("Malformed", notify=False)
            return
        try:
            pad = pool.take(segment.offset + msg.offset, n, f"data {self.session_id}")
        except KeyReuse:
            self.abort("KeyReuse", notify=False)
            return
        self.result.update(plaintext=bytes(a ^ b for a, b in zip(msg.ciphertext, B.to_bytes(pad))))
        self.finish(OutcomeKind.DELIVERED)


# Parties created on demand when a frame arrives for an unknown session.
RESPONDERS: dict[wire.FrameType, type[Party]] = {
    wire.FrameType.CHALLENGE: EstablishResponder,
    wire.FrameType.CHALLENGE_AUTH: EstablishResponder,
    wire.FrameType.REQ_CONNECT: RelayManager,
    wire.FrameType.RELAY: RelayRecipient,
    wire.FrameType.AUTH_INIT: AuthProver,
    wire.FrameType.QKD_PP: QkdResponder,
    wire.FrameType.DATA: DataReceiver,
}
