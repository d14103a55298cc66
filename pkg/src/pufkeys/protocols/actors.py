"""Network participants and the local state each one keeps."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .. import bits as B
from ..crpstore import Blacklist, CrpDatabase, HelperStore
from ..errors import KeyExhausted, UnknownPadIndex
from ..mac import ItsMacKey, Tag, mac_tag, mac_verify
from ..puf import Token
from .pool import KeyPool, PoolListener


class ActorRole(enum.Enum):
    USER = "user"
    KDC_MANAGER = "kdc"


@dataclass(frozen=True)
class ActorIdentity:
    actor_id: str
    id_string: bytes
    role: ActorRole = ActorRole.USER

    @classmethod
    def user(cls, actor_id: str, serial: int) -> "ActorIdentity":
        return cls(actor_id, serial.to_bytes(8, "big"), ActorRole.USER)

    @classmethod
    def kdc(cls, actor_id: str = "kdc", serial: int = 0) -> "ActorIdentity":
        return cls(actor_id, serial.to_bytes(8, "big"), ActorRole.KDC_MANAGER)


@dataclass
class AuthKeyState:
    """An l-use entity-authentication key plus the bookkeeping around it."""

    key: ItsMacKey
    key_offset: int
    sessions: int = 0
    issued: list[bytes] = field(default_factory=list)
    seen: set[tuple[bytes, bytes]] = field(default_factory=set)

    @property
    def exhausted(self) -> bool:
        return self.sessions >= self.key.l

    def issue(self, rng: np.random.Generator, s_bits: int) -> B.Bits:
        """Draw a fresh nonce ``s``; each key lifetime covers ``l`` sessions."""
        if self.exhausted:
            raise KeyExhausted(f"authentication key used for all {self.key.l} sessions")
        self.sessions += 1
        s = B.random_bits(rng, s_bits)
        self.issued.append(B.to_bytes(s))
        return s

    def check(self, id_string: bytes, s: B.Bits, tag: Tag, track_replays: bool = True) -> str | None:
        """None if the tag is accepted, else the rejection reason."""
        seen_key = (B.to_bytes(s), tag.to_bytes(self.key.w))
        if track_replays and seen_key in self.seen:
            return "ReplayDetected"
        try:
            ok = mac_verify(self.key, auth_message(id_string, s), tag)
        except UnknownPadIndex:
            ok = False
        if not ok:
            return "TagMismatch"
        self.seen.add(seen_key)
        return None


def auth_message(id_string: bytes, s: B.Bits) -> bytes:
    return id_string + B.to_bytes(s)


def auth_respond(key: ItsMacKey, id_string: bytes, s: B.Bits) -> Tag:
    return mac_tag(key, auth_message(id_string, s))


@dataclass
class Actor:
    identity: ActorIdentity
    tokens: dict[str, Token] = field(default_factory=dict, repr=False)
    helpers: dict[str, HelperStore] = field(default_factory=dict, repr=False)
    # token used when talking to a given peer (the KDC has one per user)
    token_for_peer: dict[str, str] = field(default_factory=dict)
    # databases this actor holds, by counterpart actor
    databases: dict[str, CrpDatabase] = field(default_factory=dict, repr=False)
    blacklists: dict[str, Blacklist] = field(default_factory=dict, repr=False)
    pools: dict[str, KeyPool] = field(default_factory=dict, repr=False)
    comp_keys: dict[str, bytes] = field(default_factory=dict, repr=False)
    auth_states: dict[str, AuthKeyState] = field(default_factory=dict, repr=False)
    # hardware whose token does not match what was enrolled for this identity
    counterfeit: bool = False
    pool_listener: PoolListener | None = field(default=None, repr=False)

    @property
    def actor_id(self) -> str:
        return self.identity.actor_id

    def token(self, peer: str) -> Token:
        return self.tokens[self.token_for_peer[peer]]

    def helper_store(self, peer: str) -> HelperStore:
        return self.helpers[self.token_for_peer[peer]]

    def pool(self, peer: str) -> KeyPool:
        if peer not in self.pools:
            self.pools[peer] = KeyPool(self.actor_id, peer, self.pool_listener)
        return self.pools[peer]

    def blacklist(self, peer: str) -> Blacklist:
        return self.blacklists.setdefault(peer, Blacklist())
