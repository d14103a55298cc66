"""Network layouts and their trusted-setup provisioning.

In a full mesh every pair of users shares a CRP database, held by the
user listed first. In a star every user shares one database with the
KDC, and the KDC dedicates a separate manager token to each user.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from ..crpstore import CrpDatabase, HelperStore, build_database
from ..errors import ConfigError, DuplicateIdentity
from ..protocols.actors import Actor, ActorIdentity, ActorRole
from ..puf import DEFAULT_PARAMS, Challenge, ExtractorParams, Strength, Token

KDC_ID = "kdc"
COMP_KEY_BYTES = 16


class TopologyMode(enum.Enum):
    FULL_MESH = "full_mesh"
    STAR = "star"


def databases_required(mode: TopologyMode, n: int) -> int:
    return n * (n - 1) // 2 if mode is TopologyMode.FULL_MESH else n


@dataclass(frozen=True)
class TopologyConfig:
    mode: TopologyMode
    users: tuple[str, ...]
    db_size: int = 1024
    challenge_bits: int = 64
    intra_error_rate: float = 0.10
    extractor: ExtractorParams = DEFAULT_PARAMS
    # provision computational keys alongside each database (request gating)
    comp_keys: bool = False

    def validate(self) -> None:
        if len(self.users) < 2:
            raise ConfigError(f"a network needs at least 2 users, got {len(self.users)}")
        if len(set(self.users)) != len(self.users):
            raise DuplicateIdentity("user ids must be unique")
        if KDC_ID in self.users:
            raise ConfigError(f"{KDC_ID!r} is reserved for the key distribution center")
        if not 0.0 <= self.intra_error_rate < 0.5:
            raise ConfigError(f"intra_error_rate {self.intra_error_rate} outside [0, 0.5)")
        if self.challenge_bits < 1:
            raise ConfigError("challenge_bits must be positive")
        if self.db_size < 1:
            raise ConfigError("db_size must be at least 1")
        if self.db_size > 1 << self.challenge_bits:
            raise ConfigError(f"db_size {self.db_size} exceeds the {self.challenge_bits}-bit challenge space")


@dataclass(frozen=True)
class ProvisionReport:
    new_databases: int
    new_tokens: int
    new_manager_tokens: int


@dataclass
class Network:
    config: TopologyConfig
    actors: dict[str, Actor] = field(default_factory=dict)
    databases: list[CrpDatabase] = field(default_factory=list)
    _rng: np.random.Generator | None = field(default=None, repr=False)

    @property
    def mode(self) -> TopologyMode:
        return self.config.mode

    @property
    def users(self) -> list[str]:
        return [a for a, actor in self.actors.items() if actor.identity.role is ActorRole.USER]

    @property
    def kdc(self) -> Actor | None:
        return self.actors.get(KDC_ID)

    @property
    def manager_tokens(self) -> int:
        return len(self.kdc.tokens) if self.kdc else 0

    def holder(self, a: str, b: str) -> tuple[str, str]:
        """(holder, peer) for the database linking ``a`` and ``b``."""
        if b in self.actors[a].databases:
            return a, b
        if a in self.actors[b].databases:
            return b, a
        raise ConfigError(f"no database links {a} and {b}")

    def counts(self) -> dict[str, int]:
        return {
            "users": len(self.users),
            "databases": len(self.databases),
            "manager_tokens": self.manager_tokens,
            "tokens": sum(len(a.tokens) for a in self.actors.values()),
        }


def _next_serial(network: Network) -> int:
    return 1 + max((int.from_bytes(a.identity.id_string, "big") for a in network.actors.values()), default=0)


def _challenges(rng: np.random.Generator, nbits: int, count: int, used: set[Challenge]) -> list[Challenge]:
    """Fresh challenges that no database of the involved tokens has used yet."""
    if len(used) + count > 1 << nbits:
        raise ConfigError(f"{nbits}-bit challenge space cannot supply {count} more unused challenges")
    out: list[Challenge] = []
    while len(out) < count:
        c = Challenge.random(rng, nbits)
        if c not in used:
            used.add(c)
            out.append(c)
    return out


def _new_token(network: Network, token_id: str) -> Token:
    cfg = network.config
    strength = Strength.WEAK if cfg.challenge_bits <= Strength.WEAK.default_challenge_bits else Strength.STRONG
    return Token.create(token_id, network._rng, strength, cfg.intra_error_rate, cfg.challenge_bits)


def _add_actor(network: Network, identity: ActorIdentity, token_ids: list[str]) -> Actor:
    actor = Actor(identity)
    for token_id in token_ids:
        actor.tokens[token_id] = _new_token(network, token_id)
        actor.helpers[token_id] = HelperStore(token_id)
    network.actors[identity.actor_id] = actor
    return actor


def _link(network: Network, holder: Actor, holder_token: str, peer: Actor, peer_token: str, used: set[Challenge]) -> None:
    cfg = network.config
    token_u, token_v = holder.tokens[holder_token], peer.tokens[peer_token]
    challenges = _challenges(network._rng, cfg.challenge_bits, cfg.db_size, used)
    db, helpers_u, helpers_v = build_database(token_u, token_v, challenges, cfg.extractor)
    for c in challenges:
        holder.helpers[holder_token].add(c, helpers_u[c])
        peer.helpers[peer_token].add(c, helpers_v[c])
    holder.databases[peer.actor_id] = db
    holder.token_for_peer[peer.actor_id] = holder_token
    peer.token_for_peer[holder.actor_id] = peer_token
    if cfg.comp_keys:
        key = network._rng.bytes(COMP_KEY_BYTES)
        holder.comp_keys[peer.actor_id] = key
        peer.comp_keys[holder.actor_id] = key
    network.databases.append(db)


def _used_challenges(actor: Actor, token_id: str) -> set[Challenge]:
    return set(actor.helpers[token_id].challenges())


def build_topology(config: TopologyConfig, seed: int = 0) -> Network:
    config.validate()
    config.extractor.validate()
    network = Network(config, _rng=np.random.default_rng(seed))
    if config.mode is TopologyMode.STAR:
        _add_actor(network, ActorIdentity.kdc(KDC_ID), [])
    for user in config.users:
        add_user(network, user)
    return network


def add_user(network: Network, user_id: str) -> ProvisionReport:
    """Enroll a new user and provision every database it needs."""
    if user_id in network.actors:
        raise DuplicateIdentity(f"actor {user_id!r} already exists")
    before = network.counts()
    existing = network.users
    user = _add_actor(network, ActorIdentity.user(user_id, _next_serial(network)), [user_id])
    if network.mode is TopologyMode.STAR:
        kdc = network.kdc
        manager_token = f"{KDC_ID}/{user_id}"
        kdc.tokens[manager_token] = _new_token(network, manager_token)
        kdc.helpers[manager_token] = HelperStore(manager_token)
        _link(network, kdc, manager_token, user, user_id, set())
    else:
        for peer_id in existing:
            peer = network.actors[peer_id]
            used = _used_challenges(peer, peer_id) | _used_challenges(user, user_id)
            _link(network, peer, peer_id, user, user_id, used)
    after = network.counts()
    return ProvisionReport(
        after["databases"] - before["databases"],
        after["tokens"] - before["tokens"],
        after["manager_tokens"] - before["manager_tokens"],
    )
