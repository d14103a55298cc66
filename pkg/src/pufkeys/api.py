"""One-call protocol runs for library users.

Each function launches a single session on a :class:`Simulator`, runs it
to quiescence and returns what every party ended up with. Reuse one
simulator for a sequence of calls so pools, session ids and the event log
carry over.

For bulk statistics ``run_direct`` passes frames straight between
parties with no channel, adversary or log in between.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass

import numpy as np

from . import bits as B
from .protocols import wire
from .protocols.actors import Actor, ActorIdentity
from .protocols.params import ProtocolConfig
from .protocols.parties import RESPONDERS, Party
from .protocols.session import Outcome, OutcomeKind, SessionTranscript
from .sim.engine import EventLog, Session, Simulator
from .sim.topology import KDC_ID, Network


@dataclass
class ProtocolRun:
    outcome: Outcome
    transcript: SessionTranscript
    # actor id -> that party's result (keys, offsets, plaintext...)
    results: dict[str, dict]
    log: EventLog

    @property
    def ok(self) -> bool:
        return not self.outcome.kind.failed

    def key(self, actor_id: str):
        return self.results.get(actor_id, {}).get("key")


def simulator(network: Network, config: ProtocolConfig | None = None, seed: int = 0, adversary=None) -> Simulator:
    return Simulator(network.actors, config, seed, adversary)


def _finish(sim: Simulator, session: Session) -> ProtocolRun:
    sim.run()
    results = {actor: party.result for actor, party in session.parties.items()}
    return ProtocolRun(session.outcome, session.transcript, results, sim.log)


def p2p_establish(sim: Simulator, holder: str, peer: str) -> ProtocolRun:
    """Establish a key between two users; ``holder`` owns their CRP database."""
    return _finish(sim, sim.establish(holder, peer))


def kdc_establish(sim: Simulator, user: str, kdc: str = KDC_ID) -> ProtocolRun:
    return _finish(sim, sim.establish(kdc, user))


def kdc_relay(sim: Simulator, requester: str, target: str, kdc: str = KDC_ID) -> ProtocolRun:
    """Hand a key from ``requester``'s KDC pool to ``target`` through the KDC."""
    return _finish(sim, sim.relay(requester, kdc, target))


def entity_authenticate(sim: Simulator, prover: str, verifier: str = KDC_ID) -> ProtocolRun:
    return _finish(sim, sim.authenticate(verifier, prover))


def mutual_authenticate(sim: Simulator, a: str, b: str) -> tuple[ProtocolRun, ProtocolRun]:
    """Two one-way runs with the roles swapped; both must succeed."""
    first = entity_authenticate(sim, b, a)
    if first.outcome.kind is not OutcomeKind.AUTHENTICATED:
        return first, first
    return first, entity_authenticate(sim, a, b)


def qkd_session(sim: Simulator, a: str, b: str) -> ProtocolRun:
    """One abstract QKD session authenticated from the a/b pool."""
    return _finish(sim, sim.qkd(a, b))


def send_message(sim: Simulator, a: str, b: str, plaintext: bytes) -> ProtocolRun:
    return _finish(sim, sim.send_data(a, b, plaintext))


class DirectContext:
    """Party environment with no network: randomness and identities only."""

    def __init__(self, actors: dict[str, Actor], config: ProtocolConfig | None = None, seed: int = 0):
        self.actors = actors
        self.config = config or ProtocolConfig()
        self.config.validate()
        streams = np.random.SeedSequence(seed).spawn(3)
        self.rng = np.random.default_rng(streams[0])
        self.noise = np.random.default_rng(streams[1])
        self._quantum_seed = np.random.default_rng(streams[2]).bytes(32)
        self._ids = itertools.count(1)

    def new_session_id(self) -> str:
        return f"D{next(self._ids):04d}"

    def emit(self, actor: str, event: str, session: str, detail: str = "") -> None:
        pass

    def identity(self, actor_id: str) -> ActorIdentity:
        return self.actors[actor_id].identity

    def quantum_bits(self, session: str, actor: str, peer: str, n: int) -> B.Bits:
        a, b = sorted((actor, peer))
        label = f"link|{session}|{a}|{b}".encode()
        return B.from_bytes(B.prf(self._quantum_seed, label, (n + 7) // 8), n)


def run_direct(ctx: DirectContext, party: Party) -> dict[str, Party]:
    """Run ``party``'s session to completion, spawning responders as frames arrive."""
    parties = {party.actor.actor_id: party}
    party.start()
    queue = deque((party.actor.actor_id, dst, frame) for dst, frame in party.drain())
    while queue:
        src, dst, frame = queue.popleft()
        receiver = parties.get(dst)
        if receiver is None:
            cls = RESPONDERS.get(wire.frame_type(frame))
            if cls is None or dst not in ctx.actors:
                continue
            receiver = parties[dst] = cls(ctx, ctx.actors[dst], src, party.session_id)
        receiver.receive(src, frame)
        queue.extend((dst, d, f) for d, f in receiver.drain())
    for p in parties.values():
        if not p.done:
            p.abort("Timeout", notify=False)
    return parties
