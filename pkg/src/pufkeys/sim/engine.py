"""Deterministic discrete-event driver for protocol parties.

Time is an integer tick. A frame sent at tick t is delivered at t + 1;
ties are broken by send order, so every direction of every channel is
FIFO. When the event queue runs dry, every party still waiting times out.
"""

from __future__ import annotations

import hashlib
import heapq
import itertools
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .. import bits as B
from ..errors import FrameError
from ..protocols import wire
from ..protocols.actors import Actor, ActorIdentity
from ..protocols.params import ProtocolConfig
from ..protocols.parties import (
    RESPONDERS,
    AuthVerifier,
    DataSender,
    EstablishInitiator,
    Party,
    QkdInitiator,
    RelayRequester,
)
from ..protocols.pool import KeyPool
from ..protocols.session import Outcome, OutcomeKind, Protocol, SessionTranscript, combine_outcomes


def digest(frame: bytes) -> str:
    return hashlib.sha256(frame).hexdigest()[:16]


@dataclass(frozen=True)
class Packet:
    src: str
    dst: str
    session: str
    frame: bytes

    def describe(self) -> str:
        try:
            kind = wire.frame_type(self.frame).name
        except FrameError:
            kind = "?"
        return f"{self.src}->{self.dst} {kind} {digest(self.frame)}"


@dataclass(frozen=True)
class LogRecord:
    tick: int
    actor: str
    event: str
    session: str
    detail: str

    def line(self) -> str:
        return f"{self.tick} | {self.actor} | {self.event} | {self.session or '-'} | {self.detail}"


class EventLog:
    """Append-only record of everything that happened in a run."""

    def __init__(self):
        self._records: list[LogRecord] = []

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self):
        return iter(self._records)

    def record(self, tick: int, actor: str, event: str, session: str = "", detail: str = "") -> None:
        self._records.append(LogRecord(tick, actor, event, session, detail))

    def render(self) -> str:
        return "".join(r.line() + "\n" for r in self._records)

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.render())

    def events(self, event: str) -> list[LogRecord]:
        return [r for r in self._records if r.event == event]


class Channel:
    """Classical channel between two actors, optionally under adversary control."""

    def __init__(self, a: str, b: str, adversary=None):
        self.endpoints = tuple(sorted((a, b)))
        self.adversary = adversary
        self.delivered = 0
        self.dropped = 0
        self.modified = 0
        self.injected = 0

    def __repr__(self):
        return (
            f"Channel({self.endpoints[0]}<->{self.endpoints[1]}, delivered={self.delivered}, "
            f"dropped={self.dropped}, modified={self.modified}, injected={self.injected})"
        )


@dataclass
class Session:
    transcript: SessionTranscript
    expected: set[str]
    resources: tuple = ()
    parties: dict[str, Party] = field(default_factory=dict)
    # actor ids in the order their parties reached an outcome
    finish_order: list[str] = field(default_factory=list)
    # set by an adversary that interfered with this session
    attacked: bool = False
    started: bool = False

    @property
    def session_id(self) -> str:
        return self.transcript.session_id

    @property
    def protocol(self) -> Protocol:
        return self.transcript.protocol

    @property
    def outcome(self) -> Outcome | None:
        return self.transcript.outcome

    @property
    def closed(self) -> bool:
        return self.transcript.outcome is not None

    def party(self, role: str) -> Party | None:
        return next((p for p in self.parties.values() if p.role == role), None)


class Simulator:
    """Runs protocol parties over simulated channels.

    ``seed`` fixes every random choice: protocol nonces, PUF noise and the
    abstract quantum link each get their own stream.
    """

    def __init__(
        self,
        actors: dict[str, Actor],
        config: ProtocolConfig | None = None,
        seed: int = 0,
        adversary=None,
        log: EventLog | None = None,
    ):
        self.actors = actors
        self.config = config or ProtocolConfig()
        self.config.validate()
        streams = np.random.SeedSequence(seed).spawn(3)
        self.rng = np.random.default_rng(streams[0])
        self.noise = np.random.default_rng(streams[1])
        self._quantum_seed = np.random.default_rng(streams[2]).bytes(32)
        self.log = log if log is not None else EventLog()
        self.tick = 0
        self._queue: list[tuple[int, int, Callable[[], None]]] = []
        self._seq = itertools.count()
        self._session_ids = itertools.count(1)
        self.sessions: dict[str, Session] = {}
        self.channels: dict[tuple[str, str], Channel] = {}
        self._reserved: dict[object, str] = {}
        self._deferred: list[tuple[Session, Party]] = []
        self._in_flight: dict[str, int] = {}
        self._current = ""
        # sessions touched by the adversary, possibly before they exist here
        self._tainted: set[str] = set()
        for actor in actors.values():
            actor.pool_listener = self._on_pool
            for pool in actor.pools.values():
                pool.listener = self._on_pool
        self.adversary = None
        if adversary is not None:
            self.attach(adversary)

    # -- context offered to parties ------------------------------------------

    def emit(self, actor: str, event: str, session: str, detail: str = "") -> None:
        self.log.record(self.tick, actor, event, session, detail)

    def identity(self, actor_id: str) -> ActorIdentity:
        return self.actors[actor_id].identity

    def quantum_bits(self, session: str, actor: str, peer: str, n: int) -> B.Bits:
        if self.adversary is not None and self.adversary.splices(actor, peer):
            bits = self.spliced_bits(session, actor, n)
            self.adversary.record_quantum(session, actor, peer, bits)
            self._mark_attacked(session)
            return bits
        a, b = sorted((actor, peer))
        return self._link_bits(f"link|{session}|{a}|{b}", n)

    def spliced_bits(self, session: str, actor: str, n: int) -> B.Bits:
        """Key an honest actor ends up sharing with an adversary who spliced its link."""
        return self._link_bits(f"spliced|{session}|{actor}", n)

    def _link_bits(self, label: str, n: int) -> B.Bits:
        return B.from_bytes(B.prf(self._quantum_seed, label.encode(), (n + 7) // 8), n)

    def _on_pool(self, event: str, pool: KeyPool, offset: int, n: int, note: str) -> None:
        self.log.record(self.tick, pool.owner, event, self._current, f"pool={pool.peer} offset={offset} bits={n} {note}".rstrip())

    # -- adversary hooks -----------------------------------------------------

    def attach(self, adversary) -> None:
        self.adversary = adversary
        adversary.bind(AdversaryView(self))

    def channel(self, a: str, b: str) -> Channel:
        key = tuple(sorted((a, b)))
        if key not in self.channels:
            adv = self.adversary if self.adversary is not None and self.adversary.watches(a, b) else None
            self.channels[key] = Channel(a, b, adv)
        return self.channels[key]

    def _mark_attacked(self, session_id: str) -> None:
        self._tainted.add(session_id)
        if session_id in self.sessions:
            self.sessions[session_id].attacked = True

    def inject(self, packet: Packet) -> None:
        """Put an adversary-made packet on the wire, bypassing interception."""
        self.channel(packet.src, packet.dst).injected += 1
        self.log.record(self.tick, "adversary", "inject", packet.session, packet.describe())
        self._mark_attacked(packet.session)
        self._send_later(packet)

    # -- event loop ------------------------------------------------------------

    def _schedule(self, delay: int, action: Callable[[], None]) -> None:
        heapq.heappush(self._queue, (self.tick + delay, next(self._seq), action))

    def new_session_id(self) -> str:
        return f"S{next(self._session_ids):04d}"

    def _open(self, protocol: Protocol, expected: set[str], resources: tuple = (), session_id: str | None = None) -> Session:
        sid = session_id or self.new_session_id()
        session = Session(SessionTranscript(sid, protocol), expected, resources, attacked=sid in self._tainted)
        self.sessions[sid] = session
        return session

    def launch(self, party: Party, expected: set[str], resources: tuple = ()) -> Session:
        session = self._open(party.protocol, expected, resources, party.session_id)
        self.log.record(self.tick, party.actor.actor_id, "launch", session.session_id, f"{party.protocol.value} {party.role}")
        if any(r in self._reserved for r in resources):
            self.log.record(self.tick, party.actor.actor_id, "deferred", session.session_id, "resources busy")
            self._deferred.append((session, party))
        else:
            self._begin(session, party)
        return session

    def _begin(self, session: Session, party: Party) -> None:
        for r in session.resources:
            self._reserved[r] = session.session_id
        session.started = True
        session.parties[party.actor.actor_id] = party
        self._step(session, party, party.start)

    def _step(self, session: Session, party: Party, action: Callable[[], None]) -> None:
        self._current = session.session_id
        try:
            action()
        finally:
            self._current = ""
        if party.done and party.actor.actor_id not in session.finish_order:
            session.finish_order.append(party.actor.actor_id)
        for dst, frame in party.drain():
            self._transmit(Packet(party.actor.actor_id, dst, session.session_id, frame))
        self._maybe_close(session)

    def _transmit(self, packet: Packet) -> None:
        self.log.record(self.tick, packet.src, "send", packet.session, packet.describe())
        if packet.dst not in self.actors:
            self.log.record(self.tick, "net", "drop", packet.session, f"unknown destination {packet.dst}")
            return
        chan = self.channel(packet.src, packet.dst)
        out = [packet] if chan.adversary is None else chan.adversary.intercept(packet)
        if not out:
            chan.dropped += 1
            self.log.record(self.tick, "adversary", "drop", packet.session, packet.describe())
            self._mark_attacked(packet.session)
        for p in out:
            if p != packet:
                chan.modified += 1
                self.log.record(self.tick, "adversary", "modify", p.session, p.describe())
                self._mark_attacked(p.session)
            self._send_later(p)

    def _send_later(self, packet: Packet) -> None:
        self._in_flight[packet.session] = self._in_flight.get(packet.session, 0) + 1
        self._schedule(1, lambda: self._deliver(packet))

    def _deliver(self, packet: Packet) -> None:
        self._in_flight[packet.session] -= 1
        try:
            self._handle_delivery(packet)
        finally:
            if packet.session in self.sessions:
                self._maybe_close(self.sessions[packet.session])

    def _handle_delivery(self, packet: Packet) -> None:
        chan = self.channel(packet.src, packet.dst)
        chan.delivered += 1
        self.log.record(self.tick, packet.dst, "deliver", packet.session, packet.describe())
        session = self.sessions.get(packet.session)
        party = session.parties.get(packet.dst) if session else None
        if party is None:
            party = self._spawn(packet, session)
            if party is None:
                return
            session = self.sessions[packet.session]
        session.transcript.record(self.tick, packet.src, packet.dst, packet.frame)
        if party.done:
            self.log.record(self.tick, packet.dst, "late", packet.session, packet.describe())
            return
        self._step(session, party, lambda: party.receive(packet.src, packet.frame))

    def _spawn(self, packet: Packet, session: Session | None) -> Party | None:
        try:
            cls = RESPONDERS.get(wire.frame_type(packet.frame))
        except FrameError:
            cls = None
        if cls is None or (session is not None and session.closed):
            self.log.record(self.tick, packet.dst, "unsolicited", packet.session, packet.describe())
            return None
        party = cls(self, self.actors[packet.dst], packet.src, packet.session)
        if session is None:
            session = self._open(party.protocol, {packet.dst}, session_id=packet.session)
        session.parties[packet.dst] = party
        session.started = True
        self.log.record(self.tick, packet.dst, "spawn", packet.session, f"{party.protocol.value} {party.role}")
        return party

    def _maybe_close(self, session: Session) -> None:
        if session.closed or not session.parties or self._in_flight.get(session.session_id, 0):
            return
        if all(p.done for p in session.parties.values()):
            self._close(session)

    def _close(self, session: Session) -> None:
        missing = session.expected - set(session.parties)
        outcomes = [session.parties[a].outcome for a in session.finish_order]
        if missing:
            outcomes.append(Outcome.aborted("Timeout"))
        session.transcript.outcome = combine_outcomes(outcomes)
        self.log.record(self.tick, "net", "close", session.session_id, f"{session.protocol.value} {session.outcome}")
        for r in session.resources:
            if self._reserved.get(r) == session.session_id:
                del self._reserved[r]
        ready = [(s, p) for s, p in self._deferred if not any(r in self._reserved for r in s.resources)]
        for s, p in ready:
            self._deferred.remove((s, p))
            self._schedule(0, lambda s=s, p=p: self._begin(s, p))

    def run(self, max_ticks: int = 1_000_000) -> None:
        """Process events until nothing is left to do, timing out stalled sessions."""
        while True:
            while self._queue:
                tick, _, action = heapq.heappop(self._queue)
                if tick > max_ticks:
                    self._queue.clear()
                    break
                self.tick = tick
                action()
            stalled = [s for s in self.sessions.values() if s.started and not s.closed]
            if not stalled:
                return
            self.tick += 1
            for session in stalled:
                for party in session.parties.values():
                    if not party.done:
                        self._step(session, party, lambda party=party: party.abort("Timeout", notify=False))
                if not session.closed:
                    self._close(session)
            if not self._queue:
                return

    # -- protocol entry points -------------------------------------------------

    def establish(self, holder: str, peer: str) -> Session:
        party = EstablishInitiator(self, self.actors[holder], peer, self.new_session_id())
        return self.launch(party, {holder, peer}, (("db", holder, peer), _pool_key(holder, peer)))

    def relay(self, requester: str, manager: str, target: str) -> Session:
        party = RelayRequester(self, self.actors[requester], manager, self.new_session_id(), target)
        resources = (_pool_key(requester, manager), _pool_key(manager, target))
        return self.launch(party, {requester, manager, target}, resources)

    def authenticate(self, verifier: str, prover: str) -> Session:
        party = AuthVerifier(self, self.actors[verifier], prover, self.new_session_id())
        resources = (("db", verifier, prover), _pool_key(verifier, prover))
        return self.launch(party, {verifier, prover}, resources)

    def qkd(self, a: str, b: str) -> Session:
        party = QkdInitiator(self, self.actors[a], b, self.new_session_id())
        return self.launch(party, {a, b}, (_pool_key(a, b),))

    def send_data(self, a: str, b: str, plaintext: bytes) -> Session:
        party = DataSender(self, self.actors[a], b, self.new_session_id(), plaintext)
        return self.launch(party, {a, b}, (_pool_key(a, b),))


def _pool_key(a: str, b: str) -> tuple:
    return ("pool",) + tuple(sorted((a, b)))


class AdversaryView:
    """What an adversary may do to a running simulation: watch and inject traffic.

    Token seeds, helper data and pools are not reachable from here.
    """

    def __init__(self, sim: Simulator):
        self._sim = sim

    @property
    def tick(self) -> int:
        return self._sim.tick

    @property
    def fresh_bits(self) -> int:
        return self._sim.config.fresh_bits

    def spliced_bits(self, session: str, actor: str, n: int) -> B.Bits:
        return self._sim.spliced_bits(session, actor, n)

    def inject(self, packet: Packet) -> None:
        self._sim.inject(packet)

    def new_session_id(self) -> str:
        return self._sim.new_session_id()

    def mark_attacked(self, session_id: str) -> None:
        self._sim._mark_attacked(session_id)

    def note(self, event: str, session: str, detail: str) -> None:
        self._sim.log.record(self._sim.tick, "adversary", event, session, detail)
