"""Execute a scenario script against a provisioned network."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ConfigError, ParameterError
from ..protocols.session import OutcomeKind, Protocol
from ..puf import Token
from .adversary import (
    Adversary,
    ChallengeTamper,
    DbCompromise,
    MitM,
    Passive,
    Replay,
    RequestFlood,
)
from .compromise import MAX_EXHAUSTIVE_BITS, compromise_database
from .engine import EventLog, Session, Simulator
from .topology import Network, build_topology

SUCCESS = (OutcomeKind.ESTABLISHED, OutcomeKind.AUTHENTICATED, OutcomeKind.DELIVERED)
KEY_PROTOCOLS = (Protocol.P2P_ESTABLISH, Protocol.KDC_ESTABLISH, Protocol.RELAY, Protocol.QKD_SESSION)


@dataclass
class Metrics:
    sessions: int = 0
    outcomes: dict[str, int] = field(default_factory=dict)
    keys_established: int = 0
    aborts: dict[str, int] = field(default_factory=dict)
    databases: dict[str, dict[str, int]] = field(default_factory=dict)
    pools: dict[str, dict[str, int]] = field(default_factory=dict)
    adversary_success: int = 0
    adversary: dict = field(default_factory=dict)
    messages_delivered: int = 0
    messages_decrypted: int = 0
    reseeds: int = 0
    halted_links: list[str] = field(default_factory=list)
    compromise: list[dict] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=2, sort_keys=True) + "\n"


@dataclass
class RunResult:
    log: EventLog
    metrics: Metrics
    sim: Simulator
    network: Network


def derive_seeds(seed: int) -> tuple[int, int, int]:
    """Independent provisioning, simulation and adversary seeds from one scenario seed."""
    children = np.random.SeedSequence(seed).spawn(3)
    return tuple(int(c.generate_state(1, np.uint64)[0]) for c in children)


def make_adversary(spec, network: Network, seed: int) -> Adversary | None:
    if spec is None:
        return None
    targets = spec.targets or None
    if spec.kind == "passive":
        return Passive(targets, seed)
    if spec.kind == "mitm":
        return MitM(targets, spec.attacks, seed)
    if spec.kind == "challenge_tamper":
        # grant: the challenge values enrolled for the targeted users (public, not helper data)
        names = targets or network.users
        known = sorted({c for n in names for store in network.actors[n].helpers.values() for c in store.challenges()})
        return ChallengeTamper(known, targets, seed)
    if spec.kind == "replay":
        return Replay(targets, seed)
    if spec.kind == "request_flood":
        return RequestFlood(targets, seed)
    if spec.kind == "db_compromise":
        return DbCompromise(seed=seed)
    raise ConfigError(f"unknown adversary kind {spec.kind!r}")


class _Run:
    def __init__(self, scenario, network: Network, sim: Simulator, adversary: Adversary | None):
        self.scenario = scenario
        self.network = network
        self.sim = sim
        self.adversary = adversary
        self.reseeds = 0
        self.halted: list[str] = []
        self.compromise: list[dict] = []

    def step(self, step) -> None:
        handler = getattr(self, f"_op_{step.op}")
        try:
            handler(**step.args)
        except ConfigError as exc:
            where = f"line {step.line}: " if step.line else ""
            raise ConfigError(f"script {where}{step.op}: {exc}") from None
        self.sim.run()

    def _holder(self, a: str, b: str) -> tuple[str, str]:
        return self.network.holder(a, b)

    def _op_establish(self, a, b, repeat):
        holder, peer = self._holder(a, b)
        for _ in range(repeat):
            self.sim.establish(holder, peer)

    def _op_relay(self, requester, target, manager, repeat):
        for _ in range(repeat):
            self.sim.relay(requester, manager, target)

    def _op_authenticate(self, verifier, prover, repeat, counterfeit):
        actor = self.sim.actors[prover]
        genuine = dict(actor.tokens)
        if counterfeit:
            # same identity and helper data, different physical token
            rng = np.random.default_rng(self.sim.rng.integers(2**63))
            actor.tokens = {
                tid: Token(tid, rng.bytes(32), t.strength, t.challenge_space_bits, t.intra_error_rate)
                for tid, t in genuine.items()
            }
            actor.counterfeit = True
        try:
            for _ in range(repeat):
                self.sim.authenticate(verifier, prover)
            self.sim.run()
        finally:
            actor.tokens = genuine
            actor.counterfeit = False

    def _op_qkd(self, a, b, repeat):
        for _ in range(repeat):
            self.sim.qkd(a, b)

    def _op_send(self, a, b, message, repeat):
        for _ in range(repeat):
            self.sim.send_data(a, b, message.encode())

    def _op_sustain(self, a, b, sessions):
        """Back-to-back QKD sessions, re-seeding from the CRP database whenever the pool runs short."""
        holder, peer = self._holder(a, b)
        cfg = self.sim.config
        link = f"{a}<->{b}"
        for _ in range(sessions):
            pool = self.sim.actors[a].pool(b)
            while cfg.its_auth and pool.available_bits < cfg.auth_budget:
                session = self.sim.establish(holder, peer)
                self.sim.run()
                self.reseeds += 1
                self.sim.emit("net", "reseed", session.session_id, f"{link} {session.outcome}")
                if session.outcome.kind is not OutcomeKind.ESTABLISHED:
                    self.halted.append(link)
                    self.sim.emit("net", "halt", session.session_id, f"{link} {session.outcome.reason}")
                    return
            self.sim.qkd(a, b)
            self.sim.run()

    def _op_attack(self, action, requester, manager, target, count):
        if self.adversary is None:
            raise ConfigError("attack step needs an adversary section")
        try:
            self.adversary.act(
                action, requester=requester, manager=manager, target=target,
                count=count, key_bits=self.sim.config.relay_key_bits,
            )
        except ParameterError as exc:
            raise ConfigError(str(exc)) from None

    def _db(self, db_id: str):
        for db in self.network.databases:
            if db.db_id == db_id:
                return db
        raise ConfigError(f"unknown database {db_id!r}")

    def _op_compromise(self, database, target_side, steal_token, against):
        if not isinstance(self.adversary, DbCompromise):
            raise ConfigError("compromise step needs a db_compromise adversary")
        observed = self._db(database).snapshot()
        self.adversary.snapshots.append(observed)
        if steal_token:
            owner = next((a for a in self.network.actors.values() if steal_token in a.tokens), None)
            if owner is None:
                raise ConfigError(f"unknown token {steal_token!r}")
            self.adversary.stolen_tokens[steal_token] = owner.tokens[steal_token]
            self.adversary.stolen_helpers[steal_token] = owner.helpers[steal_token]
        subject = self._db(against).snapshot() if against else observed
        if subject.key_bits > MAX_EXHAUSTIVE_BITS:
            self.compromise.append({"db_id": subject.db_id, "skipped": f"keys wider than {MAX_EXHAUSTIVE_BITS} bits"})
            return
        report = compromise_database(self.adversary, subject, target_side, observed, self.sim.config.extractor)
        self.compromise.append({**report.summary(), "observed": observed.db_id})
        self.sim.emit("adversary", "compromise", "", f"{subject.db_id} uniform={report.uniform} recovered={report.recovered}")


def collect_metrics(run: _Run) -> Metrics:
    sim, m = run.sim, Metrics()
    sessions: list[Session] = list(sim.sessions.values())
    m.sessions = len(sessions)
    outcome_counts: Counter = Counter()
    aborts: Counter = Counter()
    for s in sessions:
        outcome_counts[f"{s.protocol.value}:{s.outcome}"] += 1
        if s.outcome.kind.failed:
            aborts[s.outcome.reason or s.outcome.kind.value] += 1
        if s.outcome.kind is OutcomeKind.ESTABLISHED and s.protocol in KEY_PROTOCOLS:
            m.keys_established += 1
        if s.outcome.kind is OutcomeKind.DELIVERED:
            m.messages_delivered += 1
        if s.attacked and s.outcome.kind in SUCCESS:
            m.adversary_success += 1
    m.outcomes = dict(sorted(outcome_counts.items()))
    m.aborts = dict(sorted(aborts.items()))
    for db in run.network.databases:
        m.databases[db.db_id] = db.counts()
    for actor in sim.actors.values():
        for peer, pool in sorted(actor.pools.items()):
            m.pools[f"{actor.actor_id}->{peer}"] = {
                "size": pool.size, "consumed": pool.consumed_bits, "available": pool.available_bits,
            }
    m.pools = dict(sorted(m.pools.items()))
    if run.adversary is not None:
        m.adversary = run.adversary.report()
        m.messages_decrypted = len(getattr(run.adversary, "decrypted", []))
    m.reseeds = run.reseeds
    m.halted_links = run.halted
    m.compromise = run.compromise
    return m


def run_scenario(scenario, seed: int | None = None, network: Network | None = None) -> RunResult:
    """Provision (unless ``network`` is given), run the script, and gather metrics.

    The same scenario and seed always give a byte-identical event log.
    """
    seed = scenario.seed if seed is None else seed
    provision_seed, sim_seed, adversary_seed = derive_seeds(seed)
    if network is None:
        network = build_topology(scenario.topology, provision_seed)
    adversary = make_adversary(scenario.adversary, network, adversary_seed)
    sim = Simulator(network.actors, scenario.protocol, sim_seed, adversary)
    sim.emit("net", "scenario", "", f"seed={seed} mode={network.mode.value} users={','.join(network.users)}")
    run = _Run(scenario, network, sim, adversary)
    for step in scenario.script:
        run.step(step)
    return RunResult(sim.log, collect_metrics(run), sim, network)


def write_outputs(result: RunResult, scenario, out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    log_path = out / scenario.outputs.get("log", "events.log")
    metrics_path = out / scenario.outputs.get("metrics", "metrics.json")
    result.log.write(log_path)
    metrics_path.write_text(result.metrics.to_json())
    return [log_path, metrics_path]
