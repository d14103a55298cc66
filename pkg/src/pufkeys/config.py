"""Scenario files: YAML in, validated dataclasses out.

Every validation error names the offending field path and, when the
file is available, the line it sits on.

A complete scenario::

    seed: 7
    topology:
      mode: star            # star | full_mesh
      users: [alice, bob, charlie]
      db_size: 32
      challenge_bits: 64
      comp_keys: false
    puf:
      intra_error_rate: 0.1
      rep_n: 15
      key_bits: 256
      entropy_margin: 16
    mac:
      w: 64
      l: 8
      its_auth: true
      gate_requests: false
    qkd:
      auth_budget: 256
      fresh_bits: 4096
    relay:
      key_bits: 256
    entity_auth:
      mode: pooled          # pooled | inline
      s_bits: 64
      track_replays: true
    adversary:
      kind: mitm            # passive | mitm | challenge_tamper | replay | request_flood | db_compromise
      targets: [alice, charlie]
      attacks: [qkd, data]
    script:
      - {op: establish, a: kdc, b: alice, repeat: 6}
      - {op: qkd, a: alice, b: charlie}
      - {op: send, a: alice, b: charlie, message: "hello"}
    outputs:
      log: events.log
      metrics: metrics.json
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .errors import ConfigError
from .protocols.params import EntityAuthPolicy, ProtocolConfig
from .puf import ExtractorParams
from .sim.topology import KDC_ID, TopologyConfig, TopologyMode

ADVERSARY_KINDS = ("passive", "mitm", "challenge_tamper", "replay", "request_flood", "db_compromise")

# op name -> (required actor fields, optional fields with defaults)
SCRIPT_OPS: dict[str, tuple[tuple[str, ...], dict[str, Any]]] = {
    "establish": (("a", "b"), {"repeat": 1}),
    "relay": (("requester", "target"), {"manager": KDC_ID, "repeat": 1}),
    "authenticate": (("verifier", "prover"), {"repeat": 1, "counterfeit": False}),
    "qkd": (("a", "b"), {"repeat": 1}),
    "send": (("a", "b"), {"message": "test message", "repeat": 1}),
    # repeated QKD sessions that fall back to PUF re-seeding when the pool runs low
    "sustain": (("a", "b"), {"sessions": 1}),
    "attack": ((), {"action": "", "requester": "", "manager": KDC_ID, "target": "", "count": 1}),
    "compromise": (("database",), {"target_side": "u", "steal_token": "", "against": ""}),
}
ACTOR_FIELDS = {"a", "b", "requester", "target", "verifier", "prover", "manager"}


@dataclass(frozen=True)
class ScriptStep:
    op: str
    args: dict
    line: int | None = None


@dataclass(frozen=True)
class AdversarySpec:
    kind: str
    targets: tuple[str, ...] = ()
    attacks: tuple[str, ...] = ("establish", "qkd", "data")


@dataclass(frozen=True)
class Scenario:
    seed: int
    topology: TopologyConfig
    protocol: ProtocolConfig
    adversary: AdversarySpec | None = None
    script: tuple[ScriptStep, ...] = ()
    outputs: dict[str, str] = field(default_factory=dict)
    # directory written by ``provision``; provisioned in memory when absent
    state: str | None = None
    source: str | None = None


# -- YAML with line numbers ------------------------------------------------


def _record_lines(node: yaml.Node, path: tuple, lines: dict[tuple, int]) -> None:
    lines[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        for key_node, value_node in node.value:
            _record_lines(value_node, path + (key_node.value,), lines)
    elif isinstance(node, yaml.SequenceNode):
        for i, child in enumerate(node.value):
            _record_lines(child, path + (i,), lines)


def load_yaml(text: str, source: str = "<string>") -> tuple[Any, dict[tuple, int]]:
    """Parse YAML and map each field path to its 1-based line number."""
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}: " if mark else ""
        raise ConfigError(f"{source}: {where}invalid YAML: {getattr(exc, 'problem', None) or exc}") from None
    if node is None:
        raise ConfigError(f"{source}: empty configuration")
    lines: dict[tuple, int] = {}
    _record_lines(node, (), lines)
    return data, lines


class _Fields:
    """Typed accessors over a parsed mapping that report path and line on error."""

    def __init__(self, source: str, lines: dict[tuple, int]):
        self.source = source
        self.lines = lines

    def error(self, path: tuple, message: str) -> ConfigError:
        line = None
        for k in range(len(path), -1, -1):
            if path[:k] in self.lines:
                line = self.lines[path[:k]]
                break
        dotted = ".".join(str(p) for p in path) or "<root>"
        where = f"line {line}: " if line else ""
        return ConfigError(f"{self.source}: {where}{dotted}: {message}")

    def mapping(self, data: Any, path: tuple, allowed: set[str]) -> dict:
        if data is None:
            return {}
        if not isinstance(data, dict):
            raise self.error(path, "expected a mapping")
        for key in data:
            if key not in allowed:
                raise self.error(path + (key,), f"unknown field (allowed: {', '.join(sorted(allowed))})")
        return data

    def get(self, data: dict, path: tuple, key: str, kind: type, default: Any = None, required: bool = False):
        if key not in data:
            if required:
                raise self.error(path + (key,), "missing required field")
            return default
        value = data[key]
        ok = isinstance(value, kind) and not (kind in (int, float) and isinstance(value, bool))
        if kind is float and isinstance(value, int) and not isinstance(value, bool):
            value, ok = float(value), True
        if not ok:
            raise self.error(path + (key,), f"expected {kind.__name__}, got {type(value).__name__}")
        return value

    def choice(self, data: dict, path: tuple, key: str, options, default: str | None = None, required: bool = False) -> str:
        value = self.get(data, path, key, str, default, required)
        if value is not None and value not in options:
            raise self.error(path + (key,), f"must be one of {', '.join(options)}, got {value!r}")
        return value


def parse_scenario(text: str, source: str = "<string>") -> Scenario:
    data, lines = load_yaml(text, source)
    f = _Fields(source, lines)
    root = f.mapping(
        data, (),
        {"seed", "topology", "puf", "mac", "qkd", "relay", "entity_auth", "adversary", "script", "outputs", "state"},
    )
    seed = f.get(root, (), "seed", int, 0)
    if not 0 <= seed < 2**64:
        raise f.error(("seed",), "must be an unsigned 64-bit integer")

    puf = f.mapping(root.get("puf"), ("puf",), {"intra_error_rate", "rep_n", "key_bits", "entropy_margin", "raw_response_bits"})
    p = ("puf",)
    extractor = ExtractorParams(
        raw_response_bits=f.get(puf, p, "raw_response_bits", int, 4096),
        rep_n=f.get(puf, p, "rep_n", int, 15),
        key_bits=f.get(puf, p, "key_bits", int, 256),
        entropy_margin=f.get(puf, p, "entropy_margin", int, 16),
    )
    try:
        extractor.validate()
    except ValueError as exc:
        raise f.error(p, str(exc)) from None

    topo = f.mapping(root.get("topology"), ("topology",), {"mode", "users", "db_size", "challenge_bits", "comp_keys"})
    t = ("topology",)
    if "topology" not in root:
        raise f.error(t, "missing required section")
    users = f.get(topo, t, "users", list, required=True)
    for i, user in enumerate(users):
        if not isinstance(user, str) or not user:
            raise f.error(t + ("users", i), "user ids must be non-empty strings")
    mode = TopologyMode(f.choice(topo, t, "mode", [m.value for m in TopologyMode], required=True))
    topology = TopologyConfig(
        mode=mode,
        users=tuple(users),
        db_size=f.get(topo, t, "db_size", int, 1024),
        challenge_bits=f.get(topo, t, "challenge_bits", int, 64),
        intra_error_rate=f.get(puf, p, "intra_error_rate", float, 0.10),
        extractor=extractor,
        comp_keys=f.get(topo, t, "comp_keys", bool, False),
    )
    try:
        topology.validate()
    except ValueError as exc:
        raise f.error(t, str(exc)) from None

    mac = f.mapping(root.get("mac"), ("mac",), {"w", "l", "its_auth", "gate_requests"})
    qkd = f.mapping(root.get("qkd"), ("qkd",), {"auth_budget", "fresh_bits"})
    relay = f.mapping(root.get("relay"), ("relay",), {"key_bits"})
    ent = f.mapping(root.get("entity_auth"), ("entity_auth",), {"mode", "s_bits", "track_replays", "rotate"})
    w = f.get(mac, ("mac",), "w", int, 64)
    entity = EntityAuthPolicy(
        mode=f.choice(ent, ("entity_auth",), "mode", ["pooled", "inline"], "pooled"),
        l=f.get(mac, ("mac",), "l", int, 8),
        s_bits=f.get(ent, ("entity_auth",), "s_bits", int, 64),
        w=w,
        track_replays=f.get(ent, ("entity_auth",), "track_replays", bool, True),
        rotate=f.get(ent, ("entity_auth",), "rotate", bool, True),
    )
    protocol = ProtocolConfig(
        extractor=extractor,
        its_auth=f.get(mac, ("mac",), "its_auth", bool, True),
        confirm_w=w,
        gate_requests=f.get(mac, ("mac",), "gate_requests", bool, False),
        relay_key_bits=f.get(relay, ("relay",), "key_bits", int, 256),
        relay_w=w,
        auth_budget=f.get(qkd, ("qkd",), "auth_budget", int, 256),
        fresh_bits=f.get(qkd, ("qkd",), "fresh_bits", int, 4096),
        qkd_w=w,
        entity=entity,
    )
    try:
        protocol.validate()
    except ValueError as exc:
        raise f.error(("mac",), str(exc)) from None

    actors = set(topology.users) | ({KDC_ID} if topology.mode is TopologyMode.STAR else set())
    adversary = _parse_adversary(f, root.get("adversary"), actors)
    script = _parse_script(f, root.get("script"), actors)
    outputs = f.mapping(root.get("outputs"), ("outputs",), {"log", "metrics"})
    for key, value in outputs.items():
        if not isinstance(value, str):
            raise f.error(("outputs", key), "expected a file name")
    state = f.get(root, (), "state", str)
    return Scenario(seed, topology, protocol, adversary, script, dict(outputs), state, source)


def _parse_adversary(f: _Fields, data: Any, actors: set[str]) -> AdversarySpec | None:
    if data is None:
        return None
    path = ("adversary",)
    adv = f.mapping(data, path, {"kind", "targets", "attacks"})
    kind = f.choice(adv, path, "kind", ADVERSARY_KINDS, required=True)
    targets = f.get(adv, path, "targets", list, [])
    if targets and len(targets) != 2:
        raise f.error(path + ("targets",), "name exactly two actors")
    for i, name in enumerate(targets):
        if name not in actors:
            raise f.error(path + ("targets", i), f"unknown actor {name!r}")
    if kind == "mitm" and not targets:
        raise f.error(path + ("targets",), "a MitM adversary needs the two actors whose link it splices")
    attacks = f.get(adv, path, "attacks", list, ["establish", "qkd", "data"])
    for i, attack in enumerate(attacks):
        if attack not in ("establish", "qkd", "data"):
            raise f.error(path + ("attacks", i), f"unknown attack {attack!r}")
    return AdversarySpec(kind, tuple(targets), tuple(attacks))


def _parse_script(f: _Fields, data: Any, actors: set[str]) -> tuple[ScriptStep, ...]:
    if data is None:
        return ()
    if not isinstance(data, list):
        raise f.error(("script",), "expected a list of steps")
    steps = []
    for i, raw in enumerate(data):
        path = ("script", i)
        if not isinstance(raw, dict):
            raise f.error(path, "each step must be a mapping")
        op = f.choice(raw, path, "op", list(SCRIPT_OPS), required=True)
        required, optional = SCRIPT_OPS[op]
        f.mapping(raw, path, {"op", *required, *optional})
        args = dict(optional)
        for key in required:
            args[key] = f.get(raw, path, key, str, required=True)
        for key, default in optional.items():
            args[key] = f.get(raw, path, key, type(default), default)
        for key in ACTOR_FIELDS & set(args):
            if args[key] and args[key] not in actors:
                raise f.error(path + (key,), f"unknown actor {args[key]!r}")
        for key in ("repeat", "sessions", "count"):
            if key in args and args[key] < 0:
                raise f.error(path + (key,), "must be non-negative")
        steps.append(ScriptStep(op, args, f.lines.get(path)))
    return tuple(steps)


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    return parse_scenario(path.read_text(), str(path))
