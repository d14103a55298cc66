"""Writing a provisioned network to disk and reading it back.

Layout of a state directory::

    manifest.json        topology, actors, database index (no secrets)
    tokens.json          sealed store: token seeds and computational keys, mode 0600
    databases/*.crpdb    one CRPDB1 file per database
    helpers/*.json       public helper data, one file per token
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict
from pathlib import Path

from .crpstore import CrpDatabase, HelperStore
from .errors import ConfigError, FormatError
from .protocols.actors import Actor, ActorIdentity, ActorRole
from .puf import ExtractorParams, Strength, Token
from .sim.topology import Network, TopologyConfig, TopologyMode, databases_required

MANIFEST_FORMAT = "pufkeys-manifest-1"
SEALED_MODE = 0o600


def _file_stem(name: str) -> str:
    return name.replace("/", "_").replace("~", "__")


def _write_sealed(path: Path, text: str) -> None:
    fd = os.open(path, os.O_WRONLY | os.O_CREAT | os.O_TRUNC, SEALED_MODE)
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    # O_CREAT does not tighten an existing file
    os.chmod(path, SEALED_MODE)


def save_network(network: Network, out_dir: str | Path) -> dict:
    out = Path(out_dir)
    (out / "databases").mkdir(parents=True, exist_ok=True)
    (out / "helpers").mkdir(parents=True, exist_ok=True)

    db_index = []
    for db in network.databases:
        holder = next(a for a in network.actors.values() if db in a.databases.values())
        peer = next(p for p, d in holder.databases.items() if d is db)
        name = f"{_file_stem(db.db_id)}.crpdb"
        db.save(out / "databases" / name)
        db_index.append({"db_id": db.db_id, "file": f"databases/{name}", "holder": holder.actor_id, "peer": peer, "entries": len(db)})

    tokens, comp_keys, actors = {}, [], {}
    for actor in network.actors.values():
        for token_id, token in actor.tokens.items():
            tokens[token_id] = {
                "owner": actor.actor_id,
                "disorder_seed": token.disorder_seed.hex(),
                "strength": token.strength.value,
                "challenge_space_bits": token.challenge_space_bits,
                "intra_error_rate": token.intra_error_rate,
            }
            (out / "helpers" / f"{_file_stem(token_id)}.json").write_text(actor.helpers[token_id].to_json() + "\n")
        for peer, key in actor.comp_keys.items():
            if actor.actor_id < peer:
                comp_keys.append({"a": actor.actor_id, "b": peer, "key": key.hex()})
        actors[actor.actor_id] = {
            "serial": int.from_bytes(actor.identity.id_string, "big"),
            "role": actor.identity.role.value,
            "tokens": sorted(actor.tokens),
            "token_for_peer": dict(sorted(actor.token_for_peer.items())),
        }
    _write_sealed(out / "tokens.json", json.dumps({"tokens": tokens, "comp_keys": comp_keys}, indent=2, sort_keys=True) + "\n")

    cfg = network.config
    manifest = {
        "format": MANIFEST_FORMAT,
        "mode": cfg.mode.value,
        "users": network.users,
        "kdc": network.kdc is not None,
        "config": {
            "db_size": cfg.db_size,
            "challenge_bits": cfg.challenge_bits,
            "intra_error_rate": cfg.intra_error_rate,
            "comp_keys": cfg.comp_keys,
            "extractor": asdict(cfg.extractor),
        },
        "counts": network.counts(),
        "expected_databases": databases_required(cfg.mode, len(network.users)),
        "databases": db_index,
        "actors": actors,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def load_network(state_dir: str | Path, journal: bool = False) -> Network:
    """Rebuild a network from ``state_dir``.

    With ``journal=False`` databases are detached from their files, so a
    simulation consumes entries in memory only and the state stays reusable.
    """
    root = Path(state_dir)
    try:
        manifest = json.loads((root / "manifest.json").read_text())
        sealed = json.loads((root / "tokens.json").read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{root}: corrupt state file: {exc.msg}", exc.lineno) from None
    if manifest.get("format") != MANIFEST_FORMAT:
        raise FormatError(f"{root / 'manifest.json'}: not a {MANIFEST_FORMAT} manifest")
    c = manifest["config"]
    config = TopologyConfig(
        TopologyMode(manifest["mode"]),
        tuple(manifest["users"]),
        c["db_size"],
        c["challenge_bits"],
        c["intra_error_rate"],
        ExtractorParams(**c["extractor"]),
        c["comp_keys"],
    )
    network = Network(config)
    for actor_id, info in manifest["actors"].items():
        role = ActorRole(info["role"])
        actor = Actor(ActorIdentity(actor_id, info["serial"].to_bytes(8, "big"), role))
        for token_id in info["tokens"]:
            t = sealed["tokens"].get(token_id)
            if t is None:
                raise ConfigError(f"sealed store has no token {token_id!r}")
            actor.tokens[token_id] = Token(
                token_id, bytes.fromhex(t["disorder_seed"]), Strength(t["strength"]),
                t["challenge_space_bits"], t["intra_error_rate"],
            )
            actor.helpers[token_id] = HelperStore.from_json((root / "helpers" / f"{_file_stem(token_id)}.json").read_text())
        actor.token_for_peer = dict(info["token_for_peer"])
        network.actors[actor_id] = actor
    for rec in manifest["databases"]:
        db = CrpDatabase.load(root / rec["file"], config.challenge_bits)
        if not journal:
            db.path = None
        network.actors[rec["holder"]].databases[rec["peer"]] = db
        network.databases.append(db)
    for rec in sealed["comp_keys"]:
        key = bytes.fromhex(rec["key"])
        network.actors[rec["a"]].comp_keys[rec["b"]] = key
        network.actors[rec["b"]].comp_keys[rec["a"]] = key
    return network
