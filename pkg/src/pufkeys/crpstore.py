"""XOR-masked challenge-response databases with single-use consumption.

A database for the token pair (u, v) stores, per challenge, only the joint
key ``k_u XOR k_v``. The holder consumes entries (irreversible status
change plus blacklist append); the counterpart keeps its own
:class:`Blacklist` of challenges it has already answered.

Persistence uses the line-oriented CRPDB1 journal::

    CRPDB1 <db_id> <owner_u> <owner_v> <key_bits>
    E <challenge-hex> <jointkey-hex>
    C <challenge-hex>
    B <challenge-hex>

``C``/``B`` records are appended on consumption; nothing is rewritten.
"""

from __future__ import annotations

import enum
import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import bits as B
from .errors import (
    AlreadyConsumed,
    DatabaseDepleted,
    DuplicateChallenge,
    FormatError,
    UnknownChallenge,
)
from .puf import DEFAULT_PARAMS, Challenge, ExtractorParams, HelperData, Token, enroll
from .randomness import MIN_LENGTH, TestResult, pass_rates, run_battery

MAGIC = "CRPDB1"


class EntryStatus(enum.Enum):
    AVAILABLE = "available"
    CONSUMED = "consumed"


@dataclass(eq=False)
class CrpEntry:
    challenge: Challenge
    joint_key: B.Bits = field(repr=False)
    status: EntryStatus = EntryStatus.AVAILABLE


class HelperStore:
    """Public helper data kept by one token owner, indexed by challenge."""

    def __init__(self, token_id: str, helpers: dict[Challenge, HelperData] | None = None):
        self.token_id = token_id
        self._helpers: dict[Challenge, HelperData] = dict(helpers or {})

    def __getitem__(self, challenge: Challenge) -> HelperData:
        try:
            return self._helpers[challenge]
        except KeyError:
            raise UnknownChallenge(f"no helper data for challenge {challenge.hex()}") from None

    def __contains__(self, challenge: Challenge) -> bool:
        return challenge in self._helpers

    def __len__(self) -> int:
        return len(self._helpers)

    def add(self, challenge: Challenge, helper: HelperData) -> None:
        self._helpers[challenge] = helper

    def challenges(self) -> list[Challenge]:
        return sorted(self._helpers)

    def to_json(self) -> str:
        records = [
            {"challenge": c.hex(), "nbits": c.nbits, **self._helpers[c].to_dict()}
            for c in self.challenges()
        ]
        return json.dumps({"token_id": self.token_id, "helpers": records}, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "HelperStore":
        doc = json.loads(text)
        store = cls(doc["token_id"])
        for rec in doc["helpers"]:
            store.add(Challenge.from_hex(rec["challenge"], rec["nbits"]), HelperData.from_dict(rec))
        return store


class Blacklist:
    """Challenges already used with one counterpart; optionally journaled to a file."""

    def __init__(self, path: Path | None = None, challenge_bits: int | None = None):
        self._seen: set[Challenge] = set()
        self.path = Path(path) if path else None
        if self.path and self.path.exists():
            for line in self.path.read_text().splitlines():
                if line.strip():
                    self._seen.add(Challenge.from_hex(line.strip(), challenge_bits))

    def __contains__(self, challenge: Challenge) -> bool:
        return challenge in self._seen

    def __len__(self) -> int:
        return len(self._seen)

    def add(self, challenge: Challenge) -> None:
        self._seen.add(challenge)
        if self.path:
            _append_durably(self.path, f"{challenge.hex()}\n")


@dataclass(eq=False)
class CrpDatabase:
    db_id: str
    owner_u: str
    owner_v: str
    key_bits: int
    challenge_bits: int
    entries: list[CrpEntry] = field(default_factory=list)
    blacklist: set[Challenge] = field(default_factory=set)
    path: Path | None = None
    _index: dict[Challenge, CrpEntry] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        for entry in self.entries:
            self._register(entry)

    def _register(self, entry: CrpEntry) -> None:
        if entry.challenge in self._index:
            raise DuplicateChallenge(f"challenge {entry.challenge.hex()} appears twice")
        if entry.joint_key.size != self.key_bits:
            raise ValueError(f"joint key has {entry.joint_key.size} bits, expected {self.key_bits}")
        self._index[entry.challenge] = entry

    def __len__(self) -> int:
        return len(self.entries)

    def entry(self, challenge: Challenge) -> CrpEntry:
        try:
            return self._index[challenge]
        except KeyError:
            raise UnknownChallenge(f"challenge {challenge.hex()} not in {self.db_id}") from None

    def available(self) -> list[CrpEntry]:
        return [e for e in self.entries if e.status is EntryStatus.AVAILABLE]

    def counts(self) -> dict[str, int]:
        consumed = sum(e.status is EntryStatus.CONSUMED for e in self.entries)
        return {"available": len(self.entries) - consumed, "consumed": consumed}

    def snapshot(self) -> "CrpDatabase":
        """A detached copy (no journal) for read-only inspection."""
        entries = [CrpEntry(e.challenge, e.joint_key.copy(), e.status) for e in self.entries]
        return CrpDatabase(
            self.db_id, self.owner_u, self.owner_v, self.key_bits, self.challenge_bits,
            entries, set(self.blacklist),
        )

    # -- persistence -------------------------------------------------------

    def header(self) -> str:
        return f"{MAGIC} {self.db_id} {self.owner_u} {self.owner_v} {self.key_bits}"

    def serialize(self) -> str:
        lines = [self.header()]
        lines += [f"E {e.challenge.hex()} {B.to_hex(e.joint_key)}" for e in self.entries]
        for e in self.entries:
            if e.status is EntryStatus.CONSUMED:
                lines.append(f"C {e.challenge.hex()}")
                if e.challenge in self.blacklist:
                    lines.append(f"B {e.challenge.hex()}")
        return "\n".join(lines) + "\n"

    def save(self, path: str | os.PathLike) -> None:
        """Write the whole journal atomically and attach it for future appends."""
        path = Path(path)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
        with os.fdopen(fd, "w") as fh:
            fh.write(self.serialize())
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
        self.path = path

    @classmethod
    def load(cls, path: str | os.PathLike, challenge_bits: int | None = None) -> "CrpDatabase":
        path = Path(path)
        db = parse(path.read_text(), challenge_bits)
        db.path = path
        return db


def _append_durably(path: Path, text: str) -> None:
    # one write() of the whole record group, then fsync
    with open(path, "a") as fh:
        fh.write(text)
        fh.flush()
        os.fsync(fh.fileno())


def parse(text: str, challenge_bits: int | None = None) -> CrpDatabase:
    """Parse a CRPDB1 journal.

    The header does not record the challenge width; when ``challenge_bits``
    is not given it is taken as four bits per hex digit of the first entry.
    """
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    else:
        raise FormatError("file does not end with a newline (truncated?)", len(lines))
    if not lines:
        raise FormatError("empty file", 1)
    head = lines[0].split(" ")
    if len(head) != 5 or head[0] != MAGIC:
        raise FormatError(f"bad header {lines[0]!r}", 1)
    try:
        key_bits = int(head[4])
    except ValueError:
        raise FormatError(f"bad key_bits {head[4]!r}", 1) from None
    if challenge_bits is None:
        first = next((ln.split(" ") for ln in lines[1:] if ln.startswith("E ")), None)
        challenge_bits = 4 * len(first[1]) if first and len(first) > 1 and first[1] else 64
    db = CrpDatabase(head[1], head[2], head[3], key_bits, challenge_bits)

    def challenge_at(token: str, lineno: int) -> Challenge:
        try:
            return Challenge.from_hex(token, challenge_bits)
        except ValueError as exc:
            raise FormatError(f"bad challenge: {exc}", lineno) from None

    for lineno, line in enumerate(lines[1:], start=2):
        fields = line.split(" ")
        kind = fields[0]
        if kind == "E" and len(fields) == 3:
            challenge = challenge_at(fields[1], lineno)
            try:
                joint = B.from_hex(fields[2], key_bits)
            except ValueError as exc:
                raise FormatError(f"bad joint key: {exc}", lineno) from None
            try:
                db_entry = CrpEntry(challenge, joint)
                db._register(db_entry)
            except DuplicateChallenge as exc:
                raise FormatError(str(exc), lineno) from None
            db.entries.append(db_entry)
        elif kind == "C" and len(fields) == 2:
            challenge = challenge_at(fields[1], lineno)
            if challenge not in db._index:
                raise FormatError(f"consumption of unknown challenge {fields[1]}", lineno)
            db._index[challenge].status = EntryStatus.CONSUMED
        elif kind == "B" and len(fields) == 2:
            db.blacklist.add(challenge_at(fields[1], lineno))
        else:
            raise FormatError(f"unrecognised record {line!r}", lineno)
    return db


# -- operations --------------------------------------------------------------


def build_database(
    token_u: Token,
    token_v: Token,
    challenges: list[Challenge],
    params: ExtractorParams = DEFAULT_PARAMS,
    db_id: str | None = None,
) -> tuple[CrpDatabase, HelperStore, HelperStore]:
    """Trusted-setup enrollment of both tokens on every challenge.

    Returns the database together with the helper stores that go to the
    owners of ``token_u`` and ``token_v``. Individual keys are dropped.
    """
    if len(set(challenges)) != len(challenges):
        raise DuplicateChallenge("challenge list contains duplicates")
    nbits = token_u.challenge_space_bits
    db = CrpDatabase(
        db_id or f"{token_u.token_id}~{token_v.token_id}",
        token_u.token_id,
        token_v.token_id,
        params.key_bits,
        nbits,
    )
    helpers_u, helpers_v = HelperStore(token_u.token_id), HelperStore(token_v.token_id)
    for c in challenges:
        h_u, k_u = enroll(token_u, c, params)
        h_v, k_v = enroll(token_v, c, params)
        helpers_u.add(c, h_u)
        helpers_v.add(c, h_v)
        entry = CrpEntry(c, B.xor(k_u.bits, k_v.bits))
        db._register(entry)
        db.entries.append(entry)
    return db, helpers_u, helpers_v


def draw_random_entry(db: CrpDatabase, rng: np.random.Generator) -> CrpEntry:
    pool = db.available()
    if not pool:
        raise DatabaseDepleted(f"database {db.db_id} has no available entries")
    return pool[int(rng.integers(len(pool)))]


def consume_entry(db: CrpDatabase, challenge: Challenge) -> B.Bits:
    entry = db.entry(challenge)
    if entry.status is EntryStatus.CONSUMED:
        raise AlreadyConsumed(f"challenge {challenge.hex()} in {db.db_id} was already used")
    if db.path is not None:
        _append_durably(db.path, f"C {challenge.hex()}\nB {challenge.hex()}\n")
    entry.status = EntryStatus.CONSUMED
    db.blacklist.add(challenge)
    return entry.joint_key.copy()


@dataclass
class AuditReport:
    db_id: str
    available: int
    consumed: int
    blacklist_size: int
    violations: list[str]
    rng_summary: list[TestResult]
    pass_rates: dict[str, float]
    keys_tested: int

    @property
    def consistent(self) -> bool:
        return not self.violations

    def render(self) -> str:
        lines = [
            f"database {self.db_id}",
            f"available {self.available}",
            f"consumed {self.consumed}",
            f"blacklist {self.blacklist_size}",
            f"consistency {'ok' if self.consistent else 'violated'}",
        ]
        lines += [f"violation {v}" for v in self.violations]
        lines.append(f"rng keys_tested {self.keys_tested}")
        lines += [r.format() for r in self.rng_summary]
        lines += [f"pass_rate {name} {rate:.6f}" for name, rate in self.pass_rates.items()]
        return "\n".join(lines) + "\n"


def audit_database(db: CrpDatabase, alpha: float = 0.01, block_len: int = 16) -> AuditReport:
    counts = db.counts()
    violations = []
    for e in db.entries:
        if e.status is EntryStatus.CONSUMED and e.challenge not in db.blacklist:
            violations.append(f"consumed challenge {e.challenge.hex()} missing from blacklist")

    keys = [e.joint_key for e in db.entries]
    testable = db.key_bits >= MIN_LENGTH and db.key_bits // block_len >= 10
    summary = run_battery(np.concatenate(keys), alpha, block_len) if keys else []
    rates = pass_rates(keys, alpha, block_len) if keys and testable else {}
    return AuditReport(
        db.db_id, counts["available"], counts["consumed"], len(db.blacklist),
        violations, summary, rates, len(keys) if testable else 0,
    )

