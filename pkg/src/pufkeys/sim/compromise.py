"""What an adversary learns from a stolen CRP database.

At toy key sizes the question is answered exactly: enumerate every pair
of individual keys, keep those consistent with what the adversary holds,
and marginalise. A joint key alone leaves every candidate equally likely;
a stolen token for one side pins the other side down completely.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import bits as B
from ..crpstore import CrpDatabase, HelperStore
from ..errors import ParameterError, ReconciliationFailure
from ..puf import DEFAULT_PARAMS, Challenge, ExtractorParams, Token, reproduce
from .adversary import DbCompromise

MAX_EXHAUSTIVE_BITS = 8


def key_posterior(
    key_bits: int,
    joint: int | None = None,
    known_u: int | None = None,
    known_v: int | None = None,
    target: str = "u",
) -> np.ndarray:
    """Posterior over one individual key given the adversary's observations.

    Both keys start independent and uniform. ``joint`` constrains
    ``k_u XOR k_v``; ``known_u``/``known_v`` pin one key outright.
    """
    if key_bits > MAX_EXHAUSTIVE_BITS:
        raise ParameterError(f"exhaustive enumeration is limited to {MAX_EXHAUSTIVE_BITS}-bit keys")
    size = 1 << key_bits
    ku, kv = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    weight = np.ones((size, size))
    if joint is not None:
        weight *= (ku ^ kv) == joint
    if known_u is not None:
        weight *= ku == known_u
    if known_v is not None:
        weight *= kv == known_v
    marginal = weight.sum(axis=1 if target == "u" else 0)
    return marginal / marginal.sum()


@dataclass
class EntryInference:
    challenge: Challenge
    candidates: int
    max_deviation: float
    recovered: B.Bits | None = field(default=None, repr=False)


@dataclass
class CompromiseReport:
    db_id: str
    key_bits: int
    target: str
    entries: list[EntryInference]

    @property
    def uniform(self) -> bool:
        full = 1 << self.key_bits
        return all(e.candidates == full and e.max_deviation == 0.0 for e in self.entries)

    @property
    def recovered(self) -> int:
        return sum(e.recovered is not None for e in self.entries)

    def summary(self) -> dict:
        return {
            "db_id": self.db_id,
            "key_bits": self.key_bits,
            "target": self.target,
            "entries": len(self.entries),
            "uniform_posterior": self.uniform,
            "keys_recovered": self.recovered,
            "min_candidates": min((e.candidates for e in self.entries), default=0),
        }


def _stolen_key(adversary: DbCompromise, token_id: str, challenge: Challenge, params) -> int | None:
    token: Token | None = adversary.stolen_tokens.get(token_id)
    helpers: HelperStore | None = adversary.stolen_helpers.get(token_id)
    if token is None or helpers is None or challenge not in helpers:
        return None
    try:
        key = reproduce(token, challenge, helpers[challenge], adversary.rng, params)
    except ReconciliationFailure:
        return None
    return B.to_int(key.bits)


def compromise_database(
    adversary: DbCompromise,
    snapshot: CrpDatabase,
    target: str = "u",
    observed: CrpDatabase | None = None,
    params: ExtractorParams = DEFAULT_PARAMS,
) -> CompromiseReport:
    """Infer individual keys of ``snapshot`` (side ``target``) from what ``adversary`` holds.

    ``observed`` is the database the adversary actually read; it defaults to
    ``snapshot``. Passing a different database asks what reading one
    user's database reveals about another user's keys.
    """
    observed = snapshot if observed is None else observed
    same_db = observed is snapshot or observed.db_id == snapshot.db_id
    other_side = snapshot.owner_v if target == "u" else snapshot.owner_u
    entries = []
    for entry in snapshot.entries:
        joint = B.to_int(entry.joint_key) if same_db else None
        side_key = _stolen_key(adversary, other_side, entry.challenge, params)
        if target == "u":
            posterior = key_posterior(snapshot.key_bits, joint, known_v=side_key, target="u")
        else:
            posterior = key_posterior(snapshot.key_bits, joint, known_u=side_key, target="v")
        support = posterior[posterior > 0]
        nonzero = int(support.size)
        deviation = float(np.abs(support - 1.0 / nonzero).max())
        recovered = B.from_int(int(np.argmax(posterior)), snapshot.key_bits) if nonzero == 1 else None
        entries.append(EntryInference(entry.challenge, nonzero, deviation, recovered))
    return CompromiseReport(snapshot.db_id, snapshot.key_bits, target, entries)
