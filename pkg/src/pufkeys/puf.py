"""Emulated PUF tokens and the fuzzy extractor that turns their noisy
responses into stable keys.

A token is a keyed PRF over a secret disorder seed; every evaluation flips
each response bit independently with the token's intra-distance error rate.
Keys are extracted with a code-offset secure sketch over a repetition code
followed by a seeded Toeplitz hash.
"""

from __future__ import annotations

import enum
import functools
import hashlib
import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import toeplitz

from . import bits as B
from .errors import (
    ChallengeLengthMismatch,
    CrpSpaceTooLarge,
    DuplicateChallenge,
    ParameterError,
    ReconciliationFailure,
)

# Largest challenge space (in bits) that crp_table will enumerate.
MAX_ENUMERABLE_BITS = 16
CHECKSUM_BYTES = 4


class Strength(enum.Enum):
    WEAK = "weak"
    STRONG = "strong"

    @property
    def default_challenge_bits(self) -> int:
        return 10 if self is Strength.WEAK else 64


@dataclass(frozen=True, order=True)
class Challenge:
    value: int
    nbits: int

    def __post_init__(self):
        if self.nbits <= 0 or self.value < 0 or self.value >> self.nbits:
            raise ParameterError(f"challenge {self.value} does not fit in {self.nbits} bits")

    @classmethod
    def random(cls, rng: np.random.Generator, nbits: int) -> "Challenge":
        return cls(B.to_int(B.random_bits(rng, nbits)), nbits)

    @classmethod
    def from_hex(cls, text: str, nbits: int) -> "Challenge":
        return cls(B.to_int(B.from_hex(text, nbits)), nbits)

    @property
    def bits(self) -> B.Bits:
        return B.from_int(self.value, self.nbits)

    def hex(self) -> str:
        return format(self.value, f"0{B.hex_width(self.nbits)}x")

    def to_bytes(self) -> bytes:
        return self.nbits.to_bytes(2, "big") + self.value.to_bytes((self.nbits + 7) // 8, "big")


@dataclass(frozen=True)
class Token:
    token_id: str
    disorder_seed: bytes = field(repr=False)
    strength: Strength = Strength.STRONG
    challenge_space_bits: int = 64
    intra_error_rate: float = 0.10

    def __post_init__(self):
        if len(self.disorder_seed) != 32:
            raise ParameterError("disorder_seed must be 256 bits")
        if not 0.0 <= self.intra_error_rate < 0.5:
            raise ParameterError(f"intra_error_rate {self.intra_error_rate} outside [0, 0.5)")
        if self.challenge_space_bits <= 0:
            raise ParameterError("challenge_space_bits must be positive")

    @classmethod
    def create(
        cls,
        token_id: str,
        rng: np.random.Generator,
        strength: Strength = Strength.STRONG,
        intra_error_rate: float = 0.10,
        challenge_space_bits: int | None = None,
    ) -> "Token":
        seed = rng.bytes(32)
        bits = challenge_space_bits or strength.default_challenge_bits
        return cls(token_id, seed, strength, bits, intra_error_rate)

    def check_challenge(self, challenge: Challenge) -> None:
        if challenge.nbits != self.challenge_space_bits:
            raise ChallengeLengthMismatch(
                f"token {self.token_id} expects {self.challenge_space_bits}-bit challenges, "
                f"got {challenge.nbits}"
            )


@dataclass(frozen=True)
class ExtractorParams:
    raw_response_bits: int = 4096
    rep_n: int = 15
    key_bits: int = 256
    entropy_margin: int = 16
    # reliability list decoding: the least reliable blocks are candidates
    # for flipping, checked against the embedded checksum
    list_candidates: int = 12
    list_max_flips: int = 3

    @property
    def n_blocks(self) -> int:
        return self.raw_response_bits // self.rep_n

    @property
    def key_budget(self) -> int:
        return self.n_blocks - self.entropy_margin

    def validate(self) -> None:
        if self.rep_n < 1 or self.rep_n % 2 == 0:
            raise ParameterError(f"rep_n must be odd and positive, got {self.rep_n}")
        if self.raw_response_bits < self.rep_n:
            raise ParameterError("raw response shorter than one repetition block")
        if self.key_bits < 1:
            raise ParameterError("key_bits must be positive")
        if self.key_bits > self.key_budget:
            raise ParameterError(
                f"key_bits={self.key_bits} exceeds extractable budget "
                f"{self.n_blocks} - {self.entropy_margin} = {self.key_budget}"
            )


DEFAULT_PARAMS = ExtractorParams()


@dataclass(frozen=True, eq=False)
class HelperData:
    code_offset: B.Bits = field(repr=False)
    hash_seed: int
    key_bits: int
    rep_n: int
    checksum: bytes

    def __eq__(self, other):
        if not isinstance(other, HelperData):
            return NotImplemented
        return (
            np.array_equal(self.code_offset, other.code_offset)
            and (self.hash_seed, self.key_bits, self.rep_n, self.checksum)
            == (other.hash_seed, other.key_bits, other.rep_n, other.checksum)
        )

    def to_dict(self) -> dict:
        return {
            "code_offset": B.to_hex(self.code_offset),
            "raw_bits": int(self.code_offset.size),
            "hash_seed": self.hash_seed,
            "key_bits": self.key_bits,
            "rep_n": self.rep_n,
            "checksum": self.checksum.hex(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HelperData":
        return cls(
            code_offset=B.from_hex(d["code_offset"], d["raw_bits"]),
            hash_seed=int(d["hash_seed"]),
            key_bits=int(d["key_bits"]),
            rep_n=int(d["rep_n"]),
            checksum=bytes.fromhex(d["checksum"]),
        )


@dataclass(frozen=True, eq=False)
class PufKey:
    bits: B.Bits = field(repr=False)
    source: tuple[tuple[str, Challenge], ...]

    def __len__(self) -> int:
        return int(self.bits.size)

    def __eq__(self, other):
        if not isinstance(other, PufKey):
            return NotImplemented
        return np.array_equal(self.bits, other.bits) and self.source == other.source

    def hex(self) -> str:
        return B.to_hex(self.bits)


def reference_response(token: Token, challenge: Challenge, n_bits: int = 4096) -> B.Bits:
    """The noise-free response: PRF(disorder_seed, challenge) expanded to n_bits."""
    token.check_challenge(challenge)
    stream = B.prf(token.disorder_seed, b"puf-response" + challenge.to_bytes(), (n_bits + 7) // 8)
    return B.from_bytes(stream, n_bits)


def evaluate_raw(
    token: Token,
    challenge: Challenge,
    noise_source: np.random.Generator | None,
    raw_response_bits: int = 4096,
) -> B.Bits:
    response = reference_response(token, challenge, raw_response_bits)
    if token.intra_error_rate == 0.0:
        return response
    if noise_source is None:
        raise ParameterError(f"token {token.token_id} is noisy; a noise source is required")
    flips = noise_source.random(raw_response_bits) < token.intra_error_rate
    return response ^ flips.astype(np.uint8)


def default_hash_seed(token: Token, challenge: Challenge) -> int:
    digest = hashlib.sha256(b"extract|" + token.token_id.encode() + b"|" + challenge.to_bytes())
    return int.from_bytes(digest.digest()[:8], "big")


@functools.lru_cache(maxsize=64)
def _toeplitz_matrix(seed: int, rows: int, cols: int) -> np.ndarray:
    diag = np.random.default_rng(seed).integers(0, 2, size=rows + cols - 1, dtype=np.uint8)
    matrix = toeplitz(diag[cols - 1:], diag[cols - 1::-1]).astype(np.int32)
    matrix.setflags(write=False)
    return matrix


def toeplitz_hash(seed: int, data: B.Bits, out_bits: int) -> B.Bits:
    """Universal hash of ``data`` to ``out_bits`` bits via a seeded Toeplitz matrix over GF(2)."""
    if data.size == 0:
        return np.zeros(out_bits, dtype=np.uint8)
    matrix = _toeplitz_matrix(seed, out_bits, int(data.size))
    return ((matrix @ data.astype(np.int32)) & 1).astype(np.uint8)


def _checksum(key_bits: B.Bits) -> bytes:
    return hashlib.sha256(b"pufkey-check" + B.to_bytes(key_bits)).digest()[:CHECKSUM_BYTES]


def enroll(
    token: Token,
    challenge: Challenge,
    params: ExtractorParams = DEFAULT_PARAMS,
    hash_seed: int | None = None,
) -> tuple[HelperData, PufKey]:
    params.validate()
    response = reference_response(token, challenge, params.raw_response_bits)
    nb, r = params.n_blocks, params.rep_n
    blocks = response[: nb * r].reshape(nb, r)
    # Syndrome form of the code-offset sketch: the secret of each block is
    # its first bit, so the offset leaks nothing beyond the code syndrome.
    secret = blocks[:, 0].copy()
    offset = np.zeros(params.raw_response_bits, dtype=np.uint8)
    offset[: nb * r] = (blocks ^ secret[:, None]).ravel()

    if hash_seed is None:
        hash_seed = default_hash_seed(token, challenge)
    key_bits = toeplitz_hash(hash_seed, secret, params.key_bits)
    helper = HelperData(offset, hash_seed, params.key_bits, r, _checksum(key_bits))
    return helper, PufKey(key_bits, ((token.token_id, challenge),))


def _flip_sets(order: list[int], max_flips: int, margins: np.ndarray):
    """Subsets of candidate blocks, most likely first (smallest total margin)."""
    subsets = [
        combo
        for size in range(1, max_flips + 1)
        for combo in itertools.combinations(order, size)
    ]
    subsets.sort(key=lambda c: (int(margins[list(c)].sum()), len(c), c))
    return subsets


def decode_secret(
    response: B.Bits,
    helper: HelperData,
    params: ExtractorParams = DEFAULT_PARAMS,
    verify: bool = True,
) -> B.Bits:
    """Recover the enrolled per-block secret from a noisy response.

    Majority vote per repetition block first; if the result fails the
    checksum, the least reliable blocks are flipped in likelihood order.
    With ``verify=False`` the plain majority decision is returned unchecked.
    """
    r = helper.rep_n
    nb = response.size // r
    noisy = (response[: nb * r] ^ helper.code_offset[: nb * r]).reshape(nb, r)
    votes = noisy.sum(axis=1, dtype=np.int32)
    secret = (votes > r // 2).astype(np.uint8)

    def matches(candidate: B.Bits) -> bool:
        key = toeplitz_hash(helper.hash_seed, candidate, helper.key_bits)
        return _checksum(key) == helper.checksum

    if not verify or matches(secret):
        return secret
    margins = np.abs(2 * votes - r)
    order = sorted(range(nb), key=lambda i: (int(margins[i]), i))[: params.list_candidates]
    for flips in _flip_sets(order, params.list_max_flips, margins):
        trial = secret.copy()
        trial[list(flips)] ^= 1
        if matches(trial):
            return trial
    raise ReconciliationFailure("decoded response does not match the enrolled checksum")


def reproduce(
    token: Token,
    challenge: Challenge,
    helper: HelperData,
    noise_source: np.random.Generator | None,
    params: ExtractorParams = DEFAULT_PARAMS,
    verify: bool = True,
) -> PufKey:
    response = evaluate_raw(token, challenge, noise_source, helper.code_offset.size)
    secret = decode_secret(response, helper, params, verify)
    key_bits = toeplitz_hash(helper.hash_seed, secret, helper.key_bits)
    return PufKey(key_bits, ((token.token_id, challenge),))


def concat_keys(keys: list[PufKey]) -> PufKey:
    if not keys:
        raise ParameterError("nothing to concatenate")
    source = tuple(itertools.chain.from_iterable(k.source for k in keys))
    tokens = {tid for tid, _ in source}
    if len(tokens) > 1:
        raise ParameterError(f"keys come from several tokens: {sorted(tokens)}")
    challenges = [c for _, c in source]
    if len(set(challenges)) != len(challenges):
        raise DuplicateChallenge("two source keys share a challenge")
    return PufKey(np.concatenate([k.bits for k in keys]), source)


def challenge_space(token: Token):
    """Iterate every challenge of a weak token."""
    if token.challenge_space_bits > MAX_ENUMERABLE_BITS:
        raise CrpSpaceTooLarge(
            f"token {token.token_id} has 2^{token.challenge_space_bits} challenges; "
            f"enumeration is limited to 2^{MAX_ENUMERABLE_BITS}"
        )
    for value in range(1 << token.challenge_space_bits):
        yield Challenge(value, token.challenge_space_bits)


def crp_table(token: Token, params: ExtractorParams = DEFAULT_PARAMS) -> list[tuple[Challenge, HelperData, PufKey]]:
    """Enroll every challenge of an enumerable (weak) token."""
    return [(c, *enroll(token, c, params)) for c in challenge_space(token)]


def distinct_challenges(rng: np.random.Generator, nbits: int, count: int) -> list[Challenge]:
    if count > (1 << nbits):
        raise ParameterError(f"cannot draw {count} distinct {nbits}-bit challenges")
    if nbits <= 20:
        values = rng.choice(1 << nbits, size=count, replace=False)
        return [Challenge(int(v), nbits) for v in values]
    seen: dict[int, None] = {}
    while len(seen) < count:
        seen.setdefault(B.to_int(B.random_bits(rng, nbits)))
    return [Challenge(v, nbits) for v in seen]
