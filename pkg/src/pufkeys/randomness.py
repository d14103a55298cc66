"""Frequency-based randomness tests (monobit, block frequency, runs).

These follow the SP 800-22 definitions and are used to certify that PUF
keys and stored joint keys look uniformly random.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaincc

from .errors import PrecheckFailed, SequenceTooShort

DEFAULT_ALPHA = 0.01
MIN_LENGTH = 100


@dataclass(frozen=True)
class TestResult:
    name: str
    statistic: float
    p_value: float
    alpha: float = DEFAULT_ALPHA

    __test__ = False  # not a pytest class

    @property
    def passed(self) -> bool:
        return self.p_value >= self.alpha

    def format(self) -> str:
        return f"{self.name} {self.statistic:.6f} {self.p_value:.6f} {'pass' if self.passed else 'fail'}"


def _as_array(bits) -> np.ndarray:
    return np.asarray(bits, dtype=np.int64)


def monobit_test(bits, alpha: float = DEFAULT_ALPHA) -> TestResult:
    b = _as_array(bits)
    n = b.size
    if n < MIN_LENGTH:
        raise SequenceTooShort(f"monobit needs at least {MIN_LENGTH} bits, got {n}")
    s = int(2 * b.sum() - n)
    s_obs = abs(s) / math.sqrt(n)
    return TestResult("monobit", s_obs, math.erfc(s_obs / math.sqrt(2)), alpha)


def block_frequency_test(bits, block_len: int = 16, alpha: float = DEFAULT_ALPHA) -> TestResult:
    b = _as_array(bits)
    n_blocks = b.size // block_len
    if block_len < 1 or n_blocks < 10:
        raise SequenceTooShort(
            f"block frequency needs at least 10 blocks of {block_len} bits, got {b.size} bits"
        )
    proportions = b[: n_blocks * block_len].reshape(n_blocks, block_len).mean(axis=1)
    chi2 = 4.0 * block_len * float(((proportions - 0.5) ** 2).sum())
    return TestResult("block_frequency", chi2, float(gammaincc(n_blocks / 2.0, chi2 / 2.0)), alpha)


def runs_test(bits, alpha: float = DEFAULT_ALPHA) -> TestResult:
    b = _as_array(bits)
    n = b.size
    if n < MIN_LENGTH:
        raise SequenceTooShort(f"runs test needs at least {MIN_LENGTH} bits, got {n}")
    pi = b.sum() / n
    if abs(pi - 0.5) >= 2.0 / math.sqrt(n):
        raise PrecheckFailed(f"ones proportion {pi:.4f} fails the frequency pre-test")
    runs = 1 + int(np.count_nonzero(np.diff(b)))
    spread = 2.0 * n * pi * (1 - pi)
    p = math.erfc(abs(runs - spread) / (2.0 * math.sqrt(2.0 * n) * pi * (1 - pi)))
    return TestResult("runs", float(runs), p, alpha)


def run_battery(bits, alpha: float = DEFAULT_ALPHA, block_len: int = 16) -> list[TestResult]:
    """All three tests; a failed applicability check counts as p = 0."""
    results = []
    for name, test in (
        ("monobit", lambda: monobit_test(bits, alpha)),
        ("block_frequency", lambda: block_frequency_test(bits, block_len, alpha)),
        ("runs", lambda: runs_test(bits, alpha)),
    ):
        try:
            results.append(test())
        except (PrecheckFailed, SequenceTooShort):
            results.append(TestResult(name, float("nan"), 0.0, alpha))
    return results


def pass_rates(sequences, alpha: float = DEFAULT_ALPHA, block_len: int = 16) -> dict[str, float]:
    tally: dict[str, int] = {}
    count = 0
    for seq in sequences:
        count += 1
        for r in run_battery(seq, alpha, block_len):
            tally[r.name] = tally.get(r.name, 0) + r.passed
    return {name: passed / count for name, passed in tally.items()}


def format_section(results: list[TestResult]) -> str:
    return "".join(r.format() + "\n" for r in results)
