import json
import math

import mpmath
import numpy as np
import pytest

from conftest import DATA
from oracles import block_frequency_p, monobit_p, reference_bits, runs_p
from pufkeys.errors import PrecheckFailed, SequenceTooShort
from pufkeys.randomness import (
    TestResult,
    block_frequency_test,
    format_section,
    monobit_test,
    pass_rates,
    run_battery,
    runs_test,
)

REFERENCE = json.loads((DATA / "pvalue_reference.json").read_text())["vectors"]

# worked example sequence from the standard's test descriptions (n = 100)
EPSILON_100 = "1100100100001111110110101010001000100001011010001100001000110100110001001100011001100010100010111000"


def bits_of(text):
    return np.array([int(c) for c in text], dtype=np.uint8)


@pytest.mark.parametrize("vec", REFERENCE, ids=lambda v: v["label"])
def test_p_values_match_frozen_high_precision_values(vec):
    bits = np.array(reference_bits(vec["label"], vec["n"], vec["ones_bias"]), dtype=np.uint8)
    assert int(bits.sum()) == vec["ones"]
    assert monobit_test(bits).p_value == pytest.approx(float(vec["monobit"]), rel=1e-9)
    assert block_frequency_test(bits, vec["block_len"]).p_value == pytest.approx(float(vec["block_frequency"]), rel=1e-9)
    if vec["runs"] is None:
        with pytest.raises(PrecheckFailed):
            runs_test(bits)
    else:
        assert runs_test(bits).p_value == pytest.approx(float(vec["runs"]), rel=1e-9)


@pytest.mark.parametrize("vec", REFERENCE[::5], ids=lambda v: v["label"])
def test_frozen_values_reproduce_from_the_oracle(vec):
    bits = reference_bits(vec["label"], vec["n"], vec["ones_bias"])
    assert mpmath.almosteq(monobit_p(bits), mpmath.mpf(vec["monobit"]), rel_eps=1e-25)
    assert mpmath.almosteq(block_frequency_p(bits, vec["block_len"]), mpmath.mpf(vec["block_frequency"]), rel_eps=1e-25)
    if vec["runs"] is not None:
        assert mpmath.almosteq(runs_p(bits), mpmath.mpf(vec["runs"]), rel_eps=1e-25)


def test_worked_example_values():
    bits = bits_of(EPSILON_100)
    assert monobit_test(bits).p_value == pytest.approx(0.109599, abs=5e-7)
    assert block_frequency_test(bits, 10).p_value == pytest.approx(0.706438, abs=5e-7)
    result = runs_test(bits)
    assert result.statistic == 52
    assert result.p_value == pytest.approx(0.500798, abs=5e-7)


def test_degenerate_sequences():
    zeros = np.zeros(256, np.uint8)
    assert monobit_test(zeros).p_value < 1e-50 and not monobit_test(zeros).passed
    balanced = np.array([1] * 128 + [0] * 128, np.uint8)
    r = monobit_test(balanced)
    assert r.statistic == 0 and r.p_value == 1.0
    alternating = np.tile([0, 1], 128).astype(np.uint8)
    assert block_frequency_test(alternating, 2).p_value == 1.0
    assert not block_frequency_test(np.ones(256, np.uint8), 16).passed
    r = runs_test(alternating)
    assert r.statistic == 256 and r.p_value < 1e-20 and not r.passed
    with pytest.raises(PrecheckFailed):
        runs_test(zeros)


def test_short_sequences_are_refused():
    with pytest.raises(SequenceTooShort):
        monobit_test(np.zeros(99, np.uint8))
    with pytest.raises(SequenceTooShort):
        block_frequency_test(np.zeros(150, np.uint8), 16)
    with pytest.raises(SequenceTooShort):
        runs_test(np.zeros(50, np.uint8))


def test_battery_counts_inapplicable_tests_as_failures():
    results = run_battery(np.zeros(256, np.uint8))
    assert [r.name for r in results] == ["monobit", "block_frequency", "runs"]
    assert results[2].p_value == 0.0 and math.isnan(results[2].statistic)
    rates = pass_rates([np.zeros(256, np.uint8), np.tile([0, 1], 128).astype(np.uint8)])
    assert rates == {"monobit": 0.5, "block_frequency": 0.5, "runs": 0.0}


def test_pass_iff_p_at_least_alpha():
    assert TestResult("t", 0.0, 0.01, 0.01).passed
    assert not TestResult("t", 0.0, 0.0099999, 0.01).passed


def test_report_lines_have_six_decimals():
    line = TestResult("monobit", 1.5, 0.1336144, 0.01).format()
    assert line == "monobit 1.500000 0.133614 pass"
    assert format_section([TestResult("runs", 3.0, 0.001)]) == "runs 3.000000 0.001000 fail\n"


def test_tests_are_pure(rng):
    bits = rng.integers(0, 2, 512, dtype=np.uint8)
    copy = bits.copy()
    assert run_battery(bits) == run_battery(bits)
    assert np.array_equal(bits, copy)
