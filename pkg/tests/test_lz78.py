import numpy as np
import pytest

from markov_lossy.count_model import Alphabet, Sequence
from markov_lossy.exceptions import DomainError
from markov_lossy.lz78 import (
    ZIV_FAMILIES,
    Phrase,
    expand_phrases,
    lz78_codelength,
    lz78_parse,
    phrase_bits,
    sample_family,
    slow_order,
    worst_excess_by_n,
    ziv_gap_scan,
)


def test_single_symbol_costs_one_bit() -> None:
    report = lz78_codelength(Sequence.of("0"))
    assert report.bits_total == 1
    assert report.idealized


def test_run_of_zeros() -> None:
    """0 | 00 | 000: pointers 0 + 1 + 2 bits, innovations 3 bits"""
    phrases = lz78_parse([0] * 6)
    assert phrases == [Phrase(0, 0), Phrase(1, 0), Phrase(2, 0)]
    assert lz78_codelength(Sequence.of("000000")).bits_total == 6


def test_final_partial_phrase_costs_pointer_only() -> None:
    phrases = lz78_parse([0, 0, 0, 0])
    assert phrases[-1] == Phrase(1, None)
    assert phrase_bits(phrases, Alphabet(2)) == (0 + 1) + (1 + 1) + 2


def test_parse_inverts() -> None:
    rng = np.random.default_rng(1)
    symbols = rng.integers(3, size=500).tolist()
    assert expand_phrases(lz78_parse(symbols)) == symbols


def test_report_fields() -> None:
    report = lz78_codelength(Sequence.of("01" * 64), k=1)
    assert report.entropy == pytest.approx(0.0)
    assert report.bits_per_symbol == pytest.approx(report.bits_total / 128)
    assert report.excess == pytest.approx(report.bits_per_symbol)


def test_slow_order() -> None:
    assert slow_order(2) == 0
    assert slow_order(16) == 2
    assert slow_order(2**16) == 4
    assert slow_order(2**18) == 4


def test_sample_families() -> None:
    rng = np.random.default_rng(0)
    for family in ZIV_FAMILIES:
        y = sample_family(family, 100, 2, rng)
        assert y.n == 100
    periodic = sample_family("periodic", 100, 2, rng)
    assert periodic.symbols[:9].tolist() == periodic.symbols[9:18].tolist()
    with pytest.raises(DomainError):
        sample_family("fractal", 10, 1, rng)


def test_ziv_gap_scan_small() -> None:
    frame = ziv_gap_scan(slow_order, [256, 1024], samples=2, seed=3)
    assert list(frame.columns) == [
        "n",
        "k",
        "family",
        "samples",
        "max_excess",
        "mean_bits_per_symbol",
        "max_excess_over_families",
    ]
    assert len(frame) == 2 * len(ZIV_FAMILIES)
    worst = worst_excess_by_n(frame)
    assert worst.index.tolist() == [256, 1024]
    for n, value in worst.items():
        rows = frame[frame["n"] == n]
        assert value == rows["max_excess"].max()
        assert (rows["max_excess_over_families"] == value).all()
    # ceil(log2 |A|) + 2 for the binary families
    assert frame["max_excess"].max() <= 3.0
    constant = frame[frame["family"] == "constant"]
    assert constant["max_excess"].iloc[-1] < constant["max_excess"].iloc[0]


@pytest.mark.slow
def test_ziv_gap_shrinks_with_n() -> None:
    frame = ziv_gap_scan(slow_order, [2**e for e in range(10, 19, 2)], samples=2, seed=0)
    worst = worst_excess_by_n(frame).tolist()
    assert all(b < a for a, b in zip(worst, worst[1:]))
    assert max(worst) <= 3.0
