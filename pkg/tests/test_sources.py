from pathlib import Path

import numpy as np
import pytest

from markov_lossy.count_model import Alphabet, count_matrix, empirical_source_dist
from markov_lossy.exceptions import ContractViolation, DomainError
from markov_lossy.io import read_csv_with_header
from markov_lossy.sources import (
    MarkovSource,
    binary_entropy,
    binary_markov_rd,
    critical_distortion,
    generate,
    lagrangian_envelope,
    rd_curve,
)


def test_binary_entropy_values() -> None:
    assert float(binary_entropy(0.2)) == pytest.approx(0.7219, abs=1e-4)
    assert float(binary_entropy(0.5)) == pytest.approx(1.0)
    np.testing.assert_allclose(binary_entropy([0.0, 1.0]), [0.0, 0.0])


def test_rate_distortion_values() -> None:
    assert binary_markov_rd(0.2, 0.0) == pytest.approx(0.7219, abs=1e-4)
    assert binary_markov_rd(0.2, 0.05) == pytest.approx(0.4355, abs=1e-4)
    assert binary_markov_rd(0.2, 0.3) == 0.0


def test_rate_distortion_domain() -> None:
    with pytest.raises(DomainError):
        binary_markov_rd(0.0, 0.1)
    with pytest.raises(DomainError):
        binary_markov_rd(0.6, 0.1)
    with pytest.raises(DomainError):
        binary_markov_rd(0.2, 0.7)


def test_critical_distortion() -> None:
    assert critical_distortion(0.2) == pytest.approx((1 - np.sqrt(1 - 1 / 16)) / 2)
    assert critical_distortion(0.5) == pytest.approx(0.5)


def test_rd_curve(tmp_path: Path) -> None:
    curve = rd_curve(0.2, num=11)
    assert len(curve.points) == 11
    rates = [p.rate for p in curve.points]
    assert all(a >= b for a, b in zip(rates, rates[1:]))
    assert curve.points[0].exact
    assert not curve.points[-1].exact

    path = tmp_path / "rd.csv"
    curve.to_csv(path)
    frame, meta = read_csv_with_header(path)
    assert meta["kind"] == "rd_curve"
    assert list(frame.columns) == ["distortion", "rate", "exact"]


def test_lagrangian_envelope() -> None:
    point = lagrangian_envelope(0.2, 4.0)
    assert point.value == pytest.approx(0.6345, abs=1e-4)
    assert point.stationary_point == pytest.approx(1 / 17)
    assert point.distortion == pytest.approx(1 / 17, abs=1e-4)


def test_envelope_at_steep_slope_is_lossless() -> None:
    point = lagrangian_envelope(0.2, 50.0)
    assert point.distortion == pytest.approx(0.0, abs=1e-6)
    assert point.value == pytest.approx(0.7219, abs=1e-4)


def test_envelope_rejects_non_positive_slope() -> None:
    with pytest.raises(DomainError):
        lagrangian_envelope(0.2, 0.0)


def test_binary_symmetric_flip_rate() -> None:
    y = generate(MarkovSource.binary_symmetric(0.2), 20000, seed=1)
    flips = np.mean(y.symbols[1:] != y.symbols[:-1])
    assert flips == pytest.approx(0.2, abs=0.015)
    assert np.mean(y.symbols) == pytest.approx(0.5, abs=0.05)


def test_generate_is_seeded() -> None:
    source = MarkovSource.binary_symmetric(0.3, seed=9)
    first = generate(source, 100)
    assert first.symbols.tolist() == generate(source, 100).symbols.tolist()
    assert first.symbols.tolist() != generate(source, 100, seed=10).symbols.tolist()


def test_general_source_matches_kernel() -> None:
    """Second-order ternary chain: empirical transitions approach the kernel"""
    rng = np.random.default_rng(0)
    kernel = rng.dirichlet(np.full(3, 5.0), size=9)
    source = MarkovSource(kernel, 2, Alphabet(3))
    assert source.initial is not None
    assert source.initial.sum() == pytest.approx(1.0)

    y = generate(source, 90000, seed=2)
    m = count_matrix(y, 2)
    conditional = m.values / m.column_sums()
    np.testing.assert_allclose(conditional.T, kernel, atol=0.05)


def test_block_distribution_is_stationary() -> None:
    rng = np.random.default_rng(4)
    source = MarkovSource(rng.dirichlet(np.ones(2), size=4), 2, Alphabet(2))
    for k1 in (1, 2, 3, 4):
        law = source.block_distribution(k1)
        assert law.probabilities.sum() == pytest.approx(1.0)
        assert law.stationarity_defect() < 1e-12


def test_source_validation() -> None:
    with pytest.raises(ContractViolation):
        MarkovSource(np.array([[0.5, 0.4], [0.5, 0.5]]), 1, Alphabet(2))
    with pytest.raises(ContractViolation):
        MarkovSource(np.eye(2), 1, Alphabet(2), initial=np.array([0.9, 0.2]))
    with pytest.raises(DomainError):
        MarkovSource.binary_symmetric(1.5)


def test_empirical_blocks_converge_in_total_variation() -> None:
    source = MarkovSource.binary_symmetric(0.2)
    exact = source.block_distribution(4)
    y = generate(source, 1_000_000, seed=5)
    assert empirical_source_dist(y, 4).total_variation(exact) <= 0.01
