from pathlib import Path

import numpy as np
import pytest

from markov_lossy.count_model import (
    Alphabet,
    CountMatrix,
    Sequence,
    batch_conditional_entropy,
    block_indices,
    check_stationarity,
    conditional_entropy,
    count_matrix,
    empirical_conditional_entropy,
    empirical_source_dist,
    entropy_functional,
    marginalize,
    raw_counts,
    stationarity_defect,
)
from markov_lossy.exceptions import ContractViolation, DomainError


@pytest.fixture
def random_sequence() -> Sequence:
    """Ternary sequence long enough to visit every short context"""
    rng = np.random.default_rng(7)
    return Sequence(rng.integers(3, size=500), Alphabet(3))


def test_sequence_of_digit_string() -> None:
    y = Sequence.of("0120")
    assert y.n == 4
    assert y.alphabet.size == 3
    assert y.symbols.tolist() == [0, 1, 2, 0]


def test_sequence_rejects_bad_symbols() -> None:
    with pytest.raises(DomainError):
        Sequence(np.array([0, 2]), Alphabet(2))
    with pytest.raises(DomainError):
        Sequence(np.array([], dtype=np.int64), Alphabet(2))


def test_sequence_is_read_only() -> None:
    y = Sequence.of("0101")
    with pytest.raises(ValueError):
        y.symbols[0] = 1


def test_block_index_puts_newest_symbol_last() -> None:
    """Block of (context, symbol) is context * |A| + symbol with a cyclic context"""
    assert block_indices([0, 1], 1, 2).tolist() == [2, 1]
    assert block_indices([1, 0, 1], 2, 2).tolist() == [3, 6, 5]


def test_raw_counts_cyclic() -> None:
    """Every 2-block of 0110 appears once when the sequence wraps"""
    counts = raw_counts(Sequence.of("0110"), 1)
    assert counts.shape == (2, 2)
    assert counts.tolist() == [[1, 1], [1, 1]]


def test_count_matrix_normalized(random_sequence: Sequence) -> None:
    m = count_matrix(random_sequence, 2)
    assert m.values.shape == (3, 9)
    assert m.total == pytest.approx(1.0)
    m.require_normalized()


def test_known_entropies() -> None:
    assert empirical_conditional_entropy(Sequence.of("0011"), 0) == pytest.approx(1.0)
    assert empirical_conditional_entropy(Sequence.of("0110"), 1) == pytest.approx(1.0)
    assert empirical_conditional_entropy(Sequence.of("01010101"), 1) == pytest.approx(0.0)
    assert empirical_conditional_entropy(Sequence.of("0000000", 2), 3) == pytest.approx(0.0)


def test_entropy_non_increasing_in_order(random_sequence: Sequence) -> None:
    entropies = [empirical_conditional_entropy(random_sequence, k) for k in range(4)]
    assert all(a >= b - 1e-12 for a, b in zip(entropies, entropies[1:]))
    assert entropies[0] <= np.log2(3) + 1e-12


def test_entropy_functional() -> None:
    assert entropy_functional([1.0, 1.0]) == pytest.approx(1.0)
    assert entropy_functional([0.25, 0.25]) == pytest.approx(1.0)
    assert entropy_functional([0.0, 0.0, 0.0]) == 0.0
    with pytest.raises(DomainError):
        entropy_functional([0.5, -0.1])


def test_conditional_entropy_requires_normalized() -> None:
    m = CountMatrix(np.array([[2.0, 1.0], [1.0, 2.0]]), 1, Alphabet(2), normalized=False)
    with pytest.raises(ContractViolation):
        m.require_normalized()
    m.normalize().require_normalized()


def test_batch_matches_single(random_sequence: Sequence) -> None:
    rng = np.random.default_rng(3)
    rows = rng.integers(3, size=(4, 60))
    blocks = np.stack([block_indices(row, 2, 3) for row in rows])
    batch = batch_conditional_entropy(blocks, 2, 3)
    single = [empirical_conditional_entropy(Sequence(row, Alphabet(3)), 2) for row in rows]
    np.testing.assert_allclose(batch, single, atol=1e-12)


def test_cyclic_counts_are_stationary(random_sequence: Sequence) -> None:
    for k in range(4):
        assert check_stationarity(count_matrix(random_sequence, k))


def test_stationarity_defect_detects_imbalance() -> None:
    # all mass on block 01: context 0 leads, context 1 trails
    assert stationarity_defect([0.0, 1.0, 0.0, 0.0], 2, 2) == pytest.approx(1.0)
    assert stationarity_defect([0.5, 0.0, 0.0, 0.5], 2, 2) == 0.0


def test_marginalize_matches_lower_order(random_sequence: Sequence) -> None:
    high = count_matrix(random_sequence, 3)
    for order in range(3):
        reduced = marginalize(high, order)
        np.testing.assert_allclose(
            reduced.values, count_matrix(random_sequence, order).values, atol=1e-12
        )
    with pytest.raises(DomainError):
        marginalize(high, 4)


def test_from_blocks_inverts_blocks(random_sequence: Sequence) -> None:
    m = count_matrix(random_sequence, 2)
    again = CountMatrix.from_blocks(m.blocks(), 2, m.alphabet)
    np.testing.assert_array_equal(again.values, m.values)


def test_empirical_source_dist(random_sequence: Sequence) -> None:
    p = empirical_source_dist(random_sequence, 3)
    assert p.probabilities.shape == (27,)
    assert p.probabilities.sum() == pytest.approx(1.0)
    assert p.stationarity_defect() < 1e-12
    # the k1-block law is the (k1-1)th order count matrix in block form
    np.testing.assert_allclose(p.probabilities, count_matrix(random_sequence, 2).blocks())
    with pytest.raises(DomainError):
        empirical_source_dist(random_sequence, 0)


def test_count_matrix_csv(tmp_path: Path, random_sequence: Sequence) -> None:
    m = count_matrix(random_sequence, 1)
    path = tmp_path / "counts.csv"
    m.to_csv(path)

    assert path.read_text().startswith("# markov-lossy csv schema=1 kind=count_matrix")
    loaded = CountMatrix.read_csv(path)
    assert loaded.order == 1
    np.testing.assert_allclose(loaded.values, m.values)


def _random_count_matrix(rng: np.random.Generator, k: int, a: int) -> CountMatrix:
    blocks = rng.dirichlet(np.ones(a ** (k + 1)))
    blocks[rng.random(blocks.size) < 0.2] = 0.0
    if not blocks.any():
        blocks[0] = 1.0
    return CountMatrix.from_blocks(blocks / blocks.sum(), k, Alphabet(a))


def test_conditional_entropy_is_concave() -> None:
    rng = np.random.default_rng(23)
    for _ in range(1000):
        k, a = int(rng.integers(0, 4)), int(rng.integers(2, 5))
        m1, m2 = _random_count_matrix(rng, k, a), _random_count_matrix(rng, k, a)
        theta = rng.random()
        mixed = CountMatrix(theta * m1.values + (1 - theta) * m2.values, k, Alphabet(a))
        lower = theta * conditional_entropy(m1) + (1 - theta) * conditional_entropy(m2)
        assert conditional_entropy(mixed) >= lower - 1e-12


def test_entropy_invariant_under_relabeling() -> None:
    rng = np.random.default_rng(29)
    for a in (2, 3, 4):
        y = Sequence(rng.integers(a, size=300), Alphabet(a))
        relabeled = y.with_symbols(rng.permutation(a)[y.symbols])
        for k in range(4):
            assert empirical_conditional_entropy(relabeled, k) == pytest.approx(
                empirical_conditional_entropy(y, k), abs=1e-12
            )


def test_order_zero_is_histogram_entropy() -> None:
    rng = np.random.default_rng(31)
    for a in (2, 3, 4):
        y = Sequence(rng.choice(a, size=250, p=rng.dirichlet(np.ones(a))), Alphabet(a))
        histogram = np.bincount(y.symbols, minlength=a)
        assert empirical_conditional_entropy(y, 0) == pytest.approx(
            entropy_functional(histogram), abs=1e-12
        )
    uniform = CountMatrix(np.array([[0.5], [0.5]]), 0, Alphabet(2))
    assert conditional_entropy(uniform) == pytest.approx(1.0)


def test_cyclic_counts_stationary_on_many_sequences() -> None:
    rng = np.random.default_rng(37)
    for _ in range(1000):
        k, a = int(rng.integers(1, 4)), int(rng.integers(2, 5))
        y = Sequence(rng.integers(a, size=int(rng.integers(1, 400))), Alphabet(a))
        assert check_stationarity(count_matrix(y, k), tol=1e-12)
