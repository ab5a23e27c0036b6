import numpy as np
import pytest

from markov_lossy import distortion
from markov_lossy.coefficients import (
    CoefficientMatrix,
    gradient_coefficients,
    shortcut_coefficients,
)
from markov_lossy.count_model import Alphabet, Sequence, count_matrix
from markov_lossy.exceptions import BudgetExceededError, ContractViolation, InputTooShortError
from markov_lossy.trellis import (
    Objective,
    Trellis,
    encode_iterative,
    exhaustive_encode,
    trellis_path_cost,
    viterbi_encode,
)

HAMMING = distortion.hamming(2)


def _random_binary(n: int, seed: int) -> Sequence:
    rng = np.random.default_rng(seed)
    return Sequence(rng.integers(2, size=n), Alphabet(2))


def test_trellis_structure() -> None:
    trellis = Trellis(2, 2)
    assert trellis.num_states == 8
    assert trellis.successor(0b011, 1) == 0b111
    assert trellis.successor(0b110, 0) == 0b100
    # predecessors of 011 differ in their oldest digit only
    assert trellis.predecessors[0b011].tolist() == [0b001, 0b101]
    assert trellis.digits(0b110) == [1, 1, 0]


def test_trellis_budget() -> None:
    with pytest.raises(BudgetExceededError):
        Trellis(2, 10, max_states=1024)


@pytest.mark.parametrize("k", [0, 1, 2])
@pytest.mark.parametrize("alpha", [0.3, 1.0, 4.0])
def test_viterbi_matches_exhaustive(k: int, alpha: float) -> None:
    """The dynamic program reaches the enumerated minimum of the same path cost"""
    for seed in range(3):
        x = _random_binary(9, seed)
        lam = shortcut_coefficients(x, k)
        fast = viterbi_encode(x, lam, alpha, HAMMING)
        slow = exhaustive_encode(x, Objective.TRELLIS, alpha, HAMMING, k, lam)
        assert fast.trellis_cost == pytest.approx(slow.trellis_cost, abs=1e-12)


def test_viterbi_ternary_matches_exhaustive() -> None:
    rng = np.random.default_rng(2)
    x = Sequence(rng.integers(3, size=7), Alphabet(3))
    lam = shortcut_coefficients(x, 1)
    d = distortion.hamming(3)
    fast = viterbi_encode(x, lam, 1.5, d)
    slow = exhaustive_encode(x, Objective.TRELLIS, 1.5, d, 1, lam)
    assert fast.trellis_cost == pytest.approx(slow.trellis_cost, abs=1e-12)


def test_viterbi_cost_is_path_cost() -> None:
    x = _random_binary(200, 9)
    lam = shortcut_coefficients(x, 3)
    result = viterbi_encode(x, lam, 2.0, HAMMING)
    assert result.trellis_cost == pytest.approx(
        trellis_path_cost(x, result.reconstruction, lam, 2.0, HAMMING)
    )
    assert result.edge_relaxations == (200 - 4) * 16 * 2
    assert result.true.total == pytest.approx(
        result.true.entropy_part + 2.0 * result.true.distortion_part
    )


def test_large_alpha_reproduces_source() -> None:
    x = _random_binary(300, 4)
    result = viterbi_encode(x, shortcut_coefficients(x, 4), 1e6, HAMMING)
    assert result.reconstruction.symbols.tolist() == x.symbols.tolist()
    assert result.true.distortion_part == 0.0


def test_small_alpha_lowers_entropy() -> None:
    x = _random_binary(300, 4)
    lam = shortcut_coefficients(x, 2)
    low = viterbi_encode(x, lam, 0.05, HAMMING)
    high = viterbi_encode(x, lam, 50.0, HAMMING)
    assert low.true.entropy_part <= high.true.entropy_part
    assert low.true.distortion_part >= high.true.distortion_part


def test_input_too_short() -> None:
    x = Sequence.of("01")
    with pytest.raises(InputTooShortError):
        viterbi_encode(x, shortcut_coefficients(x, 2), 1.0, HAMMING)


def test_order_must_match_coefficients() -> None:
    x = _random_binary(20, 1)
    with pytest.raises(ContractViolation):
        viterbi_encode(x, shortcut_coefficients(x, 2), 1.0, HAMMING, k=1)


def test_minimum_length_sequence() -> None:
    """n = k+1 leaves only the initial lump"""
    x = Sequence.of("011")
    result = viterbi_encode(x, shortcut_coefficients(x, 2), 100.0, HAMMING)
    assert result.reconstruction.symbols.tolist() == [0, 1, 1]


def test_p2_optimum_equals_p1_optimum() -> None:
    """Expanding at the true optimum makes it optimal for the linearized cost too"""
    x = _random_binary(8, 3)
    for k in (0, 1):
        p1 = exhaustive_encode(x, Objective.P1, 1.0, HAMMING, k)
        lam = gradient_coefficients(count_matrix(p1.reconstruction, k), 100.0)
        p2 = exhaustive_encode(x, Objective.P2, 1.0, HAMMING, k, lam)
        assert p2.linearized is not None
        assert p2.linearized.total == pytest.approx(p1.true.total, abs=1e-12)


def test_exhaustive_budget() -> None:
    x = _random_binary(12, 0)
    with pytest.raises(BudgetExceededError):
        exhaustive_encode(x, Objective.P1, 1.0, HAMMING, 1, budget=1000)


def test_exhaustive_needs_coefficients() -> None:
    with pytest.raises(ContractViolation):
        exhaustive_encode(_random_binary(6, 0), Objective.P2, 1.0, HAMMING, 1)


def test_exhaustive_tie_goes_to_smallest() -> None:
    """At alpha = 0 every constant sequence costs nothing; 0...0 comes first"""
    x = Sequence.of("110101")
    result = exhaustive_encode(x, Objective.P1, 0.0, HAMMING, 1)
    assert result.reconstruction.symbols.tolist() == [0] * 6
    assert result.true.total == 0.0


def test_iterative_never_worse_than_first_round() -> None:
    x = _random_binary(400, 8)
    result = encode_iterative(x, 1.0, 3, HAMMING, max_rounds=4)
    assert 1 <= len(result.true_cost_trace) <= 4
    assert result.true.total <= result.true_cost_trace[0] + 1e-12
    assert result.true.total == pytest.approx(min(result.true_cost_trace))


def test_iterative_rejects_zero_rounds() -> None:
    with pytest.raises(ContractViolation):
        encode_iterative(_random_binary(20, 0), 1.0, 1, HAMMING, max_rounds=0)


def test_csv_row() -> None:
    x = _random_binary(50, 2)
    row = viterbi_encode(x, shortcut_coefficients(x, 1), 2.0, HAMMING).csv_row()
    assert set(row) == {
        "n",
        "k",
        "alpha",
        "distortion",
        "entropy",
        "linearized_cost",
        "true_cost",
        "wall_clock",
    }
    assert row["n"] == 50


def test_distortion_non_increasing_in_alpha() -> None:
    x = _random_binary(300, 21)
    lam = shortcut_coefficients(x, 2)
    distortions = [
        viterbi_encode(x, lam, alpha, HAMMING).true.distortion_part
        for alpha in (0.1, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0)
    ]
    assert all(b <= a + 1e-12 for a, b in zip(distortions, distortions[1:]))


def test_viterbi_matches_exhaustive_on_random_coefficients() -> None:
    rng = np.random.default_rng(41)
    for _ in range(500):
        k = int(rng.integers(0, 3))
        x = _random_binary(int(rng.integers(k + 1, 13)), int(rng.integers(1 << 30)))
        lam = CoefficientMatrix(rng.uniform(0.0, 3.0, size=(2, 2**k)), k, Alphabet(2), 3.0)
        alpha = float(rng.uniform(0.0, 4.0))
        fast = viterbi_encode(x, lam, alpha, HAMMING)
        slow = exhaustive_encode(x, Objective.TRELLIS, alpha, HAMMING, k, lam)
        assert fast.trellis_cost == pytest.approx(slow.trellis_cost, abs=1e-9)
        # the traced-back sequence is itself a minimizer
        assert trellis_path_cost(x, fast.reconstruction, lam, alpha, HAMMING) == pytest.approx(
            slow.trellis_cost, abs=1e-9
        )


@pytest.mark.parametrize("k", [0, 1, 2])
def test_all_ties_resolve_to_zeros(k: int) -> None:
    """With alpha = 0 and equal coefficients every path costs the same"""
    x = Sequence.of("10110100")
    lam = CoefficientMatrix.uniform(1.5, k, Alphabet(2))
    fast = viterbi_encode(x, lam, 0.0, HAMMING)
    slow = exhaustive_encode(x, Objective.TRELLIS, 0.0, HAMMING, k, lam)
    assert fast.reconstruction.symbols.tolist() == [0] * 8
    assert slow.reconstruction.symbols.tolist() == [0] * 8
    # the initial lump charges one coefficient for the first k+1 symbols
    assert fast.trellis_cost == pytest.approx(1.5 * (8 - k) / 8)


def test_unique_minimizer_is_shared() -> None:
    x = _random_binary(10, 12)
    lam = shortcut_coefficients(x, 1)
    fast = viterbi_encode(x, lam, 50.0, HAMMING)
    slow = exhaustive_encode(x, Objective.TRELLIS, 50.0, HAMMING, 1, lam)
    assert fast.reconstruction.symbols.tolist() == slow.reconstruction.symbols.tolist()
    assert fast.reconstruction.symbols.tolist() == x.symbols.tolist()


def test_exhaustive_p1_regression() -> None:
    x = Sequence.of("0110100110")
    result = exhaustive_encode(x, Objective.P1, 1.0, HAMMING, 1)
    assert result.true.total == pytest.approx(0.4, abs=1e-12)
    assert result.reconstruction.symbols.tolist() == [1, 0, 1, 0, 1, 0, 1, 0, 1, 0]


def test_every_length_ten_source_fixed_coefficients() -> None:
    lam = CoefficientMatrix(np.array([[0.4, 1.7], [2.3, 0.9]]), 1, Alphabet(2), 3.0)
    for bits in range(1 << 10):
        x = Sequence(np.array([(bits >> j) & 1 for j in range(9, -1, -1)]), Alphabet(2))
        fast = viterbi_encode(x, lam, 1.0, HAMMING)
        slow = exhaustive_encode(x, Objective.TRELLIS, 1.0, HAMMING, 1, lam)
        assert fast.trellis_cost == pytest.approx(slow.trellis_cost, abs=1e-9)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0])
def test_p2_optimum_equals_p1_optimum_on_every_source(alpha: float) -> None:
    for bits in range(1 << 10):
        x = Sequence(np.array([(bits >> j) & 1 for j in range(9, -1, -1)]), Alphabet(2))
        p1 = exhaustive_encode(x, Objective.P1, alpha, HAMMING, 1)
        lam = gradient_coefficients(count_matrix(p1.reconstruction, 1), 100.0)
        p2 = exhaustive_encode(x, Objective.P2, alpha, HAMMING, 1, lam)
        assert p2.linearized is not None
        assert p2.linearized.total == pytest.approx(p1.true.total, abs=1e-9)
