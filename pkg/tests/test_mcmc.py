import itertools
import math

import numpy as np
import pytest

from markov_lossy import distortion
from markov_lossy.coefficients import true_cost
from markov_lossy.count_model import Alphabet, Sequence, raw_counts
from markov_lossy.exceptions import InputTooShortError
from markov_lossy.mcmc import (
    AnnealConfig,
    GibbsChain,
    Schedule,
    gibbs_anneal,
    incremental_energy_delta,
)
from markov_lossy.sources import MarkovSource, generate

HAMMING = distortion.hamming(2)


def _energy(x: Sequence, y: Sequence, k: int, alpha: float) -> float:
    return x.n * true_cost(x, y, alpha, k, HAMMING).total


@pytest.fixture
def source() -> Sequence:
    """Short Markov sample"""
    return generate(MarkovSource.binary_symmetric(0.2), 120, seed=6)


def test_initial_energy(source: Sequence) -> None:
    chain = GibbsChain(source, source, 3, 2.0, HAMMING)
    assert chain.energy == pytest.approx(_energy(source, source, 3, 2.0))
    assert chain.distortion_sum == 0.0


@pytest.mark.parametrize("k", [0, 1, 3])
def test_delta_matches_recomputation(source: Sequence, k: int) -> None:
    chain = GibbsChain(source, source, k, 1.5, HAMMING)
    rng = np.random.default_rng(k)
    for _ in range(40):
        i = int(rng.integers(source.n))
        a = 1 - int(chain.y[i])
        changed = chain.y.copy()
        changed[i] = a
        expected = _energy(source, Sequence(changed, Alphabet(2)), k, 1.5) - chain.energy
        assert incremental_energy_delta(chain, i, a) == pytest.approx(expected, abs=1e-8)
        if rng.random() < 0.5:
            chain.apply(i, a)
    chain.verify()


@pytest.mark.parametrize("k", [1, 3])
def test_delta_matches_recomputation_many_moves(source: Sequence, k: int) -> None:
    chain = GibbsChain(source, source, k, 0.8, HAMMING)
    rng = np.random.default_rng(100 + k)
    for _ in range(5000):
        i = int(rng.integers(source.n))
        a = 1 - int(chain.y[i])
        changed = chain.y.copy()
        changed[i] = a
        before = _energy(source, chain.reconstruction(), k, 0.8)
        after = _energy(source, Sequence(changed, Alphabet(2)), k, 0.8)
        assert chain.delta(i, a) == pytest.approx(after - before, abs=1e-9)
        if rng.random() < 0.5:
            chain.apply(i, a)


def test_counts_exact_after_many_moves() -> None:
    rng = np.random.default_rng(77)
    x = Sequence(rng.integers(3, size=200), Alphabet(3))
    chain = GibbsChain(x, x, 2, 1.0, distortion.hamming(3))
    sites = rng.integers(x.n, size=100_000)
    symbols = rng.integers(3, size=100_000)
    for i, a in zip(sites.tolist(), symbols.tolist()):
        chain.apply(i, a)
    y = chain.reconstruction()
    np.testing.assert_array_equal(chain.counts, raw_counts(y, 2).T.reshape(-1))
    np.testing.assert_array_equal(chain.column_sums, raw_counts(y, 2).sum(axis=0))
    chain.verify()
    expected = x.n * true_cost(x, y, 1.0, 2, distortion.hamming(3)).total
    assert chain.energy == pytest.approx(expected, abs=1e-9)


def test_delta_of_no_change_is_zero(source: Sequence) -> None:
    chain = GibbsChain(source, source, 2, 1.0, HAMMING)
    assert chain.delta(5, int(chain.y[5])) == 0.0


def test_wraparound_sites(source: Sequence) -> None:
    """Changing the last k symbols touches blocks at the start of the sequence"""
    chain = GibbsChain(source, source, 4, 1.0, HAMMING)
    for i in (0, source.n - 1, source.n - 2):
        chain.apply(i, 1 - int(chain.y[i]))
    chain.verify()
    assert chain.energy == pytest.approx(
        _energy(source, chain.reconstruction(), 4, 1.0), abs=1e-8
    )


def test_conditional_is_distribution(source: Sequence) -> None:
    chain = GibbsChain(source, source, 2, 1.0, HAMMING)
    probabilities = chain.conditional(10, beta=source.n * math.log(5))
    assert probabilities.sum() == pytest.approx(1.0)
    assert np.all(probabilities >= 0)


def test_detailed_balance() -> None:
    """pi(y) P(y -> y') = pi(y') P(y' -> y) with pi proportional to exp(-beta E / n)"""
    x = Sequence.of("011010")
    k, alpha, beta = 1, 0.7, 4.0
    for bits in itertools.product([0, 1], repeat=6):
        y = Sequence(np.array(bits), Alphabet(2))
        forward_chain = GibbsChain(x, y, k, alpha, HAMMING)
        for i in range(x.n):
            a = 1 - bits[i]
            changed = np.array(bits)
            changed[i] = a
            backward_chain = GibbsChain(x, Sequence(changed, Alphabet(2)), k, alpha, HAMMING)
            forward = forward_chain.conditional(i, beta)[a]
            backward = backward_chain.conditional(i, beta)[bits[i]]
            left = math.exp(-beta * forward_chain.energy / x.n) * forward
            right = math.exp(-beta * backward_chain.energy / x.n) * backward
            assert left == pytest.approx(right, rel=1e-9)


def test_too_short() -> None:
    x = Sequence.of("01")
    with pytest.raises(InputTooShortError):
        GibbsChain(x, x, 2, 1.0, HAMMING)


def test_schedule() -> None:
    cfg = AnnealConfig(k=2, alpha=1.0)
    assert cfg.total_iterations(50) == 500
    assert cfg.beta_at(1, 50) == pytest.approx(50 * math.log(2))
    assert cfg.beta_at(1, 50) == cfg.beta_at(2, 50)
    betas = [cfg.beta_at(t, 50) for t in range(1, 200)]
    assert all(a <= b for a, b in zip(betas, betas[1:]))

    constant = AnnealConfig(k=2, alpha=1.0, schedule=Schedule.CONSTANT, beta=3.0)
    assert constant.beta_at(1000, 50) == 3.0


def test_anneal_consistent(source: Sequence) -> None:
    cfg = AnnealConfig(k=2, alpha=1.0, iterations_per_symbol=5, seed=3, checkpoints=10)
    trace = gibbs_anneal(source, cfg, HAMMING)
    assert trace.proposals == 5 * source.n
    assert trace.final_energy == pytest.approx(source.n * trace.true.total)
    assert trace.steps[0] == 0
    assert trace.steps[-1] == trace.proposals
    assert 0.0 <= trace.acceptance_rate <= 1.0

    frame = trace.to_frame()
    assert list(frame.columns) == ["t", "energy", "beta", "temperature"]
    assert len(frame) == len(trace.steps)


def test_anneal_is_seeded(source: Sequence) -> None:
    cfg = AnnealConfig(k=1, alpha=2.0, iterations=300, seed=8)
    first = gibbs_anneal(source, cfg, HAMMING)
    second = gibbs_anneal(source, cfg, HAMMING)
    assert first.reconstruction.symbols.tolist() == second.reconstruction.symbols.tolist()
    assert first.energies == second.energies


def test_large_alpha_keeps_source(source: Sequence) -> None:
    cfg = AnnealConfig(k=2, alpha=1e3, iterations=500, seed=1)
    trace = gibbs_anneal(source, cfg, HAMMING)
    assert trace.reconstruction.symbols.tolist() == source.symbols.tolist()
    assert trace.changes == 0


def test_small_alpha_lowers_energy(source: Sequence) -> None:
    cfg = AnnealConfig(k=1, alpha=0.05, iterations_per_symbol=20, seed=2)
    trace = gibbs_anneal(source, cfg, HAMMING)
    assert trace.final_energy < trace.energies[0]
