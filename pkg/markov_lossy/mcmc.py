"""Simulated-annealing Gibbs encoder over reconstruction sequences.

Energy E(y) = n H_k(y) + alpha sum_i d(x_i, y_i), in bits. A single-site change of y_i
touches only the k+1 cyclic blocks ending at positions i..i+k, so the chain keeps
integer block counts and updates E in O(k) per candidate symbol.
"""

import logging
import math
import time
from collections import defaultdict
from enum import Enum
from pathlib import Path
from typing import Dict, List

import numpy as np
import numpy.typing as npt
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from . import distortion
from .coefficients import LinearizedCost, true_cost
from .count_model import Alphabet, Sequence, block_indices, raw_counts
from .exceptions import BookkeepingError, ContractViolation, InputTooShortError
from .io import write_csv_with_header

logger = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]

ENERGY_TOLERANCE = 1e-6


class Schedule(str, Enum):
    LOG = "log"  # beta_t = n ln(max(t, 2))
    CONSTANT = "constant"  # beta_t = beta


class AnnealConfig(BaseModel):
    """Annealing run parameters; iterations default to 10 n"""

    k: int = Field(ge=0)
    alpha: float = Field(ge=0)
    iterations: int | None = Field(default=None, ge=1)
    iterations_per_symbol: int = Field(default=10, ge=1)
    schedule: Schedule = Schedule.LOG
    beta: float = Field(default=0.0, ge=0, description="Constant schedule inverse temperature")
    seed: int = 0
    checkpoints: int = Field(default=100, ge=1)
    reconstruction_size: int | None = None

    def total_iterations(self, n: int) -> int:
        if self.iterations is not None:
            return self.iterations
        return self.iterations_per_symbol * n

    def beta_at(self, t: int, n: int) -> float:
        """Inverse temperature at 1-based step t; non-decreasing in t"""
        if self.schedule is Schedule.CONSTANT:
            return self.beta
        # the log schedule is 0 at t = 1, so the first step borrows t = 2
        return n * math.log(max(t, 2))


class GibbsChain:
    """Reconstruction y with its block counts and energy kept in sync"""

    def __init__(
        self,
        x: Sequence,
        y: Sequence,
        k: int,
        alpha: float,
        d: npt.ArrayLike,
    ):
        if x.n != y.n:
            raise ContractViolation(f"length mismatch: x has {x.n} symbols, y has {y.n}")
        if x.n < k + 1:
            raise InputTooShortError(f"sequence of length {x.n} is shorter than k+1={k + 1}")
        self.x = x.symbols
        self.n = x.n
        self.k = k
        self.alpha = alpha
        self.alphabet = y.alphabet
        self.dist = distortion.validate(d, x.alphabet.size, y.alphabet.size)

        a = y.alphabet.size
        self.powers = [a**t for t in range(k + 1)]
        self.y = np.array(y.symbols, dtype=np.int64)
        self.blocks = block_indices(self.y, k, a)
        self.counts = np.bincount(self.blocks, minlength=a ** (k + 1)).astype(np.int64)
        self.column_sums = self.counts.reshape(-1, a).sum(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            c = np.arange(self.n + 1, dtype=np.float64)
            self.xlogx = np.where(c > 0, c * np.log2(np.where(c > 0, c, 1.0)), 0.0)
        self.entropy_bits = self._entropy_from_counts()
        self.distortion_sum = float(self.dist[self.x, self.y].sum())

    def _entropy_from_counts(self) -> float:
        """n H_k = sum_b [S_b log S_b - sum_beta c log c]"""
        return float(self.xlogx[self.column_sums].sum() - self.xlogx[self.counts].sum())

    @property
    def energy(self) -> float:
        return self.entropy_bits + self.alpha * self.distortion_sum

    def reconstruction(self) -> Sequence:
        return Sequence(self.y.copy(), self.alphabet)

    def _block_changes(self, i: int, a: int) -> Dict[int, int]:
        diff = a - int(self.y[i])
        changes: Dict[int, int] = defaultdict(int)
        for t in range(self.k + 1):
            old = int(self.blocks[(i + t) % self.n])
            changes[old] -= 1
            changes[old + diff * self.powers[t]] += 1
        return changes

    def delta(self, i: int, a: int) -> float:
        """E(y with y_i := a) - E(y)"""
        if a == self.y[i]:
            return 0.0
        size = self.alphabet.size
        changes = self._block_changes(i, a)
        column_change: Dict[int, int] = defaultdict(int)
        entry_term = 0.0
        for block, change in changes.items():
            if change == 0:
                continue
            current = int(self.counts[block])
            if current + change < 0:
                raise BookkeepingError(f"block {block} count would go negative at site {i}")
            entry_term += self.xlogx[current + change] - self.xlogx[current]
            column_change[block // size] += change
        column_term = 0.0
        for column, change in column_change.items():
            current = int(self.column_sums[column])
            column_term += self.xlogx[current + change] - self.xlogx[current]
        distortion_change = self.dist[self.x[i], a] - self.dist[self.x[i], self.y[i]]
        return float(column_term - entry_term + self.alpha * distortion_change)

    def apply(self, i: int, a: int) -> float:
        """Set y_i := a, returning the energy change"""
        change = self.delta(i, a)
        if a == self.y[i]:
            return change
        size = self.alphabet.size
        diff = a - int(self.y[i])
        for block, count in self._block_changes(i, a).items():
            self.counts[block] += count
            self.column_sums[block // size] += count
        for t in range(self.k + 1):
            self.blocks[(i + t) % self.n] += diff * self.powers[t]
        self.distortion_sum += self.dist[self.x[i], a] - self.dist[self.x[i], self.y[i]]
        self.entropy_bits += change - self.alpha * (
            self.dist[self.x[i], a] - self.dist[self.x[i], self.y[i]]
        )
        self.y[i] = a
        return change

    def conditional(self, i: int, beta: float) -> FloatArray:
        """Single-site Gibbs conditional of y_i: proportional to exp(-beta * delta / n)"""
        deltas = np.array([self.delta(i, a) for a in range(self.alphabet.size)])
        logits = -beta * deltas / self.n
        logits -= logits.max()
        weights = np.exp(logits)
        return weights / weights.sum()

    def verify(self) -> None:
        """Raise BookkeepingError unless counts and energy match a full recomputation"""
        y = Sequence(self.y, self.alphabet)
        expected = raw_counts(y, self.k).T.reshape(-1)
        if not np.array_equal(expected, self.counts):
            raise BookkeepingError("maintained block counts differ from the sequence's counts")
        recomputed = self._entropy_from_counts()
        if abs(recomputed - self.entropy_bits) > ENERGY_TOLERANCE * max(1.0, abs(recomputed)):
            raise BookkeepingError(
                f"maintained entropy {self.entropy_bits} drifted from {recomputed}"
            )
        # resync away float drift
        self.entropy_bits = recomputed
        self.distortion_sum = float(self.dist[self.x, self.y].sum())


def incremental_energy_delta(chain: GibbsChain, i: int, a: int) -> float:
    """E(y with y_i := a) - E(y) from the chain's maintained counts"""
    return chain.delta(i, a)


class AnnealTrace(BaseModel):
    """What one annealing run did and where it ended"""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    steps: List[int]
    energies: List[float]
    betas: List[float]
    proposals: int
    changes: int
    reconstruction: Sequence
    final_energy: float
    true: LinearizedCost
    wall_clock: float

    @property
    def acceptance_rate(self) -> float:
        """Fraction of site updates that changed the symbol"""
        return self.changes / self.proposals if self.proposals else 0.0

    def to_frame(self) -> pd.DataFrame:
        betas = np.asarray(self.betas)
        with np.errstate(divide="ignore"):
            temperature = np.where(betas > 0, 1.0 / np.where(betas > 0, betas, 1.0), np.inf)
        return pd.DataFrame(
            {
                "t": self.steps,
                "energy": self.energies,
                "beta": betas,
                "temperature": temperature,
            }
        )

    def to_csv(self, path: Path, meta: Dict[str, object] | None = None) -> None:
        write_csv_with_header(self.to_frame(), path, {"kind": "anneal_trace", **(meta or {})})


def gibbs_anneal(x: Sequence, cfg: AnnealConfig, d: npt.ArrayLike) -> AnnealTrace:
    """
    Anneal from y = x by single-site Gibbs updates at uniformly random positions

    Args:
        x: Source sequence
        cfg: Order, slope, schedule, iteration count and seed
        d: Single-letter distortion matrix

    Returns:
        AnnealTrace with checkpointed energies and the final reconstruction
    """
    reconstruction_size = cfg.reconstruction_size or x.alphabet.size
    recon_alphabet = Alphabet(reconstruction_size)
    start = np.minimum(x.symbols, reconstruction_size - 1)
    chain = GibbsChain(x, Sequence(start, recon_alphabet), cfg.k, cfg.alpha, d)

    n = x.n
    r = cfg.total_iterations(n)
    rng = np.random.default_rng(cfg.seed)
    sites = rng.integers(n, size=r)
    draws = rng.random(r)
    every = max(1, r // cfg.checkpoints)

    steps: List[int] = [0]
    energies: List[float] = [chain.energy]
    betas: List[float] = [cfg.beta_at(1, n)]
    changes = 0
    started = time.perf_counter()
    for t in range(1, r + 1):
        i = int(sites[t - 1])
        beta = cfg.beta_at(t, n)
        probabilities = chain.conditional(i, beta)
        cumulative = np.cumsum(probabilities)
        a = int(np.searchsorted(cumulative, draws[t - 1], side="right"))
        a = min(a, reconstruction_size - 1)
        if a != chain.y[i]:
            chain.apply(i, a)
            changes += 1
        if t % every == 0 or t == r:
            steps.append(t)
            energies.append(chain.energy)
            betas.append(beta)
    elapsed = time.perf_counter() - started

    chain.verify()
    y = chain.reconstruction()
    result = true_cost(x, y, cfg.alpha, cfg.k, chain.dist)
    final_energy = n * result.total
    if abs(final_energy - chain.energy) > ENERGY_TOLERANCE * max(1.0, abs(final_energy)):
        raise BookkeepingError(f"final energy {chain.energy} != recomputed {final_energy}")
    logger.debug(
        f"anneal n={n} k={cfg.k} alpha={cfg.alpha}: {r} steps, {changes} changes, "
        f"energy {final_energy:.3f} in {elapsed:.2f}s"
    )
    return AnnealTrace(
        steps=steps,
        energies=energies,
        betas=betas,
        proposals=r,
        changes=changes,
        reconstruction=y,
        final_energy=final_energy,
        true=result,
        wall_clock=elapsed,
    )
