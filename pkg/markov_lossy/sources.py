"""Markov sources and the analytic rate-distortion reference for the binary symmetric chain"""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List

import numpy as np
import numpy.typing as npt
import pandas as pd
from pydantic import BaseModel, Field
from scipy.optimize import minimize_scalar
from scipy.special import entr

from .count_model import Alphabet, BlockDistribution, Sequence
from .exceptions import ContractViolation, DomainError
from .io import write_csv_with_header

logger = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]

STATIONARITY_TOLERANCE = 1e-12
ENVELOPE_GRID_POINTS = 100_000


@dataclass(frozen=True, eq=False)
class MarkovSource:
    """
    Order-l chain: kernel[c, y] = P(next = y | last l symbols encode to c)

    Contexts are encoded most-recent-symbol-least-significant, like count matrix columns.
    """

    kernel: FloatArray
    order: int
    alphabet: Alphabet
    initial: FloatArray | None = None
    seed: int = 0
    flip_probability: float | None = None

    def __post_init__(self) -> None:
        if self.order < 1:
            raise DomainError(f"source order must be at least 1, got {self.order}")
        kernel = np.array(self.kernel, dtype=np.float64)
        expected = (self.alphabet.contexts(self.order), self.alphabet.size)
        if kernel.shape != expected:
            raise ContractViolation(f"kernel shape {kernel.shape} != {expected}")
        if np.any(kernel < 0) or np.abs(kernel.sum(axis=1) - 1.0).max() > 1e-12:
            raise ContractViolation("kernel rows must be probability vectors")
        kernel.setflags(write=False)
        object.__setattr__(self, "kernel", kernel)

        initial = (
            _stationary(self.context_transitions())
            if self.initial is None
            else np.array(self.initial, dtype=np.float64)
        )
        defect = np.abs(initial @ self.context_transitions() - initial).max()
        total_gap = abs(initial.sum() - 1.0)
        if defect > STATIONARITY_TOLERANCE or total_gap > STATIONARITY_TOLERANCE:
            raise ContractViolation(f"initial law is not stationary (defect {defect:.2e})")
        initial.setflags(write=False)
        object.__setattr__(self, "initial", initial)

    @classmethod
    def binary_symmetric(cls, q: float, seed: int = 0) -> "MarkovSource":
        """First-order binary chain that flips with probability q; uniform start"""
        if not 0.0 <= q <= 1.0:
            raise DomainError(f"flip probability must lie in [0, 1], got {q}")
        kernel = np.array([[1 - q, q], [q, 1 - q]])
        return cls(kernel, 1, Alphabet(2), np.array([0.5, 0.5]), seed, flip_probability=q)

    def context_transitions(self) -> FloatArray:
        """Transition matrix of the chain lifted to l-symbol contexts"""
        a = self.alphabet.size
        contexts = self.alphabet.contexts(self.order)
        lifted = np.zeros((contexts, contexts))
        for y in range(a):
            nxt = (np.arange(contexts) * a + y) % contexts
            lifted[np.arange(contexts), nxt] += self.kernel[:, y]
        return lifted

    def block_distribution(self, k1: int) -> BlockDistribution:
        """Exact stationary law of k1 consecutive symbols"""
        if k1 < 1:
            raise DomainError(f"block length must be at least 1, got {k1}")
        assert self.initial is not None
        a = self.alphabet.size
        if k1 <= self.order:
            reduced = np.bincount(
                np.arange(self.initial.size) % a**k1, weights=self.initial, minlength=a**k1
            )
            return BlockDistribution(reduced, k1, self.alphabet)

        probabilities = self.initial
        contexts = self.alphabet.contexts(self.order)
        for _ in range(k1 - self.order):
            tails = np.arange(probabilities.size) % contexts
            probabilities = (probabilities[:, None] * self.kernel[tails]).reshape(-1)
        return BlockDistribution(probabilities / probabilities.sum(), k1, self.alphabet)


def _stationary(transitions: FloatArray) -> FloatArray:
    """Left eigenvector for eigenvalue 1, polished by one least-squares solve"""
    values, vectors = np.linalg.eig(transitions.T)
    pick = int(np.argmin(np.abs(values - 1.0)))
    pi = np.abs(np.real(vectors[:, pick]))
    pi /= pi.sum()
    size = transitions.shape[0]
    system = np.vstack([transitions.T - np.eye(size), np.ones((1, size))])
    rhs = np.concatenate([np.zeros(size), [1.0]])
    polished, *_ = np.linalg.lstsq(system, rhs, rcond=None)
    if np.all(polished >= -STATIONARITY_TOLERANCE):
        pi = np.clip(polished, 0.0, None)
        pi /= pi.sum()
    return pi


def generate(source: MarkovSource, n: int, seed: int | None = None) -> Sequence:
    """Stationary sample path of length n; the seed defaults to the source's own"""
    if n < 1:
        raise DomainError(f"sample length must be positive, got {n}")
    rng = np.random.default_rng(source.seed if seed is None else seed)
    assert source.initial is not None

    if source.flip_probability is not None:
        first = rng.choice(2, p=source.initial)
        flips = rng.random(n - 1) < source.flip_probability
        y = np.concatenate([[first], first ^ np.cumsum(flips) % 2]).astype(np.int64)
        return Sequence(y, source.alphabet)

    a = source.alphabet.size
    contexts = source.alphabet.contexts(source.order)
    context = int(rng.choice(contexts, p=source.initial))
    # the first l symbols are the digits of the initial context, oldest first
    head = [(context // a**j) % a for j in range(source.order - 1, -1, -1)]
    cumulative = np.cumsum(source.kernel, axis=1)
    draws = rng.random(max(n - source.order, 0))
    y = np.empty(n, dtype=np.int64)
    y[: min(n, source.order)] = head[:n]
    for i, u in enumerate(draws, start=source.order):
        symbol = min(int(np.searchsorted(cumulative[context], u, side="right")), a - 1)
        y[i] = symbol
        context = (context * a + symbol) % contexts
    return Sequence(y, source.alphabet)


def binary_entropy(p: npt.ArrayLike) -> FloatArray:
    """h(p) in bits, elementwise"""
    values = np.asarray(p, dtype=np.float64)
    return np.asarray((entr(values) + entr(1.0 - values)) / math.log(2))


def critical_distortion(q: float) -> float:
    """Largest D for which R(D) = h(q) - h(D) holds exactly for the binary symmetric chain"""
    ratio = q / (1.0 - q)
    return (1.0 - math.sqrt(max(1.0 - ratio * ratio, 0.0))) / 2.0


def _check_rd_inputs(q: float, distortion: npt.ArrayLike) -> FloatArray:
    if not 0.0 < q <= 0.5:
        raise DomainError(f"q must lie in (0, 1/2], got {q}")
    values = np.asarray(distortion, dtype=np.float64)
    if np.any(values < 0.0) or np.any(values > 0.5):
        raise DomainError("distortion must lie in [0, 1/2]")
    return values


def binary_markov_rd(q: float, distortion: float) -> float:
    """h(q) - h(D) clamped at 0: exact up to the critical distortion, a lower bound beyond"""
    d = _check_rd_inputs(q, distortion)
    return float(max(binary_entropy(q) - binary_entropy(d), 0.0))


class RDPoint(BaseModel):
    distortion: float
    rate: float
    exact: bool = Field(description="False past the critical distortion (rate is a bound)")


class RDCurve(BaseModel):
    """Sampled reference curve of the binary symmetric Markov source under Hamming loss"""

    q: float
    critical: float
    points: List[RDPoint]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([p.model_dump() for p in self.points])

    def to_csv(self, path: Path) -> None:
        write_csv_with_header(
            self.to_frame(),
            path,
            {"kind": "rd_curve", "q": self.q, "critical_distortion": f"{self.critical:.6f}"},
        )


def rd_curve(q: float, num: int = 101, max_distortion: float = 0.5) -> RDCurve:
    grid = np.linspace(0.0, max_distortion, num)
    _check_rd_inputs(q, grid)
    rates = np.maximum(binary_entropy(q) - binary_entropy(grid), 0.0)
    critical = critical_distortion(q)
    points = [
        RDPoint(distortion=float(d), rate=float(r), exact=bool(d <= critical))
        for d, r in zip(grid, rates)
    ]
    return RDCurve(q=q, critical=critical, points=points)


class EnvelopePoint(BaseModel):
    """Minimizer of R(D) + alpha D over D in [0, q]"""

    distortion: float
    value: float
    stationary_point: float | None = Field(
        default=None, description="Solution of h'(D) = alpha when it lies inside [0, q]"
    )


def lagrangian_envelope(q: float, alpha: float) -> EnvelopePoint:
    """Grid search over [0, q] refined by a bounded scalar minimization around the best cell"""
    if alpha <= 0:
        raise DomainError(f"alpha must be positive, got {alpha}")
    _check_rd_inputs(q, 0.0)
    h_q = float(binary_entropy(q))

    def objective(d: float) -> float:
        return h_q - float(binary_entropy(d)) + alpha * d

    grid = np.linspace(0.0, q, ENVELOPE_GRID_POINTS)
    values = h_q - binary_entropy(grid) + alpha * grid
    best = int(np.argmin(values))
    best_d, best_value = float(grid[best]), float(values[best])

    low, high = grid[max(best - 1, 0)], grid[min(best + 1, grid.size - 1)]
    if high > low:
        refined = minimize_scalar(objective, bounds=(low, high), method="bounded")
        if refined.success and refined.fun < best_value:
            best_d, best_value = float(refined.x), float(refined.fun)

    # h'(D) = log2((1-D)/D) = alpha
    stationary = 1.0 / (1.0 + 2.0**alpha)
    return EnvelopePoint(
        distortion=best_d,
        value=best_value,
        stationary_point=stationary if stationary <= q else None,
    )
