"""Viterbi search over the trellis of (k+1)-symbol states, plus the exhaustive oracle.

State s_i = y_{i-k}^i is encoded like a (k+1)-block (newest symbol least significant),
so g(s, beta) = (s * |A| + beta) mod |A|^{k+1} and the |A| predecessors of s differ only
in their most significant digit.
"""

import logging
import time
from enum import Enum
from typing import Any, Dict, List

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict, Field

from . import distortion
from .coefficients import (
    CoefficientMatrix,
    LinearizedCost,
    default_lambda_max,
    gradient_coefficients,
    linearized_cost,
    shortcut_coefficients,
    true_cost,
)
from .count_model import (
    Alphabet,
    Sequence,
    batch_conditional_entropy,
    block_indices,
    count_matrix,
)
from .exceptions import BudgetExceededError, ContractViolation, InputTooShortError

logger = logging.getLogger(__name__)

IntArray = npt.NDArray[np.int64]
FloatArray = npt.NDArray[np.float64]

DEFAULT_MAX_STATES = 1 << 20
DEFAULT_EXHAUSTIVE_BUDGET = 1 << 20
EXHAUSTIVE_CHUNK = 1 << 14


class Objective(str, Enum):
    """Cost minimized by the exhaustive oracle"""

    P1 = "p1"  # H_k(y) + alpha d_n, cyclic counts
    P2 = "p2"  # cyclic linearized cost
    TRELLIS = "trellis"  # the non-cyclic path cost minimized by viterbi_encode


class EncodeResult(BaseModel):
    """Reconstruction chosen by an encoder and what it costs"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    reconstruction: Sequence
    alpha: float
    k: int
    trellis_cost: float | None = Field(
        default=None, description="Path cost divided by n (first k lambda terms omitted)"
    )
    linearized: LinearizedCost | None = None
    true: LinearizedCost
    edge_relaxations: int = 0
    wall_clock: float = 0.0
    true_cost_trace: List[float] = Field(default_factory=list)

    @property
    def n(self) -> int:
        return self.reconstruction.n

    def csv_row(self) -> Dict[str, Any]:
        """n, k, alpha, distortion, H_k, linearized cost, wall-clock"""
        return {
            "n": self.n,
            "k": self.k,
            "alpha": self.alpha,
            "distortion": self.true.distortion_part,
            "entropy": self.true.entropy_part,
            "linearized_cost": self.linearized.total if self.linearized else float("nan"),
            "true_cost": self.true.total,
            "wall_clock": self.wall_clock,
        }


def check_state_budget(
    alphabet_size: int, k: int, max_states: int = DEFAULT_MAX_STATES
) -> int:
    """Number of trellis states, |A|^(k+1), or BudgetExceededError past max_states"""
    num_states = int(alphabet_size ** (k + 1))
    if num_states > max_states:
        raise BudgetExceededError(
            f"trellis with |A|={alphabet_size}, k={k} has {num_states} states "
            f"(limit {max_states})"
        )
    return num_states


class Trellis:
    """State space X^{k+1} with its transition structure"""

    def __init__(self, alphabet_size: int, k: int, max_states: int = DEFAULT_MAX_STATES):
        """
        Args:
            alphabet_size: Reconstruction alphabet size |A|
            k: Context order
            max_states: Refuse trellises with more states than this
        """
        self.alphabet_size = alphabet_size
        self.k = k
        self.num_states = check_state_budget(alphabet_size, k, max_states)
        states = np.arange(self.num_states, dtype=np.int64)
        self.symbol = states % alphabet_size
        high = alphabet_size**k
        # predecessors of s ordered by increasing state index
        shifted = (states // alphabet_size)[:, None]
        self.predecessors = shifted + high * np.arange(alphabet_size)

    def successor(self, state: int, symbol: int) -> int:
        return (state * self.alphabet_size + symbol) % self.num_states

    def digits(self, state: int) -> List[int]:
        """Symbols y_{i-k}..y_i carried by a state, oldest first"""
        a = self.alphabet_size
        return [(state // a**j) % a for j in range(self.k, -1, -1)]


def _validated_distortion(x: Sequence, lam: CoefficientMatrix, d: npt.ArrayLike) -> FloatArray:
    return distortion.validate(d, x.alphabet.size, lam.alphabet.size)


def viterbi_encode(
    x: Sequence,
    lam: CoefficientMatrix,
    alpha: float,
    d: npt.ArrayLike,
    k: int | None = None,
    max_states: int = DEFAULT_MAX_STATES,
) -> EncodeResult:
    """
    Minimize the linearized cost by dynamic programming over the trellis

    Args:
        x: Source sequence
        lam: Coefficients; their order fixes the context order
        alpha: Slope multiplying the distortion
        d: Single-letter distortion matrix, shape (|X|, |X_hat|)
        k: Context order, checked against lam.order when given
        max_states: Trellis size budget

    Returns:
        EncodeResult whose trellis_cost is the minimum path cost over n
    """
    k = lam.order if k is None else k
    if k != lam.order:
        raise ContractViolation(f"order {k} does not match coefficient order {lam.order}")
    n = x.n
    if n < k + 1:
        raise InputTooShortError(f"sequence of length {n} is shorter than k+1={k + 1}")
    dist = _validated_distortion(x, lam, d)

    started = time.perf_counter()
    trellis = Trellis(lam.alphabet.size, k, max_states)
    a = trellis.alphabet_size
    rows = np.arange(trellis.num_states)
    lam_by_state = lam.blocks()
    weight_by_source = lam_by_state[None, :] + alpha * dist[:, trellis.symbol]
    xs = x.symbols

    # C(s, k+1): one lambda for the whole first block plus the distortion of its k+1 symbols
    cost = lam_by_state.copy()
    for j in range(k + 1):
        cost += alpha * dist[xs[k - j], (rows // a**j) % a]

    stages = n - k - 1
    backpointers = np.empty((stages, trellis.num_states), dtype=np.int64)
    for stage in range(stages):
        candidates = cost[trellis.predecessors]
        choice = np.argmin(candidates, axis=1)
        backpointers[stage] = trellis.predecessors[rows, choice]
        cost = candidates[rows, choice] + weight_by_source[xs[k + 1 + stage]]

    best_state = int(np.argmin(cost))
    path_cost = float(cost[best_state])

    y = np.empty(n, dtype=np.int64)
    state = best_state
    for stage in range(stages - 1, -1, -1):
        y[k + 1 + stage] = state % a
        state = int(backpointers[stage, state])
    y[: k + 1] = trellis.digits(state)
    elapsed = time.perf_counter() - started

    reconstruction = Sequence(y, lam.alphabet)
    relaxations = stages * trellis.num_states * a
    logger.debug(
        f"viterbi n={n} k={k} alpha={alpha}: {trellis.num_states} states, "
        f"{relaxations} relaxations in {elapsed:.3f}s"
    )
    return EncodeResult(
        reconstruction=reconstruction,
        alpha=alpha,
        k=k,
        trellis_cost=path_cost / n,
        linearized=linearized_cost(x, reconstruction, lam, alpha, dist),
        true=true_cost(x, reconstruction, alpha, k, dist),
        edge_relaxations=relaxations,
        wall_clock=elapsed,
    )


def trellis_path_cost(
    x: Sequence, y: Sequence, lam: CoefficientMatrix, alpha: float, d: npt.ArrayLike
) -> float:
    """Non-cyclic path cost of y over n: sum_{i>k} lambda(s_i) + alpha sum_i d(x_i, y_i)"""
    dist = _validated_distortion(x, lam, d)
    k = lam.order
    blocks = block_indices(y.symbols, k, y.alphabet.size)[k:]
    total = lam.blocks()[blocks].sum() + alpha * dist[x.symbols, y.symbols].sum()
    return float(total / x.n)


def _candidate_block(start: int, stop: int, n: int, alphabet_size: int) -> IntArray:
    """Candidates start..stop-1 in lexicographic order, first position most significant"""
    index = np.arange(start, stop, dtype=np.int64)[:, None]
    powers = alphabet_size ** np.arange(n - 1, -1, -1, dtype=np.int64)
    return (index // powers) % alphabet_size


def exhaustive_encode(
    x: Sequence,
    objective: Objective,
    alpha: float,
    d: npt.ArrayLike,
    k: int,
    lam: CoefficientMatrix | None = None,
    reconstruction_size: int | None = None,
    budget: int = DEFAULT_EXHAUSTIVE_BUDGET,
) -> EncodeResult:
    """
    Global minimizer by enumeration of every candidate y^n

    Ties go to the lexicographically smallest candidate.
    """
    objective = Objective(objective)
    if objective is not Objective.P1:
        if lam is None:
            raise ContractViolation(f"objective {objective.value} needs coefficients")
        if lam.order != k:
            raise ContractViolation(f"order {k} does not match coefficient order {lam.order}")
    if lam is not None:
        recon_alphabet = lam.alphabet
    else:
        recon_alphabet = Alphabet(reconstruction_size or x.alphabet.size)
    a = recon_alphabet.size
    n = x.n
    total = a**n
    if total > budget:
        raise BudgetExceededError(f"{total} candidates exceed the exhaustive budget {budget}")
    dist = distortion.validate(d, x.alphabet.size, a)

    started = time.perf_counter()
    best_cost = np.inf
    best_index = 0
    lam_by_block = lam.blocks() if lam is not None else None
    for start in range(0, total, EXHAUSTIVE_CHUNK):
        stop = min(start + EXHAUSTIVE_CHUNK, total)
        candidates = _candidate_block(start, stop, n, a)
        blocks = block_indices(candidates, k, a)
        distortion_sum = dist[x.symbols[None, :], candidates].sum(axis=1)
        if objective is Objective.P1:
            costs = batch_conditional_entropy(blocks, k, a) + alpha * distortion_sum / n
        elif objective is Objective.P2:
            assert lam_by_block is not None
            costs = lam_by_block[blocks].mean(axis=1) + alpha * distortion_sum / n
        else:
            assert lam_by_block is not None
            costs = (lam_by_block[blocks[:, k:]].sum(axis=1) + alpha * distortion_sum) / n
        local = int(np.argmin(costs))
        if costs[local] < best_cost:
            best_cost = float(costs[local])
            best_index = start + local
    elapsed = time.perf_counter() - started

    y = Sequence(_candidate_block(best_index, best_index + 1, n, a)[0], recon_alphabet)
    return EncodeResult(
        reconstruction=y,
        alpha=alpha,
        k=k,
        trellis_cost=trellis_path_cost(x, y, lam, alpha, dist) if lam is not None else None,
        linearized=linearized_cost(x, y, lam, alpha, dist) if lam is not None else None,
        true=true_cost(x, y, alpha, k, dist),
        wall_clock=elapsed,
    )


def encode_iterative(
    x: Sequence,
    alpha: float,
    k: int,
    d: npt.ArrayLike,
    max_rounds: int = 5,
    lambda_max: float | None = None,
    max_states: int = DEFAULT_MAX_STATES,
) -> EncodeResult:
    """
    Refine the coefficients at the previous reconstruction until the true cost stops falling

    Round 1 expands at m(x^n); round t+1 expands at m(y_t). The best round is returned.
    """
    if max_rounds < 1:
        raise ContractViolation(f"max_rounds must be at least 1, got {max_rounds}")
    cap = default_lambda_max(x.n, x.alphabet.size) if lambda_max is None else lambda_max

    lam = shortcut_coefficients(x, k, cap)
    best: EncodeResult | None = None
    trace: List[float] = []
    elapsed = 0.0
    for round_number in range(1, max_rounds + 1):
        result = viterbi_encode(x, lam, alpha, d, k, max_states)
        elapsed += result.wall_clock
        trace.append(result.true.total)
        logger.debug(f"round {round_number}: true cost {result.true.total:.6f}")
        if best is not None and result.true.total >= best.true.total:
            break
        best = result
        lam = gradient_coefficients(count_matrix(result.reconstruction, k), cap)

    assert best is not None
    return best.model_copy(update={"true_cost_trace": trace, "wall_clock": elapsed})
