"""Coefficient-selection program over conditional kernels q(y-block | x-block).

    minimize  H(m) + alpha * sum p(xb) q(yb | xb) d_k1(xb, yb)
    s.t.      m = induced y-block distribution of p and q,
              q row-stochastic, m stationary

H is concave, so the program is solved by iterated linearization: replace H by its
tangent at the current m, solve the resulting LP in q, move, repeat. The tangent
majorizes H, so accepted steps never increase the objective.
"""

import json
import logging
from enum import Enum
from pathlib import Path
from typing import List, Tuple

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict, Field

from . import distortion
from .coefficients import CoefficientMatrix, default_lambda_max, gradient_coefficients
from .count_model import (
    Alphabet,
    BlockDistribution,
    CountMatrix,
    Sequence,
    conditional_entropy,
    empirical_source_dist,
    stationarity_defect,
)
from .exceptions import BudgetExceededError, ContractViolation, InfeasibleProgramError
from .simplex import DenseSimplex

logger = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]

DEFAULT_MAX_VARIABLES = 1 << 20
FALLBACK_LAMBDA_MAX = 32.0


class Stationarity(str, Enum):
    MARGINAL = "marginal"  # on the induced y-block distribution
    JOINT = "joint"  # on the joint (x-block, y-block) distribution, per (b, b')


class ProgramInstance(BaseModel):
    """Inputs of the program: source block law, slope and block distortion"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    k1: int
    source: BlockDistribution
    alpha: float
    distortion: FloatArray = Field(description="Single-letter d, shape (|X|, |X_hat|)")
    reconstruction: Alphabet
    n: int | None = Field(default=None, description="Length of the sequence p was counted on")

    @property
    def k(self) -> int:
        return self.k1 - 1

    @property
    def x_blocks(self) -> int:
        return self.source.alphabet.size**self.k1

    @property
    def y_blocks(self) -> int:
        return self.reconstruction.size**self.k1

    def block_distortion(self) -> FloatArray:
        return distortion.block(self.distortion, self.k1)


def build_instance(
    x: Sequence,
    alpha: float,
    k: int,
    d: npt.ArrayLike,
    reconstruction_size: int | None = None,
) -> ProgramInstance:
    """Instance with k1 = k+1 and the cyclic empirical k1-block distribution of x"""
    k1 = k + 1
    if x.n < k1:
        raise ContractViolation(f"sequence of length {x.n} is shorter than k1={k1}")
    recon = Alphabet(reconstruction_size or x.alphabet.size)
    return ProgramInstance(
        k1=k1,
        source=empirical_source_dist(x, k1),
        alpha=alpha,
        distortion=distortion.validate(d, x.alphabet.size, recon.size),
        reconstruction=recon,
        n=x.n,
    )


def instance_from_distribution(
    source: BlockDistribution,
    alpha: float,
    d: npt.ArrayLike,
    reconstruction_size: int | None = None,
) -> ProgramInstance:
    """Instance over an exact block law, e.g. a known Markov chain"""
    recon = Alphabet(reconstruction_size or source.alphabet.size)
    return ProgramInstance(
        k1=source.length,
        source=source,
        alpha=alpha,
        distortion=distortion.validate(d, source.alphabet.size, recon.size),
        reconstruction=recon,
    )


def validate_kernel(
    q: npt.ArrayLike, x_blocks: int, y_blocks: int, tol: float = 1e-9
) -> FloatArray:
    """Check q is a (x_blocks, y_blocks) row-stochastic array"""
    kernel = np.asarray(q, dtype=np.float64)
    if kernel.shape != (x_blocks, y_blocks):
        raise ContractViolation(f"kernel shape {kernel.shape} != ({x_blocks}, {y_blocks})")
    if np.any(kernel < -tol) or np.any(kernel > 1 + tol):
        raise ContractViolation("kernel entries must lie in [0, 1]")
    if np.abs(kernel.sum(axis=1) - 1.0).max() > tol:
        raise ContractViolation("kernel rows must sum to 1")
    return kernel


def induced_blocks(p: BlockDistribution, q: npt.ArrayLike) -> FloatArray:
    """Induced y-block law: sum_xb p(xb) q(yb | xb)"""
    return np.asarray(p.probabilities @ np.asarray(q, dtype=np.float64))


def induced_count(
    p: BlockDistribution, q: npt.ArrayLike, reconstruction: Alphabet
) -> CountMatrix:
    """m[beta, b] = sum p(xb) q([b, beta] | xb), the order k1-1 count matrix"""
    kernel = validate_kernel(q, p.probabilities.size, reconstruction.size**p.length)
    mu = induced_blocks(p, kernel)
    return CountMatrix.from_blocks(mu / mu.sum(), p.length - 1, reconstruction)


def stationarity_residual(
    p: BlockDistribution, q: npt.ArrayLike, reconstruction: Alphabet
) -> float:
    """Largest gap between incoming and outgoing context mass of the induced y-block law"""
    return stationarity_defect(induced_blocks(p, q), p.length, reconstruction.size)


def joint_stationarity_residual(
    p: BlockDistribution, q: npt.ArrayLike, reconstruction: Alphabet
) -> float:
    """Same gap for the joint (x-block, y-block) law, per pair of contexts (b', b)"""
    rows = _joint_stationarity_rows(
        p.probabilities, p.alphabet.size, reconstruction.size, p.length
    )
    return float(np.abs(rows @ np.asarray(q, dtype=np.float64).reshape(-1)).max(initial=0.0))


def _lead_trail(alphabet_size: int, length: int) -> Tuple[FloatArray, FloatArray]:
    """Indicators [first length-1 symbols == b] and [last length-1 symbols == b]"""
    blocks = np.arange(alphabet_size**length)
    contexts = alphabet_size ** (length - 1)
    lead = (blocks[None, :] // alphabet_size == np.arange(contexts)[:, None]).astype(float)
    trail = (blocks[None, :] % contexts == np.arange(contexts)[:, None]).astype(float)
    return lead, trail


def _marginal_stationarity_rows(p: FloatArray, recon_size: int, length: int) -> FloatArray:
    lead, trail = _lead_trail(recon_size, length)
    return np.kron(p[None, :], lead - trail)


def _joint_stationarity_rows(
    p: FloatArray, source_size: int, recon_size: int, length: int
) -> FloatArray:
    lead_x, trail_x = _lead_trail(source_size, length)
    lead_y, trail_y = _lead_trail(recon_size, length)
    rows = np.einsum("ax,by->abxy", trail_x, trail_y)
    rows -= np.einsum("ax,by->abxy", lead_x, lead_y)
    rows *= p[None, None, :, None]
    return rows.reshape(lead_x.shape[0] * lead_y.shape[0], -1)


class ProgramOptions(BaseModel):
    """Solver settings"""

    max_outer: int = Field(default=50, ge=1)
    tolerance: float = Field(default=1e-9, description="Stop below this decrease")
    feasibility_tolerance: float = 1e-6
    max_variables: int = DEFAULT_MAX_VARIABLES
    lambda_max: float | None = None
    starts: List[str] = Field(
        default_factory=lambda: ["identity", "uniform", "random", "constant"]
    )
    seed: int = 0
    stationarity: Stationarity = Stationarity.MARGINAL


class ProgramSolution(BaseModel):
    """Best kernel found, its induced count matrix and the descent trace"""

    k1: int
    reconstruction_size: int
    block_probabilities: List[float]
    kernel: List[List[float]]
    objective: float
    entropy_part: float
    distortion_part: float
    trace: List[float]
    converged: bool
    residual: float
    joint_residual: float
    start: str

    @property
    def counts(self) -> CountMatrix:
        """m-tilde, the order k1-1 count matrix induced by the kernel"""
        alphabet = Alphabet(self.reconstruction_size)
        blocks = np.asarray(self.block_probabilities)
        return CountMatrix.from_blocks(blocks, self.k1 - 1, alphabet)

    def kernel_array(self) -> FloatArray:
        return np.asarray(self.kernel, dtype=np.float64)

    def write_json(self, path: Path) -> None:
        Path(path).write_text(self.model_dump_json(indent=2))

    @classmethod
    def read_json(cls, path: Path) -> "ProgramSolution":
        return cls.model_validate(json.loads(Path(path).read_text()))


def _initial_kernels(
    inst: ProgramInstance, options: ProgramOptions
) -> List[Tuple[str, FloatArray]]:
    nx, ny = inst.x_blocks, inst.y_blocks
    src, rec = inst.source.alphabet.size, inst.reconstruction.size
    kernels: List[Tuple[str, FloatArray]] = []
    for name in options.starts:
        if name == "identity":
            # coordinate-wise x -> min(x, |X_hat|-1), the identity when the alphabets agree
            q = np.zeros((nx, ny))
            for xb in range(nx):
                yb = 0
                for j in range(inst.k1 - 1, -1, -1):
                    yb = yb * rec + min((xb // src**j) % src, rec - 1)
                q[xb, yb] = 1.0
        elif name == "uniform":
            q = np.full((nx, ny), 1.0 / ny)
        elif name == "random":
            rng = np.random.default_rng(options.seed)
            q = rng.dirichlet(np.ones(ny), size=nx)
        elif name == "constant":
            # every block to the all-zero block: zero entropy, stationary for any p
            q = np.zeros((nx, ny))
            q[:, 0] = 1.0
        else:
            raise ContractViolation(f"unknown start kernel {name!r}")
        kernels.append((name, q))
    return kernels


class _Evaluator:
    """Objective pieces shared by every outer iteration of one instance"""

    def __init__(self, inst: ProgramInstance, options: ProgramOptions):
        self.inst = inst
        self.p = inst.source.probabilities
        self.block_d = inst.block_distortion()
        self.options = options
        nx, ny = inst.x_blocks, inst.y_blocks
        row_sums = np.kron(np.eye(nx), np.ones((1, ny)))
        if options.stationarity is Stationarity.JOINT:
            stat = _joint_stationarity_rows(
                self.p, inst.source.alphabet.size, inst.reconstruction.size, inst.k1
            )
        else:
            stat = _marginal_stationarity_rows(self.p, inst.reconstruction.size, inst.k1)
        self.a_eq = np.vstack([row_sums, stat])
        self.b_eq = np.concatenate([np.ones(nx), np.zeros(stat.shape[0])])
        self.solver = DenseSimplex()

    def counts(self, q: FloatArray) -> CountMatrix:
        return induced_count(self.inst.source, q, self.inst.reconstruction)

    def distortion_part(self, q: FloatArray) -> float:
        return float((self.p[:, None] * q * self.block_d).sum())

    def objective(self, q: FloatArray) -> Tuple[float, float, float]:
        h = conditional_entropy(self.counts(q))
        dist = self.distortion_part(q)
        return h + self.inst.alpha * dist, h, dist

    def residual(self, q: FloatArray) -> float:
        if self.options.stationarity is Stationarity.JOINT:
            return joint_stationarity_residual(self.inst.source, q, self.inst.reconstruction)
        return stationarity_residual(self.inst.source, q, self.inst.reconstruction)

    def tangent_step(self, q: FloatArray, lambda_max: float) -> FloatArray:
        """Minimize the tangent majorant of the objective at q over the feasible kernels"""
        lam: CoefficientMatrix = gradient_coefficients(self.counts(q), lambda_max)
        cost = self.p[:, None] * (lam.blocks()[None, :] + self.inst.alpha * self.block_d)
        result = self.solver.solve(cost.reshape(-1), self.a_eq, self.b_eq)
        q_next = np.clip(result.x.reshape(q.shape), 0.0, 1.0)
        return q_next / q_next.sum(axis=1, keepdims=True)


def solve_program(
    inst: ProgramInstance, options: ProgramOptions | None = None
) -> ProgramSolution:
    """
    Minimize H(m) + alpha * E d over feasible kernels by safeguarded tangent iterations

    Each start kernel seeds its own descent; the best feasible end point is returned.
    """
    options = options or ProgramOptions()
    variables = inst.x_blocks * inst.y_blocks
    if variables > options.max_variables:
        raise BudgetExceededError(
            f"program has {variables} variables (limit {options.max_variables}); lower k1"
        )
    if options.lambda_max is not None:
        cap = options.lambda_max
    elif inst.n is not None:
        cap = default_lambda_max(inst.n, inst.reconstruction.size)
    else:
        cap = FALLBACK_LAMBDA_MAX
    evaluator = _Evaluator(inst, options)

    best: ProgramSolution | None = None
    for name, q0 in _initial_kernels(inst, options):
        trace: List[float] = []
        current: FloatArray | None = None
        value = np.inf
        if evaluator.residual(q0) <= options.feasibility_tolerance:
            current = q0
            value = evaluator.objective(q0)[0]
            trace.append(value)

        tangent_point = q0
        converged = False
        for _ in range(options.max_outer):
            try:
                candidate = evaluator.tangent_step(tangent_point, cap)
            except InfeasibleProgramError:
                logger.error(f"tangent LP infeasible from start {name!r}", exc_info=True)
                raise
            residual = evaluator.residual(candidate)
            if residual > options.feasibility_tolerance:
                logger.warning(
                    f"start {name!r}: tangent step left the stationarity set "
                    f"(residual {residual:.3g}); keeping the previous iterate"
                )
                break
            candidate_value = evaluator.objective(candidate)[0]
            if current is not None and candidate_value >= value:
                converged = True
                break
            decrease = value - candidate_value
            current, value, tangent_point = candidate, candidate_value, candidate
            trace.append(value)
            if decrease < options.tolerance:
                converged = True
                break

        if current is None:
            continue
        total, h, dist = evaluator.objective(current)
        logger.debug(
            f"program start={name}: objective {total:.6f} after {len(trace)} iterates "
            f"({'converged' if converged else 'iteration cap'})"
        )
        if best is None or total < best.objective:
            best = ProgramSolution(
                k1=inst.k1,
                reconstruction_size=inst.reconstruction.size,
                block_probabilities=induced_blocks(inst.source, current).tolist(),
                kernel=current.tolist(),
                objective=total,
                entropy_part=h,
                distortion_part=dist,
                trace=trace,
                converged=converged,
                residual=stationarity_residual(inst.source, current, inst.reconstruction),
                joint_residual=joint_stationarity_residual(
                    inst.source, current, inst.reconstruction
                ),
                start=name,
            )

    if best is None:
        raise InfeasibleProgramError("no start produced a feasible kernel")
    return best


def coefficients_from_program(sol: ProgramSolution, lambda_max: float) -> CoefficientMatrix:
    """Gradient coefficients at the program's count matrix"""
    return gradient_coefficients(sol.counts, lambda_max)
