"""Linearization coefficients lambda = dH/dm at an expansion point, and linearized costs"""

import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import numpy.typing as npt
import pandas as pd
from pydantic import BaseModel, ConfigDict, computed_field

from . import distortion
from .count_model import (
    Alphabet,
    CountMatrix,
    Sequence,
    block_indices,
    count_matrix,
    empirical_conditional_entropy,
)
from .exceptions import ConfigError, ContractViolation, DomainError
from .io import read_csv_with_header, write_csv_with_header

logger = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]


def default_lambda_max(n: int, alphabet_size: int) -> float:
    """Escape cost for a never-seen (context, symbol) pair: log2(n) + log2|A|"""
    return math.log2(n) + math.log2(alphabet_size)


@dataclass(frozen=True, eq=False)
class CoefficientMatrix:
    """lambda[beta, b] in bits, same indexing as CountMatrix"""

    values: FloatArray
    order: int
    alphabet: Alphabet
    lambda_max: float

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64)
        expected = (self.alphabet.size, self.alphabet.contexts(self.order))
        if values.shape != expected:
            raise ContractViolation(f"coefficient shape {values.shape} != {expected}")
        if self.lambda_max <= 0:
            raise ConfigError(f"lambda_max must be positive, got {self.lambda_max}")
        if np.any(values < 0) or np.any(values > self.lambda_max):
            raise DomainError(f"coefficients must lie in [0, {self.lambda_max}]")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def uniform(cls, value: float, order: int, alphabet: Alphabet) -> "CoefficientMatrix":
        shape = (alphabet.size, alphabet.contexts(order))
        return cls(np.full(shape, value), order, alphabet, max(value, 1.0))

    def blocks(self) -> FloatArray:
        """lambda per (k+1)-block index context * |A| + symbol"""
        return np.ascontiguousarray(self.values.T).reshape(-1)

    def to_csv(self, path: Path) -> None:
        frame = pd.DataFrame(self.values, columns=range(self.values.shape[1]))
        frame.index.name = "beta"
        write_csv_with_header(
            frame,
            path,
            {
                "kind": "coefficients",
                "order": self.order,
                "alphabet": self.alphabet.size,
                "lambda_max": repr(self.lambda_max),
            },
            index=True,
        )

    @classmethod
    def read_csv(cls, path: Path) -> "CoefficientMatrix":
        frame, meta = read_csv_with_header(path, index_col="beta")
        return cls(
            frame.to_numpy(dtype=np.float64),
            int(meta["order"]),
            Alphabet(int(meta["alphabet"])),
            float(meta["lambda_max"]),
        )


def gradient_coefficients(m: CountMatrix, lambda_max: float) -> CoefficientMatrix:
    """
    Gradient of H_k at m: lambda[beta, b] = log2(sum_beta' m[beta', b] / m[beta, b])

    Zero entries, including whole never-visited columns, get lambda_max.
    """
    if lambda_max <= 0:
        raise ConfigError(f"lambda_max must be positive, got {lambda_max}")
    m.require_normalized()

    values = m.values
    sums = np.broadcast_to(m.column_sums(), values.shape)
    positive = values > 0
    lam = np.full(values.shape, lambda_max, dtype=np.float64)
    lam[positive] = np.log2(sums[positive] / values[positive])
    np.clip(lam, 0.0, lambda_max, out=lam)
    return CoefficientMatrix(lam, m.order, m.alphabet, lambda_max)


def shortcut_coefficients(
    x: Sequence, k: int, lambda_max: float | None = None
) -> CoefficientMatrix:
    """Coefficients expanded at the source's own count matrix m(x^n)"""
    cap = default_lambda_max(x.n, x.alphabet.size) if lambda_max is None else lambda_max
    return gradient_coefficients(count_matrix(x, k), cap)


class LinearizedCost(BaseModel):
    """Per-symbol cost split into its rate and distortion parts"""

    model_config = ConfigDict(frozen=True)

    entropy_part: float
    distortion_part: float
    alpha: float

    @computed_field  # type: ignore[prop-decorator]
    @property
    def total(self) -> float:
        return self.entropy_part + self.alpha * self.distortion_part


def _check_pair(x: Sequence, y: Sequence) -> None:
    if x.n != y.n:
        raise ContractViolation(f"length mismatch: x has {x.n} symbols, y has {y.n}")


def linear_entropy_term(y: Sequence, lam: CoefficientMatrix) -> float:
    """sum_{beta, b} lambda[beta, b] * m[beta, b](y^n)"""
    if y.alphabet != lam.alphabet:
        raise ContractViolation("reconstruction alphabet does not match the coefficients")
    return float((lam.values * count_matrix(y, lam.order).values).sum())


def symbolwise_entropy_term(y: Sequence, lam: CoefficientMatrix) -> float:
    """(1/n) sum_i lambda[y_i, y_{i-k}^{i-1}], the same quantity read per position"""
    if y.alphabet != lam.alphabet:
        raise ContractViolation("reconstruction alphabet does not match the coefficients")
    blocks = block_indices(y.symbols, lam.order, y.alphabet.size)
    return float(lam.blocks()[blocks].mean())


def linearized_cost(
    x: Sequence, y: Sequence, lam: CoefficientMatrix, alpha: float, d: npt.ArrayLike
) -> LinearizedCost:
    """Cyclic (P2) objective of y for source x"""
    _check_pair(x, y)
    matrix_form = linear_entropy_term(y, lam)
    per_symbol = symbolwise_entropy_term(y, lam)
    if not math.isclose(matrix_form, per_symbol, rel_tol=1e-9, abs_tol=1e-9):
        raise ContractViolation(
            f"matrix and symbolwise linear terms disagree: {matrix_form} vs {per_symbol}"
        )
    return LinearizedCost(
        entropy_part=matrix_form,
        distortion_part=distortion.per_symbol(x, y, d),
        alpha=alpha,
    )


def true_cost(
    x: Sequence, y: Sequence, alpha: float, k: int, d: npt.ArrayLike
) -> LinearizedCost:
    """(P1) objective: H_k(y^n) + alpha * d_n(x^n, y^n)"""
    _check_pair(x, y)
    return LinearizedCost(
        entropy_part=empirical_conditional_entropy(y, k),
        distortion_part=distortion.per_symbol(x, y, d),
        alpha=alpha,
    )
